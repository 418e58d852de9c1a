#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dysent/graph.hpp"
#include "dysent/tape.hpp"

namespace dysent {

// Structural-temporal backbone: a 2-layer GCN per snapshot feeding a GRU
// over time. Node features are identity, so the first GCN weight doubles
// as a learned embedding table.
struct EncoderConfig {
  int node_count = 0;
  int hidden = 16;   // GCN/GRU width
  int out_dim = 8;   // representation width after the output projection
};

struct GcnGruEncoder {
  EncoderConfig cfg;
  ad::Mat w1;  // node_count x hidden (layer 1 / embedding)
  ad::Mat w2;  // hidden x hidden (layer 2)
  ad::Mat wz, uz, bz;  // update gate
  ad::Mat wr, ur, br;  // reset gate
  ad::Mat wh, uh, bh;  // candidate
  ad::Mat w_out;       // hidden x out_dim

  static GcnGruEncoder init(const EncoderConfig& cfg, std::uint64_t seed);

  // Stable iteration order; used by the optimizer and checkpoints.
  std::vector<std::pair<std::string, ad::Mat*>> tensors();
  std::vector<std::pair<std::string, const ad::Mat*>> tensors() const;
};

// Tape handles for one registration of the encoder parameters.
struct EncoderVars {
  ad::Var w1, w2, wz, uz, bz, wr, ur, br, wh, uh, bh, w_out;
  std::vector<ad::Var> all() const;
};

// `tracked` distinguishes parameters being optimized from frozen ones.
EncoderVars register_encoder(ad::Tape& tape, const GcnGruEncoder& enc, bool tracked = true);

// Normalized adjacencies, computed once per graph.
struct GraphTensors {
  int node_count = 0;
  std::vector<Csr> norm_adj;
  int T() const { return static_cast<int>(norm_adj.size()); }
};
GraphTensors precompute_graph(const DynamicGraph& g);

// Runs the backbone over the window [t0, t0+len) and returns the final
// projected hidden state (node_count x out_dim). `mask`, when valid, is a
// 1 x len row whose entries scale each snapshot's structural signal.
ad::Var encode_clip(ad::Tape& tape, const EncoderVars& vars, const EncoderConfig& cfg,
                    const GraphTensors& gt, int t0, int len, ad::Var mask = {});

// Projected hidden state after every snapshot (T tensors of
// node_count x out_dim).
std::vector<ad::Var> encode_sequence(ad::Tape& tape, const EncoderVars& vars,
                                     const EncoderConfig& cfg, const GraphTensors& gt);

// Full-window unit-mask encoding on a scratch tape.
ad::Mat time_invariant_final(const GcnGruEncoder& enc, const GraphTensors& gt);

}  // namespace dysent
