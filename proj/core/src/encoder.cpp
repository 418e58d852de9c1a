#include "dysent/encoder.hpp"

#include <cmath>

#include "dysent/errors.hpp"
#include "dysent/rng.hpp"

namespace dysent {

namespace {

ad::Mat glorot(int rows, int cols, Rng& rng) {
  ad::Mat m(rows, cols);
  const double bound = std::sqrt(6.0 / (rows + cols));
  for (auto& x : m.d) x = (uniform_real(rng) * 2.0 - 1.0) * bound;
  return m;
}

}  // namespace

GcnGruEncoder GcnGruEncoder::init(const EncoderConfig& cfg, std::uint64_t seed) {
  Rng rng = make_rng(seed, 7);
  GcnGruEncoder e;
  e.cfg = cfg;
  const int h = cfg.hidden;
  e.w1 = glorot(cfg.node_count, h, rng);
  e.w2 = glorot(h, h, rng);
  e.wz = glorot(h, h, rng);
  e.uz = glorot(h, h, rng);
  e.bz = ad::Mat::zeros(1, h);
  e.wr = glorot(h, h, rng);
  e.ur = glorot(h, h, rng);
  e.br = ad::Mat::zeros(1, h);
  e.wh = glorot(h, h, rng);
  e.uh = glorot(h, h, rng);
  e.bh = ad::Mat::zeros(1, h);
  e.w_out = glorot(h, cfg.out_dim, rng);
  return e;
}

std::vector<std::pair<std::string, ad::Mat*>> GcnGruEncoder::tensors() {
  return {{"w1", &w1}, {"w2", &w2}, {"wz", &wz}, {"uz", &uz}, {"bz", &bz},
          {"wr", &wr}, {"ur", &ur}, {"br", &br}, {"wh", &wh}, {"uh", &uh},
          {"bh", &bh}, {"w_out", &w_out}};
}

std::vector<std::pair<std::string, const ad::Mat*>> GcnGruEncoder::tensors() const {
  return {{"w1", &w1}, {"w2", &w2}, {"wz", &wz}, {"uz", &uz}, {"bz", &bz},
          {"wr", &wr}, {"ur", &ur}, {"br", &br}, {"wh", &wh}, {"uh", &uh},
          {"bh", &bh}, {"w_out", &w_out}};
}

std::vector<ad::Var> EncoderVars::all() const {
  return {w1, w2, wz, uz, bz, wr, ur, br, wh, uh, bh, w_out};
}

EncoderVars register_encoder(ad::Tape& tape, const GcnGruEncoder& enc, bool tracked) {
  auto reg = [&](const ad::Mat& m) { return tracked ? tape.leaf(m) : tape.constant(m); };
  EncoderVars v;
  v.w1 = reg(enc.w1);
  v.w2 = reg(enc.w2);
  v.wz = reg(enc.wz);
  v.uz = reg(enc.uz);
  v.bz = reg(enc.bz);
  v.wr = reg(enc.wr);
  v.ur = reg(enc.ur);
  v.br = reg(enc.br);
  v.wh = reg(enc.wh);
  v.uh = reg(enc.uh);
  v.bh = reg(enc.bh);
  v.w_out = reg(enc.w_out);
  return v;
}

GraphTensors precompute_graph(const DynamicGraph& g) {
  GraphTensors gt;
  gt.node_count = g.node_count;
  gt.norm_adj.reserve(g.T());
  for (const Snapshot& s : g.snapshots) gt.norm_adj.push_back(normalize_adjacency(s));
  return gt;
}

namespace {

struct GruState {
  ad::Var h;      // node_count x hidden
  ad::Var ones;   // node_count x 1, for broadcasting row biases
};

// Two message-passing rounds on one snapshot; identity input features make
// the first round a plain spmm against the embedding table.
ad::Var gcn_forward(ad::Tape& tape, const EncoderVars& v, const Csr* adj) {
  ad::Var z1 = tape.tanh(tape.spmm(adj, v.w1));
  return tape.tanh(tape.spmm(adj, tape.matmul(z1, v.w2)));
}

ad::Var broadcast_bias(ad::Tape& tape, ad::Var ones, ad::Var bias) {
  return tape.matmul(ones, bias);
}

ad::Var gru_step(ad::Tape& tape, const EncoderVars& v, GruState& st, ad::Var x) {
  ad::Var z = tape.sigmoid(tape.add(tape.add(tape.matmul(x, v.wz), tape.matmul(st.h, v.uz)),
                                    broadcast_bias(tape, st.ones, v.bz)));
  ad::Var r = tape.sigmoid(tape.add(tape.add(tape.matmul(x, v.wr), tape.matmul(st.h, v.ur)),
                                    broadcast_bias(tape, st.ones, v.br)));
  ad::Var cand = tape.tanh(tape.add(
      tape.add(tape.matmul(x, v.wh), tape.matmul(tape.mul(r, st.h), v.uh)),
      broadcast_bias(tape, st.ones, v.bh)));
  // h' = (1 - z) * h + z * cand
  st.h = tape.add(tape.sub(st.h, tape.mul(z, st.h)), tape.mul(z, cand));
  return st.h;
}

GruState gru_init(ad::Tape& tape, int node_count, int hidden) {
  GruState st;
  st.h = tape.constant(ad::Mat::zeros(node_count, hidden));
  st.ones = tape.constant(ad::Mat::filled(node_count, 1, 1.0));
  return st;
}

}  // namespace

ad::Var encode_clip(ad::Tape& tape, const EncoderVars& vars, const EncoderConfig& cfg,
                    const GraphTensors& gt, int t0, int len, ad::Var mask) {
  if (t0 < 0 || len < 1 || t0 + len > gt.T())
    throw ShapeError("encode_clip: window [" + std::to_string(t0) + ", " +
                     std::to_string(t0 + len) + ") outside T = " + std::to_string(gt.T()));
  if (mask.valid()) {
    const ad::Mat& mv = tape.value(mask);
    if (mv.rows != 1 || mv.cols != len)
      throw ShapeError("encode_clip: mask must be 1x" + std::to_string(len) + ", got " +
                       std::to_string(mv.rows) + "x" + std::to_string(mv.cols));
  }
  GruState st = gru_init(tape, gt.node_count, cfg.hidden);
  for (int step = 0; step < len; ++step) {
    ad::Var x = gcn_forward(tape, vars, &gt.norm_adj[t0 + step]);
    if (mask.valid()) {
      ad::Var w = tape.slice_cols(mask, step, step + 1);
      x = tape.mul(w, x);
    }
    gru_step(tape, vars, st, x);
  }
  return tape.matmul(st.h, vars.w_out);
}

std::vector<ad::Var> encode_sequence(ad::Tape& tape, const EncoderVars& vars,
                                     const EncoderConfig& cfg, const GraphTensors& gt) {
  GruState st = gru_init(tape, gt.node_count, cfg.hidden);
  std::vector<ad::Var> out;
  out.reserve(gt.T());
  for (int t = 0; t < gt.T(); ++t) {
    ad::Var x = gcn_forward(tape, vars, &gt.norm_adj[t]);
    gru_step(tape, vars, st, x);
    out.push_back(tape.matmul(st.h, vars.w_out));
  }
  return out;
}

ad::Mat time_invariant_final(const GcnGruEncoder& enc, const GraphTensors& gt) {
  ad::Tape tape;
  EncoderVars vars = register_encoder(tape, enc, /*tracked=*/false);
  ad::Var s = encode_clip(tape, vars, enc.cfg, gt, 0, gt.T());
  return tape.value(s);
}

}  // namespace dysent
