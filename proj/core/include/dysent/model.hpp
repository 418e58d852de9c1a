#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dysent/config.hpp"
#include "dysent/encoder.hpp"
#include "dysent/graph.hpp"
#include "dysent/sampler.hpp"
#include "dysent/tape.hpp"

namespace dysent {

enum class Pretext { StructureProximity, LinkPrediction };

struct TrainConfig {
  int d = 16;               // total representation width; halves go to each generator
  double tau = 0.1;         // InfoNCE temperature
  double tau_g = 0.01;      // Gumbel-softmax temperature
  double lambda1 = 0.5;     // clip-contrast weight
  double lambda2 = 0.5;     // adversarial value weight
  double lambda3 = 5e-7;    // weight regularizer
  int n = 5;                // negatives per positive
  int n_prime = 64;         // discriminator samples per side per step
  int k_d = 1;              // discriminator inner steps
  Pretext pretext = Pretext::LinkPrediction;
  double learning_rate = 0.01;
  int epochs = 100;
  std::uint64_t seed = 0;
  bool bernoulli_sampling = true;  // false: uniform clip lengths (ablation)
  double alpha_init = 0.5;         // initial alpha = sigmoid(alpha_raw)
  int max_edges_per_snapshot = 0;  // 0 = use every edge in the pretext loss

  void validate() const;
  static TrainConfig from_kv(const KeyValueConfig& kv);
};

// One hidden layer of width d with tanh, sigmoid output in (0,1).
struct Discriminator {
  ad::Mat w1, b1, w2, b2;
  static Discriminator init(int d, std::uint64_t seed);
  std::vector<std::pair<std::string, ad::Mat*>> tensors();
  std::vector<std::pair<std::string, const ad::Mat*>> tensors() const;
};

struct DiscriminatorVars {
  ad::Var w1, b1, w2, b2;
};
DiscriminatorVars register_discriminator(ad::Tape& tape, const Discriminator& d, bool tracked);

// Scores in (0,1) for a batch of concatenated (s, d) rows.
ad::Var discriminator_scores(ad::Tape& tape, const DiscriminatorVars& dv, ad::Var inputs);

// V = mean log D(true) + mean log(1 - D(false)); scores are clamped to
// [1e-7, 1 - 1e-7] before the logs. The discriminator maximizes V
// (Loss(D) = -V); generators receive +lambda2 * V.
ad::Var discriminator_value(ad::Tape& tape, const DiscriminatorVars& dv, ad::Var true_inputs,
                            ad::Var false_inputs);

// ---- Losses ----

// InfoNCE between the two clip encodings of each batch node, negatives
// drawn from other nodes' clip-1 encodings. Standard form: the denominator
// is the positive term plus `negatives[i]` sampled terms, so the loss is
// nonnegative.
ad::Var loss_time_invariant(ad::Tape& tape, ad::Var s1, ad::Var s2, const std::vector<int>& batch,
                            const std::vector<std::vector<int>>& negatives, double tau);

// Literal full-denominator variant: denominator sums similarity to every
// node's clip-1 encoding (the batch is all rows).
ad::Var loss_time_invariant_full(ad::Tape& tape, ad::Var s1, ad::Var s2, double tau);

// Structure-proximity contrast: connected pairs at each snapshot are
// positives, `n` sampled non-neighbors are negatives; per-snapshot means
// are summed over snapshots.
ad::Var loss_structure_proximity(ad::Tape& tape, const std::vector<ad::Var>& reps,
                                 const DynamicGraph& g, double tau, int n, Rng& rng,
                                 int max_edges_per_snapshot = 0);

// Next-snapshot link prediction: binary cross-entropy of sigmoid(dot)
// between reps at t and edges/non-edges at t+1. Requires T >= 2.
ad::Var loss_link_prediction(ad::Tape& tape, const std::vector<ad::Var>& reps,
                             const DynamicGraph& g, Rng& rng, int max_edges_per_snapshot = 0);

// ---- Training ----

struct HistoryRow {
  int iter = 0;
  double l_v = 0, l_i = 0, v = 0, loss_d = 0, alpha = 0, total = 0;
};

void write_history_csv(const std::vector<HistoryRow>& history, std::ostream& os);

struct RepresentationSet {
  ad::Mat S;                // node_count x d/2
  std::vector<ad::Mat> D;   // T tables of node_count x d/2
  ad::Mat combined(int t) const;  // node_count x d, rows (s_v, d_v^t)
};

struct DytedModel {
  TrainConfig cfg;
  GcnGruEncoder g_inv;   // time-invariant generator
  GcnGruEncoder g_var;   // time-varying generator
  Discriminator disc;
  double alpha_raw = 0.0;
  std::vector<HistoryRow> history;
};

// Adversarial training per the alternating schedule: one generator step on
// Loss(G) = L_v + l1*L_i + l2*V + l3*||w||^2, then k_d discriminator steps
// on Loss(D) = -V. Deterministic given cfg.seed.
DytedModel train(const TrainConfig& cfg, const DynamicGraph& g);

RepresentationSet extract_representations(const DytedModel& model, const DynamicGraph& g);

// Same backbone at full width d trained with the pretext loss alone; the
// comparison point for every experiment.
struct BaselineModel {
  TrainConfig cfg;
  GcnGruEncoder enc;
  std::vector<HistoryRow> history;
};
BaselineModel train_baseline(const TrainConfig& cfg, const DynamicGraph& g);
std::vector<ad::Mat> extract_baseline(const BaselineModel& model, const DynamicGraph& g);

// ---- Checkpoints (text dump with a shape manifest) ----

void save_checkpoint(const DytedModel& model, const std::string& path);
DytedModel load_checkpoint(const std::string& path);
void save_baseline_checkpoint(const BaselineModel& model, const std::string& path);
BaselineModel load_baseline_checkpoint(const std::string& path);
bool checkpoint_is_baseline(const std::string& path);

}  // namespace dysent
