#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dysent/graph.hpp"
#include "dysent/model.hpp"
#include "dysent/tensor.hpp"

namespace dysent {

// Which slice of the learned representations an evaluation reads.
enum class Variant { Combine, TimeInvariant, TimeVarying, Baseline, Pooled };
std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct EvalReport {
  std::string task;
  std::string variant;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, double>> metrics;  // name -> value in [0,1]
};

void write_metrics_csv(const std::vector<EvalReport>& reports, std::ostream& os,
                       bool header = true);

// ---- Ranking metrics ----

// Exact ROC-AUC via midranks; ties count one half. Throws ContractError
// when either class is empty.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Average precision with deterministic (score desc, index asc) ordering.
double average_precision(const std::vector<double>& scores, const std::vector<int>& labels);

struct F1Scores {
  double micro = 0.0;
  double macro = 0.0;
  double accuracy = 0.0;
};
F1Scores f1_scores(const std::vector<int>& predicted, const std::vector<int>& actual,
                   int class_count);

// ---- Downstream probes on frozen representations ----

struct LinkEvalResult {
  double auc = 0.0;
  double ap = 0.0;
};

// Hadamard features + logistic regression. `reps` holds one row per node
// (the variant slice at the evaluation snapshot); positives are the held-out
// snapshot's edges, negatives uniformly sampled non-edges of that snapshot.
// `train_fraction` of the pairs trains the classifier; the rest is scored.
LinkEvalResult eval_link_prediction(const ad::Mat& reps, const Snapshot& held_out,
                                    double train_fraction, std::uint64_t seed,
                                    int negatives_per_positive = 1);

struct ClassifyResult {
  F1Scores f1;
};

// Linear (or one-hidden-layer, width > 0) softmax probe with a
// 0.2/0.2/0.6 train/val/test split, early-stopped on validation micro-F1.
// `features` has one row per labeled sample, aligned with `labels`.
ClassifyResult eval_node_classification(const ad::Mat& features, const std::vector<int>& labels,
                                        int class_count, std::uint64_t seed,
                                        int hidden_width = 0, double train_fraction = 0.2,
                                        double val_fraction = 0.2);

// Assembles (sample, feature) pairs for a label table from a
// RepresentationSet slice. Static tables read the evaluation-snapshot
// variant; per-snapshot tables read (node, t) rows.
struct ProbeData {
  ad::Mat features;
  std::vector<int> labels;
  int class_count = 0;
};
ProbeData probe_data(const RepresentationSet& reps, const LabelTable& table, Variant variant);

// ---- Mutual information ----

// Kraskov kNN estimate (k=3 by default) in nats, truncated at 0.
// Deterministic given input ordering. Requires >= k+2 paired samples.
double estimate_mi(const ad::Mat& x, const ad::Mat& y, int k = 3);

// Discrete MI between two label vectors (plug-in estimate), for planted
// ground-truth checks.
double discrete_mi(const std::vector<int>& a, const std::vector<int>& b);

// ---- Sweeps ----

enum class SweepKind { Noise, DataFraction, ClassifierWidth };
SweepKind sweep_kind_from_name(const std::string& name);

struct SweepRow {
  double point = 0.0;
  std::string variant;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
};

// Retrains / re-evaluates per grid point on planted data and reports
// link-prediction AUC per variant. Noise perturbs the graph; data-fraction
// shrinks the downstream training split; classifier-width swaps the probe.
std::vector<SweepRow> sweep(SweepKind kind, const std::vector<double>& grid,
                            const TrainConfig& base, const PlantedConfig& planted,
                            const std::vector<std::uint64_t>& seeds);

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& os);

// ---- Embedding dump ----

// One `node_id v1 v2 ...` line per node per table, plus a JSON manifest
// naming the S file and each D^t file.
void dump_embeddings(const RepresentationSet& reps, const std::string& out_dir);
RepresentationSet load_embeddings(const std::string& out_dir);

// Baseline models have no invariant/varying split; their per-snapshot
// tables are dumped under the same manifest scheme with kind "baseline".
void dump_baseline_embeddings(const std::vector<ad::Mat>& reps, const std::string& out_dir);
std::vector<ad::Mat> load_baseline_embeddings(const std::string& out_dir);
bool embeddings_are_baseline(const std::string& out_dir);

ProbeData probe_data_baseline(const std::vector<ad::Mat>& reps_per_t, const LabelTable& table,
                              bool pooled = false);

}  // namespace dysent
