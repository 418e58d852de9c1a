#include "dysent/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "dysent/errors.hpp"

namespace dysent {

namespace {

using ad::Mat;
using ad::Tape;
using ad::Var;

constexpr double kScoreClamp = 1e-7;

double logit(double x) { return std::log(x / (1.0 - x)); }

}  // namespace

void TrainConfig::validate() const {
  if (d < 2 || d % 2 != 0) throw ConfigError("train: d must be an even integer >= 2");
  if (!(tau > 0.0) || !(tau_g > 0.0)) throw ConfigError("train: temperatures must be positive");
  if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0)
    throw ConfigError("train: lambda weights must be >= 0");
  if (n < 1 || n_prime < 1) throw ConfigError("train: n and n_prime must be >= 1");
  if (k_d < 0) throw ConfigError("train: k_D must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
  if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (!(alpha_init > 0.0) || !(alpha_init < 1.0))
    throw ConfigError("train: alpha_init must lie in (0,1)");
}

TrainConfig TrainConfig::from_kv(const KeyValueConfig& kv) {
  TrainConfig cfg;
  cfg.d = static_cast<int>(kv.get_int("d", cfg.d));
  cfg.tau = kv.get_real("tau", cfg.tau);
  cfg.tau_g = kv.get_real("tau_g", cfg.tau_g);
  cfg.lambda1 = kv.get_real("lambda1", cfg.lambda1);
  cfg.lambda2 = kv.get_real("lambda2", cfg.lambda2);
  cfg.lambda3 = kv.get_real("lambda3", cfg.lambda3);
  cfg.n = static_cast<int>(kv.get_int("n", cfg.n));
  cfg.n_prime = static_cast<int>(kv.get_int("n_prime", cfg.n_prime));
  cfg.k_d = static_cast<int>(kv.get_int("k_D", cfg.k_d));
  std::string pretext = kv.get_string("pretext", "link-prediction");
  if (pretext == "structure-proximity")
    cfg.pretext = Pretext::StructureProximity;
  else if (pretext == "link-prediction")
    cfg.pretext = Pretext::LinkPrediction;
  else
    throw ConfigError("train: unknown pretext '" + pretext + "'");
  cfg.learning_rate = kv.get_real("learning_rate", cfg.learning_rate);
  cfg.epochs = static_cast<int>(kv.get_int("epochs", cfg.epochs));
  cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long>(cfg.seed)));
  cfg.bernoulli_sampling = kv.get_int("bernoulli_sampling", cfg.bernoulli_sampling ? 1 : 0) != 0;
  cfg.alpha_init = kv.get_real("alpha_init", cfg.alpha_init);
  cfg.max_edges_per_snapshot =
      static_cast<int>(kv.get_int("max_edges_per_snapshot", cfg.max_edges_per_snapshot));
  cfg.validate();
  return cfg;
}

// ---- Discriminator ----

Discriminator Discriminator::init(int d, std::uint64_t seed) {
  Rng rng = make_rng(seed, 9);
  Discriminator disc;
  auto glorot = [&](int r, int c) {
    Mat m(r, c);
    const double bound = std::sqrt(6.0 / (r + c));
    for (auto& x : m.d) x = (uniform_real(rng) * 2.0 - 1.0) * bound;
    return m;
  };
  disc.w1 = glorot(d, d);
  disc.b1 = Mat::zeros(1, d);
  disc.w2 = glorot(d, 1);
  disc.b2 = Mat::zeros(1, 1);
  return disc;
}

std::vector<std::pair<std::string, Mat*>> Discriminator::tensors() {
  return {{"w1", &w1}, {"b1", &b1}, {"w2", &w2}, {"b2", &b2}};
}
std::vector<std::pair<std::string, const Mat*>> Discriminator::tensors() const {
  return {{"w1", &w1}, {"b1", &b1}, {"w2", &w2}, {"b2", &b2}};
}

DiscriminatorVars register_discriminator(Tape& tape, const Discriminator& d, bool tracked) {
  auto reg = [&](const Mat& m) { return tracked ? tape.leaf(m) : tape.constant(m); };
  return {reg(d.w1), reg(d.b1), reg(d.w2), reg(d.b2)};
}

Var discriminator_scores(Tape& tape, const DiscriminatorVars& dv, Var inputs) {
  const int m = tape.value(inputs).rows;
  Var ones = tape.constant(Mat::filled(m, 1, 1.0));
  Var hidden =
      tape.tanh(tape.add(tape.matmul(inputs, dv.w1), tape.matmul(ones, dv.b1)));
  return tape.sigmoid(tape.add(tape.matmul(hidden, dv.w2), tape.matmul(ones, dv.b2)));
}

Var discriminator_value(Tape& tape, const DiscriminatorVars& dv, Var true_inputs,
                        Var false_inputs) {
  Var one = tape.constant(Mat::scalar(1.0));
  Var d_true = tape.clamp(discriminator_scores(tape, dv, true_inputs), kScoreClamp,
                          1.0 - kScoreClamp);
  Var d_false = tape.clamp(discriminator_scores(tape, dv, false_inputs), kScoreClamp,
                           1.0 - kScoreClamp);
  return tape.add(tape.mean(tape.log(d_true)), tape.mean(tape.log(tape.sub(one, d_false))));
}

// ---- Losses ----

Var loss_time_invariant(Tape& tape, Var s1, Var s2, const std::vector<int>& batch,
                        const std::vector<std::vector<int>>& negatives, double tau) {
  if (batch.empty()) throw ContractError("loss_time_invariant: empty batch");
  if (negatives.size() != batch.size())
    throw ContractError("loss_time_invariant: negatives must align with batch");
  const int m = static_cast<int>(batch.size());
  const int n = static_cast<int>(negatives.front().size());

  Var anchors = tape.gather_rows(s1, batch);
  Var partners = tape.gather_rows(s2, batch);
  Var pos = tape.cosine_rows(anchors, partners);  // m x 1

  std::vector<int> anchor_rep, neg_flat;
  anchor_rep.reserve(static_cast<std::size_t>(m) * n);
  neg_flat.reserve(static_cast<std::size_t>(m) * n);
  for (int i = 0; i < m; ++i) {
    if (static_cast<int>(negatives[i].size()) != n)
      throw ContractError("loss_time_invariant: ragged negative lists");
    for (int u : negatives[i]) {
      anchor_rep.push_back(batch[i]);
      neg_flat.push_back(u);
    }
  }
  Var neg_sims = tape.cosine_rows(tape.gather_rows(s1, anchor_rep), tape.gather_rows(s1, neg_flat));
  Var neg_mat = tape.reshape(neg_sims, m, n);

  Var logits = tape.scale(tape.concat_cols(pos, neg_mat), 1.0 / tau);
  Var lse = tape.logsumexp_rows(logits);
  return tape.mean(tape.sub(lse, tape.scale(pos, 1.0 / tau)));
}

Var loss_time_invariant_full(Tape& tape, Var s1, Var s2, double tau) {
  const int nrows = tape.value(s1).rows;
  std::vector<int> anchor_rep, all_flat;
  anchor_rep.reserve(static_cast<std::size_t>(nrows) * nrows);
  for (int v = 0; v < nrows; ++v)
    for (int u = 0; u < nrows; ++u) {
      anchor_rep.push_back(v);
      all_flat.push_back(u);
    }
  Var pos = tape.cosine_rows(s1, s2);
  Var sims = tape.cosine_rows(tape.gather_rows(s1, anchor_rep), tape.gather_rows(s1, all_flat));
  Var denom = tape.logsumexp_rows(tape.scale(tape.reshape(sims, nrows, nrows), 1.0 / tau));
  return tape.mean(tape.sub(denom, tape.scale(pos, 1.0 / tau)));
}

namespace {

// Uniform edge subsample without replacement (partial Fisher-Yates); keeps
// the full set when cap is 0 or already satisfied.
std::vector<std::pair<int, int>> subsample_edges(const std::vector<std::pair<int, int>>& edges,
                                                 int cap, Rng& rng) {
  if (cap <= 0 || static_cast<int>(edges.size()) <= cap) return edges;
  std::vector<std::pair<int, int>> pool = edges;
  for (int i = 0; i < cap; ++i) {
    int j = i + uniform_int(rng, 0, static_cast<int>(pool.size()) - 1 - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(cap);
  return pool;
}

int sample_non_neighbor(const Snapshot& s, int anchor, Rng& rng) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    int w = uniform_int(rng, 0, s.node_count - 1);
    if (w != anchor && !s.has_edge(anchor, w)) return w;
  }
  // Near-complete neighborhoods: fall back to any other node.
  int w = uniform_int(rng, 0, s.node_count - 1);
  return w == anchor ? (w + 1) % s.node_count : w;
}

}  // namespace

Var loss_structure_proximity(Tape& tape, const std::vector<Var>& reps, const DynamicGraph& g,
                             double tau, int n, Rng& rng, int max_edges_per_snapshot) {
  if (static_cast<int>(reps.size()) != g.T())
    throw ContractError("loss_structure_proximity: reps must cover every snapshot");
  Var total{};
  for (int t = 0; t < g.T(); ++t) {
    const Snapshot& snap = g.snapshots[t];
    if (snap.edges.empty()) continue;  // contributes 0
    const auto edges = subsample_edges(snap.edges, max_edges_per_snapshot, rng);
    const int m = static_cast<int>(edges.size());

    std::vector<int> anchors(m), partners(m);
    for (int i = 0; i < m; ++i) {
      anchors[i] = edges[i].second;
      partners[i] = edges[i].first;
    }
    std::vector<int> anchor_rep, neg_flat;
    anchor_rep.reserve(static_cast<std::size_t>(m) * n);
    neg_flat.reserve(static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        anchor_rep.push_back(anchors[i]);
        neg_flat.push_back(sample_non_neighbor(snap, anchors[i], rng));
      }

    Var pos = tape.cosine_rows(tape.gather_rows(reps[t], anchors),
                               tape.gather_rows(reps[t], partners));
    Var neg = tape.cosine_rows(tape.gather_rows(reps[t], anchor_rep),
                               tape.gather_rows(reps[t], neg_flat));
    Var logits = tape.scale(tape.concat_cols(pos, tape.reshape(neg, m, n)), 1.0 / tau);
    Var term = tape.mean(tape.sub(tape.logsumexp_rows(logits), tape.scale(pos, 1.0 / tau)));
    total = total.valid() ? tape.add(total, term) : term;
  }
  if (!total.valid()) return tape.constant(Mat::scalar(0.0));
  return total;
}

Var loss_link_prediction(Tape& tape, const std::vector<Var>& reps, const DynamicGraph& g,
                         Rng& rng, int max_edges_per_snapshot) {
  if (g.T() < 2) throw ContractError("loss_link_prediction: requires T >= 2");
  if (static_cast<int>(reps.size()) != g.T())
    throw ContractError("loss_link_prediction: reps must cover every snapshot");
  Var one = tape.constant(Mat::scalar(1.0));
  Var total{};
  for (int t = 0; t + 1 < g.T(); ++t) {
    const Snapshot& next = g.snapshots[t + 1];
    if (next.edges.empty()) continue;
    const auto edges = subsample_edges(next.edges, max_edges_per_snapshot, rng);
    const int m = static_cast<int>(edges.size());

    std::vector<int> us(m), vs(m), ws(m);
    for (int i = 0; i < m; ++i) {
      us[i] = edges[i].first;
      vs[i] = edges[i].second;
      ws[i] = sample_non_neighbor(next, us[i], rng);
    }
    Var pos_p = tape.clamp(
        tape.sigmoid(tape.dot_rows(tape.gather_rows(reps[t], us), tape.gather_rows(reps[t], vs))),
        kScoreClamp, 1.0 - kScoreClamp);
    Var neg_p = tape.clamp(
        tape.sigmoid(tape.dot_rows(tape.gather_rows(reps[t], us), tape.gather_rows(reps[t], ws))),
        kScoreClamp, 1.0 - kScoreClamp);
    Var term = tape.add(tape.mean(tape.log(pos_p)), tape.mean(tape.log(tape.sub(one, neg_p))));
    total = total.valid() ? tape.add(total, term) : term;
  }
  if (!total.valid()) return tape.constant(Mat::scalar(0.0));
  return tape.scale(total, -1.0);
}

// ---- Optimizer ----

namespace {

class Adam {
 public:
  explicit Adam(double lr) : lr_(lr) {}

  void step(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads) {
    if (slots_.empty()) {
      for (Mat* p : params) slots_.push_back({Mat::zeros(p->rows, p->cols), Mat::zeros(p->rows, p->cols)});
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Mat& p = *params[i];
      const Mat& g = *grads[i];
      Mat& m = slots_[i].m;
      Mat& v = slots_[i].v;
      for (std::size_t j = 0; j < p.size(); ++j) {
        m.d[j] = beta1_ * m.d[j] + (1.0 - beta1_) * g.d[j];
        v.d[j] = beta2_ * v.d[j] + (1.0 - beta2_) * g.d[j] * g.d[j];
        p.d[j] -= lr_ * (m.d[j] / bc1) / (std::sqrt(v.d[j] / bc2) + eps_);
      }
    }
  }

 private:
  struct Slot {
    Mat m, v;
  };
  double lr_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  std::vector<Slot> slots_;
};

std::vector<std::vector<int>> sample_negative_nodes(int node_count, const std::vector<int>& batch,
                                                    int n, Rng& rng) {
  std::vector<std::vector<int>> negs(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    negs[i].reserve(n);
    while (static_cast<int>(negs[i].size()) < n) {
      int u = uniform_int(rng, 0, node_count - 1);
      if (u != batch[i]) negs[i].push_back(u);
    }
  }
  return negs;
}

struct DiscBatch {
  Var true_inputs, false_inputs;
};

// True rows pair a node's invariant part with its own varying part at a
// random t; false rows pair it with another node's varying part.
DiscBatch build_disc_inputs(Tape& tape, Var s, const std::vector<Var>& d_seq, int n_prime,
                            int node_count, Rng& rng) {
  const int T = static_cast<int>(d_seq.size());
  std::vector<std::vector<int>> true_v(T), false_v(T), false_u(T);
  for (int i = 0; i < n_prime; ++i) {
    int t = uniform_int(rng, 0, T - 1);
    true_v[t].push_back(uniform_int(rng, 0, node_count - 1));
  }
  for (int i = 0; i < n_prime; ++i) {
    int t = uniform_int(rng, 0, T - 1);
    int v = uniform_int(rng, 0, node_count - 1);
    int u = v;
    while (u == v) u = uniform_int(rng, 0, node_count - 1);
    false_v[t].push_back(v);
    false_u[t].push_back(u);
  }
  Var tr{}, fa{};
  for (int t = 0; t < T; ++t) {
    if (!true_v[t].empty()) {
      Var rows = tape.concat_cols(tape.gather_rows(s, true_v[t]),
                                  tape.gather_rows(d_seq[t], true_v[t]));
      tr = tr.valid() ? tape.concat_rows(tr, rows) : rows;
    }
    if (!false_v[t].empty()) {
      Var rows = tape.concat_cols(tape.gather_rows(s, false_v[t]),
                                  tape.gather_rows(d_seq[t], false_u[t]));
      fa = fa.valid() ? tape.concat_rows(fa, rows) : rows;
    }
  }
  return {tr, fa};
}

// Constant-valued variant for the discriminator's own steps.
DiscBatch build_disc_inputs_const(Tape& tape, const Mat& s, const std::vector<Mat>& d_seq,
                                  int n_prime, Rng& rng) {
  const int T = static_cast<int>(d_seq.size());
  const int node_count = s.rows;
  const int half = s.cols;
  Mat tr(n_prime, 2 * half), fa(n_prime, 2 * half);
  for (int i = 0; i < n_prime; ++i) {
    int t = uniform_int(rng, 0, T - 1);
    int v = uniform_int(rng, 0, node_count - 1);
    for (int c = 0; c < half; ++c) {
      tr.at(i, c) = s.at(v, c);
      tr.at(i, half + c) = d_seq[t].at(v, c);
    }
  }
  for (int i = 0; i < n_prime; ++i) {
    int t = uniform_int(rng, 0, T - 1);
    int v = uniform_int(rng, 0, node_count - 1);
    int u = v;
    while (u == v) u = uniform_int(rng, 0, node_count - 1);
    for (int c = 0; c < half; ++c) {
      fa.at(i, c) = s.at(v, c);
      fa.at(i, half + c) = d_seq[t].at(u, c);
    }
  }
  return {tape.constant(tr), tape.constant(fa)};
}

void check_finite(double total, int iter, std::initializer_list<std::pair<const char*, double>> terms) {
  if (std::isfinite(total)) return;
  for (const auto& [name, value] : terms)
    if (!std::isfinite(value))
      throw std::runtime_error("train: non-finite loss at iteration " + std::to_string(iter) +
                               ": first non-finite term is " + name + " = " +
                               std::to_string(value));
  throw std::runtime_error("train: non-finite total loss at iteration " + std::to_string(iter));
}

}  // namespace

void write_history_csv(const std::vector<HistoryRow>& history, std::ostream& os) {
  os << "iter,L_v,L_i,V,loss_D,alpha,total\n";
  char buf[256];
  for (const HistoryRow& r : history) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.iter, r.l_v,
                  r.l_i, r.v, r.loss_d, r.alpha, r.total);
    os << buf;
  }
}

Mat RepresentationSet::combined(int t) const {
  const int n = S.rows;
  const int half = S.cols;
  Mat out(n, 2 * half);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < half; ++c) {
      out.at(r, c) = S.at(r, c);
      out.at(r, half + c) = D[t].at(r, c);
    }
  }
  return out;
}

DytedModel train(const TrainConfig& cfg, const DynamicGraph& g) {
  cfg.validate();
  if (g.T() < 1) throw ContractError("train: graph has no snapshots");
  if (g.node_count < 2) throw ContractError("train: need at least 2 nodes");
  if (cfg.pretext == Pretext::LinkPrediction && g.T() < 2)
    throw ContractError("train: link-prediction pretext requires T >= 2");

  const GraphTensors gt = precompute_graph(g);
  const int half = cfg.d / 2;

  DytedModel model;
  model.cfg = cfg;
  model.g_inv = GcnGruEncoder::init({g.node_count, cfg.d, half}, cfg.seed * 4 + 1);
  model.g_var = GcnGruEncoder::init({g.node_count, cfg.d, half}, cfg.seed * 4 + 2);
  model.disc = Discriminator::init(cfg.d, cfg.seed * 4 + 3);
  model.alpha_raw = logit(cfg.alpha_init);

  Adam gen_opt(cfg.learning_rate);
  Adam disc_opt(cfg.learning_rate);

  std::vector<int> batch(g.node_count);
  for (int v = 0; v < g.node_count; ++v) batch[v] = v;

  for (int iter = 0; iter < cfg.epochs; ++iter) {
    Rng rng = make_rng(cfg.seed, 10000 + static_cast<std::uint64_t>(iter));

    Tape tape;
    EncoderVars vi = register_encoder(tape, model.g_inv, true);
    EncoderVars vv = register_encoder(tape, model.g_var, true);
    Var alpha_raw = tape.leaf(Mat::scalar(model.alpha_raw));

    ClipPair clip = cfg.bernoulli_sampling
                        ? sample_clip_pair(tape, alpha_raw, g.T(), cfg.tau_g, rng)
                        : sample_clip_pair_uniform(tape, g.T(), rng);
    Var s1 = encode_clip(tape, vi, model.g_inv.cfg, gt, clip.t_i, clip.L, clip.mask1);
    Var s2 = encode_clip(tape, vi, model.g_inv.cfg, gt, clip.t_i, clip.L, clip.mask2);
    std::vector<Var> d_seq = encode_sequence(tape, vv, model.g_var.cfg, gt);
    std::vector<Var> reps(g.T());
    for (int t = 0; t < g.T(); ++t) reps[t] = tape.concat_cols(s1, d_seq[t]);

    Var l_v = cfg.pretext == Pretext::StructureProximity
                  ? loss_structure_proximity(tape, reps, g, cfg.tau, cfg.n, rng,
                                             cfg.max_edges_per_snapshot)
                  : loss_link_prediction(tape, reps, g, rng, cfg.max_edges_per_snapshot);
    Var l_i = loss_time_invariant(tape, s1, s2, batch,
                                  sample_negative_nodes(g.node_count, batch, cfg.n, rng),
                                  cfg.tau);

    DiscriminatorVars dv = register_discriminator(tape, model.disc, /*tracked=*/false);
    DiscBatch db = build_disc_inputs(tape, s1, d_seq, cfg.n_prime, g.node_count, rng);
    Var v_term = discriminator_value(tape, dv, db.true_inputs, db.false_inputs);

    Var reg{};
    for (Var w : vi.all()) reg = reg.valid() ? tape.add(reg, tape.sum_squares(w)) : tape.sum_squares(w);
    for (Var w : vv.all()) reg = tape.add(reg, tape.sum_squares(w));

    Var total = tape.add(tape.add(l_v, tape.scale(l_i, cfg.lambda1)),
                         tape.add(tape.scale(v_term, cfg.lambda2), tape.scale(reg, cfg.lambda3)));

    HistoryRow row;
    row.iter = iter;
    row.l_v = tape.value(l_v).scalar_value();
    row.l_i = tape.value(l_i).scalar_value();
    row.v = tape.value(v_term).scalar_value();
    row.total = tape.value(total).scalar_value();
    check_finite(row.total, iter,
                 {{"L_v", row.l_v},
                  {"L_i", row.l_i},
                  {"V", row.v},
                  {"reg", tape.value(reg).scalar_value()}});

    tape.backward(total);

    // Cache representation values before the update; the discriminator
    // trains against the iteration's representations.
    const Mat s_cached = tape.value(s1);
    std::vector<Mat> d_cached;
    d_cached.reserve(g.T());
    for (int t = 0; t < g.T(); ++t) d_cached.push_back(tape.value(d_seq[t]));

    Mat alpha_mat = Mat::scalar(model.alpha_raw);
    std::vector<Mat*> params;
    std::vector<const Mat*> grads;
    auto collect = [&](GcnGruEncoder& enc, const EncoderVars& vars) {
      auto named = enc.tensors();
      auto handles = vars.all();
      for (std::size_t i = 0; i < named.size(); ++i) {
        params.push_back(named[i].second);
        grads.push_back(&tape.grad(handles[i]));
      }
    };
    collect(model.g_inv, vi);
    collect(model.g_var, vv);
    params.push_back(&alpha_mat);
    grads.push_back(&tape.grad(alpha_raw));
    gen_opt.step(params, grads);
    model.alpha_raw = alpha_mat.d[0];

    double loss_d = 0.0;
    for (int step = 0; step < cfg.k_d; ++step) {
      Rng drng = make_rng(cfg.seed, 500000 + static_cast<std::uint64_t>(iter) * 64 + step);
      Tape dtape;
      DiscriminatorVars tracked = register_discriminator(dtape, model.disc, /*tracked=*/true);
      DiscBatch batch_d = build_disc_inputs_const(dtape, s_cached, d_cached, cfg.n_prime, drng);
      Var v_d = discriminator_value(dtape, tracked, batch_d.true_inputs, batch_d.false_inputs);
      Var loss = dtape.scale(v_d, -1.0);
      loss_d = dtape.value(loss).scalar_value();
      dtape.backward(loss);
      std::vector<Mat*> dparams;
      std::vector<const Mat*> dgrads;
      auto named = model.disc.tensors();
      std::vector<Var> handles = {tracked.w1, tracked.b1, tracked.w2, tracked.b2};
      for (std::size_t i = 0; i < named.size(); ++i) {
        dparams.push_back(named[i].second);
        dgrads.push_back(&dtape.grad(handles[i]));
      }
      disc_opt.step(dparams, dgrads);
    }

    row.loss_d = loss_d;
    row.alpha = 1.0 / (1.0 + std::exp(-model.alpha_raw));
    model.history.push_back(row);
  }
  return model;
}

RepresentationSet extract_representations(const DytedModel& model, const DynamicGraph& g) {
  const GraphTensors gt = precompute_graph(g);
  RepresentationSet out;
  out.S = time_invariant_final(model.g_inv, gt);
  Tape tape;
  EncoderVars vars = register_encoder(tape, model.g_var, /*tracked=*/false);
  std::vector<Var> d_seq = encode_sequence(tape, vars, model.g_var.cfg, gt);
  out.D.reserve(g.T());
  for (Var v : d_seq) out.D.push_back(tape.value(v));
  return out;
}

BaselineModel train_baseline(const TrainConfig& cfg, const DynamicGraph& g) {
  cfg.validate();
  if (g.T() < 1) throw ContractError("train_baseline: graph has no snapshots");
  if (cfg.pretext == Pretext::LinkPrediction && g.T() < 2)
    throw ContractError("train_baseline: link-prediction pretext requires T >= 2");

  const GraphTensors gt = precompute_graph(g);
  BaselineModel model;
  model.cfg = cfg;
  model.enc = GcnGruEncoder::init({g.node_count, cfg.d, cfg.d}, cfg.seed * 4 + 1);
  Adam opt(cfg.learning_rate);

  for (int iter = 0; iter < cfg.epochs; ++iter) {
    Rng rng = make_rng(cfg.seed, 10000 + static_cast<std::uint64_t>(iter));
    Tape tape;
    EncoderVars vars = register_encoder(tape, model.enc, true);
    std::vector<Var> reps = encode_sequence(tape, vars, model.enc.cfg, gt);
    Var l_v = cfg.pretext == Pretext::StructureProximity
                  ? loss_structure_proximity(tape, reps, g, cfg.tau, cfg.n, rng,
                                             cfg.max_edges_per_snapshot)
                  : loss_link_prediction(tape, reps, g, rng, cfg.max_edges_per_snapshot);
    Var reg{};
    for (Var w : vars.all())
      reg = reg.valid() ? tape.add(reg, tape.sum_squares(w)) : tape.sum_squares(w);
    Var total = tape.add(l_v, tape.scale(reg, cfg.lambda3));

    HistoryRow row;
    row.iter = iter;
    row.l_v = tape.value(l_v).scalar_value();
    row.total = tape.value(total).scalar_value();
    check_finite(row.total, iter, {{"L_v", row.l_v}});

    tape.backward(total);
    std::vector<Mat*> params;
    std::vector<const Mat*> grads;
    auto named = model.enc.tensors();
    auto handles = vars.all();
    for (std::size_t i = 0; i < named.size(); ++i) {
      params.push_back(named[i].second);
      grads.push_back(&tape.grad(handles[i]));
    }
    opt.step(params, grads);
    model.history.push_back(row);
  }
  return model;
}

std::vector<Mat> extract_baseline(const BaselineModel& model, const DynamicGraph& g) {
  const GraphTensors gt = precompute_graph(g);
  Tape tape;
  EncoderVars vars = register_encoder(tape, model.enc, /*tracked=*/false);
  std::vector<Var> reps = encode_sequence(tape, vars, model.enc.cfg, gt);
  std::vector<Mat> out;
  out.reserve(g.T());
  for (Var v : reps) out.push_back(tape.value(v));
  return out;
}

// ---- Checkpoints ----

namespace {

void write_tensor(std::ostream& os, const std::string& name, const Mat& m) {
  os << "tensor " << name << " " << m.rows << " " << m.cols << "\n";
  char buf[32];
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", m.at(r, c));
      os << buf << (c + 1 == m.cols ? "" : " ");
    }
    os << "\n";
  }
}

Mat read_tensor(std::istream& is, const std::string& expect_name) {
  std::string tag, name;
  int rows, cols;
  if (!(is >> tag >> name >> rows >> cols) || tag != "tensor" || name != expect_name)
    throw ParseError("checkpoint: expected tensor '" + expect_name + "'");
  Mat m(rows, cols);
  for (auto& x : m.d)
    if (!(is >> x)) throw ParseError("checkpoint: truncated tensor '" + name + "'");
  return m;
}

void write_encoder(std::ostream& os, const std::string& prefix, const GcnGruEncoder& enc) {
  for (const auto& [name, mat] : enc.tensors()) write_tensor(os, prefix + "." + name, *mat);
}

void read_encoder(std::istream& is, const std::string& prefix, GcnGruEncoder& enc) {
  for (auto& [name, mat] : enc.tensors()) *mat = read_tensor(is, prefix + "." + name);
}

}  // namespace

void save_checkpoint(const DytedModel& model, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ParseError("checkpoint: cannot write '" + path + "'");
  os << "dysent-checkpoint 1\n";
  os << "kind dyted\n";
  os << "d " << model.cfg.d << "\n";
  os << "node_count " << model.g_inv.cfg.node_count << "\n";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", model.alpha_raw);
  os << "alpha_raw " << buf << "\n";
  write_encoder(os, "g_inv", model.g_inv);
  write_encoder(os, "g_var", model.g_var);
  for (const auto& [name, mat] : model.disc.tensors()) write_tensor(os, "disc." + name, *mat);
}

namespace {

struct CheckpointHeader {
  std::string kind;
  int d = 0;
  int node_count = 0;
  double alpha_raw = 0.0;
};

CheckpointHeader read_header(std::istream& is, const std::string& path) {
  std::string magic;
  int version;
  if (!(is >> magic >> version) || magic != "dysent-checkpoint" || version != 1)
    throw ParseError("checkpoint: bad header in '" + path + "'");
  CheckpointHeader h;
  std::string key;
  is >> key >> h.kind;
  if (key != "kind") throw ParseError("checkpoint: expected 'kind'");
  is >> key >> h.d;
  if (key != "d") throw ParseError("checkpoint: expected 'd'");
  is >> key >> h.node_count;
  if (key != "node_count") throw ParseError("checkpoint: expected 'node_count'");
  if (h.kind == "dyted") {
    is >> key >> h.alpha_raw;
    if (key != "alpha_raw") throw ParseError("checkpoint: expected 'alpha_raw'");
  }
  return h;
}

}  // namespace

DytedModel load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("checkpoint: cannot open '" + path + "'");
  CheckpointHeader h = read_header(is, path);
  if (h.kind != "dyted") throw ParseError("checkpoint: '" + path + "' is not a dyted checkpoint");
  DytedModel model;
  model.cfg.d = h.d;
  model.alpha_raw = h.alpha_raw;
  model.g_inv.cfg = {h.node_count, h.d, h.d / 2};
  model.g_var.cfg = {h.node_count, h.d, h.d / 2};
  read_encoder(is, "g_inv", model.g_inv);
  read_encoder(is, "g_var", model.g_var);
  for (auto& [name, mat] : model.disc.tensors()) *mat = read_tensor(is, "disc." + name);
  return model;
}

void save_baseline_checkpoint(const BaselineModel& model, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ParseError("checkpoint: cannot write '" + path + "'");
  os << "dysent-checkpoint 1\n";
  os << "kind baseline\n";
  os << "d " << model.cfg.d << "\n";
  os << "node_count " << model.enc.cfg.node_count << "\n";
  write_encoder(os, "enc", model.enc);
}

BaselineModel load_baseline_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("checkpoint: cannot open '" + path + "'");
  CheckpointHeader h = read_header(is, path);
  if (h.kind != "baseline")
    throw ParseError("checkpoint: '" + path + "' is not a baseline checkpoint");
  BaselineModel model;
  model.cfg.d = h.d;
  model.enc.cfg = {h.node_count, h.d, h.d};
  read_encoder(is, "enc", model.enc);
  return model;
}

bool checkpoint_is_baseline(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("checkpoint: cannot open '" + path + "'");
  std::string magic;
  int version;
  std::string key, kind;
  if (!(is >> magic >> version >> key >> kind) || magic != "dysent-checkpoint" || key != "kind")
    throw ParseError("checkpoint: bad header in '" + path + "'");
  return kind == "baseline";
}

}  // namespace dysent
