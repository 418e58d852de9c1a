#include "dysent/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dysent/errors.hpp"
#include "dysent/rng.hpp"

namespace dysent {

namespace {

using ad::Mat;

char fmt_buf[256];

std::string fmt(const char* format, double v) {
  std::snprintf(fmt_buf, sizeof(fmt_buf), format, v);
  return fmt_buf;
}

}  // namespace

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Combine: return "combine";
    case Variant::TimeInvariant: return "time-invariant";
    case Variant::TimeVarying: return "time-varying";
    case Variant::Baseline: return "baseline";
    case Variant::Pooled: return "pooled";
  }
  return "?";
}

Variant variant_from_name(const std::string& name) {
  if (name == "combine") return Variant::Combine;
  if (name == "time-invariant") return Variant::TimeInvariant;
  if (name == "time-varying") return Variant::TimeVarying;
  if (name == "baseline") return Variant::Baseline;
  if (name == "pooled") return Variant::Pooled;
  throw DomainError("unknown variant '" + name + "'");
}

void write_metrics_csv(const std::vector<EvalReport>& reports, std::ostream& os, bool header) {
  if (header) os << "task,variant,seed,metric,value\n";
  for (const EvalReport& r : reports)
    for (const auto& [metric, value] : r.metrics)
      os << r.task << "," << r.variant << "," << r.seed << "," << metric << ","
         << fmt("%.10g", value) << "\n";
}

// ---- Ranking metrics ----

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ContractError("roc_auc: size mismatch");
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (int y : labels) pos += y != 0;
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw ContractError("roc_auc: needs both classes");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midranks, so tied scores contribute one half per opposing pair.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] != 0) rank_sum_pos += midrank;
    i = j + 1;
  }
  const double u = rank_sum_pos - static_cast<double>(pos) * (pos + 1) / 2.0;
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

double average_precision(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ContractError("average_precision: size mismatch");
  std::size_t pos = 0;
  for (int y : labels) pos += y != 0;
  if (pos == 0) throw ContractError("average_precision: no positives");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  double ap = 0.0;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] != 0) {
      ++tp;
      ap += static_cast<double>(tp) / static_cast<double>(k + 1);
    }
  }
  return ap / static_cast<double>(pos);
}

F1Scores f1_scores(const std::vector<int>& predicted, const std::vector<int>& actual,
                   int class_count) {
  if (predicted.size() != actual.size()) throw ContractError("f1_scores: size mismatch");
  if (predicted.empty()) throw ContractError("f1_scores: empty input");
  std::vector<long> tp(class_count, 0), fp(class_count, 0), fn(class_count, 0);
  long correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const int p = predicted[i], a = actual[i];
    if (p == a) {
      ++tp[a];
      ++correct;
    } else {
      ++fp[p];
      ++fn[a];
    }
  }
  long tp_sum = 0, fp_sum = 0, fn_sum = 0;
  double macro = 0.0;
  for (int c = 0; c < class_count; ++c) {
    tp_sum += tp[c];
    fp_sum += fp[c];
    fn_sum += fn[c];
    const double denom = 2.0 * tp[c] + fp[c] + fn[c];
    macro += denom > 0 ? 2.0 * tp[c] / denom : 0.0;
  }
  F1Scores out;
  const double micro_denom = 2.0 * tp_sum + fp_sum + fn_sum;
  out.micro = micro_denom > 0 ? 2.0 * tp_sum / micro_denom : 0.0;
  out.macro = macro / class_count;
  out.accuracy = static_cast<double>(correct) / static_cast<double>(predicted.size());
  return out;
}

// ---- Linear classifiers (plain loops; the probes stay outside the tape) ----

namespace {

// Multinomial logistic regression, full-batch Adam.
class SoftmaxProbe {
 public:
  SoftmaxProbe(int dim, int classes, int hidden) : dim_(dim), classes_(classes), hidden_(hidden) {
    const int in2 = hidden_ > 0 ? hidden_ : dim_;
    if (hidden_ > 0) {
      w_hidden_.assign(static_cast<std::size_t>(dim_) * hidden_, 0.0);
      b_hidden_.assign(hidden_, 0.0);
      Rng rng = make_rng(11, 3);
      const double bound = std::sqrt(6.0 / (dim_ + hidden_));
      for (auto& w : w_hidden_) w = (uniform_real(rng) * 2 - 1) * bound;
    }
    w_.assign(static_cast<std::size_t>(in2) * classes_, 0.0);
    b_.assign(classes_, 0.0);
  }

  void fit(const Mat& x, const std::vector<int>& y, const std::vector<int>& train_idx,
           const std::vector<int>& val_idx, int max_epochs = 300, double lr = 0.05,
           int patience = 40) {
    std::vector<double> best_w = w_, best_b = b_, best_wh = w_hidden_, best_bh = b_hidden_;
    double best_val = -1.0;
    int since_best = 0;
    AdamState opt_w(w_.size()), opt_b(b_.size()), opt_wh(w_hidden_.size()),
        opt_bh(b_hidden_.size());
    for (int epoch = 0; epoch < max_epochs; ++epoch) {
      step(x, y, train_idx, lr, opt_w, opt_b, opt_wh, opt_bh, epoch + 1);
      double val = val_idx.empty() ? train_accuracy(x, y, train_idx)
                                   : train_accuracy(x, y, val_idx);
      if (val > best_val) {
        best_val = val;
        best_w = w_;
        best_b = b_;
        best_wh = w_hidden_;
        best_bh = b_hidden_;
        since_best = 0;
      } else if (++since_best > patience) {
        break;
      }
    }
    w_ = best_w;
    b_ = best_b;
    w_hidden_ = best_wh;
    b_hidden_ = best_bh;
  }

  int predict(const Mat& x, int row) const {
    std::vector<double> z = logits(x, row);
    return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
  }

 private:
  struct AdamState {
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
    std::vector<double> m, v;
  };

  std::vector<double> hidden_out(const Mat& x, int row) const {
    std::vector<double> h(hidden_, 0.0);
    for (int j = 0; j < hidden_; ++j) {
      double s = b_hidden_[j];
      for (int c = 0; c < dim_; ++c) s += x.at(row, c) * w_hidden_[c * hidden_ + j];
      h[j] = std::tanh(s);
    }
    return h;
  }

  std::vector<double> logits(const Mat& x, int row) const {
    if (hidden_ > 0) {
      std::vector<double> h = hidden_out(x, row);
      std::vector<double> z(classes_, 0.0);
      for (int k = 0; k < classes_; ++k) {
        double s = b_[k];
        for (int j = 0; j < hidden_; ++j) s += h[j] * w_[j * classes_ + k];
        z[k] = s;
      }
      return z;
    }
    std::vector<double> z(classes_, 0.0);
    for (int k = 0; k < classes_; ++k) {
      double s = b_[k];
      for (int c = 0; c < dim_; ++c) s += x.at(row, c) * w_[c * classes_ + k];
      z[k] = s;
    }
    return z;
  }

  double train_accuracy(const Mat& x, const std::vector<int>& y,
                        const std::vector<int>& idx) const {
    if (idx.empty()) return 0.0;
    int correct = 0;
    for (int i : idx) correct += predict(x, i) == y[i];
    return static_cast<double>(correct) / static_cast<double>(idx.size());
  }

  void step(const Mat& x, const std::vector<int>& y, const std::vector<int>& idx, double lr,
            AdamState& sw, AdamState& sb, AdamState& swh, AdamState& sbh, int t) {
    std::vector<double> gw(w_.size(), 0.0), gb(b_.size(), 0.0);
    std::vector<double> gwh(w_hidden_.size(), 0.0), gbh(b_hidden_.size(), 0.0);
    const double inv_m = 1.0 / static_cast<double>(idx.size());
    for (int i : idx) {
      std::vector<double> h;
      std::vector<double> z = logits(x, i);
      if (hidden_ > 0) h = hidden_out(x, i);
      const double zmax = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (double& v : z) {
        v = std::exp(v - zmax);
        sum += v;
      }
      for (int k = 0; k < classes_; ++k) {
        const double p = z[k] / sum;
        const double delta = (p - (k == y[i] ? 1.0 : 0.0)) * inv_m;
        gb[k] += delta;
        if (hidden_ > 0) {
          for (int j = 0; j < hidden_; ++j) gw[j * classes_ + k] += delta * h[j];
        } else {
          for (int c = 0; c < dim_; ++c) gw[c * classes_ + k] += delta * x.at(i, c);
        }
      }
      if (hidden_ > 0) {
        // Backprop through tanh hidden layer.
        std::vector<double> p(classes_);
        for (int k = 0; k < classes_; ++k) p[k] = z[k] / sum;
        for (int j = 0; j < hidden_; ++j) {
          double gh = 0.0;
          for (int k = 0; k < classes_; ++k)
            gh += (p[k] - (k == y[i] ? 1.0 : 0.0)) * w_[j * classes_ + k];
          gh *= inv_m * (1.0 - h[j] * h[j]);
          gbh[j] += gh;
          for (int c = 0; c < dim_; ++c) gwh[c * hidden_ + j] += gh * x.at(i, c);
        }
      }
    }
    adam_update(w_, gw, sw, lr, t);
    adam_update(b_, gb, sb, lr, t);
    if (hidden_ > 0) {
      adam_update(w_hidden_, gwh, swh, lr, t);
      adam_update(b_hidden_, gbh, sbh, lr, t);
    }
  }

  static void adam_update(std::vector<double>& p, const std::vector<double>& g, AdamState& s,
                          double lr, int t) {
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double bc1 = 1.0 - std::pow(b1, t);
    const double bc2 = 1.0 - std::pow(b2, t);
    for (std::size_t i = 0; i < p.size(); ++i) {
      s.m[i] = b1 * s.m[i] + (1 - b1) * g[i];
      s.v[i] = b2 * s.v[i] + (1 - b2) * g[i] * g[i];
      p[i] -= lr * (s.m[i] / bc1) / (std::sqrt(s.v[i] / bc2) + eps);
    }
  }

  int dim_, classes_, hidden_;
  std::vector<double> w_, b_, w_hidden_, b_hidden_;
};

}  // namespace

// ---- Link prediction ----

LinkEvalResult eval_link_prediction(const Mat& reps, const Snapshot& held_out,
                                    double train_fraction, std::uint64_t seed,
                                    int negatives_per_positive) {
  if (held_out.edges.empty()) throw ContractError("eval_link_prediction: no held-out edges");
  if (reps.rows != held_out.node_count)
    throw ContractError("eval_link_prediction: reps rows != node_count");
  if (!(train_fraction > 0.0) || !(train_fraction < 1.0))
    throw ContractError("eval_link_prediction: train_fraction must be in (0,1)");

  Rng rng = make_rng(seed, 31);
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> labels;
  for (const auto& [u, v] : held_out.edges) {
    pairs.emplace_back(u, v);
    labels.push_back(1);
  }
  const std::size_t n_pos = pairs.size();
  std::size_t wanted = n_pos * static_cast<std::size_t>(negatives_per_positive);
  std::size_t guard = 0;
  while (wanted > 0 && guard < 100 * n_pos * negatives_per_positive + 1000) {
    ++guard;
    int u = uniform_int(rng, 0, held_out.node_count - 1);
    int v = uniform_int(rng, 0, held_out.node_count - 1);
    if (u == v || held_out.has_edge(u, v)) continue;
    pairs.emplace_back(u, v);
    labels.push_back(0);
    --wanted;
  }

  // Hadamard features.
  const int dim = reps.cols;
  Mat feats(static_cast<int>(pairs.size()), dim);
  for (std::size_t i = 0; i < pairs.size(); ++i)
    for (int c = 0; c < dim; ++c)
      feats.at(static_cast<int>(i), c) = reps.at(pairs[i].first, c) * reps.at(pairs[i].second, c);

  std::vector<int> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    std::size_t j = i + uniform_int(rng, 0, static_cast<int>(order.size() - 1 - i));
    std::swap(order[i], order[j]);
  }
  const std::size_t n_train = static_cast<std::size_t>(train_fraction * order.size());
  std::vector<int> train_idx(order.begin(), order.begin() + n_train);
  std::vector<int> test_idx(order.begin() + n_train, order.end());
  if (train_idx.empty() || test_idx.empty())
    throw ContractError("eval_link_prediction: degenerate split");
  auto has_both = [&](const std::vector<int>& idx) {
    bool p = false, n = false;
    for (int i : idx) (labels[i] ? p : n) = true;
    return p && n;
  };
  if (!has_both(train_idx) || !has_both(test_idx))
    throw ContractError("eval_link_prediction: single-class split");

  // Binary logistic regression on the Hadamard features.
  std::vector<double> w(dim, 0.0);
  double b = 0.0;
  std::vector<double> mw(dim, 0.0), vw(dim, 0.0);
  double mb = 0.0, vb = 0.0;
  const double lr_rate = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int epoch = 1; epoch <= 300; ++epoch) {
    std::vector<double> gw(dim, 0.0);
    double gb = 0.0;
    const double inv_m = 1.0 / static_cast<double>(train_idx.size());
    for (int i : train_idx) {
      double z = b;
      for (int c = 0; c < dim; ++c) z += w[c] * feats.at(i, c);
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double delta = (p - labels[i]) * inv_m;
      gb += delta;
      for (int c = 0; c < dim; ++c) gw[c] += delta * feats.at(i, c);
    }
    const double bc1 = 1.0 - std::pow(b1, epoch);
    const double bc2 = 1.0 - std::pow(b2, epoch);
    for (int c = 0; c < dim; ++c) {
      mw[c] = b1 * mw[c] + (1 - b1) * gw[c];
      vw[c] = b2 * vw[c] + (1 - b2) * gw[c] * gw[c];
      w[c] -= lr_rate * (mw[c] / bc1) / (std::sqrt(vw[c] / bc2) + eps);
    }
    mb = b1 * mb + (1 - b1) * gb;
    vb = b2 * vb + (1 - b2) * gb * gb;
    b -= lr_rate * (mb / bc1) / (std::sqrt(vb / bc2) + eps);
  }
  std::vector<double> scores;
  std::vector<int> test_labels;
  scores.reserve(test_idx.size());
  test_labels.reserve(test_idx.size());
  for (int i : test_idx) {
    double z = b;
    for (int c = 0; c < dim; ++c) z += w[c] * feats.at(i, c);
    scores.push_back(z);
    test_labels.push_back(labels[i]);
  }

  LinkEvalResult out;
  out.auc = roc_auc(scores, test_labels);
  out.ap = average_precision(scores, test_labels);
  return out;
}

// ---- Node classification ----

ClassifyResult eval_node_classification(const Mat& features, const std::vector<int>& labels,
                                        int class_count, std::uint64_t seed, int hidden_width,
                                        double train_fraction, double val_fraction) {
  if (features.rows != static_cast<int>(labels.size()))
    throw ContractError("eval_node_classification: features/labels size mismatch");
  if (features.rows < 3) throw ContractError("eval_node_classification: too few samples");

  Rng rng = make_rng(seed, 37);
  std::vector<int> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    std::size_t j = i + uniform_int(rng, 0, static_cast<int>(order.size() - 1 - i));
    std::swap(order[i], order[j]);
  }
  const std::size_t n = order.size();
  const std::size_t n_train = std::max<std::size_t>(1, static_cast<std::size_t>(train_fraction * n));
  const std::size_t n_val = static_cast<std::size_t>(val_fraction * n);
  std::vector<int> train_idx(order.begin(), order.begin() + n_train);
  std::vector<int> val_idx(order.begin() + n_train, order.begin() + n_train + n_val);
  std::vector<int> test_idx(order.begin() + n_train + n_val, order.end());
  if (test_idx.empty()) throw ContractError("eval_node_classification: empty test split");

  std::vector<bool> seen(class_count, false);
  for (int i : train_idx) seen[labels[i]] = true;
  for (int c = 0; c < class_count; ++c)
    if (!seen[c])
      throw ContractError("eval_node_classification: class " + std::to_string(c) +
                          " missing from train split");

  SoftmaxProbe probe(features.cols, class_count, hidden_width);
  probe.fit(features, labels, train_idx, val_idx);

  std::vector<int> pred, actual;
  for (int i : test_idx) {
    pred.push_back(probe.predict(features, i));
    actual.push_back(labels[i]);
  }
  ClassifyResult out;
  out.f1 = f1_scores(pred, actual, class_count);
  return out;
}

ProbeData probe_data(const RepresentationSet& reps, const LabelTable& table, Variant variant) {
  const int T = static_cast<int>(reps.D.size());
  const int last = T - 1;
  auto slice_row = [&](int node, int t, Mat& dst, int dst_row) {
    int col = 0;
    auto put = [&](double v) { dst.at(dst_row, col++) = v; };
    switch (variant) {
      case Variant::TimeInvariant:
        for (int c = 0; c < reps.S.cols; ++c) put(reps.S.at(node, c));
        break;
      case Variant::TimeVarying:
        for (int c = 0; c < reps.D[t].cols; ++c) put(reps.D[t].at(node, c));
        break;
      case Variant::Combine:
        for (int c = 0; c < reps.S.cols; ++c) put(reps.S.at(node, c));
        for (int c = 0; c < reps.D[t].cols; ++c) put(reps.D[t].at(node, c));
        break;
      case Variant::Pooled: {
        for (int c = 0; c < reps.S.cols; ++c) put(reps.S.at(node, c));
        for (int c = 0; c < reps.D[0].cols; ++c) {
          double s = 0.0;
          for (int tt = 0; tt < T; ++tt) s += reps.D[tt].at(node, c);
          put(s / T);
        }
        break;
      }
      case Variant::Baseline:
        throw ContractError("probe_data: baseline variant needs baseline tables");
    }
  };
  int dim;
  switch (variant) {
    case Variant::TimeInvariant: dim = reps.S.cols; break;
    case Variant::TimeVarying: dim = reps.D[0].cols; break;
    default: dim = reps.S.cols + reps.D[0].cols; break;
  }

  ProbeData out;
  out.class_count = table.class_count;
  out.features = Mat(static_cast<int>(table.records.size()), dim);
  out.labels.reserve(table.records.size());
  int row = 0;
  for (const auto& rec : table.records) {
    const int t = table.kind == LabelTable::Kind::Static ? last : rec.t;
    slice_row(rec.node, t, out.features, row++);
    out.labels.push_back(rec.label);
  }
  return out;
}

// ---- Mutual information ----

namespace {

double digamma(double x) {
  double r = 0.0;
  while (x < 6.0) {
    r -= 1.0 / x;
    x += 1.0;
  }
  const double f = 1.0 / (x * x);
  return r + std::log(x) - 0.5 / x -
         f * (1.0 / 12 - f * (1.0 / 120 - f * (1.0 / 252 - f * (1.0 / 240 - f / 132))));
}

double max_norm_dist(const Mat& a, int i, int j) {
  double d = 0.0;
  for (int c = 0; c < a.cols; ++c) d = std::max(d, std::abs(a.at(i, c) - a.at(j, c)));
  return d;
}

}  // namespace

double estimate_mi(const Mat& x, const Mat& y, int k) {
  if (x.rows != y.rows) throw ContractError("estimate_mi: sample count mismatch");
  const int n = x.rows;
  if (n < k + 2) throw ContractError("estimate_mi: need at least k+2 samples");
  if (k < 1) throw ContractError("estimate_mi: k must be >= 1");

  // Tiny deterministic jitter breaks exact ties (repeated S rows appear
  // whenever samples share a node).
  Mat xj = x, yj = y;
  Rng rng = make_rng(0xD15EA5E, 41);
  for (auto& v : xj.d) v += 1e-10 * (uniform_real(rng) - 0.5);
  for (auto& v : yj.d) v += 1e-10 * (uniform_real(rng) - 0.5);

  double acc = 0.0;
  std::vector<double> dx(n), dy(n), dz(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      dx[j] = max_norm_dist(xj, i, j);
      dy[j] = max_norm_dist(yj, i, j);
      dz[j] = std::max(dx[j], dy[j]);
    }
    dz[i] = std::numeric_limits<double>::infinity();
    std::vector<double> sorted = dz;
    std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end());
    const double eps = sorted[k - 1];

    int nx = 0, ny = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      if (dx[j] < eps) ++nx;
      if (dy[j] < eps) ++ny;
    }
    acc += digamma(nx + 1) + digamma(ny + 1);
  }
  const double mi = digamma(k) + digamma(n) - acc / n;
  return std::max(0.0, mi);
}

double discrete_mi(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size() || a.empty()) throw ContractError("discrete_mi: bad input");
  const int ka = *std::max_element(a.begin(), a.end()) + 1;
  const int kb = *std::max_element(b.begin(), b.end()) + 1;
  std::vector<double> pa(ka, 0.0), pb(kb, 0.0), pab(static_cast<std::size_t>(ka) * kb, 0.0);
  const double inv = 1.0 / static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa[a[i]] += inv;
    pb[b[i]] += inv;
    pab[static_cast<std::size_t>(a[i]) * kb + b[i]] += inv;
  }
  double mi = 0.0;
  for (int i = 0; i < ka; ++i)
    for (int j = 0; j < kb; ++j) {
      const double p = pab[static_cast<std::size_t>(i) * kb + j];
      if (p > 0) mi += p * std::log(p / (pa[i] * pb[j]));
    }
  return mi;
}

// ---- Sweeps ----

SweepKind sweep_kind_from_name(const std::string& name) {
  if (name == "noise") return SweepKind::Noise;
  if (name == "data-fraction") return SweepKind::DataFraction;
  if (name == "classifier-width") return SweepKind::ClassifierWidth;
  throw DomainError("unknown sweep kind '" + name + "'");
}

namespace {

DynamicGraph prefix_graph(const DynamicGraph& g, int t_count) {
  DynamicGraph out;
  out.node_count = g.node_count;
  out.snapshots.assign(g.snapshots.begin(), g.snapshots.begin() + t_count);
  return out;
}

Mat link_slice(const RepresentationSet& reps, Variant variant) {
  const int last = static_cast<int>(reps.D.size()) - 1;
  switch (variant) {
    case Variant::TimeInvariant: return reps.S;
    case Variant::TimeVarying: return reps.D[last];
    case Variant::Combine: return reps.combined(last);
    default: throw ContractError("link_slice: unsupported variant");
  }
}

}  // namespace

std::vector<SweepRow> sweep(SweepKind kind, const std::vector<double>& grid,
                            const TrainConfig& base, const PlantedConfig& planted,
                            const std::vector<std::uint64_t>& seeds) {
  std::vector<SweepRow> rows;
  if (grid.empty()) return rows;

  for (std::uint64_t seed : seeds) {
    PlantedConfig pc = planted;
    pc.seed = seed;
    const PlantedData data = generate_planted(pc);
    const DynamicGraph& full = data.graph;
    const Snapshot& held_out = full.snapshots.back();

    TrainConfig cfg = base;
    cfg.seed = seed;

    auto eval_models = [&](const DynamicGraph& train_graph, const Snapshot& eval_snap,
                           double train_fraction, int hidden_width, double point) {
      DytedModel model = train(cfg, train_graph);
      RepresentationSet reps = extract_representations(model, train_graph);
      BaselineModel baseline = train_baseline(cfg, train_graph);
      std::vector<Mat> base_reps = extract_baseline(baseline, train_graph);
      (void)hidden_width;
      for (Variant v : {Variant::Combine, Variant::TimeInvariant, Variant::TimeVarying}) {
        LinkEvalResult r =
            eval_link_prediction(link_slice(reps, v), eval_snap, train_fraction, seed);
        rows.push_back({point, variant_name(v), seed, "auc", r.auc});
        rows.push_back({point, variant_name(v), seed, "ap", r.ap});
      }
      LinkEvalResult rb =
          eval_link_prediction(base_reps.back(), eval_snap, train_fraction, seed);
      rows.push_back({point, variant_name(Variant::Baseline), seed, "auc", rb.auc});
      rows.push_back({point, variant_name(Variant::Baseline), seed, "ap", rb.ap});
    };

    switch (kind) {
      case SweepKind::Noise: {
        for (double r : grid) {
          DynamicGraph noisy = perturb_edges(full, r, seed + 17);
          eval_models(prefix_graph(noisy, full.T() - 1), noisy.snapshots.back(), 0.5, 0, r);
        }
        break;
      }
      case SweepKind::DataFraction: {
        // One training per seed; the downstream split shrinks per point.
        DynamicGraph train_graph = prefix_graph(full, full.T() - 1);
        DytedModel model = train(cfg, train_graph);
        RepresentationSet reps = extract_representations(model, train_graph);
        BaselineModel baseline = train_baseline(cfg, train_graph);
        std::vector<Mat> base_reps = extract_baseline(baseline, train_graph);
        for (double f : grid) {
          const double frac = std::max(0.02, 0.5 * f);
          for (Variant v : {Variant::Combine, Variant::TimeInvariant, Variant::TimeVarying}) {
            LinkEvalResult r = eval_link_prediction(link_slice(reps, v), held_out, frac, seed);
            rows.push_back({f, variant_name(v), seed, "auc", r.auc});
          }
          LinkEvalResult rb = eval_link_prediction(base_reps.back(), held_out, frac, seed);
          rows.push_back({f, variant_name(Variant::Baseline), seed, "auc", rb.auc});
        }
        break;
      }
      case SweepKind::ClassifierWidth: {
        DytedModel model = train(cfg, full);
        RepresentationSet reps = extract_representations(model, full);
        for (double width : grid) {
          for (Variant v : {Variant::Combine, Variant::TimeInvariant, Variant::TimeVarying}) {
            ProbeData pd = probe_data(reps, data.static_labels, v);
            ClassifyResult r = eval_node_classification(pd.features, pd.labels, pd.class_count,
                                                        seed, static_cast<int>(width));
            rows.push_back({width, variant_name(v), seed, "micro-f1", r.f1.micro});
          }
        }
        break;
      }
    }
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& os) {
  os << "point,variant,seed,metric,value\n";
  for (const SweepRow& r : rows)
    os << fmt("%.10g", r.point) << "," << r.variant << "," << r.seed << "," << r.metric << ","
       << fmt("%.10g", r.value) << "\n";
}

// ---- Embedding dump ----

namespace {

void write_table(const Mat& m, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ParseError("embeddings: cannot write '" + path + "'");
  char buf[32];
  for (int r = 0; r < m.rows; ++r) {
    os << r;
    for (int c = 0; c < m.cols; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", m.at(r, c));
      os << " " << buf;
    }
    os << "\n";
  }
}

Mat read_table(const std::string& path, int rows, int cols) {
  std::ifstream is(path);
  if (!is) throw ParseError("embeddings: cannot open '" + path + "'");
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    int node;
    if (!(is >> node) || node != r) throw ParseError("embeddings: bad node id in '" + path + "'");
    for (int c = 0; c < cols; ++c)
      if (!(is >> m.at(r, c))) throw ParseError("embeddings: truncated '" + path + "'");
  }
  return m;
}

}  // namespace

namespace {

std::vector<std::string> write_d_tables(const std::vector<Mat>& tables,
                                        const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> names;
  for (std::size_t t = 0; t < tables.size(); ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "d_%03zu.emb", t + 1);
    write_table(tables[t], (fs::path(out_dir) / name).string());
    names.emplace_back(name);
  }
  return names;
}

nlohmann::json read_manifest(const std::string& out_dir) {
  std::ifstream is(std::filesystem::path(out_dir) / "manifest.json");
  if (!is) throw ParseError("embeddings: cannot open manifest in '" + out_dir + "'");
  return nlohmann::json::parse(is);
}

}  // namespace

void dump_embeddings(const RepresentationSet& reps, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  write_table(reps.S, (fs::path(out_dir) / "s.emb").string());
  nlohmann::json manifest;
  manifest["kind"] = "dyted";
  manifest["s"] = "s.emb";
  manifest["node_count"] = reps.S.rows;
  manifest["dim"] = reps.S.cols;
  manifest["T"] = reps.D.size();
  manifest["d"] = write_d_tables(reps.D, out_dir);
  std::ofstream os(fs::path(out_dir) / "manifest.json");
  os << manifest.dump(2) << "\n";
}

RepresentationSet load_embeddings(const std::string& out_dir) {
  namespace fs = std::filesystem;
  nlohmann::json manifest = read_manifest(out_dir);
  if (manifest.value("kind", "dyted") != "dyted")
    throw ParseError("embeddings: '" + out_dir + "' does not hold disentangled tables");
  const int node_count = manifest["node_count"];
  const int dim = manifest["dim"];
  RepresentationSet reps;
  reps.S = read_table((fs::path(out_dir) / manifest["s"].get<std::string>()).string(),
                      node_count, dim);
  for (const auto& name : manifest["d"])
    reps.D.push_back(
        read_table((fs::path(out_dir) / name.get<std::string>()).string(), node_count, dim));
  return reps;
}

void dump_baseline_embeddings(const std::vector<Mat>& reps, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  nlohmann::json manifest;
  manifest["kind"] = "baseline";
  manifest["node_count"] = reps.front().rows;
  manifest["dim"] = reps.front().cols;
  manifest["T"] = reps.size();
  manifest["d"] = write_d_tables(reps, out_dir);
  std::ofstream os(fs::path(out_dir) / "manifest.json");
  os << manifest.dump(2) << "\n";
}

std::vector<Mat> load_baseline_embeddings(const std::string& out_dir) {
  namespace fs = std::filesystem;
  nlohmann::json manifest = read_manifest(out_dir);
  if (manifest.value("kind", "dyted") != "baseline")
    throw ParseError("embeddings: '" + out_dir + "' does not hold baseline tables");
  const int node_count = manifest["node_count"];
  const int dim = manifest["dim"];
  std::vector<Mat> reps;
  for (const auto& name : manifest["d"])
    reps.push_back(
        read_table((fs::path(out_dir) / name.get<std::string>()).string(), node_count, dim));
  return reps;
}

bool embeddings_are_baseline(const std::string& out_dir) {
  return read_manifest(out_dir).value("kind", "dyted") == "baseline";
}

ProbeData probe_data_baseline(const std::vector<Mat>& reps_per_t, const LabelTable& table,
                              bool pooled) {
  const int T = static_cast<int>(reps_per_t.size());
  const int last = T - 1;
  const int dim = reps_per_t.front().cols;
  ProbeData out;
  out.class_count = table.class_count;
  out.features = Mat(static_cast<int>(table.records.size()), dim);
  out.labels.reserve(table.records.size());
  int row = 0;
  for (const auto& rec : table.records) {
    if (pooled) {
      for (int c = 0; c < dim; ++c) {
        double s = 0.0;
        for (int t = 0; t < T; ++t) s += reps_per_t[t].at(rec.node, c);
        out.features.at(row, c) = s / T;
      }
    } else {
      const int t = table.kind == LabelTable::Kind::Static ? last : rec.t;
      for (int c = 0; c < dim; ++c) out.features.at(row, c) = reps_per_t[t].at(rec.node, c);
    }
    ++row;
    out.labels.push_back(rec.label);
  }
  return out;
}

}  // namespace dysent
