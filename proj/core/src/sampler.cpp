#include "dysent/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "dysent/errors.hpp"

namespace dysent {

namespace {

void check_p(double p, int L, const char* op) {
  if (!(p > 0.0) || !(p < 1.0))
    throw DomainError(std::string(op) + ": p must lie in (0,1), got " + std::to_string(p));
  if (L < 1) throw DomainError(std::string(op) + ": L must be >= 1, got " + std::to_string(L));
}

}  // namespace

double trunc_geom_phi(double p, int L) {
  check_p(p, L, "trunc_geom_phi");
  return 1.0 - std::pow(1.0 - p, L);
}

std::vector<double> trunc_geom_pmf(double p, int L) {
  check_p(p, L, "trunc_geom_pmf");
  const double phi = trunc_geom_phi(p, L);
  std::vector<double> f(L);
  double tail = p;  // p (1-p)^{m-1}
  for (int m = 1; m <= L; ++m) {
    f[m - 1] = tail / phi;
    tail *= 1.0 - p;
  }
  return f;
}

double trunc_geom_mean(double p, int L) {
  check_p(p, L, "trunc_geom_mean");
  const double qL = std::pow(1.0 - p, L);
  return 1.0 / p - static_cast<double>(L) * qL / (1.0 - qL);
}

double psi(double alpha, int L) {
  if (!(alpha > 0.0) || alpha > 1.0)
    throw DomainError("psi: alpha must lie in (0,1], got " + std::to_string(alpha));
  if (L < 1) throw DomainError("psi: L must be >= 1");
  return 1.0 - alpha * static_cast<double>(L) / (L + 2.0);
}

double SamplerParams::alpha() const { return 1.0 / (1.0 + std::exp(-alpha_raw)); }

ad::Var clip_mask(ad::Tape& tape, ad::Var alpha_raw, int L, double tau_g, Rng& rng,
                  bool reversed, int* hard_length) {
  using ad::Mat;
  // p = 1 - sigmoid(alpha_raw) * L/(L+2), built on the tape so the gradient
  // reaches alpha_raw through the log-probabilities.
  ad::Var alpha = tape.sigmoid(alpha_raw);
  ad::Var one = tape.constant(Mat::scalar(1.0));
  ad::Var p = tape.sub(one, tape.scale(alpha, static_cast<double>(L) / (L + 2.0)));
  ad::Var log_p = tape.log(p);
  ad::Var log_q = tape.log(tape.sub(one, p));

  // Unnormalized log pmf: log p + (m-1) log(1-p). The trunc-geom normalizer
  // is constant across m and cancels in the softmax.
  ad::Var logits{};
  for (int m = 1; m <= L; ++m) {
    ad::Var lm = m == 1 ? log_p : tape.add(log_p, tape.scale(log_q, m - 1.0));
    logits = (m == 1) ? lm : tape.concat_cols(logits, lm);
  }

  std::vector<double> noise(L);
  for (int m = 0; m < L; ++m) noise[m] = gumbel(rng);
  ad::Var noisy = tape.add(logits, tape.constant(Mat::row(noise)));

  if (hard_length) {
    // Gumbel-max: argmax over noisy logits is an exact categorical draw.
    const Mat& nv = tape.value(noisy);
    int best = 0;
    for (int m = 1; m < L; ++m)
      if (nv.d[m] > nv.d[best]) best = m;
    *hard_length = best + 1;
  }

  ad::Var k = tape.softmax_rows(tape.scale(noisy, 1.0 / tau_g));
  ad::Var mask = tape.suffix_sum_cols(k);
  return reversed ? tape.reverse_cols(mask) : mask;
}

ClipPair sample_clip_pair(ad::Tape& tape, ad::Var alpha_raw, int T, double tau_g, Rng& rng) {
  if (T < 1) throw DomainError("sample_clip_pair: T must be >= 1");
  ClipPair pair;
  pair.L = uniform_int(rng, 1, T);
  pair.t_i = uniform_int(rng, 0, T - pair.L);
  pair.t_j = pair.t_i + pair.L - 1;
  pair.mask1 = clip_mask(tape, alpha_raw, pair.L, tau_g, rng, false, &pair.m1_hard);
  pair.mask2 = clip_mask(tape, alpha_raw, pair.L, tau_g, rng, true, &pair.m2_hard);
  auto soft_len = [&](ad::Var m) {
    const ad::Mat& v = tape.value(m);
    double s = 0.0;
    for (double x : v.d) s += x;
    return s;
  };
  pair.m1_soft = soft_len(pair.mask1);
  pair.m2_soft = soft_len(pair.mask2);
  return pair;
}

ClipPair sample_clip_pair_uniform(ad::Tape& tape, int T, Rng& rng) {
  if (T < 1) throw DomainError("sample_clip_pair_uniform: T must be >= 1");
  ClipPair pair;
  pair.L = uniform_int(rng, 1, T);
  pair.t_i = uniform_int(rng, 0, T - pair.L);
  pair.t_j = pair.t_i + pair.L - 1;
  pair.m1_hard = uniform_int(rng, 1, pair.L);
  pair.m2_hard = uniform_int(rng, 1, pair.L);
  ad::Mat m1(1, pair.L), m2(1, pair.L);
  for (int j = 0; j < pair.L; ++j) {
    m1.d[j] = j < pair.m1_hard ? 1.0 : 0.0;
    m2.d[j] = j >= pair.L - pair.m2_hard ? 1.0 : 0.0;
  }
  pair.mask1 = tape.constant(m1);
  pair.mask2 = tape.constant(m2);
  pair.m1_soft = pair.m1_hard;
  pair.m2_soft = pair.m2_hard;
  return pair;
}

HardClip sample_clip_hard(int T, double alpha, Rng& rng) {
  if (T < 1) throw DomainError("sample_clip_hard: T must be >= 1");
  HardClip clip;
  clip.L = uniform_int(rng, 1, T);
  clip.t_i = uniform_int(rng, 0, T - clip.L);
  const double p = psi(alpha, clip.L);
  auto draw = [&]() {
    // Gumbel-max over the log pmf (normalizer irrelevant for the argmax).
    const double lq = std::log(1.0 - p);
    int best = 0;
    double best_score = 0.0;
    for (int m = 0; m < clip.L; ++m) {
      const double score = m * lq + gumbel(rng);
      if (m == 0 || score > best_score) {
        best = m;
        best_score = score;
      }
    }
    return best + 1;
  };
  clip.m1 = draw();
  clip.m2 = draw();
  return clip;
}

PairDistribution enumerate_pair_distribution(double p, int L) {
  check_p(p, L, "enumerate_pair_distribution");
  PairDistribution dist;
  dist.L = L;
  dist.p = p;
  const std::vector<double> f = trunc_geom_pmf(p, L);
  dist.joint.assign(L, std::vector<double>(L, 0.0));
  for (int m1 = 1; m1 <= L; ++m1)
    for (int m2 = 1; m2 <= L; ++m2) {
      const double pr = f[m1 - 1] * f[m2 - 1];
      dist.joint[m1 - 1][m2 - 1] = pr;
      if (m1 + m2 >= L + 1)
        dist.pr_overlap += pr;
      else
        dist.pr_disjoint += pr;
    }
  const double q = 1.0 - p;
  const double phi = trunc_geom_phi(p, L);
  dist.pr_overlap_closed =
      (p * L * std::pow(q, L - 1) - std::pow(q, L) + std::pow(q, 2 * L)) / (phi * phi);
  return dist;
}

PropositionReport verify_proposition(const std::vector<double>& alphas, int l_min, int l_max) {
  if (l_min < 3)
    throw DomainError("verify_proposition: the proposition requires L >= 3, got l_min = " +
                      std::to_string(l_min));
  if (l_max < l_min) throw DomainError("verify_proposition: empty length range");
  for (double a : alphas)
    if (!(a > 0.0) || a > 1.0)
      throw DomainError("verify_proposition: alpha outside (0,1]: " + std::to_string(a));

  PropositionReport report;
  for (double alpha : alphas) {
    std::vector<double> pr1(l_max - l_min + 1), pr0(l_max - l_min + 1);
    for (int l = l_min; l <= l_max; ++l) {
      PairDistribution d = enumerate_pair_distribution(psi(alpha, l), l);
      pr1[l - l_min] = d.pr_overlap;
      pr0[l - l_min] = d.pr_disjoint;
      report.max_closed_form_gap =
          std::max(report.max_closed_form_gap, std::abs(d.pr_overlap - d.pr_overlap_closed));
    }
    for (int l = l_min; l <= l_max; ++l) {
      PropositionRow row;
      row.alpha = alpha;
      row.L = l;
      // Marginals under a uniform prior over {l_min..l}.
      double m1 = 0.0, m0 = 0.0;
      for (int j = l_min; j <= l; ++j) {
        m1 += pr1[j - l_min];
        m0 += pr0[j - l_min];
      }
      row.ratio1 = m1 / m0;
      // Consecutive conditional ratios; the uniform prior cancels.
      row.ratio2_min = 1.0;
      row.ratio3_max = 1.0;
      for (int j = l_min; j < l; ++j) {
        row.ratio2_min = std::min(row.ratio2_min, pr0[j + 1 - l_min] / pr0[j - l_min]);
        row.ratio3_max = std::max(row.ratio3_max, pr1[j + 1 - l_min] / pr1[j - l_min]);
      }
      row.pass = row.ratio1 <= 1.0 && row.ratio2_min >= 1.0 && row.ratio3_max <= 1.0;
      if (!row.pass) ++report.violations;
      report.rows.push_back(row);
    }
  }
  return report;
}

void write_proposition_csv(const PropositionReport& report, std::ostream& os) {
  os << "alpha,L,ratio1,ratio2_min,ratio3_max,pass\n";
  char buf[160];
  for (const PropositionRow& r : report.rows) {
    std::snprintf(buf, sizeof(buf), "%.6g,%d,%.12g,%.12g,%.12g,%d\n", r.alpha, r.L, r.ratio1,
                  r.ratio2_min, r.ratio3_max, r.pass ? 1 : 0);
    os << buf;
  }
}

}  // namespace dysent
