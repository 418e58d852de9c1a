#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "dysent/rng.hpp"
#include "dysent/tape.hpp"

namespace dysent {

// ---- Truncated geometric distribution over m in {1..L} ----

// Normalizer Phi(L) = sum_{m=1..L} p (1-p)^{m-1} = 1 - (1-p)^L.
double trunc_geom_phi(double p, int L);

// pmf(m) = p (1-p)^{m-1} / Phi(L). Throws DomainError for p outside (0,1)
// or L < 1.
std::vector<double> trunc_geom_pmf(double p, int L);

// Closed form 1/p - L (1-p)^L / (1 - (1-p)^L).
double trunc_geom_mean(double p, int L);

// Success probability schedule: psi(L) = 1 - alpha L / (L + 2), decreasing
// in L and always >= 2/(L+2). Requires 0 < alpha <= 1.
double psi(double alpha, int L);

// ---- Differentiable bidirectional clip sampling ----

struct SamplerParams {
  double alpha_raw = 0.0;  // alpha = sigmoid(alpha_raw)
  double tau_g = 0.01;     // Gumbel-softmax temperature

  double alpha() const;
};

// Two soft-masked temporal clips over the window [t_i, t_j]. Positions are
// 0-based; t_j = t_i + L - 1. mask1/mask2 are 1 x L rows on the tape:
// mask1 decays from the start of the window, mask2 grows toward its end.
struct ClipPair {
  int t_i = 0;
  int t_j = 0;
  int L = 1;
  ad::Var mask1, mask2;
  int m1_hard = 1, m2_hard = 1;      // Gumbel-max sampled lengths
  double m1_soft = 0, m2_soft = 0;   // expected length = sum of mask entries
};

// Builds the Gumbel-softmax length vector for one clip and turns it into a
// prefix mask by suffix summation. `alpha_raw` must be a tracked 1x1 leaf;
// the gradient path to it runs through the log-probabilities.
ad::Var clip_mask(ad::Tape& tape, ad::Var alpha_raw, int L, double tau_g, Rng& rng,
                  bool reversed, int* hard_length);

// Draws L ~ U{1..T}, t_i uniform over valid starts, then both masks.
ClipPair sample_clip_pair(ad::Tape& tape, ad::Var alpha_raw, int T, double tau_g, Rng& rng);

// Ablation: clip lengths uniform on {1..L}, masks are constant hard
// indicators with no gradient path.
ClipPair sample_clip_pair_uniform(ad::Tape& tape, int T, Rng& rng);

// Plain (untracked) draw of the hard lengths, for statistics.
struct HardClip {
  int L = 1, t_i = 0, m1 = 1, m2 = 1;
};
HardClip sample_clip_hard(int T, double alpha, Rng& rng);

// ---- Exact oracles for the overlap proposition ----

// Brute-force joint law of (m1, m2) plus overlap probabilities. Two clips
// in a window of length L overlap iff m1 + m2 >= L + 1.
struct PairDistribution {
  int L = 1;
  double p = 0.5;
  std::vector<std::vector<double>> joint;  // joint[m1-1][m2-1]
  double pr_overlap = 0.0;                 // enumerated Pr(X=1)
  double pr_disjoint = 0.0;                // enumerated Pr(X=0)
  double pr_overlap_closed = 0.0;          // closed form
};
PairDistribution enumerate_pair_distribution(double p, int L);

// Checks, for each alpha and each range {l_min..l}, the three sampling
// inequalities: Pr(X=1)/Pr(X=0) <= 1 under a uniform L prior, the
// disjoint-conditional length ratio >= 1, and the overlap-conditional
// length ratio <= 1. p = psi(alpha, l) per length. Requires l_min >= 3.
struct PropositionRow {
  double alpha = 0.0;
  int L = 0;              // row covers the range {l_min..L}
  double ratio1 = 0.0;    // marginal Pr(X=1)/Pr(X=0)
  double ratio2_min = 1.0;
  double ratio3_max = 1.0;
  bool pass = false;
};

struct PropositionReport {
  std::vector<PropositionRow> rows;
  int violations = 0;
  double max_closed_form_gap = 0.0;  // max |enumeration - closed form|
};

PropositionReport verify_proposition(const std::vector<double>& alphas, int l_min, int l_max);

// CSV with header alpha,L,ratio1,ratio2_min,ratio3_max,pass.
void write_proposition_csv(const PropositionReport& report, std::ostream& os);

}  // namespace dysent
