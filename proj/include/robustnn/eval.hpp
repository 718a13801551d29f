#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "robustnn/analytic.hpp"
#include "robustnn/attacks.hpp"
#include "robustnn/exec.hpp"
#include "robustnn/geometry.hpp"

namespace robustnn {

struct RobustnessCertificate {
  int predicted = 0;
  // No perturbation of L2 norm below `lower` can change the 1-NN prediction.
  double lower = 0.0;
  // Distance to the cheapest known flip witness (a bisector crossing);
  // clamped so lower <= upper always holds. Both are +inf when the training
  // data contains a single class.
  double upper = 0.0;
};

// Certified radius interval for the 1-NN rule on the indexed training set:
// lower = max(0, (d_opp - d_same) / 2); upper = the smallest distance from x
// to the bisector hyperplane between its nearest neighbor and any
// opposite-label training point.
RobustnessCertificate certify_1nn_radius(const KdTree& index, const FeatureVector& x);

std::vector<RobustnessCertificate> batch_certify(const KdTree& index, const LabeledDataset& test,
                                                 Exec exec = Exec::Parallel);

using PredictFn = std::function<int(const FeatureVector&)>;

// Fraction of test points the classifier gets right both clean and under
// every listed attack at the given radius. Equals clean accuracy at r = 0.
double empirical_robust_accuracy(const PredictFn& predict,
                                 const std::vector<const Attack*>& attacks, double radius,
                                 const LabeledDataset& test, Exec exec = Exec::Parallel);

struct AstutenessEstimate {
  double value = 0.0;
  // True when the value is certificate-backed (a lower bound on robust
  // accuracy against any attack); false for the empirical fallback.
  bool certified = false;
};

// Certificate-backed astuteness of the 1-NN rule: fraction of test points
// predicted correctly with certified lower radius >= r.
AstutenessEstimate astuteness_estimate(const KdTree& nn_index, double radius,
                                       const LabeledDataset& test, Exec exec = Exec::Parallel);
// Fallback for classifiers without certificates: empirical robust accuracy,
// flagged as such.
AstutenessEstimate astuteness_estimate(const PredictFn& predict,
                                       const std::vector<const Attack*>& attacks, double radius,
                                       const LabeledDataset& test, Exec exec = Exec::Parallel);

// Smallest r with ball mass >= p, by bisection on the closed-form mass to
// absolute tolerance 1e-9. p = 0 returns 0. Throws std::runtime_error when p
// exceeds the reachable mass.
double probability_radius(const AnalyticDistribution& dist, const FeatureVector& x, double p);

struct InteriorCheck {
  bool inside = false;
  // Grid pitch used for the check. The check is conservative: points within
  // one pitch of the region boundary can be misjudged.
  double resolution = 0.0;
};

// Deterministic grid check (1-D and 2-D) of strict-interior membership:
// with sign = +1, every x' in the open ball B(x, r) intersected with the
// support must satisfy eta(x'') > 1/2 + margin for all x'' within
// probability_radius(x', p) of x'; sign = -1 checks eta < 1/2 - margin.
// x itself is always part of the grid, so r = 0 degenerates to a pointwise
// posterior test. Returns inside = false when x is outside the support.
InteriorCheck in_strict_interior(const AnalyticDistribution& dist, const FeatureVector& x,
                                 double r, double margin, double p, int sign,
                                 double resolution_divisor = 50.0);

struct TheoryConstants {
  double c0 = 1.0;
  double c1 = 1.0;
  double c2 = 1.0;
};

// Closed-form generalization quantities for sample size n, dimension d,
// failure probability delta (fail_prob), confidence margin Delta (margin),
// and the caller's neighbor count k / mass level p. Natural logs throughout;
// fail_prob is accepted on (0, inf) so degenerate arithmetic cases evaluate.
struct TheoryBounds {
  double k_n = 0.0;     // confident-vote size 3 ln(2n/delta) / Delta^2 (real-valued)
  double a_n = 0.0;     // (C0/n) (d ln n + ln(1/delta))
  double b_n = 0.0;     // C0 sqrt((d ln n + ln(1/delta)) / n)
  double beta_n = 0.0;  // sqrt((4/n)((d+1) ln(2n) + ln(8/delta)))
  double p_n = 0.0;     // k_n/n + (C0/n)(d ln n + ln(1/delta) + sqrt(k_n (d ln n + ln(1/delta))))
  // Smallest k meeting the uniform-convergence condition:
  // n (2 beta + b + sqrt((2 beta + b)^2 + 2 Delta (2 beta^2 + a))) / Delta.
  double k_min_uniform = 0.0;
  // Growth-condition forms with caller-supplied constants:
  double k_min_rate = 0.0;  // C1 sqrt(d n ln n + n ln(1/delta)) / Delta
  double p_min_rate = 0.0;  // (k/n)(1 + C2 sqrt((d ln n + ln(1/delta)) / k))
  double c_dk = 0.0;        // 4(d+1) + sqrt(16(d+1)^2 + 8(ln(8/delta) + k + 1))
  double n_min = 0.0;       // max(1e4, c_dk^4 / ((k+1)^2 p^2))
};

TheoryBounds theory_bounds(std::size_t n, int d, double fail_prob, double margin, int k, double p,
                           const TheoryConstants& consts = {});

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

// Monte Carlo estimate of the astuteness of the posterior-threshold rule at
// radius r: E[eta(x) 1(x in the positive strict interior at margin 0, p 0)] +
// E[(1 - eta(x)) 1(x in the negative one)]. Deterministic per seed; the
// parallel path evaluates samples concurrently and reduces in sample order.
McEstimate bayes_astuteness(const AnalyticDistribution& dist, double r, std::size_t mc_samples,
                            std::uint64_t seed, Exec exec = Exec::Parallel);

}  // namespace robustnn
