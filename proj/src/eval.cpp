#include "robustnn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace robustnn {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

RobustnessCertificate certify_1nn_radius(const KdTree& index, const FeatureVector& x) {
  const LabeledDataset& data = index.data();
  const Neighbor nn = index.nearest(x, 1).front();
  const int predicted = data.label(nn.id);

  RobustnessCertificate cert;
  cert.predicted = predicted;
  const double d_same_sq = detail::squared_distance(x, data.point(nn.id));

  double d_opp = kInf;
  double upper = kInf;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.label(i) == predicted) continue;
    const double sq = detail::squared_distance(x, data.point(i));
    d_opp = std::min(d_opp, std::sqrt(sq));
    // Distance from x to the bisector hyperplane between the nearest neighbor
    // and this opposite point; crossing it is the cheapest way to make the
    // opposite point the new nearest neighbor of the pair.
    const double pair_gap = euclidean_distance(data.point(nn.id), data.point(i));
    if (pair_gap > 0.0) {
      upper = std::min(upper, (sq - d_same_sq) / (2.0 * pair_gap));
    }
  }
  if (d_opp == kInf) {
    cert.lower = kInf;
    cert.upper = kInf;
    return cert;
  }
  cert.lower = std::max(0.0, (d_opp - nn.dist) / 2.0);
  cert.upper = std::max(upper, cert.lower);
  return cert;
}

std::vector<RobustnessCertificate> batch_certify(const KdTree& index, const LabeledDataset& test,
                                                 Exec exec) {
  if (test.dim() != index.data().dim()) {
    throw std::invalid_argument("test dimension does not match index dimension");
  }
  std::vector<RobustnessCertificate> out(test.size());
  const std::int64_t n = static_cast<std::int64_t>(test.size());
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t i = 0; i < n; ++i) out[i] = certify_1nn_radius(index, test.point(i));
  } else {
    for (std::int64_t i = 0; i < n; ++i) out[i] = certify_1nn_radius(index, test.point(i));
  }
  return out;
}

double empirical_robust_accuracy(const PredictFn& predict,
                                 const std::vector<const Attack*>& attacks, double radius,
                                 const LabeledDataset& test, Exec exec) {
  if (test.empty()) throw std::invalid_argument("test set must be nonempty");
  if (!(radius >= 0.0)) throw std::invalid_argument("radius must be >= 0");
  const std::int64_t n = static_cast<std::int64_t>(test.size());
  std::vector<char> ok(test.size(), 0);
  std::string error;
  auto body = [&](std::int64_t i) {
    const LabeledExample& ex = test[i];
    if (predict(ex.x) != ex.y) return;
    for (const Attack* a : attacks) {
      if (predict(a->perturb(ex.x, ex.y, radius)) != ex.y) return;
    }
    ok[i] = 1;
  };
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 8)
    for (std::int64_t i = 0; i < n; ++i) {
      // Exceptions must not cross the parallel region.
      try {
        body(i);
      } catch (const std::exception& e) {
#pragma omp critical
        if (error.empty()) error = e.what();
      }
    }
  } else {
    for (std::int64_t i = 0; i < n; ++i) body(i);
  }
  if (!error.empty()) throw std::runtime_error(error);
  std::size_t hits = 0;
  for (char c : ok) hits += c;
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

AstutenessEstimate astuteness_estimate(const KdTree& nn_index, double radius,
                                       const LabeledDataset& test, Exec exec) {
  if (!(radius >= 0.0)) throw std::invalid_argument("radius must be >= 0");
  const auto certs = batch_certify(nn_index, test, exec);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (certs[i].predicted == test.label(i) && certs[i].lower >= radius) ++hits;
  }
  return AstutenessEstimate{static_cast<double>(hits) / static_cast<double>(test.size()), true};
}

AstutenessEstimate astuteness_estimate(const PredictFn& predict,
                                       const std::vector<const Attack*>& attacks, double radius,
                                       const LabeledDataset& test, Exec exec) {
  return AstutenessEstimate{empirical_robust_accuracy(predict, attacks, radius, test, exec),
                            false};
}

double probability_radius(const AnalyticDistribution& dist, const FeatureVector& x, double p) {
  if (static_cast<int>(x.size()) != dist.dim) {
    throw std::invalid_argument("query dimension does not match distribution");
  }
  if (!(p >= 0.0) || !(p <= 1.0)) throw std::invalid_argument("p must lie in [0, 1]");
  if (p == 0.0) return 0.0;
  // Mass is reachable within the distance to the farthest support corner.
  double reach = 0.0;
  for (int a = 0; a < dist.dim; ++a) {
    const double far = std::max(std::abs(x[a] - dist.support_lo[a]),
                                std::abs(x[a] - dist.support_hi[a]));
    reach += far * far;
  }
  reach = std::sqrt(reach) + 1.0;
  const auto enough = [&](double r) { return dist.ball_mass(x, r) >= p - 1e-12; };
  if (!enough(reach)) {
    throw std::runtime_error("requested mass exceeds the total reachable probability");
  }
  double lo = 0.0, hi = reach;
  // ~60 halvings take any support-scale bracket far below the 1e-9 tolerance.
  for (int it = 0; it < 200 && hi - lo > 1e-9; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (enough(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

namespace {

// Posterior condition at one grid point, strict on the margin.
bool posterior_side_ok(const AnalyticDistribution& dist, const FeatureVector& q, double margin,
                       int sign) {
  const double e = dist.eta(q);
  return sign > 0 ? e > 0.5 + margin : e < 0.5 - margin;
}

// Enumerate grid offsets of pitch h covering the ball of radius `rad` around
// `center` (open if `open_ball`, closed otherwise), clipped to the support,
// and apply `fn`; stops early when fn returns false.
bool for_each_ball_point(const AnalyticDistribution& dist, const FeatureVector& center,
                         double rad, double h, bool open_ball,
                         const std::function<bool(const FeatureVector&)>& fn) {
  const auto inside = [&](double off_norm) {
    return open_ball ? off_norm < rad : off_norm <= rad;
  };
  if (rad == 0.0 || h <= 0.0) {
    return !dist.in_support(center) || fn(center);
  }
  const int steps = static_cast<int>(std::floor(rad / h)) + 1;
  if (dist.dim == 1) {
    for (int i = -steps; i <= steps; ++i) {
      const double off = i * h;
      if (!inside(std::abs(off))) continue;
      const FeatureVector q{center[0] + off};
      if (!dist.in_support(q)) continue;
      if (!fn(q)) return false;
    }
    return true;
  }
  for (int i = -steps; i <= steps; ++i) {
    for (int j = -steps; j <= steps; ++j) {
      const double ox = i * h, oy = j * h;
      if (!inside(std::sqrt(ox * ox + oy * oy))) continue;
      const FeatureVector q{center[0] + ox, center[1] + oy};
      if (!dist.in_support(q)) continue;
      if (!fn(q)) return false;
    }
  }
  return true;
}

}  // namespace

InteriorCheck in_strict_interior(const AnalyticDistribution& dist, const FeatureVector& x,
                                 double r, double margin, double p, int sign,
                                 double resolution_divisor) {
  if (dist.dim != 1 && dist.dim != 2) {
    throw std::invalid_argument("interior check supports 1-D and 2-D distributions only");
  }
  if (static_cast<int>(x.size()) != dist.dim) {
    throw std::invalid_argument("query dimension does not match distribution");
  }
  if (!(r >= 0.0)) throw std::invalid_argument("radius must be >= 0");
  if (!(margin >= 0.0) || !(margin < 0.5)) throw std::invalid_argument("margin must lie in [0, 1/2)");
  if (!(p >= 0.0) || !(p <= 1.0)) throw std::invalid_argument("p must lie in [0, 1]");
  if (sign != 1 && sign != -1) throw std::invalid_argument("sign must be +1 or -1");
  if (!(resolution_divisor > 0.0)) throw std::invalid_argument("resolution divisor must be > 0");

  InteriorCheck result;
  result.resolution = r / resolution_divisor;
  if (!dist.in_support(x)) return result;

  const bool ok = for_each_ball_point(
      dist, x, r, result.resolution, /*open_ball=*/true, [&](const FeatureVector& xp) {
        const double rp = p == 0.0 ? 0.0 : probability_radius(dist, xp, p);
        const double hp = rp / resolution_divisor;
        return for_each_ball_point(dist, xp, rp, hp, /*open_ball=*/false,
                                   [&](const FeatureVector& xpp) {
                                     return posterior_side_ok(dist, xpp, margin, sign);
                                   });
      });
  result.inside = ok;
  return result;
}

TheoryBounds theory_bounds(std::size_t n, int d, double fail_prob, double margin, int k, double p,
                           const TheoryConstants& consts) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (d < 1) throw std::invalid_argument("d must be >= 1");
  if (!(fail_prob > 0.0)) throw std::invalid_argument("fail_prob must be > 0");
  if (!(margin > 0.0)) throw std::invalid_argument("margin must be > 0");
  if (k < 0) throw std::invalid_argument("k must be >= 0");
  if (!(p >= 0.0)) throw std::invalid_argument("p must be >= 0");

  const double nn = static_cast<double>(n);
  const double dd = static_cast<double>(d);
  const double log_term = dd * std::log(nn) + std::log(1.0 / fail_prob);

  TheoryBounds b;
  b.k_n = 3.0 * std::log(2.0 * nn / fail_prob) / (margin * margin);
  b.a_n = consts.c0 / nn * log_term;
  b.b_n = consts.c0 * std::sqrt(log_term / nn);
  b.beta_n = std::sqrt(4.0 / nn * ((dd + 1.0) * std::log(2.0 * nn) + std::log(8.0 / fail_prob)));
  b.p_n = b.k_n / nn + consts.c0 / nn * (log_term + std::sqrt(b.k_n * log_term));
  const double tw = 2.0 * b.beta_n + b.b_n;
  b.k_min_uniform =
      nn * (tw + std::sqrt(tw * tw + 2.0 * margin * (2.0 * b.beta_n * b.beta_n + b.a_n))) / margin;
  b.k_min_rate = consts.c1 * std::sqrt(dd * nn * std::log(nn) + nn * std::log(1.0 / fail_prob)) /
                 margin;
  b.p_min_rate = k > 0 ? (static_cast<double>(k) / nn) *
                             (1.0 + consts.c2 * std::sqrt(log_term / static_cast<double>(k)))
                       : 0.0;
  const double dp1 = dd + 1.0;
  b.c_dk = 4.0 * dp1 +
           std::sqrt(16.0 * dp1 * dp1 + 8.0 * (std::log(8.0 / fail_prob) + k + 1.0));
  if (p > 0.0) {
    const double c4 = b.c_dk * b.c_dk * b.c_dk * b.c_dk;
    const double kp1 = static_cast<double>(k) + 1.0;
    b.n_min = std::max(1e4, c4 / (kp1 * kp1 * p * p));
  } else {
    b.n_min = kInf;
  }
  return b;
}

McEstimate bayes_astuteness(const AnalyticDistribution& dist, double r, std::size_t mc_samples,
                            std::uint64_t seed, Exec exec) {
  if (mc_samples == 0) throw std::invalid_argument("mc_samples must be >= 1");
  if (!(r >= 0.0)) throw std::invalid_argument("radius must be >= 0");
  // Draw every sample up front with one generator so the sample sequence is
  // identical no matter how the evaluation below is scheduled.
  std::mt19937_64 rng(seed);
  std::vector<FeatureVector> xs(mc_samples);
  for (auto& x : xs) x = dist.sample_x(rng);

  std::vector<double> vals(mc_samples, 0.0);
  const std::int64_t n = static_cast<std::int64_t>(mc_samples);
  auto body = [&](std::int64_t i) {
    const double e = dist.eta(xs[i]);
    if (e > 0.5) {
      if (in_strict_interior(dist, xs[i], r, 0.0, 0.0, +1).inside) vals[i] = e;
    } else if (e < 0.5) {
      if (in_strict_interior(dist, xs[i], r, 0.0, 0.0, -1).inside) vals[i] = 1.0 - e;
    }
    // eta == 1/2 exactly can sit in neither strict interior.
  };
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 64)
    for (std::int64_t i = 0; i < n; ++i) body(i);
  } else {
    for (std::int64_t i = 0; i < n; ++i) body(i);
  }

  double mean = 0.0;
  for (double v : vals) mean += v;
  mean /= static_cast<double>(mc_samples);
  double var = 0.0;
  for (double v : vals) var += (v - mean) * (v - mean);
  const double denom = static_cast<double>(mc_samples) *
                       std::max<double>(1.0, static_cast<double>(mc_samples) - 1.0);
  return McEstimate{mean, std::sqrt(var / denom), mc_samples};
}

}  // namespace robustnn
