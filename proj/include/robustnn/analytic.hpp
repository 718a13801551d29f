#pragma once

#include <functional>
#include <random>
#include <string>

#include "robustnn/geometry.hpp"

namespace robustnn {

// A synthetic data distribution with an evaluable marginal density, posterior
// class probability eta(x) = P(y = 1 | x), exact closed ball mass, and a
// deterministic sampler. Used by the evaluation oracles, which need ground
// truth no empirical sample can provide.
struct AnalyticDistribution {
  int dim = 1;
  std::string name;
  std::function<double(const FeatureVector&)> density;
  std::function<double(const FeatureVector&)> eta;
  std::function<bool(const FeatureVector&)> in_support;
  // Probability mass of the closed euclidean ball B(x, r).
  std::function<double(const FeatureVector&, double)> ball_mass;
  std::function<FeatureVector(std::mt19937_64&)> sample_x;
  // Axis-aligned bounding box of the support, for grid iteration.
  FeatureVector support_lo, support_hi;
};

// Label by thresholding the posterior: 1 iff eta(x) >= 1/2.
// Throws std::invalid_argument outside the support.
int bayes_predict(const AnalyticDistribution& dist, const FeatureVector& x);

// Uniform marginal on [0, 1] with a caller-supplied posterior.
AnalyticDistribution uniform_interval(std::function<double(double)> eta, std::string name);
// Uniform marginal on [0, 1]^2 with a caller-supplied posterior.
AnalyticDistribution uniform_square(std::function<double(double, double)> eta, std::string name);

// Exact area of the intersection of the disc centered (cx, cy) with radius r
// and the unit square [0, 1]^2. Exposed for direct testing against quadrature.
double disc_unit_square_area(double cx, double cy, double r);

}  // namespace robustnn
