#include "robustnn/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace robustnn {

int bayes_predict(const AnalyticDistribution& dist, const FeatureVector& x) {
  if (static_cast<int>(x.size()) != dist.dim) {
    throw std::invalid_argument("query dimension does not match distribution");
  }
  if (!dist.in_support(x)) {
    throw std::invalid_argument("bayes_predict: point outside the support");
  }
  return dist.eta(x) >= 0.5 ? 1 : 0;
}

AnalyticDistribution uniform_interval(std::function<double(double)> eta, std::string name) {
  AnalyticDistribution d;
  d.dim = 1;
  d.name = std::move(name);
  d.support_lo = {0.0};
  d.support_hi = {1.0};
  d.in_support = [](const FeatureVector& x) { return x[0] >= 0.0 && x[0] <= 1.0; };
  d.density = [sup = d.in_support](const FeatureVector& x) { return sup(x) ? 1.0 : 0.0; };
  d.eta = [fn = std::move(eta)](const FeatureVector& x) { return fn(x[0]); };
  d.ball_mass = [](const FeatureVector& x, double r) {
    const double lo = std::max(0.0, x[0] - r);
    const double hi = std::min(1.0, x[0] + r);
    return std::max(0.0, hi - lo);
  };
  d.sample_x = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return FeatureVector{u(rng)};
  };
  return d;
}

namespace {

struct Pt {
  double x, y;
};

double cross(const Pt& a, const Pt& b) { return a.x * b.y - a.y * b.x; }
double dot(const Pt& a, const Pt& b) { return a.x * b.x + a.y * b.y; }
double norm2(const Pt& a) { return a.x * a.x + a.y * a.y; }

// Signed circular-sector area swept from direction a to direction b around the
// origin, for a disc of radius r. The subtended angle of a straight segment
// viewed from the origin is always below pi, so the shortest signed angle is
// the right one.
double sector(const Pt& a, const Pt& b, double r) {
  return 0.5 * r * r * std::atan2(cross(a, b), dot(a, b));
}

// Signed area contribution of one directed polygon edge (a -> b) to the
// intersection of the polygon with the disc of radius r centered at the
// origin (Green's theorem, triangle fan from the origin with circular
// sectors replacing the parts of the fan outside the disc).
double edge_area(const Pt& a, const Pt& b, double r) {
  const double r2 = r * r;
  const bool a_in = norm2(a) <= r2;
  const bool b_in = norm2(b) <= r2;
  if (a_in && b_in) return 0.5 * cross(a, b);

  // Intersect the segment a + t (b - a), t in [0, 1], with the circle.
  const Pt d{b.x - a.x, b.y - a.y};
  const double qa = norm2(d);
  const double qb = dot(a, d);
  const double qc = norm2(a) - r2;
  const double disc = qb * qb - qa * qc;
  double t1 = -1.0, t2 = -1.0;
  if (disc > 0.0 && qa > 0.0) {
    const double s = std::sqrt(disc);
    t1 = (-qb - s) / qa;
    t2 = (-qb + s) / qa;
  }

  auto at = [&](double t) { return Pt{a.x + t * d.x, a.y + t * d.y}; };

  if (!a_in && !b_in) {
    if (t1 > 0.0 && t2 < 1.0 && t1 < t2) {
      const Pt p1 = at(t1);
      const Pt p2 = at(t2);
      return sector(a, p1, r) + 0.5 * cross(p1, p2) + sector(p2, b, r);
    }
    return sector(a, b, r);  // the segment misses the disc
  }
  if (a_in) {
    // Leaves the disc at t2.
    const Pt p = at(std::clamp(t2, 0.0, 1.0));
    return 0.5 * cross(a, p) + sector(p, b, r);
  }
  // Enters the disc at t1.
  const Pt p = at(std::clamp(t1, 0.0, 1.0));
  return sector(a, p, r) + 0.5 * cross(p, b);
}

}  // namespace

double disc_unit_square_area(double cx, double cy, double r) {
  if (r < 0.0) throw std::invalid_argument("radius must be >= 0");
  if (r == 0.0) return 0.0;
  // Square vertices counterclockwise, translated so the disc sits at the origin.
  const Pt v[4] = {{0.0 - cx, 0.0 - cy}, {1.0 - cx, 0.0 - cy}, {1.0 - cx, 1.0 - cy}, {0.0 - cx, 1.0 - cy}};
  double area = 0.0;
  for (int i = 0; i < 4; ++i) area += edge_area(v[i], v[(i + 1) % 4], r);
  // Rounding can leave a tiny signed residue; the true value lies in [0, 1].
  return std::clamp(area, 0.0, 1.0);
}

AnalyticDistribution uniform_square(std::function<double(double, double)> eta, std::string name) {
  AnalyticDistribution d;
  d.dim = 2;
  d.name = std::move(name);
  d.support_lo = {0.0, 0.0};
  d.support_hi = {1.0, 1.0};
  d.in_support = [](const FeatureVector& x) {
    return x[0] >= 0.0 && x[0] <= 1.0 && x[1] >= 0.0 && x[1] <= 1.0;
  };
  d.density = [sup = d.in_support](const FeatureVector& x) { return sup(x) ? 1.0 : 0.0; };
  d.eta = [fn = std::move(eta)](const FeatureVector& x) { return fn(x[0], x[1]); };
  d.ball_mass = [](const FeatureVector& x, double r) {
    return disc_unit_square_area(x[0], x[1], r);
  };
  d.sample_x = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double a = u(rng);
    const double b = u(rng);
    return FeatureVector{a, b};
  };
  return d;
}

}  // namespace robustnn
