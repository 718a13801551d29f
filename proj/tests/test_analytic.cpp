#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <doctest.h>

#include "robustnn/analytic.hpp"

using namespace robustnn;

namespace {

// Midpoint-rule quadrature of the disc/unit-square overlap, the independent
// check for the closed-form geometry.
double disc_square_quadrature(double cx, double cy, double r, int cells = 2000) {
  const double h = 1.0 / cells;
  const double r2 = r * r;
  double area = 0.0;
  for (int i = 0; i < cells; ++i) {
    const double x = (i + 0.5) * h;
    for (int j = 0; j < cells; ++j) {
      const double y = (j + 0.5) * h;
      const double dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy <= r2) area += h * h;
    }
  }
  return area;
}

}  // namespace

TEST_CASE("bayes prediction thresholds the posterior") {
  const auto ramp = uniform_interval([](double x) { return x; }, "ramp");
  CHECK(bayes_predict(ramp, {0.2}) == 0);
  CHECK(bayes_predict(ramp, {0.5}) == 1);  // ties go to class 1
  CHECK(bayes_predict(ramp, {0.9}) == 1);
  CHECK_THROWS_AS(bayes_predict(ramp, {1.5}), std::invalid_argument);
  CHECK_THROWS_AS(bayes_predict(ramp, {-0.01}), std::invalid_argument);
  CHECK_THROWS_AS(bayes_predict(ramp, {0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("interval ball mass is the clipped overlap length") {
  const auto d = uniform_interval([](double x) { return x; }, "ramp");
  CHECK(d.ball_mass({0.5}, 0.2) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(d.ball_mass({0.0}, 0.2) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(d.ball_mass({1.0}, 0.3) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(d.ball_mass({0.5}, 2.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(d.ball_mass({0.5}, 0.0) == 0.0);
  CHECK(d.ball_mass({3.0}, 0.5) == 0.0);  // ball entirely outside
  CHECK(d.density({0.5}) == 1.0);
  CHECK(d.density({1.5}) == 0.0);
  CHECK(d.in_support({0.0}));
  CHECK_FALSE(d.in_support({1.0000001}));
}

TEST_CASE("disc and unit square overlap: closed form cases") {
  constexpr double pi = std::numbers::pi;
  // Disc well inside the square: full disc area.
  CHECK(disc_unit_square_area(0.5, 0.5, 0.25) == doctest::Approx(pi * 0.0625).epsilon(1e-12));
  // Disc swallowing the square: full square.
  CHECK(disc_unit_square_area(0.5, 0.5, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(disc_unit_square_area(-3.0, 40.0, 41.0) == doctest::Approx(1.0).epsilon(1e-9));
  // Disc centered on an edge midpoint: half disc.
  CHECK(disc_unit_square_area(0.0, 0.5, 0.25) == doctest::Approx(pi * 0.0625 / 2).epsilon(1e-12));
  // Disc centered on a corner: quarter disc.
  CHECK(disc_unit_square_area(0.0, 0.0, 0.25) == doctest::Approx(pi * 0.0625 / 4).epsilon(1e-12));
  // Disc entirely outside.
  CHECK(disc_unit_square_area(2.0, 2.0, 0.5) == 0.0);
  CHECK(disc_unit_square_area(0.5, 0.5, 0.0) == 0.0);
  CHECK_THROWS_AS(disc_unit_square_area(0.5, 0.5, -0.1), std::invalid_argument);

  // Disc overlapping exactly one edge: circular segment must be subtracted.
  // Center (0.1, 0.5), r = 0.2: the chord at x = 0 cuts off a segment of
  // half-angle acos(0.5) = pi/3; segment area = r^2 (theta - sin theta cos theta).
  const double theta = std::acos(0.5);
  const double segment = 0.2 * 0.2 * (theta - std::sin(theta) * std::cos(theta));
  CHECK(disc_unit_square_area(0.1, 0.5, 0.2) ==
        doctest::Approx(pi * 0.04 - segment).epsilon(1e-12));
}

TEST_CASE("disc and unit square overlap matches quadrature") {
  const struct {
    double cx, cy, r;
  } cases[] = {
      {0.5, 0.5, 0.3},   {0.0, 0.0, 0.7},  {0.9, 0.2, 0.35}, {1.2, 0.5, 0.4},
      {-0.2, -0.2, 0.5}, {0.5, 1.05, 0.2}, {0.5, 0.5, 0.75}, {0.98, 0.98, 0.1},
  };
  for (const auto& c : cases) {
    const double exact = disc_unit_square_area(c.cx, c.cy, c.r);
    const double approx = disc_square_quadrature(c.cx, c.cy, c.r);
    // Midpoint quadrature on a 2000^2 grid resolves the boundary to ~1e-3.
    CHECK(std::abs(exact - approx) <= 2.5e-3);
  }
}

TEST_CASE("disc and unit square overlap agrees with vectorized monte carlo") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> center(-0.3, 1.3);
  std::uniform_real_distribution<double> radius(0.01, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int iter = 0; iter < 20; ++iter) {
    const double cx = center(rng), cy = center(rng), r = radius(rng);
    const double exact = disc_unit_square_area(cx, cy, r);
    int hits = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double dx = unit(rng) - cx, dy = unit(rng) - cy;
      if (dx * dx + dy * dy <= r * r) ++hits;
    }
    const double mc = static_cast<double>(hits) / n;
    const double se = std::sqrt(std::max(mc * (1 - mc), 1e-6) / n);
    CHECK(std::abs(exact - mc) <= 6.0 * se + 1e-4);
  }
}

TEST_CASE("square distribution wires the disc overlap as its ball mass") {
  const auto d = uniform_square([](double x, double) { return x; }, "sq");
  CHECK(d.dim == 2);
  CHECK(d.ball_mass({0.5, 0.5}, 0.25) == disc_unit_square_area(0.5, 0.5, 0.25));
  CHECK(d.ball_mass({0.1, 0.9}, 0.4) == disc_unit_square_area(0.1, 0.9, 0.4));
  CHECK(d.eta({0.3, 0.8}) == 0.3);
  CHECK(d.in_support({1.0, 1.0}));
  CHECK_FALSE(d.in_support({1.0, 1.1}));
  CHECK(d.density({0.2, 0.2}) == 1.0);
  CHECK(d.density({-0.2, 0.2}) == 0.0);
  CHECK(bayes_predict(d, {0.7, 0.1}) == 1);
  CHECK(bayes_predict(d, {0.3, 0.1}) == 0);
}

TEST_CASE("samplers stay inside the support and mix both coordinates") {
  const auto sq = uniform_square([](double, double) { return 0.5; }, "sq");
  std::mt19937_64 rng(5);
  double mx = 0.0, my = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const FeatureVector x = sq.sample_x(rng);
    REQUIRE(x.size() == 2);
    CHECK(sq.in_support(x));
    mx += x[0];
    my += x[1];
  }
  CHECK(mx / n == doctest::Approx(0.5).epsilon(0.02));
  CHECK(my / n == doctest::Approx(0.5).epsilon(0.02));
}
