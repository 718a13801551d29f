#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "robustnn/datasets.hpp"
#include "robustnn/eval.hpp"

using namespace robustnn;

namespace {

FeatureVector random_point(std::mt19937_64& rng, int d) {
  std::uniform_real_distribution<double> real(-1.0, 1.0);
  FeatureVector x(d);
  for (double& v : x) v = real(rng);
  return x;
}

}  // namespace

TEST_CASE("certificate interval on a two-point line") {
  LabeledDataset data(1);
  data.add({0.0}, 0);
  data.add({1.0}, 1);
  const KdTree index(data);

  // At x = 0.2: same-label distance 0.2, opposite 0.8; the prediction flips
  // at the bisector 0.5, so certified lower (0.8 - 0.2)/2 = 0.3 and the
  // cheapest flip witness is 0.3 away as well.
  const auto cert = certify_1nn_radius(index, {0.2});
  CHECK(cert.predicted == 0);
  CHECK(cert.lower == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(cert.upper == doctest::Approx(0.3).epsilon(1e-15));

  // Exactly between the two: zero certified radius.
  const auto mid = certify_1nn_radius(index, {0.5});
  CHECK(mid.lower == 0.0);
  CHECK(mid.upper == doctest::Approx(0.0).epsilon(1e-15));

  CHECK_THROWS_AS(certify_1nn_radius(index, {0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("certificate bounds against direction probing") {
  // lower: dense direction probing strictly inside it never flips.
  // upper: it equals the smallest bisector distance recomputed quadratically,
  // and stepping just past it along that bisector's normal makes the opposite
  // point strictly closer than the original nearest neighbor.
  std::mt19937_64 rng(71);
  const LabeledDataset data = gen_halfmoon({.n = 60, .sigma = 0.25, .seed = 19});
  const KdTree index(data);
  const auto shared = std::make_shared<const LabeledDataset>(data);
  const KnnClassifier nn(shared, 1);

  for (int iter = 0; iter < 120; ++iter) {
    const FeatureVector x = random_point(rng, 2);
    const auto cert = certify_1nn_radius(index, x);
    CHECK(cert.predicted == nn.predict(x));
    CHECK(cert.lower <= cert.upper);
    CHECK(cert.lower >= 0.0);

    // Probe 64 directions slightly inside the lower bound: never flips.
    if (cert.lower > 1e-9) {
      const double r = cert.lower * (1 - 1e-9);
      for (int k = 0; k < 64; ++k) {
        const double t = 2 * M_PI * k / 64;
        CHECK(nn.predict({x[0] + r * std::cos(t), x[1] + r * std::sin(t)}) == cert.predicted);
      }
    }

    // Quadratic recomputation of the cheapest bisector crossing.
    const auto nearest = index.nearest(x, 1).front();
    const FeatureVector& same = data.point(nearest.id);
    const double d_same_sq = nearest.dist * nearest.dist;
    double best = std::numeric_limits<double>::infinity();
    int best_id = -1;
    for (std::size_t j = 0; j < data.size(); ++j) {
      if (data.label(j) == cert.predicted) continue;
      const double gap = euclidean_distance(same, data.point(j));
      if (gap == 0.0) continue;
      const double dx = euclidean_distance(x, data.point(j));
      const double dist_to_bisector = (dx * dx - d_same_sq) / (2.0 * gap);
      if (dist_to_bisector < best) {
        best = dist_to_bisector;
        best_id = static_cast<int>(j);
      }
    }
    REQUIRE(best_id >= 0);
    CHECK(cert.upper == doctest::Approx(best).epsilon(1e-12));
    // Every pair's bisector lies at least the certified lower bound away.
    CHECK(best >= cert.lower - 1e-12);

    // Step along the bisector normal to just beyond the crossing.
    const FeatureVector& opp = data.point(best_id);
    const double gap = euclidean_distance(same, opp);
    FeatureVector z = x;
    const double step = best + 1e-9;
    for (std::size_t a = 0; a < z.size(); ++a) z[a] += step * (opp[a] - same[a]) / gap;
    CHECK(euclidean_distance(z, opp) < euclidean_distance(z, same));
  }

  // On one point per class the bisector crossing IS the decision boundary,
  // so the upper bound is the exact flip distance.
  LabeledDataset pair(2);
  pair.add({0.0, 0.0}, 0);
  pair.add({2.0, 1.0}, 1);
  const KdTree pair_index(pair);
  const auto pair_shared = std::make_shared<const LabeledDataset>(pair);
  const KnnClassifier pair_nn(pair_shared, 1);
  for (int iter = 0; iter < 60; ++iter) {
    const FeatureVector x = random_point(rng, 2);
    const auto cert = certify_1nn_radius(pair_index, x);
    const FeatureVector& same = pair.point(cert.predicted == 0 ? 0 : 1);
    const FeatureVector& opp = pair.point(cert.predicted == 0 ? 1 : 0);
    const double gap = euclidean_distance(same, opp);
    FeatureVector beyond = x, within = x;
    for (std::size_t a = 0; a < x.size(); ++a) {
      beyond[a] += (cert.upper + 1e-9) * (opp[a] - same[a]) / gap;
      within[a] += (cert.upper - 1e-9) * (opp[a] - same[a]) / gap;
    }
    CHECK(pair_nn.predict(beyond) != cert.predicted);
    if (cert.upper > 1e-9) CHECK(pair_nn.predict(within) == cert.predicted);
  }
}

TEST_CASE("single-class training data certifies everything") {
  LabeledDataset data(2);
  data.add({0.0, 0.0}, 1);
  data.add({1.0, 1.0}, 1);
  const KdTree index(data);
  const auto cert = certify_1nn_radius(index, {5.0, 5.0});
  CHECK(cert.predicted == 1);
  CHECK(cert.lower == std::numeric_limits<double>::infinity());
  CHECK(cert.upper == std::numeric_limits<double>::infinity());
}

TEST_CASE("batch certification matches pointwise in both execution modes") {
  const LabeledDataset train = gen_halfmoon({.n = 200, .sigma = 0.2, .seed = 23});
  const LabeledDataset test = gen_halfmoon({.n = 97, .sigma = 0.2, .seed = 24});
  const KdTree index(train);
  const auto serial = batch_certify(index, test, Exec::Serial);
  const auto parallel = batch_certify(index, test, Exec::Parallel);
  REQUIRE(serial.size() == test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    CHECK(serial[i].predicted == parallel[i].predicted);
    CHECK(serial[i].lower == parallel[i].lower);
    CHECK(serial[i].upper == parallel[i].upper);
    const auto single = certify_1nn_radius(index, test.point(i));
    CHECK(serial[i].lower == single.lower);
    CHECK(serial[i].upper == single.upper);
  }

  LabeledDataset skinny(3);
  skinny.add({0.0, 0.0, 0.0}, 0);
  CHECK_THROWS_AS(batch_certify(index, skinny), std::invalid_argument);
}

TEST_CASE("empirical robust accuracy reduces to clean accuracy at radius zero") {
  const LabeledDataset train = gen_halfmoon({.n = 250, .sigma = 0.2, .seed = 29});
  const LabeledDataset test = gen_halfmoon({.n = 120, .sigma = 0.2, .seed = 30});
  const auto shared = std::make_shared<const LabeledDataset>(train);
  const KnnClassifier nn(shared, 1);
  const PredictFn predict = [&](const FeatureVector& x) { return nn.predict(x); };
  const DirectAttack attack(shared);
  const std::vector<const Attack*> suite{&attack};

  int correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    correct += nn.predict(test.point(i)) == test.label(i);
  }
  const double clean = static_cast<double>(correct) / test.size();

  CHECK(empirical_robust_accuracy(predict, suite, 0.0, test) ==
        doctest::Approx(clean).epsilon(1e-15));
  // Without attacks the radius is irrelevant.
  CHECK(empirical_robust_accuracy(predict, {}, 0.7, test) ==
        doctest::Approx(clean).epsilon(1e-15));

  // Monotone in the radius for this attack and never above clean accuracy.
  double prev = 1.0;
  for (const double r : {0.0, 0.1, 0.2, 0.4}) {
    const double acc = empirical_robust_accuracy(predict, suite, r, test);
    CHECK(acc <= clean + 1e-15);
    CHECK(acc <= prev + 0.05);  // allow small non-monotonicity of the heuristic
    prev = acc;
    CHECK(empirical_robust_accuracy(predict, suite, r, test, Exec::Serial) ==
          doctest::Approx(acc).epsilon(1e-15));
  }
}

TEST_CASE("astuteness estimates: certified vs empirical flavors") {
  const LabeledDataset train = gen_halfmoon({.n = 300, .sigma = 0.15, .seed = 31});
  const LabeledDataset test = gen_halfmoon({.n = 150, .sigma = 0.15, .seed = 32});
  const auto shared = std::make_shared<const LabeledDataset>(train);
  const KdTree index(shared);
  const KnnClassifier nn(shared, 1);
  const PredictFn predict = [&](const FeatureVector& x) { return nn.predict(x); };
  const DirectAttack attack(shared);
  const std::vector<const Attack*> suite{&attack};

  for (const double r : {0.0, 0.05, 0.15}) {
    const auto cert = astuteness_estimate(index, r, test);
    CHECK(cert.certified);
    const auto emp = astuteness_estimate(predict, suite, r, test);
    CHECK_FALSE(emp.certified);
    // The certificate lower-bounds what any attack can achieve.
    CHECK(cert.value <= emp.value + 1e-15);
    CHECK(cert.value >= 0.0);
    CHECK(emp.value <= 1.0);
  }
}

TEST_CASE("probability radius inverts the ball mass") {
  const auto interval = uniform_interval([](double x) { return x; }, "ramp");
  // Mass p around an interior point is reached at radius p/2.
  CHECK(probability_radius(interval, {0.5}, 0.2) == doctest::Approx(0.1).epsilon(1e-7));
  // Near the edge the ball is one-sided: radius equals the mass.
  CHECK(probability_radius(interval, {0.0}, 0.2) == doctest::Approx(0.2).epsilon(1e-7));
  CHECK(probability_radius(interval, {0.5}, 0.0) == 0.0);
  // Full mass needs to reach both ends.
  CHECK(probability_radius(interval, {0.25}, 1.0) == doctest::Approx(0.75).epsilon(1e-7));
  CHECK_THROWS_AS(probability_radius(interval, {0.5}, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(probability_radius(interval, {0.5}, -0.1), std::invalid_argument);

  // A distribution whose reachable mass saturates below the request: the
  // search cannot bracket the target and must say so.
  AnalyticDistribution capped = interval;
  const auto base_mass = interval.ball_mass;
  capped.ball_mass = [base_mass](const FeatureVector& x, double r) {
    return std::min(0.5, base_mass(x, r));
  };
  CHECK_THROWS_WITH_AS(probability_radius(capped, {0.5}, 0.9),
                       doctest::Contains("requested mass exceeds the total reachable probability"),
                       std::runtime_error);

  const auto square = uniform_square([](double, double) { return 0.8; }, "flat");
  const double r = probability_radius(square, {0.5, 0.5}, 0.3);
  CHECK(square.ball_mass({0.5, 0.5}, r) == doctest::Approx(0.3).epsilon(1e-6));
  // Centered disc of mass 0.3: r = sqrt(0.3/pi).
  CHECK(r == doctest::Approx(std::sqrt(0.3 / M_PI)).epsilon(1e-6));
}

TEST_CASE("strict interior membership on the linear-posterior interval") {
  const auto ramp = uniform_interval([](double x) { return x; }, "ramp");
  // Positive side at margin 0: eta > 1/2 on (1/2, 1]. Point 0.8 with r = 0.1:
  // the ball (0.7, 0.9) stays inside; with r = 0.4 it reaches below 1/2.
  CHECK(in_strict_interior(ramp, {0.8}, 0.1, 0.0, 0.0, +1).inside);
  CHECK_FALSE(in_strict_interior(ramp, {0.8}, 0.4, 0.0, 0.0, +1).inside);
  // 0.55 sits inside at tiny radius but fails the negative side.
  CHECK(in_strict_interior(ramp, {0.55}, 0.01, 0.0, 0.0, +1).inside);
  CHECK_FALSE(in_strict_interior(ramp, {0.55}, 0.01, 0.0, 0.0, -1).inside);
  // Negative side mirrors it.
  CHECK(in_strict_interior(ramp, {0.2}, 0.1, 0.0, 0.0, -1).inside);
  CHECK_FALSE(in_strict_interior(ramp, {0.2}, 0.4, 0.0, 0.0, -1).inside);
  // r = 0 is a pointwise posterior test.
  CHECK(in_strict_interior(ramp, {0.500001}, 0.0, 0.0, 0.0, +1).inside);
  CHECK_FALSE(in_strict_interior(ramp, {0.5}, 0.0, 0.0, 0.0, +1).inside);
  // Outside the support.
  CHECK_FALSE(in_strict_interior(ramp, {1.5}, 0.1, 0.0, 0.0, +1).inside);

  // A positive margin shrinks the region: eta > 0.5 + 0.2 needs x > 0.7.
  CHECK(in_strict_interior(ramp, {0.9}, 0.05, 0.2, 0.0, +1).inside);
  CHECK_FALSE(in_strict_interior(ramp, {0.72}, 0.05, 0.2, 0.0, +1).inside);

  // A positive mass level p expands each probe into its probability ball:
  // x' = 0.75 with p = 0.2 reaches down to 0.65; so 0.8 with r = 0.05 holds.
  // At r = 0.25 a probe near 0.55 has mass-0.2 radius 0.1 and reaches 0.45,
  // which is below 1/2.
  CHECK(in_strict_interior(ramp, {0.8}, 0.05, 0.0, 0.2, +1).inside);
  CHECK_FALSE(in_strict_interior(ramp, {0.8}, 0.25, 0.0, 0.2, +1).inside);

  CHECK_THROWS_AS(in_strict_interior(ramp, {0.8}, 0.1, 0.0, 0.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(in_strict_interior(ramp, {0.8}, -0.1, 0.0, 0.0, +1), std::invalid_argument);
}

TEST_CASE("strict interior membership on the square") {
  // eta = 1 left of x = 0.5, 0 right of it.
  const auto split =
      uniform_square([](double x, double) { return x < 0.5 ? 1.0 : 0.0; }, "split");
  CHECK(in_strict_interior(split, {0.2, 0.5}, 0.1, 0.0, 0.0, +1).inside);
  CHECK_FALSE(in_strict_interior(split, {0.45, 0.5}, 0.1, 0.0, 0.0, +1).inside);
  CHECK(in_strict_interior(split, {0.8, 0.5}, 0.1, 0.0, 0.0, -1).inside);
  CHECK_FALSE(in_strict_interior(split, {0.2, 0.5}, 0.1, 0.0, 0.0, -1).inside);
  // The grid resolution is reported.
  const auto res = in_strict_interior(split, {0.2, 0.5}, 0.1, 0.0, 0.0, +1, 20.0);
  CHECK(res.resolution == doctest::Approx(0.1 / 20.0));
}

TEST_CASE("closed-form bound anchors") {
  // Frozen reference values, computed once by hand from the formulas.
  const TheoryBounds b = theory_bounds(2000, 2, 0.1, 0.45, 157, 0.1);
  CHECK(b.k_n == doctest::Approx(156.98718123105292).epsilon(1e-12));
  CHECK(b.beta_n == doctest::Approx(0.24192633405638156).epsilon(1e-12));
  CHECK(b.a_n == doctest::Approx(0.008752195006039106).epsilon(1e-12));
  CHECK(b.b_n == doctest::Approx(0.0935531667344249).epsilon(1e-12));
  CHECK(b.p_n == doctest::Approx(0.11345630281965398).epsilon(1e-12));
  CHECK(b.k_min_uniform == doctest::Approx(5536.472424145778).epsilon(1e-12));
  CHECK(b.k_min_rate == doctest::Approx(415.7918521529995).epsilon(1e-12));
  CHECK(b.p_min_rate == doctest::Approx(0.10471158728452114).epsilon(1e-12));
  CHECK(b.c_dk == doctest::Approx(49.987579721237715).epsilon(1e-12));
  CHECK(b.n_min ==
        doctest::Approx(std::max(1e4, std::pow(b.c_dk, 4) / (158.0 * 158.0 * 0.1 * 0.1)))
            .epsilon(1e-12));

  // c_dk with k = 0 keeps only the ln(8/delta) + 1 term under the root.
  const TheoryBounds k0 = theory_bounds(2000, 2, 0.1, 0.45, 0, 0.1);
  CHECK(k0.c_dk == doctest::Approx(25.676849530406884).epsilon(1e-12));

  // Small-sample beta anchor.
  const TheoryBounds tiny = theory_bounds(2, 1, 0.1, 0.45, 1, 0.1);
  CHECK(tiny.beta_n == doctest::Approx(3.7827544).epsilon(1e-3 / 3.7827544));

  // Degenerate delta = 8 zeroes the ln(8/delta) term instead of failing.
  const TheoryBounds degen = theory_bounds(2, 1, 8.0, 0.45, 1, 0.1);
  CHECK(degen.beta_n == doctest::Approx(std::sqrt(2.0 * (2.0 * std::log(4.0)))).epsilon(1e-12));

  // p = 0 pushes the sample-size requirement to infinity; k = 0 zeroes the
  // rate form.
  const TheoryBounds zerop = theory_bounds(2000, 2, 0.1, 0.45, 157, 0.0);
  CHECK(std::isinf(zerop.n_min));
  const TheoryBounds zerok = theory_bounds(2000, 2, 0.1, 0.45, 0, 0.1);
  CHECK(zerok.p_min_rate == 0.0);
  // n_min floors at 1e4.
  CHECK(theory_bounds(2000, 2, 0.1, 0.45, 157, 0.9).n_min == 10000.0);

  CHECK_THROWS_AS(theory_bounds(0, 2, 0.1, 0.45, 157, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(theory_bounds(2000, 0, 0.1, 0.45, 157, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(theory_bounds(2000, 2, 0.0, 0.45, 157, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(theory_bounds(2000, 2, 0.1, 0.0, 157, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(theory_bounds(2000, 2, 0.1, 0.45, -1, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(theory_bounds(2000, 2, 0.1, 0.45, 157, -0.1), std::invalid_argument);
}

TEST_CASE("posterior-threshold astuteness via monte carlo") {
  // eta(x) = x on [0, 1]. At radius 0 the astuteness is the integral of
  // max(eta, 1 - eta) = 3/4. At radius r the positive side shrinks to
  // [1/2 + r, 1] and the negative side to [0, 1/2 - r], and integrating the
  // surviving posterior mass gives 3/4 - r - r^2 (= 0.64 at r = 0.1).
  const auto ramp = uniform_interval([](double x) { return x; }, "ramp");
  const McEstimate at0 = bayes_astuteness(ramp, 0.0, 40000, 5);
  CHECK(at0.samples == 40000);
  CHECK(at0.value == doctest::Approx(0.75).epsilon(0.01));
  CHECK(at0.std_error > 0.0);
  CHECK(at0.std_error < 0.01);

  const McEstimate at01 = bayes_astuteness(ramp, 0.1, 40000, 5);
  CHECK(at01.value == doctest::Approx(0.64).epsilon(0.015));
  CHECK(at01.value < at0.value);

  // Deterministic per seed and identical across execution modes.
  const McEstimate serial = bayes_astuteness(ramp, 0.1, 2000, 9, Exec::Serial);
  const McEstimate parallel = bayes_astuteness(ramp, 0.1, 2000, 9, Exec::Parallel);
  CHECK(serial.value == parallel.value);
  CHECK(serial.std_error == parallel.std_error);
  const McEstimate other = bayes_astuteness(ramp, 0.1, 2000, 10);
  CHECK(other.value != serial.value);

  CHECK_THROWS_AS(bayes_astuteness(ramp, -0.1, 100, 0), std::invalid_argument);
  CHECK_THROWS_AS(bayes_astuteness(ramp, 0.1, 0, 0), std::invalid_argument);
}
