#include <cmath>
#include <memory>
#include <random>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "robustnn/attacks.hpp"
#include "robustnn/datasets.hpp"

using namespace robustnn;

namespace {

std::shared_ptr<const LabeledDataset> two_points() {
  LabeledDataset data(2);
  data.add({1.0, 0.0}, 1);
  data.add({-2.0, 0.0}, 0);
  return std::make_shared<const LabeledDataset>(std::move(data));
}

double step_norm(const FeatureVector& a, const FeatureVector& b) {
  return euclidean_distance(a, b);
}

FeatureVector random_point(std::mt19937_64& rng, int d) {
  std::uniform_real_distribution<double> real(-1.0, 1.0);
  FeatureVector x(d);
  for (double& v : x) v = real(rng);
  return x;
}

}  // namespace

TEST_CASE("direct attack steps along the nearest opposite point") {
  const auto data = two_points();
  // From the origin with true label 0, the nearest label-1 point is (1, 0).
  const FeatureVector toward = direct_attack(*data, {0.0, 0.0}, 0, 0.5);
  CHECK(toward[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(toward[1] == 0.0);
  const FeatureVector away =
      direct_attack(*data, {0.0, 0.0}, 0, 0.5, DirectDirection::Away);
  CHECK(away[0] == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(away[1] == 0.0);

  // True label 1 aims at the label-0 point at (-2, 0) instead.
  const FeatureVector other = direct_attack(*data, {0.0, 0.0}, 1, 1.0);
  CHECK(other[0] == doctest::Approx(-1.0).epsilon(1e-15));

  // Zero radius leaves the point in place.
  CHECK(direct_attack(*data, {0.3, 0.4}, 0, 0.0) == FeatureVector{0.3, 0.4});

  LabeledDataset mono(1);
  mono.add({0.0}, 1);
  CHECK_THROWS_AS(direct_attack(mono, {0.5}, 1, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(direct_attack(*data, {0.0, 0.0}, 2, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(direct_attack(*data, {0.0, 0.0}, 0, -0.1), std::invalid_argument);
}

TEST_CASE("direct attack handles a coincident opposite point deterministically") {
  LabeledDataset data(2);
  data.add({0.5, 0.5}, 1);
  data.add({3.0, 3.0}, 0);
  // Query sits exactly on the opposite point: the step direction is
  // arbitrary, so the first axis is used.
  const FeatureVector out = direct_attack(data, {0.5, 0.5}, 0, 0.25);
  CHECK(out == FeatureVector{0.75, 0.5});
}

TEST_CASE("direct attack class agrees with the scan form and hits the budget exactly") {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> radius(0.0, 1.5);
  const LabeledDataset moons = gen_halfmoon({.n = 150, .sigma = 0.2, .seed = 13});
  const auto shared = std::make_shared<const LabeledDataset>(moons);
  for (const auto dir : {DirectDirection::Toward, DirectDirection::Away}) {
    const DirectAttack attack(shared, dir);
    for (int i = 0; i < 200; ++i) {
      const FeatureVector x = random_point(rng, 2);
      const int y = i % 2;
      const double r = radius(rng);
      const FeatureVector got = attack.perturb(x, y, r);
      CHECK(got == direct_attack(moons, x, y, r, dir));
      CHECK(std::abs(step_norm(x, got) - r) <= 1e-12);
    }
  }
}

TEST_CASE("gradient sign step") {
  const GradientFn fixed = [](const FeatureVector&, int) {
    return FeatureVector{-2.0, 3.0};
  };
  // Per-coordinate step of exactly the radius.
  const FeatureVector inf = fgsm(fixed, {1.0, 1.0}, 0, 0.5, FgsmNorm::LInf);
  CHECK(inf == FeatureVector{0.5, 1.5});
  // Euclidean rescaling: same direction, total length = radius.
  const FeatureVector l2 = fgsm(fixed, {1.0, 1.0}, 0, 0.5, FgsmNorm::L2Exact);
  CHECK(std::abs(step_norm({1.0, 1.0}, l2) - 0.5) <= 1e-12);
  CHECK(l2[0] < 1.0);
  CHECK(l2[1] > 1.0);

  // Zero gradient coordinates stay put; an all-zero gradient moves nothing.
  const GradientFn partial = [](const FeatureVector&, int) {
    return FeatureVector{0.0, 5.0};
  };
  CHECK(fgsm(partial, {1.0, 1.0}, 0, 0.5, FgsmNorm::LInf) == FeatureVector{1.0, 1.5});
  CHECK(fgsm(partial, {1.0, 1.0}, 0, 0.5, FgsmNorm::L2Exact) == FeatureVector{1.0, 1.5});
  const GradientFn flat = [](const FeatureVector&, int) {
    return FeatureVector{0.0, 0.0};
  };
  CHECK(fgsm(flat, {1.0, 1.0}, 0, 0.5) == FeatureVector{1.0, 1.0});

  const GradientFn wrong_dim = [](const FeatureVector&, int) { return FeatureVector{1.0}; };
  CHECK_THROWS_AS(fgsm(wrong_dim, {1.0, 1.0}, 0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(fgsm(fixed, {1.0, 1.0}, 0, -0.5), std::invalid_argument);
}

TEST_CASE("kernel gradient attack increases the kernel loss") {
  const auto data = two_points();
  const KernelClassifier clf(data, 0.5);
  const KernelFgsmAttack attack(data, 0.5);
  std::mt19937_64 rng(53);
  for (int i = 0; i < 50; ++i) {
    const FeatureVector x = random_point(rng, 2);
    const int y = i % 2;
    const FeatureVector adv = attack.perturb(x, y, 0.05);
    const double before = -std::log(clf.predict(x)[y]);
    const double after = -std::log(clf.predict(adv)[y]);
    CHECK(after >= before - 1e-12);
    CHECK(step_norm(x, adv) <= 0.05 + 1e-9);
  }
}

TEST_CASE("substitute training grows the working set geometrically") {
  const auto data = two_points();
  const KnnClassifier target(data, 1);
  const TargetOracle oracle = [&](const FeatureVector& x) { return target.predict(x); };

  std::mt19937_64 rng(59);
  std::vector<FeatureVector> seed;
  for (int i = 0; i < 100; ++i) seed.push_back(random_point(rng, 2));

  const Substitute fit_only =
      train_substitute(seed, oracle, SubstituteKind::Kernel, 0, 0.1, 0);
  CHECK(fit_only.train_size() == 100);
  const Substitute augmented =
      train_substitute(seed, oracle, SubstituteKind::Kernel, 2, 0.1, 0);
  CHECK(augmented.train_size() == 400);

  // The fitted kernel substitute mirrors the oracle on its own training seed.
  int agree = 0;
  for (const auto& x : seed) agree += augmented.predict_label(x) == oracle(x);
  CHECK(agree >= 95);

  MlpConfig small;
  small.hidden = {8};
  small.epochs = 20;
  const SubstituteParams params{.kernel_bandwidth = 0.1, .mlp = small};
  const Substitute mlp_sub =
      train_substitute(seed, oracle, SubstituteKind::Mlp, 1, 0.1, 7, params);
  CHECK(mlp_sub.train_size() == 200);
  const auto p = mlp_sub.predict(seed.front());
  CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-12));

  // Same inputs and seed give the same model; a different seed moves the mlp.
  const Substitute again =
      train_substitute(seed, oracle, SubstituteKind::Mlp, 1, 0.1, 7, params);
  const Substitute shifted =
      train_substitute(seed, oracle, SubstituteKind::Mlp, 1, 0.1, 8, params);
  bool same = true, diff = false;
  for (int i = 0; i < 20; ++i) {
    const FeatureVector x = random_point(rng, 2);
    same = same && mlp_sub.predict(x) == again.predict(x);
    diff = diff || mlp_sub.predict(x) != shifted.predict(x);
  }
  CHECK(same);
  CHECK(diff);

  CHECK_THROWS_AS(train_substitute({}, oracle, SubstituteKind::Kernel, 0, 0.1, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(train_substitute(seed, oracle, SubstituteKind::Kernel, -1, 0.1, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(train_substitute(seed, oracle, SubstituteKind::Kernel, 0, 0.0, 0),
                  std::invalid_argument);
}

TEST_CASE("attack kinds round-trip their names and respect the budget") {
  CHECK(attack_kind_from_string("direct") == AttackKind::Direct);
  CHECK(attack_kind_from_string("kernel_fgsm") == AttackKind::KernelFgsm);
  CHECK(attack_kind_from_string("blackbox_kernel") == AttackKind::BlackBoxKernel);
  CHECK(attack_kind_from_string("blackbox_mlp") == AttackKind::BlackBoxMlp);
  CHECK_THROWS_AS(attack_kind_from_string("pgd"), std::invalid_argument);
  for (const auto kind : {AttackKind::Direct, AttackKind::KernelFgsm,
                          AttackKind::BlackBoxKernel, AttackKind::BlackBoxMlp}) {
    AttackSpec spec;
    spec.kind = kind;
    CHECK(attack_kind_from_string(spec.name()) == kind);
  }

  const auto deployed =
      std::make_shared<const LabeledDataset>(gen_halfmoon({.n = 120, .sigma = 0.2, .seed = 3}));
  const KnnClassifier target(deployed, 1);
  const TargetOracle oracle = [&](const FeatureVector& x) { return target.predict(x); };
  std::mt19937_64 rng(61);
  std::vector<FeatureVector> seed;
  for (int i = 0; i < 40; ++i) seed.push_back(random_point(rng, 2));

  for (const auto kind : {AttackKind::Direct, AttackKind::KernelFgsm,
                          AttackKind::BlackBoxKernel, AttackKind::BlackBoxMlp}) {
    AttackSpec spec;
    spec.kind = kind;
    spec.rounds = 1;
    spec.mlp.epochs = 15;
    spec.mlp.hidden = {8};
    const auto attack = make_attack(spec, deployed, oracle, seed, 11);
    CHECK(attack->name() == spec.name());
    for (int i = 0; i < 25; ++i) {
      const FeatureVector x = random_point(rng, 2);
      const double r = 0.02 * i;
      const FeatureVector adv = attack->perturb(x, i % 2, r);
      CHECK(step_norm(x, adv) <= r + 1e-9);
    }
  }
}

TEST_CASE("adversarial augmentation appends one labeled copy per attack") {
  LabeledDataset data(2);
  std::mt19937_64 rng(67);
  for (int i = 0; i < 10; ++i) data.add(random_point(rng, 2), i % 2);

  const AttackSpec direct{};
  AttackSpec kernel;
  kernel.kind = AttackKind::KernelFgsm;

  const LabeledDataset one = augment_adversarial(data, {direct}, 0.2, 5);
  REQUIRE(one.size() == 20);
  const LabeledDataset two = augment_adversarial(data, {direct, kernel}, 0.2, 5);
  REQUIRE(two.size() == 30);

  for (std::size_t i = 0; i < 10; ++i) {
    // Originals first, bit for bit.
    CHECK(one.point(i) == data.point(i));
    CHECK(one.label(i) == data.label(i));
    // Each adversarial copy keeps its source's label and stays in budget.
    CHECK(one.label(10 + i) == data.label(i));
    CHECK(step_norm(one.point(10 + i), data.point(i)) <= 0.2 + 1e-9);
    CHECK(two.label(20 + i) == data.label(i));
    CHECK(step_norm(two.point(20 + i), data.point(i)) <= 0.2 + 1e-9);
    // The first adversarial block is the same for both configurations.
    CHECK(two.point(10 + i) == one.point(10 + i));
  }

  // Zero radius duplicates the data; no attacks echoes it unchanged.
  const LabeledDataset still = augment_adversarial(data, {direct}, 0.0, 5);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(step_norm(still.point(10 + i), data.point(i)) <= 1e-12);
  }
  CHECK(augment_adversarial(data, {}, 0.2, 5).size() == 10);

  CHECK_THROWS_AS(augment_adversarial(LabeledDataset(2), {direct}, 0.2, 5),
                  std::invalid_argument);
  CHECK_THROWS_AS(augment_adversarial(data, {direct}, -0.2, 5), std::invalid_argument);
}
