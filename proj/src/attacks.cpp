#include "robustnn/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace robustnn {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

FeatureVector step_from_opposite(const FeatureVector& x, const FeatureVector& opp,
                                 double radius, DirectDirection dir) {
  const std::size_t d = x.size();
  FeatureVector u(d);
  double nrm = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    u[a] = dir == DirectDirection::Toward ? opp[a] - x[a] : x[a] - opp[a];
    nrm += u[a] * u[a];
  }
  nrm = std::sqrt(nrm);
  FeatureVector out = x;
  if (nrm == 0.0) {
    // Degenerate: x coincides with the opposite point, so the direction is
    // arbitrary; use the first axis to stay deterministic.
    out[0] += radius;
    return out;
  }
  for (std::size_t a = 0; a < d; ++a) out[a] += radius * u[a] / nrm;
  return out;
}

}  // namespace

FeatureVector direct_attack(const LabeledDataset& data, const FeatureVector& x, int y,
                            double radius, DirectDirection dir) {
  if (y != 0 && y != 1) throw std::invalid_argument("label must be 0 or 1");
  if (!(radius >= 0.0)) throw std::invalid_argument("attack radius must be >= 0");
  int best = -1;
  double best_d = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.label(i) == y) continue;
    const double d = euclidean_distance(x, data.point(i));
    if (best < 0 || d < best_d) {
      best = static_cast<int>(i);
      best_d = d;
    }
  }
  if (best < 0) {
    throw std::invalid_argument("direct attack needs at least one opposite-label point");
  }
  return step_from_opposite(x, data.point(best), radius, dir);
}

FeatureVector fgsm(const GradientFn& loss_grad, const FeatureVector& x, int y_true,
                   double radius, FgsmNorm norm) {
  if (!(radius >= 0.0)) throw std::invalid_argument("attack radius must be >= 0");
  const FeatureVector g = loss_grad(x, y_true);
  if (g.size() != x.size()) throw std::invalid_argument("gradient dimension mismatch");
  FeatureVector s(g.size());
  double nrm = 0.0;
  for (std::size_t a = 0; a < g.size(); ++a) {
    s[a] = sign(g[a]);
    nrm += s[a] * s[a];
  }
  FeatureVector out = x;
  if (nrm == 0.0) return out;  // flat loss: no move
  const double scale = norm == FgsmNorm::L2Exact ? radius / std::sqrt(nrm) : radius;
  for (std::size_t a = 0; a < g.size(); ++a) out[a] += scale * s[a];
  return out;
}

std::array<double, 2> Substitute::predict(const FeatureVector& x) const {
  return std::visit([&](const auto& c) { return c.predict(x); }, impl_);
}

int Substitute::predict_label(const FeatureVector& x) const {
  return std::visit([&](const auto& c) { return c.predict_label(x); }, impl_);
}

FeatureVector Substitute::loss_gradient(const FeatureVector& x, int y_true) const {
  return std::visit([&](const auto& c) { return c.loss_gradient(x, y_true); }, impl_);
}

FeatureVector Substitute::class_prob_gradient(const FeatureVector& x, int cls) const {
  return std::visit([&](const auto& c) { return c.class_prob_gradient(x, cls); }, impl_);
}

Substitute train_substitute(const std::vector<FeatureVector>& seed, const TargetOracle& oracle,
                            SubstituteKind kind, int rounds, double lambda,
                            std::uint64_t rng_seed, const SubstituteParams& params) {
  if (seed.empty()) throw std::invalid_argument("substitute training needs seed points");
  if (rounds < 0) throw std::invalid_argument("rounds must be >= 0");
  if (!(lambda > 0.0)) throw std::invalid_argument("augmentation step must be > 0");

  std::vector<FeatureVector> points = seed;
  std::optional<Substitute> sub;
  for (int round = 0; round <= rounds; ++round) {
    // Relabel the whole working set through the oracle, then fit.
    LabeledDataset labeled;
    labeled.reserve(points.size());
    std::vector<int> labels(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      labels[i] = oracle(points[i]);
      labeled.add(points[i], labels[i]);
    }
    if (kind == SubstituteKind::Kernel) {
      sub.emplace(KernelClassifier(std::make_shared<const LabeledDataset>(std::move(labeled)),
                                   params.kernel_bandwidth));
    } else {
      MlpConfig cfg = params.mlp;
      cfg.seed = rng_seed + static_cast<std::uint64_t>(round);
      sub.emplace(MlpClassifier::train(labeled, cfg));
    }
    if (round == rounds) break;
    // Push each point along the fitted model's score gradient for its current
    // label; the new points double the working set.
    const std::size_t sz = points.size();
    points.reserve(2 * sz);
    for (std::size_t i = 0; i < sz; ++i) {
      const FeatureVector g = sub->class_prob_gradient(points[i], labels[i]);
      FeatureVector nx = points[i];
      for (std::size_t a = 0; a < nx.size(); ++a) nx[a] += lambda * sign(g[a]);
      points.push_back(std::move(nx));
    }
  }
  sub->train_size_ = points.size();
  return std::move(*sub);
}

std::string AttackSpec::name() const {
  switch (kind) {
    case AttackKind::Direct:
      return "direct";
    case AttackKind::KernelFgsm:
      return "kernel_fgsm";
    case AttackKind::BlackBoxKernel:
      return "blackbox_kernel";
    case AttackKind::BlackBoxMlp:
      return "blackbox_mlp";
  }
  return "unknown";
}

AttackKind attack_kind_from_string(const std::string& s) {
  if (s == "direct") return AttackKind::Direct;
  if (s == "kernel_fgsm") return AttackKind::KernelFgsm;
  if (s == "blackbox_kernel") return AttackKind::BlackBoxKernel;
  if (s == "blackbox_mlp") return AttackKind::BlackBoxMlp;
  throw std::invalid_argument("unknown attack kind: " + s);
}

DirectAttack::DirectAttack(std::shared_ptr<const LabeledDataset> train, DirectDirection dir)
    : train_(std::move(train)), dir_(dir) {
  if (!train_ || train_->empty()) throw std::invalid_argument("attack needs training data");
  for (int cls = 0; cls < 2; ++cls) {
    LabeledDataset part(train_->dim());
    for (std::size_t i = 0; i < train_->size(); ++i) {
      if (train_->label(i) == cls) {
        part.add(train_->point(i), cls);
        class_ids_[cls].push_back(static_cast<int>(i));
      }
    }
    if (!part.empty()) {
      class_tree_[cls].emplace(std::make_shared<const LabeledDataset>(std::move(part)));
    }
  }
}

FeatureVector DirectAttack::perturb(const FeatureVector& x, int y_true, double radius) const {
  if (y_true != 0 && y_true != 1) throw std::invalid_argument("label must be 0 or 1");
  if (!(radius >= 0.0)) throw std::invalid_argument("attack radius must be >= 0");
  const int opp = 1 - y_true;
  if (!class_tree_[opp]) {
    throw std::invalid_argument("direct attack needs at least one opposite-label point");
  }
  // The sub-index preserves insertion order, so its tie-breaking by sub-id
  // agrees with tie-breaking by original id.
  const auto nb = class_tree_[opp]->nearest(x, 1).front();
  return step_from_opposite(x, class_tree_[opp]->data().point(nb.id), radius, dir_);
}

KernelFgsmAttack::KernelFgsmAttack(std::shared_ptr<const LabeledDataset> train, double bandwidth,
                                   FgsmNorm norm)
    : clf_(std::move(train), bandwidth), norm_(norm) {}

FeatureVector KernelFgsmAttack::perturb(const FeatureVector& x, int y_true, double radius) const {
  return fgsm([this](const FeatureVector& p, int y) { return clf_.loss_gradient(p, y); }, x,
              y_true, radius, norm_);
}

SubstituteFgsmAttack::SubstituteFgsmAttack(Substitute sub, std::string name, FgsmNorm norm)
    : sub_(std::move(sub)), name_(std::move(name)), norm_(norm) {}

FeatureVector SubstituteFgsmAttack::perturb(const FeatureVector& x, int y_true,
                                            double radius) const {
  return fgsm([this](const FeatureVector& p, int y) { return sub_.loss_gradient(p, y); }, x,
              y_true, radius, norm_);
}

std::unique_ptr<Attack> make_attack(const AttackSpec& spec,
                                    std::shared_ptr<const LabeledDataset> deployed,
                                    const TargetOracle& oracle,
                                    const std::vector<FeatureVector>& blackbox_seed,
                                    std::uint64_t rng_seed) {
  switch (spec.kind) {
    case AttackKind::Direct:
      return std::make_unique<DirectAttack>(std::move(deployed), spec.direction);
    case AttackKind::KernelFgsm:
      return std::make_unique<KernelFgsmAttack>(std::move(deployed), spec.bandwidth);
    case AttackKind::BlackBoxKernel:
    case AttackKind::BlackBoxMlp: {
      SubstituteParams params;
      params.kernel_bandwidth = spec.bandwidth;
      params.mlp = spec.mlp;
      const auto kind = spec.kind == AttackKind::BlackBoxKernel ? SubstituteKind::Kernel
                                                                : SubstituteKind::Mlp;
      Substitute sub =
          train_substitute(blackbox_seed, oracle, kind, spec.rounds, spec.lambda, rng_seed, params);
      return std::make_unique<SubstituteFgsmAttack>(std::move(sub), spec.name());
    }
  }
  throw std::invalid_argument("unknown attack kind");
}

LabeledDataset augment_adversarial(const LabeledDataset& data,
                                   const std::vector<AttackSpec>& attacks, double defense_radius,
                                   std::uint64_t rng_seed) {
  if (data.empty()) throw std::invalid_argument("dataset must be nonempty");
  if (!(defense_radius >= 0.0)) throw std::invalid_argument("defense radius must be >= 0");
  auto base = std::make_shared<const LabeledDataset>(data);
  // The defender plays adversary against itself: oracle and substitute seed
  // both come from the data being augmented.
  const KnnClassifier own(base, 1);
  const TargetOracle oracle = [&own](const FeatureVector& x) { return own.predict(x); };
  std::vector<FeatureVector> seed;
  seed.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) seed.push_back(data.point(i));

  LabeledDataset out(data.dim());
  out.reserve(data.size() * (1 + attacks.size()));
  for (const auto& ex : data.examples()) out.add(ex.x, ex.y);
  for (const auto& spec : attacks) {
    const auto attack = make_attack(spec, base, oracle, seed, rng_seed);
    for (const auto& ex : data.examples()) {
      out.add(attack->perturb(ex.x, ex.y, defense_radius), ex.y);
    }
  }
  return out;
}

}  // namespace robustnn
