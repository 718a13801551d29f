#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "robustnn/classifiers.hpp"
#include "robustnn/geometry.hpp"

namespace robustnn {

enum class DirectDirection {
  Toward,  // step toward the nearest oppositely-labeled training point
  Away,    // literal formula variant: step along x - x', away from it
};

// Perturb x by exactly `radius` along the direction defined by the nearest
// training point whose label differs from y (ties by ascending id).
// Throws std::invalid_argument when no opposite-label point exists.
FeatureVector direct_attack(const LabeledDataset& data, const FeatureVector& x, int y,
                            double radius, DirectDirection dir = DirectDirection::Toward);

enum class FgsmNorm {
  L2Exact,  // rescale the signed step to L2 norm exactly `radius`
  LInf,     // raw step: x + radius * sign(grad), per-coordinate
};

using GradientFn = std::function<FeatureVector(const FeatureVector&, int)>;

// Fast gradient sign step against a differentiable loss. sign(0) = 0, so
// coordinates with zero gradient stay put; an all-zero gradient returns x
// unchanged. L2Exact keeps the attack comparable to the other attacks under
// an L2 budget and is what the attack suite uses.
FeatureVector fgsm(const GradientFn& loss_grad, const FeatureVector& x, int y_true,
                   double radius, FgsmNorm norm = FgsmNorm::L2Exact);

// Black-box label oracle: the deployed classifier under attack.
using TargetOracle = std::function<int(const FeatureVector&)>;

enum class SubstituteKind { Kernel, Mlp };

struct SubstituteParams {
  double kernel_bandwidth = 0.1;
  MlpConfig mlp;
};

// A trained stand-in for the target, exposing the gradients the target
// itself refuses to provide.
class Substitute {
 public:
  explicit Substitute(KernelClassifier clf) : impl_(std::move(clf)) {}
  explicit Substitute(MlpClassifier clf) : impl_(std::move(clf)) {}

  std::array<double, 2> predict(const FeatureVector& x) const;
  int predict_label(const FeatureVector& x) const;
  FeatureVector loss_gradient(const FeatureVector& x, int y_true) const;
  FeatureVector class_prob_gradient(const FeatureVector& x, int cls) const;
  std::size_t train_size() const { return train_size_; }

 private:
  friend Substitute train_substitute(const std::vector<FeatureVector>&, const TargetOracle&,
                                     SubstituteKind, int, double, std::uint64_t,
                                     const SubstituteParams&);
  std::variant<KernelClassifier, MlpClassifier> impl_;
  std::size_t train_size_ = 0;
};

// Jacobian-style substitute training: label the working set through the
// oracle, fit, then augment each point by lambda * sign of the fitted model's
// predicted-class score gradient, doubling the set. After `rounds` such
// augmentations the final fit is returned (rounds = 0 fits the seed only, so
// the final training size is |seed| * 2^rounds). Deterministic per rng_seed.
Substitute train_substitute(const std::vector<FeatureVector>& seed, const TargetOracle& oracle,
                            SubstituteKind kind, int rounds, double lambda,
                            std::uint64_t rng_seed, const SubstituteParams& params = {});

enum class AttackKind { Direct, KernelFgsm, BlackBoxKernel, BlackBoxMlp };

struct AttackSpec {
  AttackKind kind = AttackKind::Direct;
  DirectDirection direction = DirectDirection::Toward;
  double bandwidth = 0.1;  // kernel attacks
  double lambda = 0.1;     // substitute augmentation step
  int rounds = 2;          // substitute augmentation rounds
  int seed_size = 200;     // black-box substitute seed examples
  MlpConfig mlp;           // black-box mlp substitute architecture

  std::string name() const;
};

AttackKind attack_kind_from_string(const std::string& s);

// A configured attack bound to its context (training set, substitute, ...).
// perturb returns a point with ||x_adv - x||_2 <= radius + 1e-9.
class Attack {
 public:
  virtual ~Attack() = default;
  virtual FeatureVector perturb(const FeatureVector& x, int y_true, double radius) const = 0;
  virtual std::string name() const = 0;
};

class DirectAttack final : public Attack {
 public:
  explicit DirectAttack(std::shared_ptr<const LabeledDataset> train,
                        DirectDirection dir = DirectDirection::Toward);
  FeatureVector perturb(const FeatureVector& x, int y_true, double radius) const override;
  std::string name() const override { return "direct"; }

 private:
  std::shared_ptr<const LabeledDataset> train_;
  // Per-class sub-index; ids map back into the full training set.
  std::optional<KdTree> class_tree_[2];
  std::vector<int> class_ids_[2];
  DirectDirection dir_;
};

class KernelFgsmAttack final : public Attack {
 public:
  KernelFgsmAttack(std::shared_ptr<const LabeledDataset> train, double bandwidth,
                   FgsmNorm norm = FgsmNorm::L2Exact);
  FeatureVector perturb(const FeatureVector& x, int y_true, double radius) const override;
  std::string name() const override { return "kernel_fgsm"; }

 private:
  KernelClassifier clf_;
  FgsmNorm norm_;
};

class SubstituteFgsmAttack final : public Attack {
 public:
  SubstituteFgsmAttack(Substitute sub, std::string name, FgsmNorm norm = FgsmNorm::L2Exact);
  FeatureVector perturb(const FeatureVector& x, int y_true, double radius) const override;
  std::string name() const override { return name_; }
  const Substitute& substitute() const { return sub_; }

 private:
  Substitute sub_;
  std::string name_;
  FgsmNorm norm_;
};

// Bind an attack spec to a deployed training set. Black-box kinds train their
// substitute against `oracle` starting from `blackbox_seed` feature vectors.
std::unique_ptr<Attack> make_attack(const AttackSpec& spec,
                                    std::shared_ptr<const LabeledDataset> deployed,
                                    const TargetOracle& oracle,
                                    const std::vector<FeatureVector>& blackbox_seed,
                                    std::uint64_t rng_seed);

// Adversarial training-set augmentation: the original data plus, for every
// configured attack, one adversarial copy of each example generated at
// `defense_radius` against this same data. Output size (1 + #attacks) * n,
// originals first, adversarial blocks in attack order.
LabeledDataset augment_adversarial(const LabeledDataset& data,
                                   const std::vector<AttackSpec>& attacks,
                                   double defense_radius, std::uint64_t rng_seed);

}  // namespace robustnn
