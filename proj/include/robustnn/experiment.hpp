#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "robustnn/attacks.hpp"
#include "robustnn/geometry.hpp"

namespace robustnn {

// Training-set construction strategies under comparison. All of them deploy
// a 1-nearest-neighbor rule; they differ in what they do to the training set
// first.
enum class Method {
  StandardNN,  // train on the data as given
  RobustNN,    // confidence-filter + maximal separated subset at the defense radius
  ATNN,        // adversarial training: augment with the first configured attack
  ATNNAll,     // adversarial training with every configured attack
};

std::string method_name(Method m);
Method method_from_string(const std::string& s);

struct DatasetSpec {
  enum class Kind { Halfmoon, Csv, Mnist, Abalone };
  Kind kind = Kind::Halfmoon;

  // Halfmoon generator / Abalone split sizes.
  std::size_t train_n = 2000;
  std::size_t test_n = 1000;
  double sigma = 0.2;  // halfmoon noise

  // Csv: explicit files. validation_path may be empty, in which case the
  // validation set is carved off the tail of the training file (test-set
  // size, per the evaluation protocol "validation same size as test").
  std::string train_path, test_path, validation_path;

  // Mnist: IDX file pairs; train/test caps are per digit. The validation set
  // takes the next test_per_class examples per digit from the training files
  // after the training cap.
  std::string train_images, train_labels, test_images, test_labels;
  int digit_zero = 1, digit_one = 7;
  std::size_t train_per_class = 1000, test_per_class = 500;

  // Abalone: one CSV, shuffled deterministically by the experiment seed and
  // split train_n / test_n / test_n (validation last).
  std::string abalone_path;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  std::vector<Method> methods{Method::StandardNN, Method::RobustNN, Method::ATNN,
                              Method::ATNNAll};
  std::vector<AttackSpec> attacks{AttackSpec{}};  // default: the direct attack
  std::vector<double> attack_radii{0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3};
  // The grid deliberately extends to twice the largest default attack radius:
  // pruning at defense radius r buys roughly r/2 of certified protection, so
  // a grid capped at the attack radius can only reach half-strength defenses.
  std::vector<double> tuning_grid{0.05, 0.1, 0.15, 0.2, 0.25, 0.3,
                                  0.35, 0.4,  0.45, 0.5,  0.55, 0.6};
  double margin = 0.45;     // confident-label band half-width (Delta)
  double fail_prob = 0.1;   // confidence failure probability (delta)
  std::uint64_t seed = 0;
  std::string out_dir;  // empty: $ROBUSTNN_OUT, falling back to "results"

  // Throws std::invalid_argument on an inconsistent configuration: empty
  // attack list, empty or non-increasing radius sweep, empty tuning grid
  // while a radius-tuned method is listed, bad margin/fail_prob.
  void validate() const;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);  // JSON file
};

// Fixed offsets deriving the auxiliary seeds from the master seed.
inline constexpr std::uint64_t kTestSeedOffset = 3571;
inline constexpr std::uint64_t kValidationSeedOffset = 7919;
inline constexpr std::uint64_t kBlackboxSeedOffset = 104729;

struct ExperimentData {
  LabeledDataset train, test, validation;
  // Unlabeled feature vectors handed to black-box substitute training.
  std::vector<FeatureVector> blackbox_seed;
};

ExperimentData load_experiment_data(const ExperimentConfig& cfg);

// Builds the training set a method deploys at a given defense radius:
// StandardNN ignores the radius and returns the data unchanged; RobustNN
// confidence-filters and prunes to a maximally separated subset; the ATNN
// variants append adversarial copies generated at that radius.
LabeledDataset build_deployed(const ExperimentConfig& cfg, Method method,
                              const LabeledDataset& train, double defense_radius);

// Defense-radius selection: rebuilds the method's deployed set at every grid
// radius, instantiates the configured attacks against it, and scores the
// deployed 1-NN rule's validation accuracy under all attacks jointly at the
// largest radius in the attack sweep. Returns the argmax; ties go to the
// smallest radius. Grid radii whose deployed set cannot be built (e.g.
// pruning removed everything) are skipped; throws std::runtime_error when no
// grid radius is feasible, std::invalid_argument for StandardNN or an empty
// grid.
double tune_defense_radius(const ExperimentConfig& cfg, Method method,
                           const LabeledDataset& train, const LabeledDataset& validation,
                           const std::vector<FeatureVector>& blackbox_seed);

struct ResultRow {
  Method method;
  std::string attack;
  double radius = 0.0;
  double clean_accuracy = 0.0;
  double adversarial_accuracy = 0.0;
  double certified_astuteness = 0.0;
  std::size_t deployed_size = 0;
  std::uint64_t seed = 0;
};

struct RunResult {
  std::vector<ResultRow> rows;
  std::string results_csv_path;
  std::string manifest_path;
};

// Full pipeline: load data, tune each method's defense radius, deploy, sweep
// every configured attack over the radius grid on the test set, and write
// results.csv + manifest.json into the output directory. The CSV is
// bitwise-identical across runs with the same config; wall-clock timings go
// to the manifest only. On a stage failure the manifest is written with
// "complete": false and the error before the exception propagates.
RunResult run_experiment(const ExperimentConfig& cfg);

}  // namespace robustnn
