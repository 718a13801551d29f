#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "robustnn/exec.hpp"
#include "robustnn/geometry.hpp"

namespace robustnn {

// Majority vote over the k nearest training labels. Predicts 1 iff the label
// sum is >= k/2, so an exact tie goes to class 1. Neighbor ties are broken by
// ascending id, matching the index contract.
class KnnClassifier {
 public:
  KnnClassifier(std::shared_ptr<const LabeledDataset> train, int k);

  int predict(const FeatureVector& x) const;

  int k() const { return k_; }
  const LabeledDataset& train() const { return index_.data(); }
  const KdTree& index() const { return index_; }

 private:
  KdTree index_;
  int k_;
};

// Batch prediction kernel; Serial and Parallel give identical outputs.
std::vector<int> batch_nn_predict(const KnnClassifier& clf,
                                  const std::vector<FeatureVector>& queries,
                                  Exec exec = Exec::Parallel);

struct KernelPrediction {
  std::array<double, 2> prob;  // {P(class 0), P(class 1)}
  // True when every kernel weight underflowed to zero and the prediction fell
  // back to the nearest neighbor's one-hot label. Gradients are undefined in
  // this regime.
  bool underflow_fallback;
};

// Soft nearest-neighbor classifier: class probabilities are the normalized
// sums of exp(-||x - z||^2 / c) over the training points of each class.
class KernelClassifier {
 public:
  KernelClassifier(std::shared_ptr<const LabeledDataset> train, double bandwidth);

  KernelPrediction predict_detail(const FeatureVector& x) const;
  std::array<double, 2> predict(const FeatureVector& x) const;
  int predict_label(const FeatureVector& x) const;

  // d/dx of the cross-entropy loss -log P(y_true | x).
  // Throws std::runtime_error when the underflow fallback is active.
  FeatureVector loss_gradient(const FeatureVector& x, int y_true) const;
  // d/dx of P(cls | x); same underflow behavior.
  FeatureVector class_prob_gradient(const FeatureVector& x, int cls) const;

  double bandwidth() const { return c_; }
  const LabeledDataset& train() const { return *train_; }

 private:
  std::shared_ptr<const LabeledDataset> train_;
  double c_;
};

struct MlpConfig {
  std::vector<int> hidden{16, 16};  // two hidden layers by default
  int epochs = 200;
  double learning_rate = 0.1;
  int batch_size = 32;
  std::uint64_t seed = 0;
};

// Small feed-forward network: ReLU hidden layers, two-way softmax output,
// cross-entropy loss, plain mini-batch gradient descent. Training is
// single-threaded and bitwise deterministic for a fixed seed.
class MlpClassifier {
 public:
  // epochs == 0 returns the freshly initialized network.
  // Throws std::runtime_error naming the epoch if the loss or any parameter
  // turns non-finite.
  static MlpClassifier train(const LabeledDataset& data, const MlpConfig& cfg);

  std::array<double, 2> predict(const FeatureVector& x) const;
  int predict_label(const FeatureVector& x) const;
  FeatureVector loss_gradient(const FeatureVector& x, int y_true) const;
  FeatureVector class_prob_gradient(const FeatureVector& x, int cls) const;

  const std::vector<int>& layer_sizes() const { return sizes_; }

  // Round-trippable parameter record: layer sizes plus row-major weights.
  nlohmann::json to_json() const;
  static MlpClassifier from_json(const nlohmann::json& j);

 private:
  MlpClassifier() = default;
  std::array<double, 2> forward(const FeatureVector& x,
                                std::vector<std::vector<double>>* activations,
                                std::vector<std::vector<double>>* pre_relu) const;

  std::vector<int> sizes_;                     // input, hidden..., 2
  std::vector<std::vector<double>> weights_;   // per layer, row-major out x in
  std::vector<std::vector<double>> biases_;    // per layer
};

}  // namespace robustnn
