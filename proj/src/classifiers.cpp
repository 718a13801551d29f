#include "robustnn/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace robustnn {

KnnClassifier::KnnClassifier(std::shared_ptr<const LabeledDataset> train, int k)
    : index_(std::move(train)), k_(k) {
  if (k_ < 1 || static_cast<std::size_t>(k_) > index_.data().size()) {
    throw std::invalid_argument("k must satisfy 1 <= k <= training set size");
  }
}

int KnnClassifier::predict(const FeatureVector& x) const {
  const auto nbrs = index_.nearest(x, k_);
  int sum = 0;
  for (const auto& nb : nbrs) sum += index_.data().label(nb.id);
  return 2 * sum >= k_ ? 1 : 0;
}

std::vector<int> batch_nn_predict(const KnnClassifier& clf,
                                  const std::vector<FeatureVector>& queries, Exec exec) {
  std::vector<int> out(queries.size());
  const std::int64_t n = static_cast<std::int64_t>(queries.size());
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t i = 0; i < n; ++i) out[i] = clf.predict(queries[i]);
  } else {
    for (std::int64_t i = 0; i < n; ++i) out[i] = clf.predict(queries[i]);
  }
  return out;
}

KernelClassifier::KernelClassifier(std::shared_ptr<const LabeledDataset> train, double bandwidth)
    : train_(std::move(train)), c_(bandwidth) {
  if (!train_ || train_->empty()) throw std::invalid_argument("kernel classifier needs training data");
  if (!(c_ > 0.0)) throw std::invalid_argument("kernel bandwidth must be > 0");
}

KernelPrediction KernelClassifier::predict_detail(const FeatureVector& x) const {
  if (static_cast<int>(x.size()) != train_->dim()) {
    throw std::invalid_argument("query dimension does not match training data");
  }
  double total = 0.0;
  std::array<double, 2> acc{0.0, 0.0};
  for (std::size_t i = 0; i < train_->size(); ++i) {
    const double w = std::exp(-detail::squared_distance(x, train_->point(i)) / c_);
    total += w;
    acc[train_->label(i)] += w;
  }
  if (total == 0.0) {
    // Every weight underflowed; fall back to the nearest neighbor's one-hot.
    int best = 0;
    double best_d = euclidean_distance(x, train_->point(0));
    for (std::size_t i = 1; i < train_->size(); ++i) {
      const double d = euclidean_distance(x, train_->point(i));
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(i);
      }
    }
    std::array<double, 2> onehot{0.0, 0.0};
    onehot[train_->label(best)] = 1.0;
    return KernelPrediction{onehot, true};
  }
  return KernelPrediction{{acc[0] / total, acc[1] / total}, false};
}

std::array<double, 2> KernelClassifier::predict(const FeatureVector& x) const {
  return predict_detail(x).prob;
}

int KernelClassifier::predict_label(const FeatureVector& x) const {
  const auto p = predict(x);
  return p[1] >= p[0] ? 1 : 0;
}

FeatureVector KernelClassifier::loss_gradient(const FeatureVector& x, int y_true) const {
  if (y_true != 0 && y_true != 1) throw std::invalid_argument("label must be 0 or 1");
  if (static_cast<int>(x.size()) != train_->dim()) {
    throw std::invalid_argument("query dimension does not match training data");
  }
  const int d = train_->dim();
  double total = 0.0;
  double class_total = 0.0;
  FeatureVector sum_all(d, 0.0), sum_class(d, 0.0);
  for (std::size_t i = 0; i < train_->size(); ++i) {
    const FeatureVector& z = train_->point(i);
    const double w = std::exp(-detail::squared_distance(x, z) / c_);
    total += w;
    if (train_->label(i) == y_true) class_total += w;
    for (int a = 0; a < d; ++a) {
      const double wd = w * (x[a] - z[a]);
      sum_all[a] += wd;
      if (train_->label(i) == y_true) sum_class[a] += wd;
    }
  }
  if (total == 0.0 || class_total == 0.0) {
    throw std::runtime_error("kernel weights underflowed; gradient is undefined here");
  }
  // loss = -log(N_y / S) with S = sum of all weights, N_y = class-y weights,
  // and each weight differentiating to w * (-2/c) (x - z).
  FeatureVector g(d);
  for (int a = 0; a < d; ++a) {
    g[a] = (-2.0 / c_) * (sum_all[a] / total - sum_class[a] / class_total);
  }
  return g;
}

FeatureVector KernelClassifier::class_prob_gradient(const FeatureVector& x, int cls) const {
  // d/dx P(cls) = -P(cls) * d/dx (-log P(cls)).
  const double p = predict(x)[cls];
  FeatureVector g = loss_gradient(x, cls);
  for (double& v : g) v *= -p;
  return g;
}

namespace {

std::array<double, 2> softmax2(double a, double b) {
  const double m = std::max(a, b);
  const double ea = std::exp(a - m);
  const double eb = std::exp(b - m);
  const double s = ea + eb;
  return {ea / s, eb / s};
}

}  // namespace

std::array<double, 2> MlpClassifier::forward(const FeatureVector& x,
                                             std::vector<std::vector<double>>* activations,
                                             std::vector<std::vector<double>>* pre_relu) const {
  const std::size_t layers = weights_.size();
  std::vector<double> cur(x.begin(), x.end());
  if (activations) activations->assign(1, cur);
  if (pre_relu) pre_relu->clear();
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    std::vector<double> next(out);
    for (int o = 0; o < out; ++o) {
      double s = biases_[l][o];
      const double* row = weights_[l].data() + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) s += row[i] * cur[i];
      next[o] = s;
    }
    if (l + 1 < layers) {
      if (pre_relu) pre_relu->push_back(next);
      for (double& v : next) v = v > 0.0 ? v : 0.0;
    }
    cur = std::move(next);
    if (activations && l + 1 < layers) activations->push_back(cur);
  }
  return softmax2(cur[0], cur[1]);
}

std::array<double, 2> MlpClassifier::predict(const FeatureVector& x) const {
  if (static_cast<int>(x.size()) != sizes_.front()) {
    throw std::invalid_argument("query dimension does not match network input");
  }
  return forward(x, nullptr, nullptr);
}

int MlpClassifier::predict_label(const FeatureVector& x) const {
  const auto p = predict(x);
  return p[1] >= p[0] ? 1 : 0;
}

MlpClassifier MlpClassifier::train(const LabeledDataset& data, const MlpConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("cannot train on an empty dataset");
  if (cfg.hidden.empty()) throw std::invalid_argument("network needs at least one hidden layer");
  for (int h : cfg.hidden) {
    if (h < 1) throw std::invalid_argument("hidden layer sizes must be >= 1");
  }
  if (cfg.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");

  MlpClassifier net;
  net.sizes_.push_back(data.dim());
  for (int h : cfg.hidden) net.sizes_.push_back(h);
  net.sizes_.push_back(2);

  std::mt19937_64 rng(cfg.seed);
  const std::size_t layers = net.sizes_.size() - 1;
  net.weights_.resize(layers);
  net.biases_.resize(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = net.sizes_[l];
    const int out = net.sizes_[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    net.weights_[l].resize(static_cast<std::size_t>(out) * in);
    for (double& w : net.weights_[l]) w = u(rng);
    net.biases_[l].assign(out, 0.0);
  }
  if (cfg.epochs == 0) return net;

  const std::size_t n = data.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::vector<std::vector<double>> grad_w(layers), grad_b(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    grad_w[l].resize(net.weights_[l].size());
    grad_b[l].resize(net.biases_[l].size());
  }

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      for (std::size_t l = 0; l < layers; ++l) {
        std::fill(grad_w[l].begin(), grad_w[l].end(), 0.0);
        std::fill(grad_b[l].begin(), grad_b[l].end(), 0.0);
      }
      for (std::size_t b = start; b < stop; ++b) {
        const LabeledExample& ex = data[order[b]];
        std::vector<std::vector<double>> acts, pre;
        const auto prob = net.forward(ex.x, &acts, &pre);
        // Softmax + cross-entropy: output delta is prob - onehot.
        std::vector<double> delta{prob[0], prob[1]};
        delta[ex.y] -= 1.0;
        for (std::size_t l = layers; l-- > 0;) {
          const int in = net.sizes_[l];
          const int out = net.sizes_[l + 1];
          const std::vector<double>& a_in = acts[l];
          for (int o = 0; o < out; ++o) {
            grad_b[l][o] += delta[o];
            double* row = grad_w[l].data() + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) row[i] += delta[o] * a_in[i];
          }
          if (l == 0) break;
          std::vector<double> prev(in, 0.0);
          for (int o = 0; o < out; ++o) {
            const double* row = net.weights_[l].data() + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) prev[i] += row[i] * delta[o];
          }
          for (int i = 0; i < in; ++i) {
            if (pre[l - 1][i] <= 0.0) prev[i] = 0.0;
          }
          delta = std::move(prev);
        }
      }
      const double scale = cfg.learning_rate / static_cast<double>(stop - start);
      for (std::size_t l = 0; l < layers; ++l) {
        for (std::size_t i = 0; i < grad_w[l].size(); ++i) net.weights_[l][i] -= scale * grad_w[l][i];
        for (std::size_t i = 0; i < grad_b[l].size(); ++i) net.biases_[l][i] -= scale * grad_b[l][i];
      }
    }
    // Divergence check: the epoch's mean loss and every parameter must stay
    // finite. Saturated softmax outputs clamp the loss, so overflowing
    // weights are caught directly.
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = net.forward(data[i].x, nullptr, nullptr);
      loss += -std::log(std::max(p[data[i].y], 1e-300));
    }
    loss /= static_cast<double>(n);
    bool finite = std::isfinite(loss);
    for (std::size_t l = 0; finite && l < layers; ++l) {
      for (double w : net.weights_[l]) {
        if (!std::isfinite(w)) {
          finite = false;
          break;
        }
      }
      for (double b : net.biases_[l]) {
        if (!std::isfinite(b)) {
          finite = false;
          break;
        }
      }
    }
    if (!finite) {
      throw std::runtime_error("mlp training diverged at epoch " + std::to_string(epoch));
    }
  }
  return net;
}

FeatureVector MlpClassifier::loss_gradient(const FeatureVector& x, int y_true) const {
  if (y_true != 0 && y_true != 1) throw std::invalid_argument("label must be 0 or 1");
  if (static_cast<int>(x.size()) != sizes_.front()) {
    throw std::invalid_argument("query dimension does not match network input");
  }
  std::vector<std::vector<double>> acts, pre;
  const auto prob = forward(x, &acts, &pre);
  std::vector<double> delta{prob[0], prob[1]};
  delta[y_true] -= 1.0;
  const std::size_t layers = weights_.size();
  for (std::size_t l = layers; l-- > 0;) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    std::vector<double> prev(in, 0.0);
    for (int o = 0; o < out; ++o) {
      const double* row = weights_[l].data() + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) prev[i] += row[i] * delta[o];
    }
    if (l > 0) {
      for (int i = 0; i < in; ++i) {
        if (pre[l - 1][i] <= 0.0) prev[i] = 0.0;
      }
    }
    delta = std::move(prev);
  }
  return FeatureVector(delta.begin(), delta.end());
}

FeatureVector MlpClassifier::class_prob_gradient(const FeatureVector& x, int cls) const {
  const double p = predict(x)[cls];
  FeatureVector g = loss_gradient(x, cls);
  for (double& v : g) v *= -p;
  return g;
}

nlohmann::json MlpClassifier::to_json() const {
  nlohmann::json j;
  j["layer_sizes"] = sizes_;
  j["weights"] = weights_;
  j["biases"] = biases_;
  return j;
}

MlpClassifier MlpClassifier::from_json(const nlohmann::json& j) {
  MlpClassifier net;
  try {
    net.sizes_ = j.at("layer_sizes").get<std::vector<int>>();
    net.weights_ = j.at("weights").get<std::vector<std::vector<double>>>();
    net.biases_ = j.at("biases").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed mlp parameter record: ") + e.what());
  }
  if (net.sizes_.size() < 2 || net.weights_.size() != net.sizes_.size() - 1 ||
      net.biases_.size() != net.weights_.size()) {
    throw std::invalid_argument("malformed mlp parameter record");
  }
  for (std::size_t l = 0; l + 1 < net.sizes_.size(); ++l) {
    const std::size_t expect = static_cast<std::size_t>(net.sizes_[l]) * net.sizes_[l + 1];
    if (net.weights_[l].size() != expect ||
        net.biases_[l].size() != static_cast<std::size_t>(net.sizes_[l + 1])) {
      throw std::invalid_argument("malformed mlp parameter record");
    }
  }
  return net;
}

}  // namespace robustnn
