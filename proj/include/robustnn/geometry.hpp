#pragma once

#include <cstddef>
#include <memory>
#include <vector>

namespace robustnn {

using FeatureVector = std::vector<double>;

struct LabeledExample {
  FeatureVector x;
  int y;  // binary label, 0 or 1
};

// A finite labeled sample with stable integer ids (insertion order).
// Immutable once handed to an index or classifier.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  explicit LabeledDataset(int dim);

  // Validates the label is 0/1, coordinates are finite, and the dimension
  // matches (the first add fixes the dimension when default-constructed).
  void add(FeatureVector x, int y);
  void reserve(std::size_t n);

  int dim() const { return dim_; }
  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }
  const LabeledExample& operator[](std::size_t id) const { return examples_[id]; }
  const FeatureVector& point(std::size_t id) const { return examples_[id].x; }
  int label(std::size_t id) const { return examples_[id].y; }
  const std::vector<LabeledExample>& examples() const { return examples_; }

  // New dataset holding the given ids in the given order (ids must be valid).
  LabeledDataset subset(const std::vector<int>& ids) const;

 private:
  int dim_ = 0;
  std::vector<LabeledExample> examples_;
};

// Throws std::invalid_argument on dimension mismatch.
double euclidean_distance(const FeatureVector& a, const FeatureVector& b);

namespace detail {
// Squared distance, internal only; public APIs report true distances.
double squared_distance(const FeatureVector& a, const FeatureVector& b);
}  // namespace detail

struct Neighbor {
  int id;
  double dist;
};

// Exhaustive-scan oracles. Deliberately index-free so KdTree results can be
// cross-checked against an independent code path. Neighbor order is ascending
// (distance, id); ties broken by smaller id.
std::vector<Neighbor> knn_scan(const LabeledDataset& data, const FeatureVector& q, int k);
std::vector<int> range_scan(const LabeledDataset& data, const FeatureVector& q, double radius);

// Bucketed kd-tree over a dataset. Queries agree exactly with the scan
// oracles, including tie-breaking: candidates are compared by the pair
// (computed distance, id), and subtree pruning keeps a small relative slack
// so floating-point rounding can never change the reported result set.
// Safe for concurrent read-only queries.
class KdTree {
 public:
  explicit KdTree(std::shared_ptr<const LabeledDataset> data);
  explicit KdTree(const LabeledDataset& data);  // copies the dataset

  // k nearest neighbors, ascending (dist, id). Throws unless 1 <= k <= size.
  std::vector<Neighbor> nearest(const FeatureVector& q, int k) const;
  // Ids of all points with euclidean_distance(q, x) <= radius, ascending id.
  std::vector<int> within(const FeatureVector& q, double radius) const;

  const LabeledDataset& data() const { return *data_; }
  const std::shared_ptr<const LabeledDataset>& data_ptr() const { return data_; }

 private:
  struct Node {
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    int left = -1;
    int right = -1;
    int begin = 0;  // leaf range into order_
    int end = 0;
  };

  int build(int begin, int end);
  void check_query(const FeatureVector& q) const;

  std::shared_ptr<const LabeledDataset> data_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
  static constexpr int kLeafSize = 16;
};

}  // namespace robustnn
