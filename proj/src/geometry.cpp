#include "robustnn/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace robustnn {

namespace {

void check_finite(const FeatureVector& x) {
  for (double v : x) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("feature vector has a non-finite coordinate");
    }
  }
}

// Relative slack applied to kd-tree pruning bounds. Accumulated rounding in a
// d-term sum of squares is below 1e-12 relative, so this can only cause extra
// node visits, never a missed candidate.
constexpr double kPruneSlack = 1e-9;

bool pair_less(double d1, int id1, double d2, int id2) {
  if (d1 != d2) return d1 < d2;
  return id1 < id2;
}

}  // namespace

LabeledDataset::LabeledDataset(int dim) : dim_(dim) {
  if (dim < 1) throw std::invalid_argument("dataset dimension must be >= 1");
}

void LabeledDataset::add(FeatureVector x, int y) {
  if (y != 0 && y != 1) throw std::invalid_argument("label must be 0 or 1");
  check_finite(x);
  if (dim_ == 0) {
    if (x.empty()) throw std::invalid_argument("dataset dimension must be >= 1");
    dim_ = static_cast<int>(x.size());
  } else if (static_cast<int>(x.size()) != dim_) {
    throw std::invalid_argument("example dimension does not match dataset dimension");
  }
  examples_.push_back(LabeledExample{std::move(x), y});
}

void LabeledDataset::reserve(std::size_t n) { examples_.reserve(n); }

LabeledDataset LabeledDataset::subset(const std::vector<int>& ids) const {
  LabeledDataset out;
  if (dim_ > 0) out = LabeledDataset(dim_);
  out.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= size()) {
      throw std::invalid_argument("subset id out of range");
    }
    out.add(examples_[id].x, examples_[id].y);
  }
  return out;
}

namespace detail {
double squared_distance(const FeatureVector& a, const FeatureVector& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("distance between vectors of different dimension");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}
}  // namespace detail

double euclidean_distance(const FeatureVector& a, const FeatureVector& b) {
  return std::sqrt(detail::squared_distance(a, b));
}

std::vector<Neighbor> knn_scan(const LabeledDataset& data, const FeatureVector& q, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > data.size()) {
    throw std::invalid_argument("k must satisfy 1 <= k <= dataset size");
  }
  std::vector<Neighbor> all;
  all.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    all.push_back(Neighbor{static_cast<int>(i), euclidean_distance(q, data.point(i))});
  }
  std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    return pair_less(a.dist, a.id, b.dist, b.id);
  });
  all.resize(static_cast<std::size_t>(k));
  return all;
}

std::vector<int> range_scan(const LabeledDataset& data, const FeatureVector& q, double radius) {
  if (radius < 0.0) throw std::invalid_argument("radius must be >= 0");
  std::vector<int> out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (euclidean_distance(q, data.point(i)) <= radius) out.push_back(static_cast<int>(i));
  }
  return out;
}

KdTree::KdTree(std::shared_ptr<const LabeledDataset> data) : data_(std::move(data)) {
  if (!data_ || data_->empty()) {
    throw std::invalid_argument("cannot index an empty dataset");
  }
  order_.resize(data_->size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
  nodes_.reserve(2 * data_->size() / kLeafSize + 8);
  root_ = build(0, static_cast<int>(order_.size()));
}

KdTree::KdTree(const LabeledDataset& data)
    : KdTree(std::make_shared<const LabeledDataset>(data)) {}

int KdTree::build(int begin, int end) {
  Node node;
  if (end - begin <= kLeafSize) {
    node.begin = begin;
    node.end = end;
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }
  // Split along the axis with the widest extent over this range.
  const int d = data_->dim();
  int best_axis = 0;
  double best_spread = -1.0;
  for (int a = 0; a < d; ++a) {
    double lo = data_->point(order_[begin])[a];
    double hi = lo;
    for (int i = begin + 1; i < end; ++i) {
      const double v = data_->point(order_[i])[a];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      best_axis = a;
    }
  }
  if (best_spread == 0.0) {
    // All points in this range coincide; splitting cannot make progress.
    node.begin = begin;
    node.end = end;
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int i, int j) {
                     return data_->point(i)[best_axis] < data_->point(j)[best_axis];
                   });
  node.axis = best_axis;
  node.split = data_->point(order_[mid])[best_axis];
  const int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

void KdTree::check_query(const FeatureVector& q) const {
  if (static_cast<int>(q.size()) != data_->dim()) {
    throw std::invalid_argument("query dimension does not match index dimension");
  }
}

std::vector<Neighbor> KdTree::nearest(const FeatureVector& q, int k) const {
  check_query(q);
  if (k < 1 || static_cast<std::size_t>(k) > data_->size()) {
    throw std::invalid_argument("k must satisfy 1 <= k <= dataset size");
  }
  // Max-heap of the k best (dist, id) pairs; top is the current worst.
  std::priority_queue<std::pair<double, int>> heap;
  // Iterative traversal, near child first.
  std::vector<std::pair<int, double>> stack;  // (node, lower bound on distance)
  stack.emplace_back(root_, 0.0);
  while (!stack.empty()) {
    const auto [ni, bound] = stack.back();
    stack.pop_back();
    if (static_cast<int>(heap.size()) == k &&
        bound > heap.top().first * (1.0 + kPruneSlack) + 1e-12) {
      continue;
    }
    const Node& node = nodes_[ni];
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int id = order_[i];
        const double dist = euclidean_distance(q, data_->point(id));
        if (static_cast<int>(heap.size()) < k) {
          heap.emplace(dist, id);
        } else if (pair_less(dist, id, heap.top().first, heap.top().second)) {
          heap.pop();
          heap.emplace(dist, id);
        }
      }
      continue;
    }
    const double diff = q[node.axis] - node.split;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    // Push far first so the near child is explored first.
    stack.emplace_back(far, std::max(bound, std::abs(diff)));
    stack.emplace_back(near, bound);
  }
  std::vector<Neighbor> out(heap.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = Neighbor{heap.top().second, heap.top().first};
    heap.pop();
  }
  return out;
}

std::vector<int> KdTree::within(const FeatureVector& q, double radius) const {
  check_query(q);
  if (radius < 0.0) throw std::invalid_argument("radius must be >= 0");
  std::vector<int> out;
  std::vector<int> stack{root_};
  const double visit_bound = radius * (1.0 + kPruneSlack) + 1e-12;
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int id = order_[i];
        // Same inclusion test as range_scan, so results agree exactly.
        if (euclidean_distance(q, data_->point(id)) <= radius) out.push_back(id);
      }
      continue;
    }
    const double diff = q[node.axis] - node.split;
    if (diff <= visit_bound) stack.push_back(node.left);
    if (-diff <= visit_bound) stack.push_back(node.right);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace robustnn
