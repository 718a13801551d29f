#include "robustnn/robust1nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <stdexcept>

namespace robustnn {

void RobustParams::validate(bool need_radius) const {
  if (need_radius && !(radius >= 0.0)) {
    throw std::invalid_argument("defense radius must be >= 0");
  }
  if (!(margin > 0.0) || !(margin < 0.5)) {
    throw std::invalid_argument("margin must lie in (0, 1/2)");
  }
  if (!(fail_prob > 0.0) || !(fail_prob < 1.0)) {
    throw std::invalid_argument("fail_prob must lie in (0, 1)");
  }
}

int confident_sample_size(std::size_t n, double margin, double fail_prob) {
  if (n == 0) throw std::invalid_argument("dataset must be nonempty");
  RobustParams{0.0, margin, fail_prob}.validate(false);
  const double raw = 3.0 * std::log(2.0 * static_cast<double>(n) / fail_prob) / (margin * margin);
  const double k = std::ceil(raw);
  if (k >= static_cast<double>(n)) return static_cast<int>(n);
  return std::max(1, static_cast<int>(k));
}

ConfidentLabel confident_label(const KdTree& index, const RobustParams& params,
                               const FeatureVector& x) {
  params.validate(false);
  const LabeledDataset& data = index.data();
  const int k = confident_sample_size(data.size(), params.margin, params.fail_prob);
  const auto nbrs = index.nearest(x, k);
  double sum = 0.0;
  for (const auto& nb : nbrs) sum += data.label(nb.id);
  const double mean = sum / static_cast<double>(k);
  if (mean > 0.5 + params.margin) return ConfidentLabel::One;
  if (mean < 0.5 - params.margin) return ConfidentLabel::Zero;
  return ConfidentLabel::Abstain;
}

std::vector<ConfidentLabel> batch_confident_labels(const KdTree& index,
                                                   const RobustParams& params, Exec exec) {
  params.validate(false);
  const LabeledDataset& data = index.data();
  std::vector<ConfidentLabel> out(data.size());
  const std::int64_t n = static_cast<std::int64_t>(data.size());
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t i = 0; i < n; ++i) out[i] = confident_label(index, params, data.point(i));
  } else {
    for (std::int64_t i = 0; i < n; ++i) out[i] = confident_label(index, params, data.point(i));
  }
  return out;
}

namespace {

bool label_matches(ConfidentLabel cl, int y) {
  return (cl == ConfidentLabel::One && y == 1) || (cl == ConfidentLabel::Zero && y == 0);
}

}  // namespace

std::vector<int> mark_red(const KdTree& index, const RobustParams& params, Exec exec) {
  params.validate();
  const LabeledDataset& data = index.data();
  const auto labels = batch_confident_labels(index, params, exec);
  std::vector<char> red(data.size(), 0);
  const std::int64_t n = static_cast<std::int64_t>(data.size());
  auto body = [&](std::int64_t i) {
    if (!label_matches(labels[i], data.label(i))) return;
    for (int j : index.within(data.point(i), params.radius)) {
      if (labels[j] != labels[i]) return;
    }
    red[i] = 1;
  };
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t i = 0; i < n; ++i) body(i);
  } else {
    for (std::int64_t i = 0; i < n; ++i) body(i);
  }
  std::vector<int> out;
  for (std::int64_t i = 0; i < n; ++i) {
    if (red[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

namespace detail {

Matching hopcroft_karp(int n_left, int n_right, const std::vector<std::vector<int>>& adj) {
  Matching m;
  m.match_left.assign(n_left, -1);
  m.match_right.assign(n_right, -1);
  if (static_cast<int>(adj.size()) != n_left) {
    throw std::invalid_argument("adjacency size does not match left vertex count");
  }
  constexpr int kInf = std::numeric_limits<int>::max();
  std::vector<int> dist(n_left);
  std::queue<int> bfs;

  auto layer = [&]() {
    bool reachable = false;
    for (int l = 0; l < n_left; ++l) {
      if (m.match_left[l] < 0) {
        dist[l] = 0;
        bfs.push(l);
      } else {
        dist[l] = kInf;
      }
    }
    while (!bfs.empty()) {
      const int l = bfs.front();
      bfs.pop();
      for (int r : adj[l]) {
        const int nl = m.match_right[r];
        if (nl < 0) {
          reachable = true;
        } else if (dist[nl] == kInf) {
          dist[nl] = dist[l] + 1;
          bfs.push(nl);
        }
      }
    }
    return reachable;
  };

  std::function<bool(int)> augment = [&](int l) {
    for (int r : adj[l]) {
      const int nl = m.match_right[r];
      if (nl < 0 || (dist[nl] == dist[l] + 1 && augment(nl))) {
        m.match_left[l] = r;
        m.match_right[r] = l;
        return true;
      }
    }
    dist[l] = kInf;
    return false;
  };

  while (layer()) {
    for (int l = 0; l < n_left; ++l) {
      if (m.match_left[l] < 0 && augment(l)) ++m.size;
    }
  }
  return m;
}

}  // namespace detail

std::vector<int> max_separated_subset(const LabeledDataset& data, double r,
                                      const std::vector<int>& required, Exec exec) {
  if (data.empty()) throw std::invalid_argument("dataset must be nonempty");
  if (!(r >= 0.0)) throw std::invalid_argument("separation radius must be >= 0");
  const int n = static_cast<int>(data.size());
  std::vector<char> is_required(n, 0);
  for (int id : required) {
    if (id < 0 || id >= n) throw std::invalid_argument("required id out of range");
    is_required[id] = 1;
  }

  const KdTree index(std::make_shared<const LabeledDataset>(data));

  // The required set must itself satisfy the separation requirement, and any
  // other point that conflicts with a required point cannot be kept.
  std::vector<char> excluded(n, 0);
  for (int id : required) {
    for (int j : index.within(data.point(id), r)) {
      if (data.label(j) == data.label(id)) continue;
      if (is_required[j]) {
        throw std::invalid_argument(
            "required points are not separation-consistent at this radius");
      }
      excluded[j] = 1;
    }
  }

  // Bipartite conflict graph over the surviving candidates: left = label 0,
  // right = label 1, one edge per opposite-label pair within distance r.
  std::vector<int> left_ids, right_ids;
  std::vector<int> side_index(n, -1);
  for (int i = 0; i < n; ++i) {
    if (excluded[i]) continue;
    if (data.label(i) == 0) {
      side_index[i] = static_cast<int>(left_ids.size());
      left_ids.push_back(i);
    } else {
      side_index[i] = static_cast<int>(right_ids.size());
      right_ids.push_back(i);
    }
  }

  std::vector<std::vector<int>> adj(left_ids.size());
  const std::int64_t n_left = static_cast<std::int64_t>(left_ids.size());
  auto edges_of = [&](std::int64_t li) {
    const int i = left_ids[li];
    std::vector<int> row;
    for (int j : index.within(data.point(i), r)) {
      if (!excluded[j] && data.label(j) == 1) row.push_back(side_index[j]);
    }
    adj[li] = std::move(row);
  };
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t li = 0; li < n_left; ++li) edges_of(li);
  } else {
    for (std::int64_t li = 0; li < n_left; ++li) edges_of(li);
  }

  const auto matching = detail::hopcroft_karp(static_cast<int>(left_ids.size()),
                                              static_cast<int>(right_ids.size()), adj);

  // Koenig: alternate from unmatched left vertices; the minimum vertex cover
  // is (unvisited left) + (visited right), so its complement below is a
  // maximum independent set. Required points are isolated by construction and
  // always land in it.
  std::vector<char> vis_left(left_ids.size(), 0), vis_right(right_ids.size(), 0);
  std::queue<int> bfs;
  for (std::size_t l = 0; l < left_ids.size(); ++l) {
    if (matching.match_left[l] < 0) {
      vis_left[l] = 1;
      bfs.push(static_cast<int>(l));
    }
  }
  while (!bfs.empty()) {
    const int l = bfs.front();
    bfs.pop();
    for (int rgt : adj[l]) {
      if (vis_right[rgt]) continue;
      vis_right[rgt] = 1;
      const int nl = matching.match_right[rgt];
      if (nl >= 0 && !vis_left[nl]) {
        vis_left[nl] = 1;
        bfs.push(nl);
      }
    }
  }

  std::vector<int> out;
  out.reserve(left_ids.size() + right_ids.size());
  for (std::size_t l = 0; l < left_ids.size(); ++l) {
    if (vis_left[l]) out.push_back(left_ids[l]);
  }
  for (std::size_t rgt = 0; rgt < right_ids.size(); ++rgt) {
    if (!vis_right[rgt]) out.push_back(right_ids[rgt]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> robust_1nn_select(const LabeledDataset& data, const RobustParams& params,
                                   Exec exec) {
  params.validate();
  if (data.empty()) return {};
  const KdTree index(std::make_shared<const LabeledDataset>(data));
  const auto red = mark_red(index, params, exec);
  return max_separated_subset(data, params.radius, red, exec);
}

LabeledDataset robust_1nn_train(const LabeledDataset& data, const RobustParams& params,
                                Exec exec) {
  const auto kept = robust_1nn_select(data, params, exec);
  if (kept.empty()) {
    throw std::runtime_error("pruning removed every training point; lower the defense radius");
  }
  return data.subset(kept);
}

}  // namespace robustnn
