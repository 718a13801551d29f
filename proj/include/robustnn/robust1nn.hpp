#pragma once

#include <cstddef>
#include <vector>

#include "robustnn/exec.hpp"
#include "robustnn/geometry.hpp"

namespace robustnn {

// Parameters of the pruning defense.
struct RobustParams {
  double radius = 0.1;     // defense radius r: opposite labels end up > r apart
  double margin = 0.45;    // confidence margin in (0, 1/2)
  double fail_prob = 0.1;  // allowed failure probability in (0, 1)

  void validate(bool need_radius = true) const;
};

enum class ConfidentLabel { Zero, One, Abstain };

// Size of the neighbor vote used by confident labeling:
// ceil(3 * ln(2n / fail_prob) / margin^2), capped at n. Natural log.
int confident_sample_size(std::size_t n, double margin, double fail_prob);

// Averages the labels of the confident_sample_size nearest training points.
// Abstains when the mean lands inside [1/2 - margin, 1/2 + margin]; otherwise
// returns the side of the interval the mean falls on.
ConfidentLabel confident_label(const KdTree& index, const RobustParams& params,
                               const FeatureVector& x);

// Confident label of every training point against its own training set.
std::vector<ConfidentLabel> batch_confident_labels(const KdTree& index,
                                                   const RobustParams& params,
                                                   Exec exec = Exec::Parallel);

// Ids (ascending) of training points that are confidently self-consistent:
// point i is kept iff its confident label equals its own label and every
// training point within params.radius has that same confident label. An
// abstaining neighbor blocks the mark. The result is always radius-separated:
// two kept points with opposite labels can never lie within the radius.
std::vector<int> mark_red(const KdTree& index, const RobustParams& params,
                          Exec exec = Exec::Parallel);

// Largest subset of the data in which no two points with different labels lie
// within distance r, subject to containing all `required` ids. Exact for
// binary labels: conflicts form a bipartite graph, so a maximum independent
// set falls out of a maximum matching and a minimum vertex cover. Points that
// conflict with an oppositely-labeled required point are excluded up front.
// Returns ascending ids. Throws std::invalid_argument when `required` itself
// violates the separation requirement.
std::vector<int> max_separated_subset(const LabeledDataset& data, double r,
                                      const std::vector<int>& required,
                                      Exec exec = Exec::Parallel);

// Full pruning pipeline: mark_red, then the largest separated subset that
// keeps every red point. Returns the ids kept (ascending).
std::vector<int> robust_1nn_select(const LabeledDataset& data, const RobustParams& params,
                                   Exec exec = Exec::Parallel);

// Same pipeline, materialized as a new training set (drop-in replacement for
// the original). Throws std::runtime_error if nothing survives pruning.
LabeledDataset robust_1nn_train(const LabeledDataset& data, const RobustParams& params,
                                Exec exec = Exec::Parallel);

namespace detail {

// Maximum bipartite matching (Hopcroft-Karp). adj[l] lists right-side
// neighbors of left vertex l. match_* hold partner indices or -1.
struct Matching {
  int size = 0;
  std::vector<int> match_left, match_right;
};
Matching hopcroft_karp(int n_left, int n_right, const std::vector<std::vector<int>>& adj);

}  // namespace detail

}  // namespace robustnn
