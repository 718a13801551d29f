#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>

#include "robustnn/analytic.hpp"
#include "robustnn/geometry.hpp"

namespace robustnn {

// Two interleaving half-circle arcs in the plane ("two moons"): class 0 on
// the upper unit half-circle centered at the origin, class 1 on the lower
// half-circle shifted to center (1, 1/2), each coordinate perturbed by
// N(0, sigma^2) noise.
struct HalfmoonSpec {
  std::size_t n = 2000;
  double sigma = 0.2;
  std::uint64_t seed = 0;
};

// Deterministic per seed; arc angles are drawn uniformly, so different seeds
// give different datasets even at sigma = 0. Odd n puts the extra point in
// class 0. Class-0 points come first.
LabeledDataset gen_halfmoon(const HalfmoonSpec& spec);

// n i.i.d. draws from the distribution's marginal with labels drawn
// Bernoulli(eta(x)). Deterministic per seed.
LabeledDataset sample_analytic(const AnalyticDistribution& dist, std::size_t n,
                               std::uint64_t seed);

// Loads an IDX image/label file pair (4-byte big-endian magic 0x00000803 for
// images, 0x00000801 for labels, big-endian dimension sizes, unsigned-byte
// payload). Keeps only the two requested digits, relabeled digit_zero -> 0
// and digit_one -> 1, capped at per_class_limit per class in file order.
// Pixels are flattened row-major and scaled to [0, 1] by dividing by 255.
// Throws std::runtime_error naming the offending file on a bad magic number,
// an image/label count mismatch, or a truncated payload.
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path,
                        int digit_zero, int digit_one,
                        std::size_t per_class_limit = std::numeric_limits<std::size_t>::max());

// Loads the UCI abalone table (headerless CSV:
// sex,length,diameter,height,whole,shucked,viscera,shell,rings). Features are
// the 7 numeric measurements (sex dropped); the label is 1 iff the age
// rings + 1.5 strictly exceeds 10.5 years. Malformed rows raise
// std::runtime_error with the 1-based line number.
LabeledDataset load_abalone(const std::string& csv_path);

// Dataset CSV with header `label,f0,...,f{d-1}`. Features are written with 17
// significant digits so read_csv(write_csv(D)) reproduces every coordinate
// bit for bit.
void write_csv(const LabeledDataset& data, const std::string& path);
LabeledDataset read_csv(const std::string& path);

}  // namespace robustnn
