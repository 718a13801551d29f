#include "robustnn/datasets.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace robustnn {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

double parse_double(const std::string& s, const std::string& path, std::size_t line_no) {
  const char* c = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(c, &end);
  if (end == c || *end != '\0') {
    throw std::runtime_error(path + " line " + std::to_string(line_no) + ": bad number '" + s +
                             "'");
  }
  return v;
}

std::vector<unsigned char> read_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::vector<unsigned char>((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off,
                        const std::string& path) {
  if (off + 4 > b.size()) throw std::runtime_error("truncated header in " + path);
  return (static_cast<std::uint32_t>(b[off]) << 24) |
         (static_cast<std::uint32_t>(b[off + 1]) << 16) |
         (static_cast<std::uint32_t>(b[off + 2]) << 8) | static_cast<std::uint32_t>(b[off + 3]);
}

}  // namespace

LabeledDataset gen_halfmoon(const HalfmoonSpec& spec) {
  if (spec.n < 1) throw std::invalid_argument("halfmoon sample count must be >= 1");
  if (!(spec.sigma >= 0.0)) throw std::invalid_argument("halfmoon noise sigma must be >= 0");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  // normal_distribution rejects sigma = 0, so keep a dummy width and skip the
  // draws entirely in the noiseless case.
  std::normal_distribution<double> noise(0.0, spec.sigma > 0.0 ? spec.sigma : 1.0);
  LabeledDataset data(2);
  data.reserve(spec.n);
  const std::size_t n0 = (spec.n + 1) / 2;
  for (std::size_t i = 0; i < spec.n; ++i) {
    const bool upper = i < n0;
    const double t = angle(rng);
    double x = upper ? std::cos(t) : 1.0 - std::cos(t);
    double y = upper ? std::sin(t) : 0.5 - std::sin(t);
    if (spec.sigma > 0.0) {
      x += noise(rng);
      y += noise(rng);
    }
    data.add({x, y}, upper ? 0 : 1);
  }
  return data;
}

LabeledDataset sample_analytic(const AnalyticDistribution& dist, std::size_t n,
                               std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample count must be >= 1");
  if (!dist.sample_x || !dist.eta) {
    throw std::invalid_argument("distribution must define a sampler and a posterior");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  LabeledDataset data(dist.dim);
  data.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    FeatureVector x = dist.sample_x(rng);
    const int y = unit(rng) < dist.eta(x) ? 1 : 0;
    data.add(std::move(x), y);
  }
  return data;
}

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path,
                        int digit_zero, int digit_one, std::size_t per_class_limit) {
  if (digit_zero == digit_one) throw std::invalid_argument("kept digits must differ");
  const auto img = read_binary(images_path);
  const auto lab = read_binary(labels_path);

  const std::uint32_t img_magic = read_be32(img, 0, images_path);
  if (img_magic != 0x00000803u) {
    throw std::runtime_error("bad magic number in " + images_path + ": expected 2051, got " +
                             std::to_string(img_magic));
  }
  const std::uint32_t lab_magic = read_be32(lab, 0, labels_path);
  if (lab_magic != 0x00000801u) {
    throw std::runtime_error("bad magic number in " + labels_path + ": expected 2049, got " +
                             std::to_string(lab_magic));
  }
  const std::uint32_t n_img = read_be32(img, 4, images_path);
  const std::uint32_t rows = read_be32(img, 8, images_path);
  const std::uint32_t cols = read_be32(img, 12, images_path);
  const std::uint32_t n_lab = read_be32(lab, 4, labels_path);
  if (n_img != n_lab) {
    throw std::runtime_error("image/label count mismatch: " + images_path + " has " +
                             std::to_string(n_img) + ", " + labels_path + " has " +
                             std::to_string(n_lab));
  }
  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  if (pixels == 0) throw std::runtime_error("zero image dimensions in " + images_path);
  if (img.size() < 16 + static_cast<std::size_t>(n_img) * pixels) {
    throw std::runtime_error("truncated payload in " + images_path);
  }
  if (lab.size() < 8 + static_cast<std::size_t>(n_lab)) {
    throw std::runtime_error("truncated payload in " + labels_path);
  }

  LabeledDataset data(static_cast<int>(pixels));
  std::size_t kept0 = 0, kept1 = 0;
  for (std::uint32_t i = 0; i < n_img; ++i) {
    if (kept0 >= per_class_limit && kept1 >= per_class_limit) break;
    const int digit = lab[8 + i];
    int y;
    if (digit == digit_zero) {
      if (kept0 >= per_class_limit) continue;
      y = 0;
      ++kept0;
    } else if (digit == digit_one) {
      if (kept1 >= per_class_limit) continue;
      y = 1;
      ++kept1;
    } else {
      continue;
    }
    FeatureVector x(pixels);
    const unsigned char* px = img.data() + 16 + static_cast<std::size_t>(i) * pixels;
    for (std::size_t a = 0; a < pixels; ++a) x[a] = px[a] / 255.0;
    data.add(std::move(x), y);
  }
  return data;
}

LabeledDataset load_abalone(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot open " + csv_path);
  LabeledDataset data(7);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 9) {
      throw std::runtime_error(csv_path + " line " + std::to_string(line_no) +
                               ": expected 9 fields, got " + std::to_string(fields.size()));
    }
    FeatureVector x(7);
    for (int a = 0; a < 7; ++a) x[a] = parse_double(fields[a + 1], csv_path, line_no);
    const double rings = parse_double(fields[8], csv_path, line_no);
    data.add(std::move(x), rings + 1.5 > 10.5 ? 1 : 0);
  }
  if (data.empty()) throw std::runtime_error(csv_path + ": no data rows");
  return data;
}

void write_csv(const LabeledDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "label";
  for (int a = 0; a < data.dim(); ++a) out << ",f" << a;
  out << '\n';
  char buf[40];
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.label(i);
    for (double v : data.point(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path);
}

LabeledDataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  strip_cr(line);
  const auto header = split(line, ',');
  if (header.size() < 2 || header[0] != "label") {
    throw std::runtime_error(path + ": bad header, expected label,f0,...");
  }
  for (std::size_t a = 1; a < header.size(); ++a) {
    if (header[a] != "f" + std::to_string(a - 1)) {
      throw std::runtime_error(path + ": bad header column '" + header[a] + "'");
    }
  }
  const int d = static_cast<int>(header.size()) - 1;
  LabeledDataset data(d);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != header.size()) {
      throw std::runtime_error(path + " line " + std::to_string(line_no) + ": expected " +
                               std::to_string(header.size()) + " fields, got " +
                               std::to_string(fields.size()));
    }
    int y;
    if (fields[0] == "0") {
      y = 0;
    } else if (fields[0] == "1") {
      y = 1;
    } else {
      throw std::runtime_error(path + " line " + std::to_string(line_no) + ": bad label '" +
                               fields[0] + "'");
    }
    FeatureVector x(d);
    for (int a = 0; a < d; ++a) x[a] = parse_double(fields[a + 1], path, line_no);
    data.add(std::move(x), y);
  }
  return data;
}

}  // namespace robustnn
