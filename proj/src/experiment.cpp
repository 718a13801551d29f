#include "robustnn/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>
#include <system_error>
#include <utility>

#include <nlohmann/json.hpp>

#include "robustnn/classifiers.hpp"
#include "robustnn/datasets.hpp"
#include "robustnn/eval.hpp"
#include "robustnn/robust1nn.hpp"
#include "robustnn/version.hpp"

namespace robustnn {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::int64_t ms_since(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
}

// Shortest decimal form that parses back to the same double.
std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

const char* dataset_kind_name(DatasetSpec::Kind k) {
  switch (k) {
    case DatasetSpec::Kind::Halfmoon: return "halfmoon";
    case DatasetSpec::Kind::Csv: return "csv";
    case DatasetSpec::Kind::Mnist: return "mnist";
    case DatasetSpec::Kind::Abalone: return "abalone";
  }
  throw std::invalid_argument("unknown dataset kind");
}

DatasetSpec::Kind dataset_kind_from_string(const std::string& s) {
  if (s == "halfmoon") return DatasetSpec::Kind::Halfmoon;
  if (s == "csv") return DatasetSpec::Kind::Csv;
  if (s == "mnist") return DatasetSpec::Kind::Mnist;
  if (s == "abalone") return DatasetSpec::Kind::Abalone;
  throw std::invalid_argument("unknown dataset kind '" + s +
                              "' (expected halfmoon, csv, mnist, or abalone)");
}

const char* direction_name(DirectDirection d) {
  return d == DirectDirection::Toward ? "toward" : "away";
}

DirectDirection direction_from_string(const std::string& s) {
  if (s == "toward") return DirectDirection::Toward;
  if (s == "away") return DirectDirection::Away;
  throw std::invalid_argument("unknown direct-attack direction '" + s + "'");
}

json mlp_to_json(const MlpConfig& m) {
  return json{{"hidden", m.hidden},
              {"epochs", m.epochs},
              {"learning_rate", m.learning_rate},
              {"batch_size", m.batch_size}};
}

MlpConfig mlp_from_json(const json& j) {
  MlpConfig m;
  m.hidden = j.value("hidden", m.hidden);
  m.epochs = j.value("epochs", m.epochs);
  m.learning_rate = j.value("learning_rate", m.learning_rate);
  m.batch_size = j.value("batch_size", m.batch_size);
  return m;
}

json attack_to_json(const AttackSpec& a) {
  return json{{"kind", a.name()},          {"direction", direction_name(a.direction)},
              {"bandwidth", a.bandwidth},  {"lambda", a.lambda},
              {"rounds", a.rounds},        {"seed_size", a.seed_size},
              {"mlp", mlp_to_json(a.mlp)}};
}

AttackSpec attack_from_json(const json& j) {
  AttackSpec a;
  a.kind = attack_kind_from_string(j.value("kind", std::string("direct")));
  a.direction = direction_from_string(j.value("direction", std::string("toward")));
  a.bandwidth = j.value("bandwidth", a.bandwidth);
  a.lambda = j.value("lambda", a.lambda);
  a.rounds = j.value("rounds", a.rounds);
  a.seed_size = j.value("seed_size", a.seed_size);
  if (j.contains("mlp")) a.mlp = mlp_from_json(j.at("mlp"));
  return a;
}

json dataset_to_json(const DatasetSpec& d) {
  json j{{"kind", dataset_kind_name(d.kind)}};
  switch (d.kind) {
    case DatasetSpec::Kind::Halfmoon:
      j["train_n"] = d.train_n;
      j["test_n"] = d.test_n;
      j["sigma"] = d.sigma;
      break;
    case DatasetSpec::Kind::Csv:
      j["train_path"] = d.train_path;
      j["test_path"] = d.test_path;
      if (!d.validation_path.empty()) j["validation_path"] = d.validation_path;
      break;
    case DatasetSpec::Kind::Mnist:
      j["train_images"] = d.train_images;
      j["train_labels"] = d.train_labels;
      j["test_images"] = d.test_images;
      j["test_labels"] = d.test_labels;
      j["digit_zero"] = d.digit_zero;
      j["digit_one"] = d.digit_one;
      j["train_per_class"] = d.train_per_class;
      j["test_per_class"] = d.test_per_class;
      break;
    case DatasetSpec::Kind::Abalone:
      j["path"] = d.abalone_path;
      j["train_n"] = d.train_n;
      j["test_n"] = d.test_n;
      break;
  }
  return j;
}

DatasetSpec dataset_from_json(const json& j) {
  DatasetSpec d;
  d.kind = dataset_kind_from_string(j.value("kind", std::string("halfmoon")));
  d.train_n = j.value("train_n", d.train_n);
  d.test_n = j.value("test_n", d.test_n);
  d.sigma = j.value("sigma", d.sigma);
  d.train_path = j.value("train_path", d.train_path);
  d.test_path = j.value("test_path", d.test_path);
  d.validation_path = j.value("validation_path", d.validation_path);
  d.train_images = j.value("train_images", d.train_images);
  d.train_labels = j.value("train_labels", d.train_labels);
  d.test_images = j.value("test_images", d.test_images);
  d.test_labels = j.value("test_labels", d.test_labels);
  d.digit_zero = j.value("digit_zero", d.digit_zero);
  d.digit_one = j.value("digit_one", d.digit_one);
  d.train_per_class = j.value("train_per_class", d.train_per_class);
  d.test_per_class = j.value("test_per_class", d.test_per_class);
  d.abalone_path = j.value("path", d.abalone_path);
  return d;
}

bool needs_blackbox_pool(const AttackSpec& a) {
  return a.kind == AttackKind::BlackBoxKernel || a.kind == AttackKind::BlackBoxMlp;
}

std::vector<FeatureVector> features_of(const LabeledDataset& data, std::size_t cap) {
  std::vector<FeatureVector> out;
  const std::size_t n = std::min(cap, data.size());
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(data.point(i));
  return out;
}

// First `head` examples of every class go to the first output, the rest (up
// to `tail` per class) to the second. File order is preserved within each.
std::pair<LabeledDataset, LabeledDataset> split_per_class(const LabeledDataset& all,
                                                          std::size_t head, std::size_t tail) {
  std::vector<int> head_ids, tail_ids;
  std::size_t seen[2] = {0, 0};
  for (std::size_t i = 0; i < all.size(); ++i) {
    std::size_t& count = seen[all.label(i)];
    if (count < head) {
      head_ids.push_back(static_cast<int>(i));
    } else if (count < head + tail) {
      tail_ids.push_back(static_cast<int>(i));
    }
    ++count;
  }
  return {all.subset(head_ids), all.subset(tail_ids)};
}

std::vector<const Attack*> raw_pointers(
    const std::vector<std::unique_ptr<Attack>>& attacks) {
  std::vector<const Attack*> out;
  out.reserve(attacks.size());
  for (const auto& a : attacks) out.push_back(a.get());
  return out;
}

// Instantiate every configured attack against a deployed training set.
std::vector<std::unique_ptr<Attack>> bind_attacks(const ExperimentConfig& cfg,
                                                  std::shared_ptr<const LabeledDataset> deployed,
                                                  const std::vector<FeatureVector>& pool) {
  const auto clf = std::make_shared<KnnClassifier>(deployed, 1);
  const TargetOracle oracle = [clf](const FeatureVector& x) { return clf->predict(x); };
  std::vector<std::unique_ptr<Attack>> out;
  out.reserve(cfg.attacks.size());
  for (std::size_t a = 0; a < cfg.attacks.size(); ++a) {
    const AttackSpec& spec = cfg.attacks[a];
    std::vector<FeatureVector> seed;
    if (needs_blackbox_pool(spec)) {
      seed = std::vector<FeatureVector>(
          pool.begin(),
          pool.begin() + static_cast<std::ptrdiff_t>(
                             std::min<std::size_t>(spec.seed_size, pool.size())));
      if (seed.empty()) {
        throw std::runtime_error("no seed points available for black-box attack '" +
                                 spec.name() + "'");
      }
    }
    out.push_back(make_attack(spec, deployed, oracle, seed, cfg.seed + kBlackboxSeedOffset + a));
  }
  return out;
}

void write_manifest(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::StandardNN: return "StandardNN";
    case Method::RobustNN: return "RobustNN";
    case Method::ATNN: return "ATNN";
    case Method::ATNNAll: return "ATNN-all";
  }
  throw std::invalid_argument("unknown method");
}

Method method_from_string(const std::string& s) {
  if (s == "StandardNN") return Method::StandardNN;
  if (s == "RobustNN") return Method::RobustNN;
  if (s == "ATNN") return Method::ATNN;
  if (s == "ATNN-all") return Method::ATNNAll;
  throw std::invalid_argument("unknown method '" + s +
                              "' (expected StandardNN, RobustNN, ATNN, or ATNN-all)");
}

void ExperimentConfig::validate() const {
  switch (dataset.kind) {
    case DatasetSpec::Kind::Halfmoon:
      if (dataset.train_n < 1 || dataset.test_n < 1) {
        throw std::invalid_argument("halfmoon train_n and test_n must be >= 1");
      }
      if (!(dataset.sigma >= 0.0)) throw std::invalid_argument("halfmoon sigma must be >= 0");
      break;
    case DatasetSpec::Kind::Csv:
      if (dataset.train_path.empty() || dataset.test_path.empty()) {
        throw std::invalid_argument("csv dataset needs train_path and test_path");
      }
      break;
    case DatasetSpec::Kind::Mnist:
      if (dataset.train_images.empty() || dataset.train_labels.empty() ||
          dataset.test_images.empty() || dataset.test_labels.empty()) {
        throw std::invalid_argument("mnist dataset needs all four IDX paths");
      }
      if (dataset.digit_zero == dataset.digit_one || dataset.digit_zero < 0 ||
          dataset.digit_zero > 9 || dataset.digit_one < 0 || dataset.digit_one > 9) {
        throw std::invalid_argument("mnist digits must be distinct values in 0..9");
      }
      if (dataset.train_per_class < 1 || dataset.test_per_class < 1) {
        throw std::invalid_argument("mnist per-class caps must be >= 1");
      }
      break;
    case DatasetSpec::Kind::Abalone:
      if (dataset.abalone_path.empty()) throw std::invalid_argument("abalone dataset needs path");
      if (dataset.train_n < 1 || dataset.test_n < 1) {
        throw std::invalid_argument("abalone train_n and test_n must be >= 1");
      }
      break;
  }

  if (methods.empty()) throw std::invalid_argument("method list must be nonempty");
  if (attacks.empty()) throw std::invalid_argument("attack list must be nonempty");
  for (const AttackSpec& a : attacks) {
    if ((a.kind == AttackKind::KernelFgsm || a.kind == AttackKind::BlackBoxKernel) &&
        !(a.bandwidth > 0.0)) {
      throw std::invalid_argument("kernel attack bandwidth must be > 0");
    }
    if (needs_blackbox_pool(a)) {
      if (a.seed_size < 1) throw std::invalid_argument("black-box seed_size must be >= 1");
      if (a.rounds < 0) throw std::invalid_argument("black-box rounds must be >= 0");
      if (!(a.lambda > 0.0)) throw std::invalid_argument("black-box lambda must be > 0");
      if (a.kind == AttackKind::BlackBoxMlp) {
        if (a.mlp.epochs < 1 || a.mlp.batch_size < 1 || !(a.mlp.learning_rate > 0.0)) {
          throw std::invalid_argument("black-box mlp training parameters are invalid");
        }
        for (int h : a.mlp.hidden) {
          if (h < 1) throw std::invalid_argument("mlp hidden layer sizes must be >= 1");
        }
      }
    }
  }

  if (attack_radii.empty()) throw std::invalid_argument("attack radius sweep must be nonempty");
  for (std::size_t i = 0; i < attack_radii.size(); ++i) {
    if (!(attack_radii[i] >= 0.0)) throw std::invalid_argument("attack radii must be >= 0");
    if (i > 0 && !(attack_radii[i] > attack_radii[i - 1])) {
      throw std::invalid_argument("attack radius sweep must be strictly increasing");
    }
  }

  const bool any_tuned = std::any_of(methods.begin(), methods.end(),
                                     [](Method m) { return m != Method::StandardNN; });
  if (any_tuned) {
    if (tuning_grid.empty()) {
      throw std::invalid_argument("tuning grid must be nonempty for radius-tuned methods");
    }
    for (double g : tuning_grid) {
      if (!(g >= 0.0)) throw std::invalid_argument("tuning radii must be >= 0");
    }
  }

  RobustParams{0.0, margin, fail_prob}.validate(false);
}

json ExperimentConfig::to_json() const {
  json j;
  j["dataset"] = dataset_to_json(dataset);
  json ms = json::array();
  for (Method m : methods) ms.push_back(method_name(m));
  j["methods"] = std::move(ms);
  json as = json::array();
  for (const AttackSpec& a : attacks) as.push_back(attack_to_json(a));
  j["attacks"] = std::move(as);
  j["attack_radii"] = attack_radii;
  j["tuning_grid"] = tuning_grid;
  j["margin"] = margin;
  j["fail_prob"] = fail_prob;
  j["seed"] = seed;
  j["out_dir"] = out_dir;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig cfg;
  if (j.contains("dataset")) cfg.dataset = dataset_from_json(j.at("dataset"));
  if (j.contains("methods")) {
    cfg.methods.clear();
    for (const auto& m : j.at("methods")) cfg.methods.push_back(method_from_string(m));
  }
  if (j.contains("attacks")) {
    cfg.attacks.clear();
    for (const auto& a : j.at("attacks")) cfg.attacks.push_back(attack_from_json(a));
  }
  cfg.attack_radii = j.value("attack_radii", cfg.attack_radii);
  cfg.tuning_grid = j.value("tuning_grid", cfg.tuning_grid);
  cfg.margin = j.value("margin", cfg.margin);
  cfg.fail_prob = j.value("fail_prob", cfg.fail_prob);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path);
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw std::invalid_argument("config " + path + ": " + e.what());
  }
}

ExperimentData load_experiment_data(const ExperimentConfig& cfg) {
  cfg.validate();
  const DatasetSpec& d = cfg.dataset;
  std::size_t pool_n = 0;
  for (const AttackSpec& a : cfg.attacks) {
    if (needs_blackbox_pool(a)) pool_n = std::max(pool_n, static_cast<std::size_t>(a.seed_size));
  }

  ExperimentData out;
  switch (d.kind) {
    case DatasetSpec::Kind::Halfmoon: {
      out.train = gen_halfmoon({d.train_n, d.sigma, cfg.seed});
      out.test = gen_halfmoon({d.test_n, d.sigma, cfg.seed + kTestSeedOffset});
      out.validation = gen_halfmoon({d.test_n, d.sigma, cfg.seed + kValidationSeedOffset});
      if (pool_n > 0) {
        out.blackbox_seed =
            features_of(gen_halfmoon({pool_n, d.sigma, cfg.seed + kBlackboxSeedOffset}), pool_n);
      }
      return out;
    }
    case DatasetSpec::Kind::Csv: {
      LabeledDataset train = read_csv(d.train_path);
      out.test = read_csv(d.test_path);
      if (!d.validation_path.empty()) {
        out.validation = read_csv(d.validation_path);
        out.train = std::move(train);
      } else {
        // Carve a validation set of test size off the training file's tail.
        const std::size_t val_n = out.test.size();
        if (train.size() <= val_n) {
          throw std::invalid_argument(
              "training file too small to carve a validation split; supply validation_path");
        }
        std::vector<int> train_ids(train.size() - val_n), val_ids(val_n);
        std::iota(train_ids.begin(), train_ids.end(), 0);
        std::iota(val_ids.begin(), val_ids.end(), static_cast<int>(train.size() - val_n));
        out.validation = train.subset(val_ids);
        out.train = train.subset(train_ids);
      }
      if (pool_n > 0) out.blackbox_seed = features_of(out.validation, pool_n);
      return out;
    }
    case DatasetSpec::Kind::Mnist: {
      const LabeledDataset all = load_idx(d.train_images, d.train_labels, d.digit_zero,
                                          d.digit_one, d.train_per_class + d.test_per_class);
      auto [train, validation] = split_per_class(all, d.train_per_class, d.test_per_class);
      out.train = std::move(train);
      out.validation = std::move(validation);
      out.test =
          load_idx(d.test_images, d.test_labels, d.digit_zero, d.digit_one, d.test_per_class);
      if (out.validation.empty()) {
        throw std::invalid_argument("training IDX files have no examples left for validation");
      }
      if (pool_n > 0) out.blackbox_seed = features_of(out.validation, pool_n);
      return out;
    }
    case DatasetSpec::Kind::Abalone: {
      const LabeledDataset all = load_abalone(d.abalone_path);
      if (all.size() < d.train_n + 2 * d.test_n) {
        throw std::invalid_argument("abalone file has fewer rows than train_n + 2 * test_n");
      }
      std::vector<int> ids(all.size());
      std::iota(ids.begin(), ids.end(), 0);
      std::mt19937_64 rng(cfg.seed);
      std::shuffle(ids.begin(), ids.end(), rng);
      const auto take = [&](std::size_t from, std::size_t count) {
        return all.subset(std::vector<int>(ids.begin() + from, ids.begin() + from + count));
      };
      out.train = take(0, d.train_n);
      out.test = take(d.train_n, d.test_n);
      out.validation = take(d.train_n + d.test_n, d.test_n);
      if (pool_n > 0) out.blackbox_seed = features_of(out.validation, pool_n);
      return out;
    }
  }
  throw std::invalid_argument("unknown dataset kind");
}

LabeledDataset build_deployed(const ExperimentConfig& cfg, Method method,
                              const LabeledDataset& train, double defense_radius) {
  switch (method) {
    case Method::StandardNN:
      return train;
    case Method::RobustNN:
      return robust_1nn_train(train, RobustParams{defense_radius, cfg.margin, cfg.fail_prob});
    case Method::ATNN:
      return augment_adversarial(train, {cfg.attacks.front()}, defense_radius,
                                 cfg.seed + kBlackboxSeedOffset);
    case Method::ATNNAll:
      return augment_adversarial(train, cfg.attacks, defense_radius,
                                 cfg.seed + kBlackboxSeedOffset);
  }
  throw std::invalid_argument("unknown method");
}

double tune_defense_radius(const ExperimentConfig& cfg, Method method,
                           const LabeledDataset& train, const LabeledDataset& validation,
                           const std::vector<FeatureVector>& blackbox_seed) {
  if (method == Method::StandardNN) {
    throw std::invalid_argument("StandardNN has no defense radius to tune");
  }
  if (cfg.tuning_grid.empty()) throw std::invalid_argument("tuning grid must be nonempty");
  if (validation.empty()) throw std::invalid_argument("validation set must be nonempty");
  const double attack_radius = cfg.attack_radii.back();

  double best_radius = 0.0;
  double best_score = -1.0;
  for (double g : cfg.tuning_grid) {
    std::shared_ptr<const LabeledDataset> deployed;
    try {
      deployed = std::make_shared<const LabeledDataset>(build_deployed(cfg, method, train, g));
    } catch (const std::exception&) {
      continue;  // infeasible at this radius (e.g. pruning kept nothing)
    }
    const KnnClassifier clf(deployed, 1);
    const auto attacks = bind_attacks(cfg, deployed, blackbox_seed);
    const double score = empirical_robust_accuracy(
        [&clf](const FeatureVector& x) { return clf.predict(x); }, raw_pointers(attacks),
        attack_radius, validation);
    if (score > best_score || (score == best_score && g < best_radius)) {
      best_score = score;
      best_radius = g;
    }
  }
  if (best_score < 0.0) {
    throw std::runtime_error("no tuning radius produced a usable training set");
  }
  return best_radius;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::string out_dir = cfg.out_dir;
  if (out_dir.empty()) {
    const char* env = std::getenv("ROBUSTNN_OUT");
    out_dir = env && *env ? env : "results";
  }
  std::filesystem::create_directories(out_dir);
  const std::string csv_path = (std::filesystem::path(out_dir) / "results.csv").string();
  const std::string manifest_path = (std::filesystem::path(out_dir) / "manifest.json").string();

  json manifest;
  manifest["config"] = cfg.to_json();
  manifest["version"] = kVersion;
  manifest["seeds"] = {{"master", cfg.seed},
                       {"test", cfg.seed + kTestSeedOffset},
                       {"validation", cfg.seed + kValidationSeedOffset},
                       {"blackbox", cfg.seed + kBlackboxSeedOffset}};
  manifest["complete"] = false;
  manifest["timings_ms"] = json::object();
  manifest["chosen_radius"] = json::object();
  manifest["deployed_size"] = json::object();

  const auto t_total = Clock::now();
  RunResult result;
  try {
    const auto t_load = Clock::now();
    const ExperimentData data = load_experiment_data(cfg);
    manifest["timings_ms"]["load"] = ms_since(t_load);

    for (Method method : cfg.methods) {
      const std::string mname = method_name(method);
      json timing;

      const auto t_tune = Clock::now();
      double chosen = 0.0;
      if (method != Method::StandardNN) {
        chosen =
            tune_defense_radius(cfg, method, data.train, data.validation, data.blackbox_seed);
        manifest["chosen_radius"][mname] = chosen;
      }
      timing["tune"] = ms_since(t_tune);

      const auto t_build = Clock::now();
      const auto deployed = std::make_shared<const LabeledDataset>(
          build_deployed(cfg, method, data.train, chosen));
      manifest["deployed_size"][mname] = deployed->size();
      timing["build"] = ms_since(t_build);

      const auto t_eval = Clock::now();
      const KnnClassifier clf(deployed, 1);
      const PredictFn predict = [&clf](const FeatureVector& x) { return clf.predict(x); };
      const auto certs = batch_certify(clf.index(), data.test);
      std::size_t clean_hits = 0;
      for (std::size_t i = 0; i < data.test.size(); ++i) {
        if (certs[i].predicted == data.test.label(i)) ++clean_hits;
      }
      const double clean_acc =
          static_cast<double>(clean_hits) / static_cast<double>(data.test.size());

      const auto attacks = bind_attacks(cfg, deployed, data.blackbox_seed);
      for (const auto& attack : attacks) {
        for (double r : cfg.attack_radii) {
          ResultRow row;
          row.method = method;
          row.attack = attack->name();
          row.radius = r;
          row.clean_accuracy = clean_acc;
          row.adversarial_accuracy =
              empirical_robust_accuracy(predict, {attack.get()}, r, data.test);
          std::size_t certified = 0;
          for (std::size_t i = 0; i < data.test.size(); ++i) {
            if (certs[i].predicted == data.test.label(i) && certs[i].lower >= r) ++certified;
          }
          row.certified_astuteness =
              static_cast<double>(certified) / static_cast<double>(data.test.size());
          row.deployed_size = deployed->size();
          row.seed = cfg.seed;
          result.rows.push_back(std::move(row));
        }
      }
      timing["eval"] = ms_since(t_eval);
      manifest["timings_ms"][mname] = std::move(timing);
    }

    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot write " + csv_path);
    csv << "method,attack,radius,clean_accuracy,adversarial_accuracy,certified_astuteness,"
           "pruned_size,seed\n";
    for (const ResultRow& row : result.rows) {
      csv << method_name(row.method) << ',' << row.attack << ',' << format_double(row.radius)
          << ',' << format_double(row.clean_accuracy) << ','
          << format_double(row.adversarial_accuracy) << ','
          << format_double(row.certified_astuteness) << ',' << row.deployed_size << ','
          << row.seed << '\n';
    }
    csv.flush();
    if (!csv) throw std::runtime_error("write failed for " + csv_path);
  } catch (const std::exception& e) {
    manifest["error"] = e.what();
    manifest["timings_ms"]["total"] = ms_since(t_total);
    write_manifest(manifest_path, manifest);
    throw;
  }

  manifest["complete"] = true;
  manifest["timings_ms"]["total"] = ms_since(t_total);
  write_manifest(manifest_path, manifest);
  result.results_csv_path = csv_path;
  result.manifest_path = manifest_path;
  return result;
}

}  // namespace robustnn
