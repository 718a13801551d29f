// Command-line front end: dataset generation, defense training/pruning,
// attack generation, evaluation sweeps, and closed-form bound calculators.
// Exit codes: 0 success, 1 bad configuration or flags, 2 runtime failure.

#include <charconv>
#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "robustnn/attacks.hpp"
#include "robustnn/classifiers.hpp"
#include "robustnn/datasets.hpp"
#include "robustnn/eval.hpp"
#include "robustnn/experiment.hpp"
#include "robustnn/robust1nn.hpp"
#include "robustnn/version.hpp"

namespace {

using namespace robustnn;

std::string fmt(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Shared attack flags, applied uniformly to every listed attack kind.
struct AttackFlags {
  std::vector<std::string> kinds{"direct"};
  std::string direction = "toward";
  double bandwidth = 0.1;
  double lambda = 0.1;
  int rounds = 2;
  int seed_size = 200;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--attack", kinds,
                    "Attack kind(s): direct, kernel_fgsm, blackbox_kernel, blackbox_mlp");
    cmd->add_option("--direction", direction, "Direct attack direction")
        ->check(CLI::IsMember({"toward", "away"}));
    cmd->add_option("--bandwidth", bandwidth, "Kernel bandwidth c");
    cmd->add_option("--lambda", lambda, "Substitute augmentation step");
    cmd->add_option("--rounds", rounds, "Substitute augmentation rounds");
    cmd->add_option("--seed-size", seed_size, "Black-box substitute seed examples");
  }

  std::vector<AttackSpec> specs() const {
    std::vector<AttackSpec> out;
    for (const std::string& k : kinds) {
      AttackSpec s;
      s.kind = attack_kind_from_string(k);
      s.direction = direction == "away" ? DirectDirection::Away : DirectDirection::Toward;
      s.bandwidth = bandwidth;
      s.lambda = lambda;
      s.rounds = rounds;
      s.seed_size = seed_size;
      out.push_back(s);
    }
    return out;
  }
};

bool needs_pool(const AttackSpec& s) {
  return s.kind == AttackKind::BlackBoxKernel || s.kind == AttackKind::BlackBoxMlp;
}

std::vector<std::unique_ptr<Attack>> bind_attacks_cli(
    const std::vector<AttackSpec>& specs, std::shared_ptr<const LabeledDataset> deployed,
    const std::vector<FeatureVector>& pool, std::uint64_t seed) {
  const auto clf = std::make_shared<KnnClassifier>(deployed, 1);
  const TargetOracle oracle = [clf](const FeatureVector& x) { return clf->predict(x); };
  std::vector<std::unique_ptr<Attack>> out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    std::vector<FeatureVector> seed_pts;
    if (needs_pool(specs[i])) {
      const std::size_t take = std::min<std::size_t>(specs[i].seed_size, pool.size());
      seed_pts.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
      if (seed_pts.empty()) {
        throw std::runtime_error("no seed points available for black-box attack '" +
                                 specs[i].name() + "'");
      }
    }
    out.push_back(make_attack(specs[i], deployed, oracle, seed_pts,
                              seed + kBlackboxSeedOffset + i));
  }
  return out;
}

std::vector<FeatureVector> all_features(const LabeledDataset& data) {
  std::vector<FeatureVector> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back(data.point(i));
  return out;
}

// ---- gen ----------------------------------------------------------------

void run_gen(const std::string& kind, std::size_t n, double sigma, double eta,
             std::uint64_t seed, const std::string& out) {
  LabeledDataset data;
  if (kind == "halfmoon") {
    data = gen_halfmoon({n, sigma, seed});
  } else if (kind == "interval-linear") {
    data = sample_analytic(uniform_interval([](double x) { return x; }, "interval-linear"), n,
                           seed);
  } else if (kind == "square-const") {
    if (!(eta >= 0.0) || !(eta <= 1.0)) {
      throw std::invalid_argument("--eta must lie in [0, 1]");
    }
    data = sample_analytic(uniform_square([eta](double, double) { return eta; }, "square-const"),
                           n, seed);
  } else {
    throw std::invalid_argument("unknown generator kind '" + kind + "'");
  }
  write_csv(data, out);
  std::cout << "wrote " << data.size() << " points (dim " << data.dim() << ") to " << out
            << "\n";
}

// ---- train / prune ------------------------------------------------------

void run_train(const std::string& train_path, const std::string& method_str, double radius,
               double margin, double fail_prob, const AttackFlags& af, std::uint64_t seed,
               const std::string& out) {
  const Method method = method_from_string(method_str);
  const LabeledDataset train = read_csv(train_path);
  ExperimentConfig cfg;
  cfg.attacks = af.specs();
  cfg.margin = margin;
  cfg.fail_prob = fail_prob;
  cfg.seed = seed;
  const LabeledDataset deployed = build_deployed(cfg, method, train, radius);
  write_csv(deployed, out);
  std::cout << method_str << " deployed set: " << deployed.size() << " points (from "
            << train.size() << ") -> " << out << "\n";
}

void run_prune(const std::string& train_path, double radius, double margin, double fail_prob,
               const std::string& out) {
  const LabeledDataset train = read_csv(train_path);
  const LabeledDataset pruned =
      robust_1nn_train(train, RobustParams{radius, margin, fail_prob});
  write_csv(pruned, out);
  std::cout << "kept " << pruned.size() << " of " << train.size() << " points at radius "
            << fmt(radius) << " -> " << out << "\n";
}

// ---- attack -------------------------------------------------------------

void run_attack(const std::string& train_path, const std::string& test_path,
                const std::string& seed_data_path, const AttackFlags& af, double radius,
                std::uint64_t seed, const std::string& out) {
  if (!(radius >= 0.0)) throw std::invalid_argument("--radius must be >= 0");
  const auto deployed = std::make_shared<const LabeledDataset>(read_csv(train_path));
  const LabeledDataset test = read_csv(test_path);
  const std::vector<FeatureVector> pool =
      all_features(seed_data_path.empty() ? test : read_csv(seed_data_path));
  const auto specs = af.specs();
  const auto attacks = bind_attacks_cli(specs, deployed, pool, seed);
  const KnnClassifier clf(deployed, 1);

  std::ofstream csv(out);
  if (!csv) throw std::runtime_error("cannot write " + out);
  csv << "test_id,attack,radius";
  for (int a = 0; a < test.dim(); ++a) csv << ",f" << a;
  csv << ",pred_before,pred_after\n";
  std::size_t flipped = 0, correct_before = 0;
  for (const auto& attack : attacks) {
    for (std::size_t i = 0; i < test.size(); ++i) {
      const int before = clf.predict(test.point(i));
      const FeatureVector adv = attack->perturb(test.point(i), test.label(i), radius);
      const int after = clf.predict(adv);
      if (before == test.label(i)) ++correct_before;
      if (before != after) ++flipped;
      csv << i << ',' << attack->name() << ',' << fmt(radius);
      for (double v : adv) csv << ',' << fmt(v);
      csv << ',' << before << ',' << after << '\n';
    }
  }
  csv.flush();
  if (!csv) throw std::runtime_error("write failed for " + out);
  std::cout << "wrote " << test.size() * attacks.size() << " adversarial points to " << out
            << " (" << flipped << " predictions flipped)\n";
}

// ---- eval ---------------------------------------------------------------

void run_eval(const std::string& train_path, const std::string& test_path,
              const std::string& seed_data_path, const AttackFlags& af,
              std::vector<double> radii, std::uint64_t seed, const std::string& out) {
  if (radii.empty()) throw std::invalid_argument("--radii must list at least one radius");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] >= 0.0)) throw std::invalid_argument("radii must be >= 0");
    if (i > 0 && !(radii[i] > radii[i - 1])) {
      throw std::invalid_argument("radii must be strictly increasing");
    }
  }
  const auto deployed = std::make_shared<const LabeledDataset>(read_csv(train_path));
  const LabeledDataset test = read_csv(test_path);
  const std::vector<FeatureVector> pool =
      all_features(seed_data_path.empty() ? test : read_csv(seed_data_path));
  const auto attacks = bind_attacks_cli(af.specs(), deployed, pool, seed);
  const KnnClassifier clf(deployed, 1);
  const PredictFn predict = [&clf](const FeatureVector& x) { return clf.predict(x); };

  const auto certs = batch_certify(clf.index(), test);
  std::size_t clean_hits = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (certs[i].predicted == test.label(i)) ++clean_hits;
  }
  const double clean = static_cast<double>(clean_hits) / static_cast<double>(test.size());

  std::ofstream csv(out);
  if (!csv) throw std::runtime_error("cannot write " + out);
  csv << "attack,radius,clean_accuracy,adversarial_accuracy,certified_astuteness,n\n";
  for (const auto& attack : attacks) {
    for (double r : radii) {
      const double adv = empirical_robust_accuracy(predict, {attack.get()}, r, test);
      std::size_t certified = 0;
      for (std::size_t i = 0; i < test.size(); ++i) {
        if (certs[i].predicted == test.label(i) && certs[i].lower >= r) ++certified;
      }
      const double astute = static_cast<double>(certified) / static_cast<double>(test.size());
      csv << attack->name() << ',' << fmt(r) << ',' << fmt(clean) << ',' << fmt(adv) << ','
          << fmt(astute) << ',' << test.size() << '\n';
      std::cout << attack->name() << " r=" << fmt(r) << ": adversarial " << fmt(adv)
                << ", certified " << fmt(astute) << "\n";
    }
  }
  csv.flush();
  if (!csv) throw std::runtime_error("write failed for " + out);
  std::cout << "clean accuracy " << fmt(clean) << "; wrote " << out << "\n";
}

// ---- sweep --------------------------------------------------------------

void run_sweep(const std::string& config_path, const std::string& out_dir_override,
               bool has_seed_override, std::uint64_t seed_override, bool dump_default) {
  if (dump_default) {
    std::cout << ExperimentConfig{}.to_json().dump(2) << "\n";
    return;
  }
  if (config_path.empty()) {
    throw std::invalid_argument("--config is required (or use --dump-default)");
  }
  ExperimentConfig cfg = ExperimentConfig::load(config_path);
  if (!out_dir_override.empty()) cfg.out_dir = out_dir_override;
  if (has_seed_override) cfg.seed = seed_override;
  const RunResult res = run_experiment(cfg);
  std::cout << "wrote " << res.rows.size() << " result rows to " << res.results_csv_path
            << "\nmanifest: " << res.manifest_path << "\n";
}

// ---- bounds -------------------------------------------------------------

void run_bounds(std::size_t n, int d, double margin, double fail_prob, int k, double p,
                double c0, double c1, double c2) {
  const TheoryBounds b = theory_bounds(n, d, fail_prob, margin, k, p, {c0, c1, c2});
  nlohmann::json j{{"k_n", b.k_n},
                   {"a_n", b.a_n},
                   {"b_n", b.b_n},
                   {"beta_n", b.beta_n},
                   {"p_n", b.p_n},
                   {"k_min_uniform", b.k_min_uniform},
                   {"k_min_rate", b.k_min_rate},
                   {"p_min_rate", b.p_min_rate},
                   {"c_dk", b.c_dk}};
  if (p > 0.0) j["n_min"] = b.n_min;
  if (fail_prob < 1.0) j["vote_size"] = confident_sample_size(n, margin, fail_prob);
  std::cout << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust nearest-neighbor defense toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset CSV");
  std::string gen_kind = "halfmoon", gen_out;
  std::size_t gen_n = 2000;
  double gen_sigma = 0.2, gen_eta = 0.8;
  std::uint64_t gen_seed = 0;
  gen->add_option("--kind", gen_kind, "halfmoon, interval-linear, or square-const")
      ->check(CLI::IsMember({"halfmoon", "interval-linear", "square-const"}));
  gen->add_option("--n", gen_n, "Sample count")->required();
  gen->add_option("--sigma", gen_sigma, "Halfmoon noise standard deviation");
  gen->add_option("--eta", gen_eta, "Constant posterior for square-const");
  gen->add_option("--seed", gen_seed, "RNG seed");
  gen->add_option("--out", gen_out, "Output CSV path")->required();
  gen->callback([&] { run_gen(gen_kind, gen_n, gen_sigma, gen_eta, gen_seed, gen_out); });

  // train
  auto* train = app.add_subcommand("train", "Build the training set a method deploys");
  std::string train_in, train_method, train_out;
  double train_radius = 0.1, train_margin = 0.45, train_fail = 0.1;
  std::uint64_t train_seed = 0;
  AttackFlags train_af;
  train->add_option("--train", train_in, "Training CSV")->required();
  train->add_option("--method", train_method, "StandardNN, RobustNN, ATNN, or ATNN-all")
      ->required();
  train->add_option("--radius", train_radius, "Defense radius");
  train->add_option("--margin", train_margin, "Confidence margin (0, 1/2)");
  train->add_option("--fail-prob", train_fail, "Confidence failure probability (0, 1)");
  train->add_option("--seed", train_seed, "RNG seed for augmentation");
  train_af.add_to(train);
  train->add_option("--out", train_out, "Output CSV path")->required();
  train->callback([&] {
    run_train(train_in, train_method, train_radius, train_margin, train_fail, train_af,
              train_seed, train_out);
  });

  // prune
  auto* prune = app.add_subcommand("prune", "Confidence-filter and prune a training set");
  std::string prune_in, prune_out;
  double prune_radius = 0.1, prune_margin = 0.45, prune_fail = 0.1;
  prune->add_option("--train", prune_in, "Training CSV")->required();
  prune->add_option("--radius", prune_radius, "Defense radius")->required();
  prune->add_option("--margin", prune_margin, "Confidence margin (0, 1/2)");
  prune->add_option("--fail-prob", prune_fail, "Confidence failure probability (0, 1)");
  prune->add_option("--out", prune_out, "Output CSV path")->required();
  prune->callback(
      [&] { run_prune(prune_in, prune_radius, prune_margin, prune_fail, prune_out); });

  // attack
  auto* attack = app.add_subcommand("attack", "Generate adversarial examples");
  std::string atk_train, atk_test, atk_seed_data, atk_out;
  double atk_radius = 0.1;
  std::uint64_t atk_seed = 0;
  AttackFlags atk_af;
  attack->add_option("--train", atk_train, "Deployed training CSV")->required();
  attack->add_option("--test", atk_test, "Test CSV")->required();
  attack->add_option("--seed-data", atk_seed_data,
                     "CSV of black-box substitute seed points (default: the test set)");
  attack->add_option("--radius", atk_radius, "Attack radius")->required();
  attack->add_option("--seed", atk_seed, "RNG seed");
  atk_af.add_to(attack);
  attack->add_option("--out", atk_out, "Output CSV path")->required();
  attack->callback([&] {
    run_attack(atk_train, atk_test, atk_seed_data, atk_af, atk_radius, atk_seed, atk_out);
  });

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a deployed set under attack");
  std::string eval_train, eval_test, eval_seed_data, eval_out;
  std::vector<double> eval_radii{0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3};
  std::uint64_t eval_seed = 0;
  AttackFlags eval_af;
  eval->add_option("--train", eval_train, "Deployed training CSV")->required();
  eval->add_option("--test", eval_test, "Test CSV")->required();
  eval->add_option("--seed-data", eval_seed_data,
                   "CSV of black-box substitute seed points (default: the test set)");
  eval->add_option("--radii", eval_radii, "Attack radius sweep (strictly increasing)")
      ->delimiter(',');
  eval->add_option("--seed", eval_seed, "RNG seed");
  eval_af.add_to(eval);
  eval->add_option("--out", eval_out, "Output CSV path")->required();
  eval->callback([&] {
    run_eval(eval_train, eval_test, eval_seed_data, eval_af, eval_radii, eval_seed, eval_out);
  });

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run a full experiment from a JSON config");
  std::string sweep_config, sweep_out_dir;
  std::uint64_t sweep_seed = 0;
  bool sweep_dump = false;
  auto* sweep_seed_opt = sweep->add_option("--seed", sweep_seed, "Master seed override");
  sweep->add_option("--config", sweep_config, "Experiment config JSON");
  sweep->add_option("--out-dir", sweep_out_dir,
                    "Output directory override (default: config, then $ROBUSTNN_OUT)");
  sweep->add_flag("--dump-default", sweep_dump, "Print the default config JSON and exit");
  sweep->callback([&] {
    run_sweep(sweep_config, sweep_out_dir, sweep_seed_opt->count() > 0, sweep_seed, sweep_dump);
  });

  // bounds
  auto* bounds = app.add_subcommand("bounds", "Closed-form sample-complexity quantities");
  std::size_t b_n = 2000;
  int b_d = 2, b_k = 0;
  double b_margin = 0.45, b_fail = 0.1, b_p = 0.0, b_c0 = 1.0, b_c1 = 1.0, b_c2 = 1.0;
  bounds->add_option("--n", b_n, "Sample size")->required();
  bounds->add_option("--dim", b_d, "Feature dimension")->required();
  bounds->add_option("--margin", b_margin, "Confidence margin Delta");
  bounds->add_option("--fail-prob", b_fail, "Failure probability delta");
  bounds->add_option("--k", b_k, "Neighbor count for the growth-condition forms");
  bounds->add_option("--p", b_p, "Mass level for the minimum-sample form");
  bounds->add_option("--c0", b_c0, "Constant C0");
  bounds->add_option("--c1", b_c1, "Constant C1");
  bounds->add_option("--c2", b_c2, "Constant C2");
  bounds->callback(
      [&] { run_bounds(b_n, b_d, b_margin, b_fail, b_k, b_p, b_c0, b_c1, b_c2); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // app.exit prints the help text or error message; fold every parse
    // failure into the config-error exit code, keeping 0 for --help.
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
