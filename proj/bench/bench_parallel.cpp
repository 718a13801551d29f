// Times the OpenMP batch kernels against their serial reference paths and
// verifies the outputs are identical. Not a correctness test (those live in
// tests/); run it to see what parallelism buys on this machine.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "robustnn/attacks.hpp"
#include "robustnn/classifiers.hpp"
#include "robustnn/datasets.hpp"
#include "robustnn/eval.hpp"
#include "robustnn/robust1nn.hpp"

namespace {

using namespace robustnn;
using Clock = std::chrono::steady_clock;

double seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename Fn>
double timed(const Fn& fn) {
  const auto start = Clock::now();
  fn();
  return seconds(start);
}

void report(const char* name, double serial_s, double parallel_s, bool equal) {
  std::printf("%-28s serial %8.3fs  parallel %8.3fs  speedup %5.2fx  outputs %s\n", name,
              serial_s, parallel_s, parallel_s > 0 ? serial_s / parallel_s : 0.0,
              equal ? "identical" : "DIFFER");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serial vs OpenMP benchmark for the batch kernels"};
  std::size_t train_n = 4000, test_n = 2000, mc_n = 20000;
  std::uint64_t seed = 0;
  app.add_option("--train-n", train_n, "Training points");
  app.add_option("--test-n", test_n, "Query points");
  app.add_option("--mc-n", mc_n, "Monte Carlo samples");
  app.add_option("--seed", seed, "RNG seed");
  CLI11_PARSE(app, argc, argv);

  const auto train =
      std::make_shared<const LabeledDataset>(gen_halfmoon({train_n, 0.2, seed}));
  const LabeledDataset test = gen_halfmoon({test_n, 0.2, seed + 1});
  std::vector<FeatureVector> queries;
  queries.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) queries.push_back(test.point(i));

  const KnnClassifier clf(train, 1);
  {
    std::vector<int> a, b;
    const double ts = timed([&] { a = batch_nn_predict(clf, queries, Exec::Serial); });
    const double tp = timed([&] { b = batch_nn_predict(clf, queries, Exec::Parallel); });
    report("batch_nn_predict", ts, tp, a == b);
  }

  const KdTree index(train);
  const RobustParams params{0.1, 0.45, 0.1};
  {
    std::vector<ConfidentLabel> a, b;
    const double ts = timed([&] { a = batch_confident_labels(index, params, Exec::Serial); });
    const double tp = timed([&] { b = batch_confident_labels(index, params, Exec::Parallel); });
    report("batch_confident_labels", ts, tp, a == b);
  }

  {
    std::vector<RobustnessCertificate> a, b;
    const double ts = timed([&] { a = batch_certify(index, test, Exec::Serial); });
    const double tp = timed([&] { b = batch_certify(index, test, Exec::Parallel); });
    bool equal = a.size() == b.size();
    for (std::size_t i = 0; equal && i < a.size(); ++i) {
      equal = a[i].predicted == b[i].predicted && a[i].lower == b[i].lower &&
              a[i].upper == b[i].upper;
    }
    report("batch_certify", ts, tp, equal);
  }

  {
    const DirectAttack attack(train);
    const std::vector<const Attack*> attacks{&attack};
    const PredictFn predict = [&clf](const FeatureVector& x) { return clf.predict(x); };
    double a = 0, b = 0;
    const double ts =
        timed([&] { a = empirical_robust_accuracy(predict, attacks, 0.1, test, Exec::Serial); });
    const double tp = timed(
        [&] { b = empirical_robust_accuracy(predict, attacks, 0.1, test, Exec::Parallel); });
    report("empirical_robust_accuracy", ts, tp, a == b);
  }

  {
    const auto dist = uniform_interval([](double x) { return x; }, "interval-linear");
    McEstimate a, b;
    const double ts = timed([&] { a = bayes_astuteness(dist, 0.1, mc_n, seed, Exec::Serial); });
    const double tp =
        timed([&] { b = bayes_astuteness(dist, 0.1, mc_n, seed, Exec::Parallel); });
    report("bayes_astuteness", ts, tp,
           a.value == b.value && a.std_error == b.std_error && a.samples == b.samples);
  }

  return 0;
}
