#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "plateprice/synth.hpp"
#include "plateprice/trainer.hpp"

using namespace plateprice;

namespace {

// small learnable dataset: price depends deterministically on easy features
DatasetSplit easy_split(std::size_t n, std::uint64_t seed) {
  SynthConfig config;
  config.n_records = n;
  config.years = 2;
  config.seed = seed;
  config.noise_std = 0.05;
  const auto output = generate(config);
  return split_dataset(preprocess(output.records), seed + 1);
}

ModelConfig small_config() {
  ModelConfig c;
  c.hidden_units = 16;
  c.embed_dim = 8;
  c.recurrent_layers = 1;
  c.fc_layers = 1;
  c.dropout_rate = 0.0;
  return c;
}

}  // namespace

TEST_CASE("evaluate on exact and textbook cases") {
  const MetricPair perfect = evaluate({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0});
  CHECK(perfect.rmse == 0.0);
  CHECK(perfect.r2 == 1.0);

  // constant mean prediction has r2 exactly 0
  const MetricPair constant = evaluate({2.0, 2.0, 2.0}, {1.0, 2.0, 3.0});
  CHECK(constant.r2 == doctest::Approx(0.0).epsilon(1e-15));

  const MetricPair hand = evaluate({1.0, 2.0}, {1.0, 4.0});
  CHECK(hand.rmse == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(hand.r2 == doctest::Approx(1.0 - 4.0 / 4.5).epsilon(1e-15));
}

TEST_CASE("evaluate input validation") {
  CHECK_THROWS_AS(evaluate({1.0}, {1.0, 2.0}), DataError);
  CHECK_THROWS_AS(evaluate({1.0}, {1.0}), DataError);
  CHECK_THROWS_AS(evaluate({1.0, 2.0}, {3.0, 3.0}), DataError);  // zero variance
}

TEST_CASE("evaluate is invariant under joint permutation") {
  SeededRng rng(5);
  std::vector<double> preds, targets;
  for (int i = 0; i < 50; ++i) {
    preds.push_back(rng.uniform(0.0, 10.0));
    targets.push_back(rng.uniform(0.0, 10.0));
  }
  const MetricPair base = evaluate(preds, targets);
  std::vector<std::size_t> order(50);
  for (std::size_t i = 0; i < 50; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<double> p2(50), t2(50);
  for (std::size_t i = 0; i < 50; ++i) {
    p2[i] = preds[order[i]];
    t2[i] = targets[order[i]];
  }
  const MetricPair shuffled = evaluate(p2, t2);
  CHECK(base.rmse == doctest::Approx(shuffled.rmse).epsilon(1e-12));
  CHECK(base.r2 == doctest::Approx(shuffled.r2).epsilon(1e-12));
}

TEST_CASE("independent noise lowers r2") {
  SeededRng rng(6);
  std::vector<double> targets, preds;
  for (int i = 0; i < 400; ++i) {
    const double t = rng.uniform(0.0, 10.0);
    targets.push_back(t);
    preds.push_back(t + 0.2 * rng.normal());
  }
  const double base_r2 = evaluate(preds, targets).r2;
  double t_std = 0.0, mean = 0.0;
  for (double t : targets) mean += t;
  mean /= targets.size();
  for (double t : targets) t_std += (t - mean) * (t - mean);
  t_std = std::sqrt(t_std / targets.size());

  int lowered = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> noisy = preds;
    for (double& v : noisy) v += 0.5 * t_std * rng.normal();
    if (evaluate(noisy, targets).r2 < base_r2) ++lowered;
  }
  CHECK(lowered == 100);
}

TEST_CASE("training makes progress on an easy dataset") {
  const DatasetSplit split = easy_split(200, 3);
  TrainOptions options;
  options.epochs = 12;
  options.batch_size = 32;
  const TrainedModel model = train(small_config(), split, 7, options);
  const auto& trace = model.result.train_rmse_trace;
  REQUIRE(trace.size() == 12);
  CHECK(trace.back() < trace.front());
  CHECK(model.result.best_valid_rmse ==
        *std::min_element(model.result.valid_rmse_trace.begin(),
                          model.result.valid_rmse_trace.end()));
  CHECK(model.result.best_epoch >= 1);
  CHECK(model.result.seconds > 0.0);
}

TEST_CASE("identical seeds replay identical metric traces") {
  const DatasetSplit split = easy_split(150, 4);
  TrainOptions options;
  options.epochs = 6;
  options.batch_size = 32;
  const TrainedModel a = train(small_config(), split, 11, options);
  const TrainedModel b = train(small_config(), split, 11, options);
  CHECK(a.result.train_rmse_trace == b.result.train_rmse_trace);
  CHECK(a.result.valid_rmse_trace == b.result.valid_rmse_trace);
  CHECK(a.result.test.rmse == b.result.test.rmse);

  const TrainedModel c = train(small_config(), split, 12, options);
  CHECK(a.result.valid_rmse_trace != c.result.valid_rmse_trace);
}

TEST_CASE("reloading the best state reproduces best_valid_rmse exactly") {
  const DatasetSplit split = easy_split(150, 5);
  TrainOptions options;
  options.epochs = 8;
  options.batch_size = 32;
  const TrainedModel model = train(small_config(), split, 13, options);
  const auto preds = predict_all(model.params, model.bn_state, split.valid.tokens);
  CHECK(rmse(preds, split.valid.targets) == model.result.best_valid_rmse);
  CHECK(model.result.valid.rmse == model.result.best_valid_rmse);
}

TEST_CASE("divergence aborts with the epoch number") {
  const DatasetSplit split = easy_split(120, 6);
  TrainOptions options;
  options.epochs = 5;
  options.batch_size = 16;
  // batch norm keeps the recurrent stack scale-free, so it takes an
  // astronomically large step to push the readout past double range
  options.learning_rate = 1e200;
  options.clip_threshold = 1e300;
  try {
    train(small_config(), split, 3, options);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("multi_run summarizes and keeps the best model") {
  const DatasetSplit split = easy_split(150, 7);
  TrainOptions options;
  options.epochs = 4;
  options.batch_size = 32;
  const MultiRunResult runs = multi_run(small_config(), split, 3, 100, options, 2);
  REQUIRE(runs.runs.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(runs.runs[i].seed == 100 + static_cast<std::uint64_t>(i));
  }
  std::vector<double> v = {runs.runs[0].valid.rmse, runs.runs[1].valid.rmse,
                           runs.runs[2].valid.rmse};
  std::sort(v.begin(), v.end());
  CHECK(runs.median_valid_rmse == doctest::Approx(v[1]).epsilon(1e-15));

  const double best = *std::min_element(
      v.begin(), v.end(), [](double a, double b) { return a < b; });
  (void)best;
  CHECK(runs.best.result.best_valid_rmse ==
        *std::min_element(v.begin(), v.end()));

  // excluding the worst run: std over the two remaining
  std::vector<double> rest;
  for (std::size_t i = 0; i < 3; ++i) {
    if (i != runs.worst_run) rest.push_back(runs.runs[i].valid.rmse);
  }
  const double mean = (rest[0] + rest[1]) / 2.0;
  const double expect =
      std::sqrt(((rest[0] - mean) * (rest[0] - mean) +
                 (rest[1] - mean) * (rest[1] - mean)) / 1.0);
  CHECK(runs.std_valid_rmse_excluding_worst == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("multi_run with one run equals that run") {
  const DatasetSplit split = easy_split(120, 8);
  TrainOptions options;
  options.epochs = 3;
  options.batch_size = 32;
  const MultiRunResult runs = multi_run(small_config(), split, 1, 55, options, 1);
  CHECK(runs.median_valid_rmse == runs.runs[0].valid.rmse);
  CHECK(runs.median_test_rmse == runs.runs[0].test.rmse);
  CHECK(runs.std_valid_rmse == 0.0);
}

TEST_CASE("multi_run results do not depend on worker count") {
  const DatasetSplit split = easy_split(120, 9);
  TrainOptions options;
  options.epochs = 3;
  options.batch_size = 32;
  const MultiRunResult serial = multi_run(small_config(), split, 4, 70, options, 1);
  const MultiRunResult parallel = multi_run(small_config(), split, 4, 70, options, 2);
  for (int i = 0; i < 4; ++i) {
    CHECK(serial.runs[i].valid_rmse_trace == parallel.runs[i].valid_rmse_trace);
  }
}

TEST_CASE("sweep ranks configs by median validation rmse") {
  const DatasetSplit split = easy_split(150, 10);
  TrainOptions options;
  options.epochs = 3;
  options.batch_size = 32;

  ModelConfig small = small_config();
  ModelConfig tiny = small_config();
  tiny.hidden_units = 2;
  tiny.embed_dim = 2;
  const SweepResult result = sweep({small, tiny}, split, 2, 5, options, 2);
  REQUIRE(result.rows.size() == 2);
  CHECK(result.rows[0].median_valid_rmse <= result.rows[1].median_valid_rmse);
  CHECK(result.all_runs.size() == 4);

  const SweepResult one = sweep({small}, split, 1, 5, options, 1);
  CHECK(one.rows.size() == 1);
}

TEST_CASE("results csv carries the pinned header and one row per run") {
  const DatasetSplit split = easy_split(120, 11);
  TrainOptions options;
  options.epochs = 2;
  options.batch_size = 32;
  const MultiRunResult runs = multi_run(small_config(), split, 2, 9, options, 1);
  const std::string path =
      (std::filesystem::temp_directory_path() / "results_test.csv").string();
  write_results_csv(runs.runs, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "config_id,run_seed,best_epoch,train_rmse,valid_rmse,test_rmse,"
        "train_r2,valid_r2,test_r2,seconds");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
    CHECK(line.rfind("16-8-1-1-0,", 0) == 0);
  }
  CHECK(rows == 2);
}
