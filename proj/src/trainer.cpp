#include "plateprice/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>

#include "plateprice/parallel.hpp"

namespace plateprice {

double rmse(const std::vector<double>& predictions,
            const std::vector<double>& targets) {
  return std::sqrt(mse_loss(predictions, targets));
}

MetricPair evaluate(const std::vector<double>& predictions,
                    const std::vector<double>& targets) {
  if (predictions.size() != targets.size()) {
    throw DataError("evaluate: length mismatch");
  }
  if (targets.size() < 2) {
    throw DataError("evaluate: need at least 2 samples");
  }
  double mean = 0.0;
  for (double t : targets) mean += t;
  mean /= static_cast<double>(targets.size());
  double sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double e = predictions[i] - targets[i];
    const double d = targets[i] - mean;
    sse += e * e;
    sst += d * d;
  }
  if (sst == 0.0) {
    throw DataError("evaluate: r2 undefined, targets have zero variance");
  }
  return {std::sqrt(sse / static_cast<double>(targets.size())), 1.0 - sse / sst};
}

std::vector<double> predict_all(const NetworkParams& params,
                                const BatchNormState& bn_state,
                                const std::vector<TokenSeq>& tokens,
                                std::size_t chunk) {
  std::vector<double> out;
  out.reserve(tokens.size());
  for (std::size_t start = 0; start < tokens.size(); start += chunk) {
    const std::size_t end = std::min(tokens.size(), start + chunk);
    std::vector<TokenSeq> part(tokens.begin() + start, tokens.begin() + end);
    const auto preds = predict(params, bn_state, part);
    out.insert(out.end(), preds.begin(), preds.end());
  }
  return out;
}

TrainedModel train(const ModelConfig& config, const DatasetSplit& split,
                   std::uint64_t seed, const TrainOptions& options) {
  config.validate();
  const std::size_t n_train = split.train.size();
  if (n_train == 0 || split.valid.size() == 0) {
    throw DataError("train: empty train or validation part");
  }
  const auto t0 = std::chrono::steady_clock::now();

  SeededRng rng(seed);
  NetworkParams params = init_params(config, rng);
  BatchNormState bn_state = BatchNormState::init(config);
  AdagradState opt = AdagradState::init(params, options.learning_rate);
  const auto names = params.tensor_names();

  TrainRunResult result;
  result.seed = seed;
  result.config = config;
  result.best_valid_rmse = std::numeric_limits<double>::infinity();

  NetworkParams best_params = params;
  BatchNormState best_bn = bn_state;

  std::vector<TokenSeq> batch_tokens;
  std::vector<double> batch_targets;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    auto batches = epoch_batches(n_train, options.batch_size, rng);
    // batch-norm statistics need >= 2 rows; fold a trailing singleton into
    // the previous batch instead of dropping the sample
    if (batches.size() > 1 && batches.back().size() == 1) {
      batches[batches.size() - 2].push_back(batches.back()[0]);
      batches.pop_back();
    }
    double epoch_sse = 0.0;
    for (const auto& idx : batches) {
      batch_tokens.clear();
      batch_targets.clear();
      for (std::size_t i : idx) {
        batch_tokens.push_back(split.train.tokens[i]);
        batch_targets.push_back(split.train.targets[i]);
      }
      try {
        auto fwd = forward(params, bn_state, batch_tokens, Mode::Train, &rng);
        const double loss = mse_loss(fwd.predictions, batch_targets);
        if (!std::isfinite(loss)) {
          throw NumericError("loss diverged");
        }
        epoch_sse += loss * static_cast<double>(idx.size());
        NetworkParams grads = backward(params, fwd.cache, batch_targets);
        clip_global_norm(grads.tensor_ptrs(), options.clip_threshold, names);
        adagrad_step(params, grads, opt);
      } catch (const NumericError& e) {
        throw NumericError("train: " + std::string(e.what()) + " at epoch " +
                           std::to_string(epoch));
      }
    }
    result.train_rmse_trace.push_back(std::sqrt(epoch_sse / static_cast<double>(n_train)));

    const auto valid_preds = predict_all(params, bn_state, split.valid.tokens);
    const double valid_rmse = rmse(valid_preds, split.valid.targets);
    result.valid_rmse_trace.push_back(valid_rmse);
    if (valid_rmse < result.best_valid_rmse) {
      result.best_valid_rmse = valid_rmse;
      result.best_epoch = epoch;
      best_params = params;
      best_bn = bn_state;
    }
  }

  TrainedModel model{std::move(best_params), std::move(best_bn), {}};
  result.train = evaluate(
      predict_all(model.params, model.bn_state, split.train.tokens),
      split.train.targets);
  result.valid = evaluate(
      predict_all(model.params, model.bn_state, split.valid.tokens),
      split.valid.targets);
  if (split.test.size() >= 2) {
    result.test = evaluate(
        predict_all(model.params, model.bn_state, split.test.tokens),
        split.test.targets);
  } else {
    // retraining windows carry no test part; months ahead play that role
    const double nan = std::numeric_limits<double>::quiet_NaN();
    result.test = {nan, nan};
  }
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  model.result = std::move(result);
  return model;
}

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double quantile_of(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

MultiRunResult multi_run(const ModelConfig& config, const DatasetSplit& split,
                         int n_runs, std::uint64_t base_seed,
                         const TrainOptions& options, unsigned workers) {
  if (n_runs < 1) throw DataError("multi_run: n_runs must be >= 1");
  MultiRunResult out;
  out.runs.resize(n_runs);
  std::mutex best_mutex;
  std::size_t best_index = static_cast<std::size_t>(n_runs);
  parallel_for(n_runs, workers, [&](std::size_t i) {
    try {
      TrainedModel model = train(config, split, base_seed + i, options);
      {
        std::lock_guard lock(best_mutex);
        out.runs[i] = model.result;
        // ties break toward the lower run index so scheduling cannot change
        // which model is kept
        const bool better =
            best_index == static_cast<std::size_t>(n_runs) ||
            model.result.best_valid_rmse < out.best.result.best_valid_rmse ||
            (model.result.best_valid_rmse == out.best.result.best_valid_rmse &&
             i < best_index);
        if (better) {
          out.best = std::move(model);
          best_index = i;
        }
      }
    } catch (const std::exception& e) {
      throw NumericError("run " + std::to_string(i) + " (seed " +
                         std::to_string(base_seed + i) + "): " + e.what());
    }
  });

  std::vector<double> train_r, valid_r, test_r, test_r2;
  for (const auto& r : out.runs) {
    train_r.push_back(r.train.rmse);
    valid_r.push_back(r.valid.rmse);
    test_r.push_back(r.test.rmse);
    test_r2.push_back(r.test.r2);
  }
  out.median_train_rmse = median_of(train_r);
  out.median_valid_rmse = median_of(valid_r);
  out.median_test_rmse = median_of(test_r);
  out.median_test_r2 = median_of(test_r2);
  out.iqr_valid_rmse = quantile_of(valid_r, 0.75) - quantile_of(valid_r, 0.25);
  out.std_valid_rmse = std_of(valid_r);
  out.worst_run = static_cast<std::size_t>(
      std::max_element(valid_r.begin(), valid_r.end()) - valid_r.begin());
  std::vector<double> without_worst;
  for (std::size_t i = 0; i < valid_r.size(); ++i) {
    if (i != out.worst_run) without_worst.push_back(valid_r[i]);
  }
  out.std_valid_rmse_excluding_worst = std_of(without_worst);
  return out;
}

SweepResult sweep(const std::vector<ModelConfig>& grid,
                  const DatasetSplit& split, int n_runs,
                  std::uint64_t base_seed, const TrainOptions& options,
                  unsigned workers) {
  if (grid.empty()) throw DataError("sweep: empty grid");
  SweepResult out;
  for (const auto& config : grid) {
    MultiRunResult runs = multi_run(config, split, n_runs, base_seed, options, workers);
    out.rows.push_back({config, runs.median_valid_rmse, runs.median_test_rmse,
                        runs.median_test_r2});
    out.all_runs.insert(out.all_runs.end(), runs.runs.begin(), runs.runs.end());
  }
  std::stable_sort(out.rows.begin(), out.rows.end(),
                   [](const SweepRow& a, const SweepRow& b) {
                     return a.median_valid_rmse < b.median_valid_rmse;
                   });
  return out;
}

void write_results_csv(const std::vector<TrainRunResult>& runs,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "config_id,run_seed,best_epoch,train_rmse,valid_rmse,test_rmse,"
         "train_r2,valid_r2,test_r2,seconds\n";
  char row[512];
  for (const auto& r : runs) {
    std::snprintf(row, sizeof(row),
                  "%s,%llu,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.3f",
                  r.config.id().c_str(),
                  static_cast<unsigned long long>(r.seed), r.best_epoch,
                  r.train.rmse, r.valid.rmse, r.test.rmse, r.train.r2,
                  r.valid.r2, r.test.r2, r.seconds);
    out << row << "\n";
  }
}

void write_sweep_csv(const SweepResult& sweep, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "config_id,median_valid_rmse,median_test_rmse,median_test_r2\n";
  char row[256];
  for (const auto& r : sweep.rows) {
    std::snprintf(row, sizeof(row), "%s,%.9g,%.9g,%.9g", r.config.id().c_str(),
                  r.median_valid_rmse, r.median_test_rmse, r.median_test_r2);
    out << row << "\n";
  }
}

}  // namespace plateprice
