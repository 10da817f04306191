#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plateprice/plate_data.hpp"
#include "plateprice/rnn_model.hpp"

namespace plateprice {

struct MetricPair {
  double rmse = 0.0;
  double r2 = 0.0;
};

/// RMSE without the R^2 computation (safe on constant targets).
double rmse(const std::vector<double>& predictions,
            const std::vector<double>& targets);

/// rmse = sqrt(mean((y-t)^2)), r2 = 1 - SSE/SST. Throws DataError on length
/// mismatch, fewer than 2 samples, or zero target variance.
MetricPair evaluate(const std::vector<double>& predictions,
                    const std::vector<double>& targets);

struct TrainOptions {
  int epochs = 40;
  std::size_t batch_size = 256;
  double learning_rate = 0.001;
  double clip_threshold = 15.0;
};

struct TrainRunResult {
  std::vector<double> train_rmse_trace;  // per epoch, from minibatch losses
  std::vector<double> valid_rmse_trace;  // per epoch, inference mode
  int best_epoch = 0;                    // 1-based epoch of the best snapshot
  double best_valid_rmse = 0.0;
  MetricPair train, valid, test;  // evaluated from the reloaded best state
  std::uint64_t seed = 0;
  ModelConfig config;
  double seconds = 0.0;
};

struct TrainedModel {
  NetworkParams params;
  BatchNormState bn_state;
  TrainRunResult result;
};

/// Batched inference over an arbitrary number of samples.
std::vector<double> predict_all(const NetworkParams& params,
                                const BatchNormState& bn_state,
                                const std::vector<TokenSeq>& tokens,
                                std::size_t chunk = 1024);

/// One full training session: fixed epoch count, per-epoch validation, the
/// best validation state reloaded at the end. Throws NumericError with the
/// epoch number if the loss diverges.
TrainedModel train(const ModelConfig& config, const DatasetSplit& split,
                   std::uint64_t seed, const TrainOptions& options = {});

struct MultiRunResult {
  std::vector<TrainRunResult> runs;  // ordered by run index
  TrainedModel best;                 // run with the lowest validation RMSE
  double median_train_rmse = 0.0;
  double median_valid_rmse = 0.0;
  double median_test_rmse = 0.0;
  double median_test_r2 = 0.0;
  double iqr_valid_rmse = 0.0;
  double std_valid_rmse = 0.0;
  /// Standard deviation with the worst run (highest validation RMSE) left
  /// out, the stability figure reported alongside the full spread.
  double std_valid_rmse_excluding_worst = 0.0;
  std::size_t worst_run = 0;
};

/// n_runs independent sessions with seeds base_seed .. base_seed+n_runs-1,
/// distributed over `workers` threads. Results are deterministic for a given
/// base seed regardless of scheduling.
MultiRunResult multi_run(const ModelConfig& config, const DatasetSplit& split,
                         int n_runs, std::uint64_t base_seed,
                         const TrainOptions& options = {}, unsigned workers = 1);

struct SweepRow {
  ModelConfig config;
  double median_valid_rmse = 0.0;
  double median_test_rmse = 0.0;
  double median_test_r2 = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;             // ranked by median valid RMSE
  std::vector<TrainRunResult> all_runs;   // grid-order per-run data
};

SweepResult sweep(const std::vector<ModelConfig>& grid,
                  const DatasetSplit& split, int n_runs,
                  std::uint64_t base_seed, const TrainOptions& options = {},
                  unsigned workers = 1);

/// Per-run results CSV:
/// config_id,run_seed,best_epoch,train_rmse,valid_rmse,test_rmse,train_r2,valid_r2,test_r2,seconds
void write_results_csv(const std::vector<TrainRunResult>& runs,
                       const std::string& path);

/// Sweep summary CSV keyed by the hidden-embed-rec-fc-dropout config string.
void write_sweep_csv(const SweepResult& sweep, const std::string& path);

}  // namespace plateprice
