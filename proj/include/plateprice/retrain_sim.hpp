#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plateprice/ensemble.hpp"
#include "plateprice/hedonic.hpp"
#include "plateprice/trainer.hpp"

namespace plateprice {

struct WilcoxonResult {
  double z = 0.0;       // normal approximation
  double p = 0.0;       // two-sided
  double w_plus = 0.0;  // signed-rank statistic, sum of positive-diff ranks
  std::size_t n_used = 0;  // pairs left after dropping zero differences
};

/// Paired two-sided Wilcoxon signed-rank test of a vs b. Zero differences
/// are dropped, ties get midranks, and the tie-corrected normal
/// approximation produces z and p (accurate from roughly 10 pairs up).
/// Throws DataError when every difference is zero.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a,
                                    const std::vector<double>& b);

enum class RetrainSchedule { Never, Yearly, Monthly };

std::string to_string(RetrainSchedule schedule);
RetrainSchedule schedule_from_string(const std::string& name);

enum class SimModelKind { Rnn, CombinedExtra };

struct RetrainPlan {
  RetrainSchedule schedule = RetrainSchedule::Never;
  int initial_years = 8;
  int horizon_years = 5;
  /// Rows per training window. 0 means "the initial window's sold count";
  /// every retraining then uses exactly that many most-recent sold records.
  std::size_t window_size = 0;
};

struct RetrainOptions {
  ModelConfig config;
  TrainOptions train;
  SimModelKind kind = SimModelKind::Rnn;
  HedonicPreset hedonic_preset = HedonicPreset::Woo2008;
  int n_repeats = 1;
  std::uint64_t base_seed = 1;
  unsigned workers = 1;
  double valid_fraction = 0.2;  // within-window validation share
};

struct MonthEval {
  int month_index = 0;    // 1-based month within the evaluation horizon
  int model_version = 0;  // increments at each retraining
  std::size_t n_samples = 0;
  double rmse = 0.0;  // NaN when the month has no sold records
  double r2 = 0.0;    // NaN when undefined (fewer than 2 samples or no variance)
  Date month_start;
};

/// One (re)training event and the exact window it saw.
struct TrainingEvent {
  int version = 0;
  std::size_t window_rows = 0;
  Date window_first;
  Date window_last;
};

struct ScheduleTrace {
  std::vector<MonthEval> months;  // one entry per horizon month
  std::vector<TrainingEvent> trainings;
};

struct SimulateResult {
  std::vector<ScheduleTrace> repeats;
  /// Median over repeats, per horizon month; NaN for empty months.
  std::vector<double> per_month_median_rmse;
  std::vector<double> per_month_median_r2;
  /// Median of the per-month medians over months that have data.
  double median_horizon_rmse = 0.0;
};

/// Walk-forward experiment: train on the first initial_years of sold
/// records, then step through the horizon month by month, retraining on the
/// most recent window at each schedule boundary and scoring each month with
/// the model current at its start. Training never sees a record dated inside
/// or after the month being scored.
SimulateResult simulate(const RetrainPlan& plan,
                        const std::vector<AuctionRecord>& records,
                        const RetrainOptions& options);

/// Trace CSV: repeat,month_index,model_version,rmse,r2,n_samples. Months
/// without sold records keep their row with empty rmse/r2 fields.
void write_trace_csv(const SimulateResult& result, const std::string& path);

}  // namespace plateprice
