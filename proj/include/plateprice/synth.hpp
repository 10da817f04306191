#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "plateprice/plate_data.hpp"

namespace plateprice {

/// Log-price contributions of plate patterns. The deterministic score of a
/// plate is the sum of its matched contributions plus the base level. The
/// bigram and letter tables carry sequence effects a bag-of-features model
/// cannot express; the five_before_eight interaction deliberately negates
/// the value of 8s when a 5 sits in front of them.
struct ScoreWeights {
  double base = 8.1;  // log HKD
  double count_eight = 0.55;
  double count_nine = 0.25;
  double count_four = -0.45;
  double contains_168 = 1.5;
  double contains_13 = -0.35;
  double solid_per_digit = 0.5;       // all digits identical, per digit
  double leading_run_bonus = 0.18;    // per repeated digit at the front
  double seq_ascending = 0.8;
  double seq_descending = 0.4;
  double per_missing_digit = 0.9;     // scarcity of short plates
  double no_prefix_bonus = 1.2;
  double five_before_eight = -0.9;    // per '5' immediately before an '8'
  double single_digit_value = 0.15;   // times the digit, 1-digit plates
  std::map<std::string, double> digit_bigrams;
  std::array<double, 26> letter_value{};  // indexed by letter - 'A'
  std::map<std::string, double> prefix_bigrams;

  static ScoreWeights defaults();
  static ScoreWeights zero();
};

struct SynthConfig {
  std::size_t n_records = 50000;
  int start_year = 1997;
  int years = 13;
  std::uint64_t seed = 20260101;
  double noise_std = 0.36;       // tuned so the default R^2 ceiling is ~0.90
  double unsold_rate = 0.051;    // lowest-scoring tail below the reserve
  ScoreWeights weights = ScoreWeights::defaults();
  ScoreWeights drift_per_year = ScoreWeights::zero();  // added per elapsed year

  // monthly geometric random walks for the market covariates
  double stock_start = 10000.0, stock_drift = 0.004, stock_vol = 0.04;
  double cpi_start = 70.0, cpi_drift = 0.002, cpi_vol = 0.004;

  /// Default config with taste drift switched on, scaled by `scale`.
  static SynthConfig with_drift(double scale);
};

/// Deterministic log-price score of a plate, `years_elapsed` years after the
/// start of the data (weights drift linearly in time).
double plate_score(const std::string& plate, const ScoreWeights& weights,
                   const ScoreWeights& drift_per_year, double years_elapsed);

struct SynthOutput {
  std::vector<AuctionRecord> records;     // date-ordered
  std::vector<double> deterministic;      // per record, drifted score
  std::vector<double> noise;              // per record, Gaussian draw
  double noise_std = 0.0;
  double det_variance = 0.0;              // population variance of the scores
  double r2_ceiling = 0.0;                // det_var / (det_var + noise_std^2)
};

/// Generates grammar-valid plates with prices exp(score + noise), marks the
/// lowest tail unsold, and attaches session covariates. Deterministic per
/// seed, bitwise.
SynthOutput generate(const SynthConfig& config);

/// Var(deterministic) / (Var(deterministic) + noise_std^2) on the realized
/// sample: the R^2 no model evaluated on these records can beat.
double oracle_r2_ceiling(const SynthOutput& output);

/// Sidecar CSV: plate,deterministic_log_price,noise,ceiling_component. The
/// ceiling_component column holds each record's share of Var(deterministic),
/// so the ceiling is recomputable as sum(col) / (sum(col) + noise_std^2).
void write_oracle_csv(const SynthOutput& output, const std::string& path);

}  // namespace plateprice
