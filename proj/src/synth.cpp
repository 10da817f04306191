#include "plateprice/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace plateprice {

namespace {
constexpr const char* kLegalLetters = "ABCDEFGHJKLMNPRSTUVWXYZ";
}

ScoreWeights ScoreWeights::defaults() {
  ScoreWeights w;
  // sound-alike digit pairs, none of which exist in the hedonic feature sets
  w.digit_bigrams = {
      {"18", 0.35},  {"28", 0.35},  {"38", 0.28}, {"88", 0.30}, {"98", 0.25},
      {"54", -0.50}, {"58", -0.60}, {"24", -0.45}, {"74", -0.40},
      {"14", -0.30}, {"64", -0.35},
  };
  w.letter_value = {
      0.10,  0.06,  0.02,  -0.03, 0.00, -0.05, 0.04,  0.12,  0.00,
      -0.02, 0.08,  -0.06, 0.03,  -0.04, 0.00, 0.05,  0.00,  -0.08,
      0.02,  -0.05, -0.10, -0.07, 0.06,  0.15, 0.04,  -0.12,
  };  // A..Z, zero for the unused I/O/Q
  w.prefix_bigrams = {
      {"HK", 0.50}, {"XX", 0.30}, {"VV", 0.25}, {"AA", 0.20}, {"AM", 0.35},
  };
  return w;
}

ScoreWeights ScoreWeights::zero() {
  ScoreWeights w;
  w.base = 0.0;
  w.count_eight = 0.0;
  w.count_nine = 0.0;
  w.count_four = 0.0;
  w.contains_168 = 0.0;
  w.contains_13 = 0.0;
  w.solid_per_digit = 0.0;
  w.leading_run_bonus = 0.0;
  w.seq_ascending = 0.0;
  w.seq_descending = 0.0;
  w.per_missing_digit = 0.0;
  w.no_prefix_bonus = 0.0;
  w.five_before_eight = 0.0;
  w.single_digit_value = 0.0;
  w.letter_value.fill(0.0);
  return w;
}

SynthConfig SynthConfig::with_drift(double scale) {
  SynthConfig config;
  ScoreWeights d = ScoreWeights::zero();
  d.count_eight = -0.06 * scale;
  d.count_nine = 0.04 * scale;
  d.seq_ascending = 0.06 * scale;
  d.no_prefix_bonus = 0.04 * scale;
  d.digit_bigrams = {
      {"28", -0.05 * scale}, {"18", 0.04 * scale}, {"54", 0.03 * scale}};
  config.drift_per_year = d;
  return config;
}

double plate_score(const std::string& plate, const ScoreWeights& weights,
                   const ScoreWeights& drift_per_year, double years_elapsed) {
  validate_plate(plate);
  const double t = years_elapsed;
  auto eff = [t](double w, double d) { return w + t * d; };
  auto eff_map = [t](const std::map<std::string, double>& w,
                     const std::map<std::string, double>& d,
                     const std::string& key) {
    double v = 0.0;
    if (auto it = w.find(key); it != w.end()) v += it->second;
    if (auto it = d.find(key); it != d.end()) v += t * it->second;
    return v;
  };

  std::size_t prefix_len = 0;
  while (prefix_len < plate.size() && plate[prefix_len] >= 'A' && plate[prefix_len] <= 'Z') {
    ++prefix_len;
  }
  const std::string digits = plate.substr(prefix_len);
  const std::size_t k = digits.size();

  double score = eff(weights.base, drift_per_year.base);
  for (char c : digits) {
    if (c == '8') score += eff(weights.count_eight, drift_per_year.count_eight);
    if (c == '9') score += eff(weights.count_nine, drift_per_year.count_nine);
    if (c == '4') score += eff(weights.count_four, drift_per_year.count_four);
  }
  if (digits.find("168") != std::string::npos) {
    score += eff(weights.contains_168, drift_per_year.contains_168);
  }
  if (digits.find("13") != std::string::npos) {
    score += eff(weights.contains_13, drift_per_year.contains_13);
  }
  const bool all_same =
      k >= 2 && std::all_of(digits.begin(), digits.end(),
                            [&](char c) { return c == digits[0]; });
  if (all_same) {
    score += eff(weights.solid_per_digit, drift_per_year.solid_per_digit) *
             static_cast<double>(k);
  }
  std::size_t lead_run = 1;
  while (lead_run < k && digits[lead_run] == digits[0]) ++lead_run;
  if (lead_run >= 2) {
    score += eff(weights.leading_run_bonus, drift_per_year.leading_run_bonus) *
             static_cast<double>(lead_run);
  }
  if (k >= 2) {
    bool asc = true, desc = true;
    for (std::size_t i = 0; i + 1 < k; ++i) {
      if (digits[i + 1] != digits[i] + 1) asc = false;
      if (digits[i + 1] != digits[i] - 1) desc = false;
    }
    if (asc) score += eff(weights.seq_ascending, drift_per_year.seq_ascending);
    if (desc) score += eff(weights.seq_descending, drift_per_year.seq_descending);
  }
  score += eff(weights.per_missing_digit, drift_per_year.per_missing_digit) *
           static_cast<double>(4 - k);
  if (prefix_len == 0) {
    score += eff(weights.no_prefix_bonus, drift_per_year.no_prefix_bonus);
  }
  for (std::size_t i = 0; i + 1 < k; ++i) {
    if (digits[i] == '5' && digits[i + 1] == '8') {
      score += eff(weights.five_before_eight, drift_per_year.five_before_eight);
    }
    score += eff_map(weights.digit_bigrams, drift_per_year.digit_bigrams,
                     digits.substr(i, 2));
  }
  if (prefix_len == 0 && k == 1) {
    score += eff(weights.single_digit_value, drift_per_year.single_digit_value) *
             static_cast<double>(digits[0] - '0');
  }
  for (std::size_t i = 0; i < prefix_len; ++i) {
    score += eff(weights.letter_value[plate[i] - 'A'],
                 drift_per_year.letter_value[plate[i] - 'A']);
  }
  if (prefix_len == 2) {
    score += eff_map(weights.prefix_bigrams, drift_per_year.prefix_bigrams,
                     plate.substr(0, 2));
  }
  return score;
}

namespace {

std::string random_plate(SeededRng& rng) {
  std::string plate;
  if (rng.uniform() < 0.75) {
    plate.push_back(kLegalLetters[rng.below(23)]);
    plate.push_back(kLegalLetters[rng.below(23)]);
  }
  const double u = rng.uniform();
  const std::size_t k = u < 0.02 ? 1 : u < 0.10 ? 2 : u < 0.40 ? 3 : 4;
  plate.push_back(static_cast<char>('1' + rng.below(9)));  // no leading zero
  for (std::size_t i = 1; i < k; ++i) {
    plate.push_back(static_cast<char>('0' + rng.below(10)));
  }
  return plate;
}

}  // namespace

SynthOutput generate(const SynthConfig& config) {
  if (config.n_records == 0 || config.years < 1 || !(config.noise_std > 0.0)) {
    throw DataError("synth: n_records, years and noise_std must be positive");
  }
  SeededRng rng(config.seed);
  const std::size_t months = static_cast<std::size_t>(config.years) * 12;

  std::vector<double> stock(months), cpi(months);
  double s = config.stock_start, c = config.cpi_start;
  for (std::size_t m = 0; m < months; ++m) {
    stock[m] = s;
    cpi[m] = c;
    s *= std::exp(config.stock_drift + config.stock_vol * rng.normal());
    c *= std::exp(config.cpi_drift + config.cpi_vol * rng.normal());
  }

  SynthOutput out;
  out.noise_std = config.noise_std;
  out.records.reserve(config.n_records);
  out.deterministic.reserve(config.n_records);
  out.noise.reserve(config.n_records);

  const std::size_t per_month = config.n_records / months;
  const std::size_t leftover = config.n_records % months;
  for (std::size_t m = 0; m < months; ++m) {
    const std::size_t count = per_month + (m < leftover ? 1 : 0);
    // auctions are held twice a month; draw a slot per record, then walk the
    // month in date/session order so the output stays time-sorted
    std::vector<std::pair<int, int>> slots(count);  // (day, afternoon)
    for (auto& slot : slots) {
      slot.first = rng.below(2) == 0 ? 5 : 19;
      slot.second = static_cast<int>(rng.below(2));
    }
    std::stable_sort(slots.begin(), slots.end());
    int order = 0;
    std::pair<int, int> last{-1, -1};
    const double years_elapsed = static_cast<double>(m) / 12.0;
    for (const auto& slot : slots) {
      order = slot == last ? order + 1 : 1;
      last = slot;
      AuctionRecord rec;
      rec.plate = random_plate(rng);
      rec.auction_date = {config.start_year + static_cast<int>(m) / 12,
                          static_cast<int>(m) % 12 + 1, slot.first};
      rec.afternoon_session = slot.second == 1;
      rec.order_in_session = order;
      rec.stock_index = stock[m];
      rec.cpi = cpi[m];
      const double det = plate_score(rec.plate, config.weights,
                                     config.drift_per_year, years_elapsed);
      const double eps = config.noise_std * rng.normal();
      rec.sold = true;  // provisional; the reserve rule below flips the tail
      rec.price_hkd = std::exp(det + eps);
      out.records.push_back(std::move(rec));
      out.deterministic.push_back(det);
      out.noise.push_back(eps);
    }
  }

  // reserve rule: the lowest-priced tail goes unsold
  {
    std::vector<double> log_prices(out.records.size());
    for (std::size_t i = 0; i < out.records.size(); ++i) {
      log_prices[i] = out.deterministic[i] + out.noise[i];
    }
    std::vector<double> sorted = log_prices;
    std::sort(sorted.begin(), sorted.end());
    const auto cut = static_cast<std::size_t>(
        config.unsold_rate * static_cast<double>(sorted.size()));
    if (cut > 0) {
      const double threshold = sorted[cut];
      for (std::size_t i = 0; i < out.records.size(); ++i) {
        if (log_prices[i] < threshold) {
          out.records[i].sold = false;
          out.records[i].price_hkd.reset();
        }
      }
    }
  }

  double mean = std::accumulate(out.deterministic.begin(), out.deterministic.end(), 0.0) /
                static_cast<double>(out.deterministic.size());
  double var = 0.0;
  for (double d : out.deterministic) var += (d - mean) * (d - mean);
  var /= static_cast<double>(out.deterministic.size());
  out.det_variance = var;
  out.r2_ceiling = var / (var + config.noise_std * config.noise_std);
  return out;
}

double oracle_r2_ceiling(const SynthOutput& output) { return output.r2_ceiling; }

void write_oracle_csv(const SynthOutput& output, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "plate,deterministic_log_price,noise,ceiling_component\n";
  const auto n = static_cast<double>(output.deterministic.size());
  double mean = std::accumulate(output.deterministic.begin(),
                                output.deterministic.end(), 0.0) / n;
  char row[160];
  for (std::size_t i = 0; i < output.records.size(); ++i) {
    const double d = output.deterministic[i];
    std::snprintf(row, sizeof(row), "%s,%.12g,%.12g,%.12g",
                  output.records[i].plate.c_str(), d, output.noise[i],
                  (d - mean) * (d - mean) / n);
    out << row << "\n";
  }
}

}  // namespace plateprice
