#include "plateprice/retrain_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "plateprice/parallel.hpp"

namespace plateprice {

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a,
                                    const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw DataError("wilcoxon: paired samples must have equal nonzero length");
  }
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) {
    throw DataError("wilcoxon: degenerate input, all differences are zero");
  }
  const std::size_t n = diffs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return std::fabs(diffs[i]) < std::fabs(diffs[j]);
  });

  double w_plus = 0.0;
  double tie_correction = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && std::fabs(diffs[order[j]]) == std::fabs(diffs[order[i]])) ++j;
    // midrank for the tie group spanning sorted positions [i, j)
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    const auto t = static_cast<double>(j - i);
    tie_correction += (t * t * t - t) / 48.0;
    for (std::size_t k = i; k < j; ++k) {
      if (diffs[order[k]] > 0.0) w_plus += rank;
    }
    i = j;
  }

  const auto dn = static_cast<double>(n);
  const double mean = dn * (dn + 1.0) / 4.0;
  const double var = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0 - tie_correction;
  if (!(var > 0.0)) {
    throw DataError("wilcoxon: zero variance after tie correction");
  }
  WilcoxonResult res;
  res.n_used = n;
  res.w_plus = w_plus;
  res.z = (w_plus - mean) / std::sqrt(var);
  res.p = std::erfc(std::fabs(res.z) / std::sqrt(2.0));
  return res;
}

std::string to_string(RetrainSchedule schedule) {
  switch (schedule) {
    case RetrainSchedule::Never: return "never";
    case RetrainSchedule::Yearly: return "yearly";
    case RetrainSchedule::Monthly: return "monthly";
  }
  return "never";
}

RetrainSchedule schedule_from_string(const std::string& name) {
  if (name == "never") return RetrainSchedule::Never;
  if (name == "yearly") return RetrainSchedule::Yearly;
  if (name == "monthly") return RetrainSchedule::Monthly;
  throw DataError("unknown schedule '" + name + "', want never, yearly or monthly");
}

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

struct FittedStack {
  TrainedModel rnn;
  HedonicModel hedonic;
  EnsembleModel ensemble;
  SimModelKind kind = SimModelKind::Rnn;
};

// One (re)training event on a window of sold records.
FittedStack train_event(const std::vector<AuctionRecord>& sold,
                        const std::vector<double>& targets, std::size_t begin,
                        std::size_t end, const RetrainOptions& options,
                        std::uint64_t train_seed, std::uint64_t split_seed) {
  const std::size_t n = end - begin;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  SeededRng split_rng(split_seed);
  split_rng.shuffle(order);
  auto n_valid = static_cast<std::size_t>(
      std::llround(options.valid_fraction * static_cast<double>(n)));
  n_valid = std::max<std::size_t>(2, std::min(n_valid, n - 2));

  DatasetSplit split;
  split.seed = split_seed;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = begin + order[k];
    (k < n_valid ? split.valid : split.train).push_back(sold[i], targets[i]);
  }

  FittedStack stack;
  stack.kind = options.kind;
  stack.rnn = train(options.config, split, train_seed, options.train);
  if (options.kind == SimModelKind::CombinedExtra) {
    std::vector<std::string> plates;
    for (const auto& r : split.train.records) plates.push_back(r.plate);
    stack.hedonic = fit_hedonic(plates, split.train.targets, options.hedonic_preset);
    const auto rnn_preds =
        predict_all(stack.rnn.params, stack.rnn.bn_state, split.train.tokens);
    std::vector<double> hed_preds;
    std::vector<std::vector<double>> extras;
    for (const auto& r : split.train.records) {
      hed_preds.push_back(predict(stack.hedonic, r.plate));
      extras.push_back(extract_extra_features(r));
    }
    stack.ensemble = fit_ensemble(EnsembleVariant::CombinedExtra, rnn_preds,
                                  hed_preds, extras, split.train.targets);
  }
  return stack;
}

std::vector<double> stack_predict(const FittedStack& stack,
                                  const std::vector<AuctionRecord>& records) {
  std::vector<TokenSeq> tokens;
  tokens.reserve(records.size());
  for (const auto& r : records) tokens.push_back(tokenize_plate(r.plate));
  auto preds = predict_all(stack.rnn.params, stack.rnn.bn_state, tokens);
  if (stack.kind == SimModelKind::CombinedExtra) {
    for (std::size_t i = 0; i < records.size(); ++i) {
      preds[i] = predict_ensemble(stack.ensemble, preds[i],
                                  predict(stack.hedonic, records[i].plate),
                                  extract_extra_features(records[i]));
    }
  }
  return preds;
}

double median_skip_nan(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(),
                         [](double x) { return std::isnan(x); }),
          v.end());
  if (v.empty()) return kNan;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

SimulateResult simulate(const RetrainPlan& plan,
                        const std::vector<AuctionRecord>& records,
                        const RetrainOptions& options) {
  if (plan.initial_years < 1 || plan.horizon_years < 1) {
    throw DataError("simulate: initial and horizon spans must be >= 1 year");
  }
  std::vector<AuctionRecord> sold;
  for (const auto& r : records) {
    if (r.sold) sold.push_back(r);
  }
  if (sold.empty()) throw DataError("simulate: no sold records");
  std::stable_sort(sold.begin(), sold.end(),
                   [](const AuctionRecord& a, const AuctionRecord& b) {
                     return a.auction_date < b.auction_date;
                   });
  std::vector<double> targets(sold.size());
  for (std::size_t i = 0; i < sold.size(); ++i) {
    targets[i] = std::log(*sold[i].price_hkd);
  }

  const int start_month = sold.front().auction_date.month_index();
  const int cutoff = start_month + plan.initial_years * 12;
  const int horizon = plan.horizon_years * 12;
  if (sold.back().auction_date.month_index() < cutoff) {
    throw DataError("simulate: dataset ends before the evaluation horizon begins");
  }

  // sold is date-sorted, so month boundaries are lower bounds
  auto first_at_or_after = [&](int month) {
    return static_cast<std::size_t>(
        std::lower_bound(sold.begin(), sold.end(), month,
                         [](const AuctionRecord& r, int m) {
                           return r.auction_date.month_index() < m;
                         }) -
        sold.begin());
  };

  const std::size_t initial_end = first_at_or_after(cutoff);
  const std::size_t window =
      plan.window_size > 0 ? plan.window_size : initial_end;
  if (window < 10) throw DataError("simulate: training window smaller than 10 records");
  if (initial_end < window) {
    throw DataError("simulate: initial period has " + std::to_string(initial_end) +
                    " sold records, window needs " + std::to_string(window));
  }

  SimulateResult result;
  result.repeats.resize(options.n_repeats);
  parallel_for(options.n_repeats, options.workers, [&](std::size_t rep) {
    SeededRng seed_stream(options.base_seed + rep);
    ScheduleTrace trace;
    auto record_training = [&](int version, std::size_t begin, std::size_t end) {
      trace.trainings.push_back({version, end - begin,
                                 sold[begin].auction_date,
                                 sold[end - 1].auction_date});
    };
    const std::uint64_t s1 = seed_stream.next(), s2 = seed_stream.next();
    FittedStack stack = train_event(sold, targets, initial_end - window,
                                    initial_end, options, s1, s2);
    int version = 1;
    record_training(version, initial_end - window, initial_end);
    for (int h = 0; h < horizon; ++h) {
      const int am = cutoff + h;
      const bool retrain_now =
          h > 0 && (plan.schedule == RetrainSchedule::Monthly ||
                    (plan.schedule == RetrainSchedule::Yearly && h % 12 == 0));
      if (retrain_now) {
        const std::size_t end = first_at_or_after(am);
        const std::uint64_t t1 = seed_stream.next(), t2 = seed_stream.next();
        stack = train_event(sold, targets, end - window, end, options, t1, t2);
        ++version;
        record_training(version, end - window, end);
      } else if (plan.schedule != RetrainSchedule::Never) {
        // keep the seed stream aligned across schedules so shared months are
        // comparable
        seed_stream.next();
        seed_stream.next();
      }

      MonthEval eval;
      eval.month_index = h + 1;
      eval.model_version = version;
      eval.month_start = {am / 12, am % 12 + 1, 1};
      const std::size_t begin = first_at_or_after(am);
      const std::size_t end = first_at_or_after(am + 1);
      eval.n_samples = end - begin;
      if (eval.n_samples == 0) {
        eval.rmse = kNan;
        eval.r2 = kNan;
      } else {
        const std::vector<AuctionRecord> month_records(sold.begin() + begin,
                                                       sold.begin() + end);
        const std::vector<double> month_targets(targets.begin() + begin,
                                                targets.begin() + end);
        const auto preds = stack_predict(stack, month_records);
        eval.rmse = rmse(preds, month_targets);
        eval.r2 = kNan;
        if (month_targets.size() >= 2) {
          double mean = std::accumulate(month_targets.begin(), month_targets.end(), 0.0) /
                        static_cast<double>(month_targets.size());
          double sst = 0.0, sse = 0.0;
          for (std::size_t i = 0; i < month_targets.size(); ++i) {
            sst += (month_targets[i] - mean) * (month_targets[i] - mean);
            sse += (preds[i] - month_targets[i]) * (preds[i] - month_targets[i]);
          }
          if (sst > 0.0) eval.r2 = 1.0 - sse / sst;
        }
      }
      trace.months.push_back(eval);
    }
    result.repeats[rep] = std::move(trace);
  });

  result.per_month_median_rmse.resize(horizon, kNan);
  result.per_month_median_r2.resize(horizon, kNan);
  for (int h = 0; h < horizon; ++h) {
    std::vector<double> r, q;
    for (const auto& rep : result.repeats) {
      r.push_back(rep.months[h].rmse);
      q.push_back(rep.months[h].r2);
    }
    result.per_month_median_rmse[h] = median_skip_nan(r);
    result.per_month_median_r2[h] = median_skip_nan(q);
  }
  result.median_horizon_rmse = median_skip_nan(result.per_month_median_rmse);
  return result;
}

void write_trace_csv(const SimulateResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "repeat,month_index,model_version,rmse,r2,n_samples\n";
  char num[64];
  for (std::size_t rep = 0; rep < result.repeats.size(); ++rep) {
    for (const auto& m : result.repeats[rep].months) {
      out << rep << "," << m.month_index << "," << m.model_version << ",";
      if (!std::isnan(m.rmse)) {
        std::snprintf(num, sizeof(num), "%.9g", m.rmse);
        out << num;
      }
      out << ",";
      if (!std::isnan(m.r2)) {
        std::snprintf(num, sizeof(num), "%.9g", m.r2);
        out << num;
      }
      out << "," << m.n_samples << "\n";
    }
  }
}

}  // namespace plateprice
