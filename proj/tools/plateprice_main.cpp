// plateprice: character-sequence price regression for Hong Kong style
// vehicle plates. Subcommands cover synthetic data generation, training,
// evaluation, prediction, hyperparameter sweeps, hedonic baselines, stacked
// ensembles and the walk-forward retraining experiment.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "plateprice/ensemble.hpp"
#include "plateprice/experiment.hpp"
#include "plateprice/hedonic.hpp"
#include "plateprice/plate_data.hpp"
#include "plateprice/retrain_sim.hpp"
#include "plateprice/rnn_model.hpp"
#include "plateprice/synth.hpp"
#include "plateprice/trainer.hpp"

namespace fs = std::filesystem;
using namespace plateprice;

namespace {

std::string fmt(double v, const char* spec = "%.9g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

ModelConfig model_config_from(const KeyValueConfig& c) {
  ModelConfig m;
  m.hidden_units = static_cast<int>(c.get_int("hidden_units", 128));
  m.embed_dim = static_cast<int>(c.get_int("embed_dim", 24));
  m.recurrent_layers = static_cast<int>(c.get_int("recurrent_layers", 3));
  m.fc_layers = static_cast<int>(c.get_int("fc_layers", 1));
  m.dropout_rate = c.get_double("dropout", 0.05);
  m.validate();
  return m;
}

TrainOptions train_options_from(const KeyValueConfig& c) {
  TrainOptions t;
  t.epochs = static_cast<int>(c.get_int("epochs", 40));
  t.batch_size = static_cast<std::size_t>(c.get_int("batch_size", 256));
  t.learning_rate = c.get_double("learning_rate", 0.001);
  t.clip_threshold = c.get_double("clip", 15.0);
  if (t.epochs < 1 || t.batch_size < 1 || !(t.learning_rate > 0.0) ||
      !(t.clip_threshold > 0.0)) {
    throw UsageError("epochs, batch_size, learning_rate and clip must be positive");
  }
  return t;
}

const std::set<std::string> kModelKeys = {
    "hidden_units", "embed_dim", "recurrent_layers", "fc_layers", "dropout"};
const std::set<std::string> kTrainKeys = {
    "epochs", "batch_size", "learning_rate", "clip",
    "split_seed", "seed", "runs", "workers"};

std::set<std::string> merge_keys(std::initializer_list<std::set<std::string>> sets) {
  std::set<std::string> out;
  for (const auto& s : sets) out.insert(s.begin(), s.end());
  return out;
}

DatasetSplit load_split(const std::string& data_path, std::uint64_t split_seed) {
  const auto records = load_auction_csv(data_path);
  const auto prepared = preprocess(records);
  return split_dataset(prepared, split_seed);
}

void write_metrics_csv(const std::string& path,
                       const std::vector<std::pair<std::string, MetricPair>>& rows,
                       const std::vector<std::size_t>& counts) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "split,n,rmse,r2\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << rows[i].first << "," << counts[i] << "," << fmt(rows[i].second.rmse)
        << "," << fmt(rows[i].second.r2) << "\n";
  }
}

// defaults < config file < explicit flags; the merged map is what runs and
// what the manifest records
struct Resolved {
  KeyValueConfig config;
  std::vector<std::string> inputs;

  void load_file(const std::string& path, const std::set<std::string>& allowed) {
    if (path.empty()) return;
    const auto file = KeyValueConfig::parse_file(path);
    file.require_known(allowed);
    for (const auto& [k, v] : file.values()) config.set(k, v);
    inputs.push_back(path);
  }
};

// ---------------------------------------------------------------------------

struct GenDataArgs {
  std::string out;
  std::uint64_t n = 50000, seed = 20260101;
  int start_year = 1997, years = 13;
  double noise_std = -1.0, unsold_rate = -1.0, drift = 0.0;
};

int cmd_gen_data(const GenDataArgs& a) {
  SynthConfig config = a.drift != 0.0 ? SynthConfig::with_drift(a.drift) : SynthConfig{};
  config.n_records = a.n;
  config.seed = a.seed;
  config.start_year = a.start_year;
  config.years = a.years;
  if (a.noise_std > 0.0) config.noise_std = a.noise_std;
  if (a.unsold_rate >= 0.0) config.unsold_rate = a.unsold_rate;

  const SynthOutput output = generate(config);
  fs::create_directories(a.out);
  write_auction_csv(output.records, a.out + "/auction.csv");
  write_oracle_csv(output, a.out + "/oracle.csv");

  std::size_t unsold = 0;
  for (const auto& r : output.records) unsold += r.sold ? 0 : 1;

  std::map<std::string, std::string> resolved = {
      {"n", std::to_string(a.n)},
      {"seed", std::to_string(a.seed)},
      {"start_year", std::to_string(a.start_year)},
      {"years", std::to_string(a.years)},
      {"noise_std", fmt(config.noise_std)},
      {"unsold_rate", fmt(config.unsold_rate)},
      {"drift", fmt(a.drift)},
  };
  write_manifest(a.out, "gen-data", resolved, {a.seed}, {});
  std::cout << "wrote " << output.records.size() << " records (" << unsold
            << " unsold) to " << a.out << "/auction.csv\n"
            << "deterministic variance " << fmt(output.det_variance, "%.4f")
            << ", r2 ceiling " << fmt(output.r2_ceiling, "%.4f") << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data, out, config_path;
  Resolved resolved;
};

int cmd_train(TrainArgs& a) {
  KeyValueConfig& c = a.resolved.config;
  const ModelConfig model_config = model_config_from(c);
  const TrainOptions options = train_options_from(c);
  const std::uint64_t split_seed = c.get_u64("split_seed", 1);
  const std::uint64_t base_seed = c.get_u64("seed", 1);
  const int runs = static_cast<int>(c.get_int("runs", 1));
  const auto workers = static_cast<unsigned>(c.get_int("workers", 1));
  if (runs < 1) throw UsageError("runs must be >= 1");

  const DatasetSplit split = load_split(a.data, split_seed);
  const MultiRunResult result =
      multi_run(model_config, split, runs, base_seed, options, workers);

  fs::create_directories(a.out);
  write_results_csv(result.runs, a.out + "/results.csv");
  save_params(result.best.params, result.best.bn_state, a.out + "/best.ckpt");

  std::vector<std::uint64_t> seeds = {split_seed};
  for (int i = 0; i < runs; ++i) seeds.push_back(base_seed + i);
  a.resolved.inputs.push_back(a.data);
  write_manifest(a.out, "train", c.values(), seeds, a.resolved.inputs);

  std::cout << "config " << model_config.id() << ": median valid rmse "
            << fmt(result.median_valid_rmse, "%.4f") << ", median test rmse "
            << fmt(result.median_test_rmse, "%.4f") << ", median test r2 "
            << fmt(result.median_test_r2, "%.4f") << " over " << runs
            << " run(s)\n"
            << "best checkpoint: " << a.out << "/best.ckpt (valid rmse "
            << fmt(result.best.result.best_valid_rmse, "%.4f") << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string model, data, split = "test", out;
  std::uint64_t split_seed = 1;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const Checkpoint ckpt = load_params(a.model);
  std::vector<std::pair<std::string, MetricPair>> rows;
  std::vector<std::size_t> counts;
  auto eval_part = [&](const std::string& name, const DataPart& part) {
    const auto preds = predict_all(ckpt.params, ckpt.bn_state, part.tokens);
    rows.emplace_back(name, evaluate(preds, part.targets));
    counts.push_back(part.size());
  };
  if (a.split == "all") {
    const auto prepared = preprocess(load_auction_csv(a.data));
    DataPart part;
    for (std::size_t i = 0; i < prepared.records.size(); ++i) {
      part.push_back(prepared.records[i], prepared.targets[i]);
    }
    eval_part("all", part);
  } else {
    const DatasetSplit split = load_split(a.data, a.split_seed);
    if (a.split == "train") eval_part("train", split.train);
    else if (a.split == "valid") eval_part("valid", split.valid);
    else if (a.split == "test") eval_part("test", split.test);
    else throw UsageError("unknown split '" + a.split + "'");
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::cout << rows[i].first << ": n=" << counts[i] << " rmse="
              << fmt(rows[i].second.rmse, "%.6f") << " r2="
              << fmt(rows[i].second.r2, "%.6f") << "\n";
  }
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_metrics_csv(a.out + "/metrics.csv", rows, counts);
    write_manifest(a.out, "evaluate",
                   {{"model", a.model},
                    {"data", a.data},
                    {"split", a.split},
                    {"split_seed", std::to_string(a.split_seed)}},
                   {a.split_seed}, {a.model, a.data});
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string model, plates_file, hedonic_path, ensemble_path, data, out;
  std::vector<std::string> plates;
};

int cmd_predict(const PredictArgs& a) {
  const Checkpoint ckpt = load_params(a.model);
  const bool stacked = !a.ensemble_path.empty();
  HedonicModel hedonic;
  EnsembleModel stack;
  if (stacked) {
    if (a.hedonic_path.empty()) {
      throw UsageError("--ensemble needs --hedonic for the baseline prediction");
    }
    hedonic = load_hedonic_csv(a.hedonic_path);
    stack = load_ensemble_csv(a.ensemble_path);
  }

  std::vector<std::string> plates = a.plates;
  if (!a.plates_file.empty()) {
    std::ifstream in(a.plates_file);
    if (!in) throw DataError("cannot open '" + a.plates_file + "'");
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line != "\r") {
        if (line.back() == '\r') line.pop_back();
        plates.push_back(line);
      }
    }
  }

  std::vector<AuctionRecord> records;
  if (!a.data.empty()) records = load_auction_csv(a.data);
  if (plates.empty() && records.empty()) {
    throw UsageError("nothing to predict: pass --plate, --plates-file or --data");
  }
  if (stacked && stack.variant == EnsembleVariant::CombinedExtra && records.empty()) {
    throw UsageError("a combined_extra ensemble needs --data rows for the covariates");
  }

  std::ofstream file_out;
  if (!a.out.empty()) {
    fs::create_directories(fs::path(a.out).parent_path().string().empty()
                               ? "."
                               : fs::path(a.out).parent_path().string());
    file_out.open(a.out);
    if (!file_out) throw DataError("cannot write '" + a.out + "'");
    file_out << "plate,log_price,price_hkd\n";
  }
  auto emit = [&](const std::string& plate, double log_price) {
    const std::string line =
        plate + "," + fmt(log_price, "%.6f") + "," + fmt(std::exp(log_price), "%.2f");
    if (file_out.is_open()) file_out << line << "\n";
    else std::cout << line << "\n";
  };

  for (const auto& plate : plates) {
    std::vector<TokenSeq> tokens = {tokenize_plate(plate)};
    double log_price = predict(ckpt.params, ckpt.bn_state, tokens)[0];
    if (stacked) {
      if (stack.variant == EnsembleVariant::CombinedExtra) {
        throw UsageError("plate-only prediction supports the combined variant; "
                         "combined_extra needs --data rows");
      }
      log_price = predict_ensemble(stack, log_price, predict(hedonic, plate));
    }
    emit(plate, log_price);
  }
  if (!records.empty()) {
    std::vector<TokenSeq> tokens;
    for (const auto& r : records) tokens.push_back(tokenize_plate(r.plate));
    const auto base = predict_all(ckpt.params, ckpt.bn_state, tokens);
    for (std::size_t i = 0; i < records.size(); ++i) {
      double log_price = base[i];
      if (stacked) {
        const double hed = predict(hedonic, records[i].plate);
        log_price = stack.variant == EnsembleVariant::CombinedExtra
                        ? predict_ensemble(stack, log_price, hed,
                                           extract_extra_features(records[i]))
                        : predict_ensemble(stack, log_price, hed);
      }
      emit(records[i].plate, log_price);
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string data, out, grid_path;
  Resolved resolved;
};

int cmd_sweep(SweepArgs& a) {
  KeyValueConfig& c = a.resolved.config;
  const TrainOptions options = train_options_from(c);
  const std::uint64_t split_seed = c.get_u64("split_seed", 1);
  const std::uint64_t base_seed = c.get_u64("seed", 1);
  const int runs = static_cast<int>(c.get_int("runs", 5));
  const auto workers = static_cast<unsigned>(c.get_int("workers", 1));

  const KeyValueConfig grid_file = KeyValueConfig::parse_file(a.grid_path);
  grid_file.require_known(kModelKeys);
  auto axis = [&](const char* key, double fallback) {
    auto v = grid_file.has(key) ? grid_file.get_list(key)
                                : std::vector<double>{fallback};
    return v;
  };
  const auto hiddens = axis("hidden_units", 128);
  const auto embeds = axis("embed_dim", 24);
  const auto recs = axis("recurrent_layers", 3);
  const auto fcs = axis("fc_layers", 1);
  const auto drops = axis("dropout", 0.05);

  std::vector<ModelConfig> grid;
  for (double hd : hiddens)
    for (double em : embeds)
      for (double rc : recs)
        for (double fc : fcs)
          for (double dr : drops) {
            ModelConfig m;
            m.hidden_units = static_cast<int>(hd);
            m.embed_dim = static_cast<int>(em);
            m.recurrent_layers = static_cast<int>(rc);
            m.fc_layers = static_cast<int>(fc);
            m.dropout_rate = dr;
            m.validate();
            grid.push_back(m);
          }

  const DatasetSplit split = load_split(a.data, split_seed);
  const SweepResult result = sweep(grid, split, runs, base_seed, options, workers);

  fs::create_directories(a.out);
  write_sweep_csv(result, a.out + "/sweep.csv");
  write_results_csv(result.all_runs, a.out + "/runs.csv");

  std::vector<std::uint64_t> seeds = {split_seed};
  for (int i = 0; i < runs; ++i) seeds.push_back(base_seed + i);
  a.resolved.inputs.push_back(a.data);
  a.resolved.inputs.push_back(a.grid_path);
  write_manifest(a.out, "sweep", c.values(), seeds, a.resolved.inputs);

  std::cout << "swept " << grid.size() << " configs x " << runs << " runs\n";
  for (const auto& row : result.rows) {
    std::cout << "  " << row.config.id() << "  median valid rmse "
              << fmt(row.median_valid_rmse, "%.4f") << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct BaselineArgs {
  std::string data, out, preset = "woo2008";
  std::uint64_t split_seed = 1;
};

int cmd_baseline(const BaselineArgs& a) {
  const HedonicPreset preset = hedonic_preset_from_string(a.preset);
  const DatasetSplit split = load_split(a.data, a.split_seed);
  std::vector<std::string> plates;
  for (const auto& r : split.train.records) plates.push_back(r.plate);
  const HedonicModel model = fit_hedonic(plates, split.train.targets, preset);

  auto part_metrics = [&](const DataPart& part) {
    std::vector<double> preds;
    preds.reserve(part.size());
    for (const auto& r : part.records) preds.push_back(predict(model, r.plate));
    return evaluate(preds, part.targets);
  };
  const std::vector<std::pair<std::string, MetricPair>> rows = {
      {"train", part_metrics(split.train)},
      {"valid", part_metrics(split.valid)},
      {"test", part_metrics(split.test)},
  };
  fs::create_directories(a.out);
  save_hedonic_csv(model, a.out + "/baseline.csv");
  write_metrics_csv(a.out + "/metrics.csv", rows,
                    {split.train.size(), split.valid.size(), split.test.size()});
  write_manifest(a.out, "baseline",
                 {{"data", a.data},
                  {"preset", a.preset},
                  {"split_seed", std::to_string(a.split_seed)}},
                 {a.split_seed}, {a.data});
  for (const auto& [name, m] : rows) {
    std::cout << a.preset << " " << name << ": rmse=" << fmt(m.rmse, "%.6f")
              << " r2=" << fmt(m.r2, "%.6f") << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct EnsembleArgs {
  std::string data, model, baseline, out, variant = "combined";
  std::uint64_t split_seed = 1;
};

int cmd_ensemble(const EnsembleArgs& a) {
  const EnsembleVariant variant = ensemble_variant_from_string(a.variant);
  const Checkpoint ckpt = load_params(a.model);
  const HedonicModel hedonic = load_hedonic_csv(a.baseline);
  const DatasetSplit split = load_split(a.data, a.split_seed);

  auto stack_inputs = [&](const DataPart& part) {
    std::vector<double> rnn_preds = predict_all(ckpt.params, ckpt.bn_state, part.tokens);
    std::vector<double> hed_preds;
    std::vector<std::vector<double>> extras;
    for (const auto& r : part.records) {
      hed_preds.push_back(predict(hedonic, r.plate));
      if (variant == EnsembleVariant::CombinedExtra) {
        extras.push_back(extract_extra_features(r));
      }
    }
    return std::make_tuple(std::move(rnn_preds), std::move(hed_preds), std::move(extras));
  };

  auto [train_rnn, train_hed, train_extras] = stack_inputs(split.train);
  const EnsembleModel model =
      fit_ensemble(variant, train_rnn, train_hed, train_extras, split.train.targets);

  auto part_metrics = [&](const DataPart& part) {
    auto [rnn_preds, hed_preds, extras] = stack_inputs(part);
    std::vector<double> preds(part.size());
    for (std::size_t i = 0; i < part.size(); ++i) {
      preds[i] = variant == EnsembleVariant::CombinedExtra
                     ? predict_ensemble(model, rnn_preds[i], hed_preds[i], extras[i])
                     : predict_ensemble(model, rnn_preds[i], hed_preds[i]);
    }
    return evaluate(preds, part.targets);
  };
  const std::vector<std::pair<std::string, MetricPair>> rows = {
      {"train", part_metrics(split.train)},
      {"valid", part_metrics(split.valid)},
      {"test", part_metrics(split.test)},
  };
  fs::create_directories(a.out);
  save_ensemble_csv(model, a.out + "/ensemble.csv");
  write_metrics_csv(a.out + "/metrics.csv", rows,
                    {split.train.size(), split.valid.size(), split.test.size()});
  write_manifest(a.out, "ensemble",
                 {{"data", a.data},
                  {"model", a.model},
                  {"baseline", a.baseline},
                  {"variant", a.variant},
                  {"split_seed", std::to_string(a.split_seed)}},
                 {a.split_seed}, {a.data, a.model, a.baseline});
  for (const auto& [name, m] : rows) {
    std::cout << a.variant << " " << name << ": rmse=" << fmt(m.rmse, "%.6f")
              << " r2=" << fmt(m.r2, "%.6f") << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct RetrainArgs {
  std::string data, out, schedule = "all", kind = "rnn", config_path;
  int repeats = 10, initial_years = 8, horizon_years = 5;
  std::uint64_t window = 0;
  Resolved resolved;
};

int cmd_retrain_sim(RetrainArgs& a) {
  KeyValueConfig& c = a.resolved.config;
  RetrainOptions options;
  options.config = model_config_from(c);
  options.train = train_options_from(c);
  options.kind = a.kind == "combined_extra" ? SimModelKind::CombinedExtra
               : a.kind == "rnn"            ? SimModelKind::Rnn
                            : throw UsageError("unknown kind '" + a.kind + "'");
  options.n_repeats = a.repeats;
  options.base_seed = c.get_u64("seed", 1);
  options.workers = static_cast<unsigned>(c.get_int("workers", 1));

  std::vector<RetrainSchedule> schedules;
  if (a.schedule == "all") {
    schedules = {RetrainSchedule::Never, RetrainSchedule::Yearly,
                 RetrainSchedule::Monthly};
  } else {
    schedules = {schedule_from_string(a.schedule)};
  }

  const auto records = load_auction_csv(a.data);
  fs::create_directories(a.out);

  std::map<RetrainSchedule, SimulateResult> results;
  for (const auto schedule : schedules) {
    RetrainPlan plan;
    plan.schedule = schedule;
    plan.initial_years = a.initial_years;
    plan.horizon_years = a.horizon_years;
    plan.window_size = a.window;
    SimulateResult result = simulate(plan, records, options);
    write_trace_csv(result, a.out + "/trace_" + to_string(schedule) + ".csv");
    std::cout << to_string(schedule) << ": median horizon rmse "
              << fmt(result.median_horizon_rmse, "%.4f") << "\n";
    results.emplace(schedule, std::move(result));
  }

  {
    std::ofstream out(a.out + "/summary.csv");
    if (!out) throw DataError("cannot write summary.csv");
    out << "schedule,median_horizon_rmse\n";
    for (const auto& [schedule, result] : results) {
      out << to_string(schedule) << "," << fmt(result.median_horizon_rmse) << "\n";
    }
  }
  if (results.size() > 1) {
    std::ofstream out(a.out + "/wilcoxon.csv");
    if (!out) throw DataError("cannot write wilcoxon.csv");
    out << "pair,z,p,n\n";
    auto compare = [&](RetrainSchedule x, RetrainSchedule y) {
      if (!results.count(x) || !results.count(y)) return;
      std::vector<double> px, py;
      const auto& mx = results.at(x).per_month_median_rmse;
      const auto& my = results.at(y).per_month_median_rmse;
      for (std::size_t h = 0; h < mx.size(); ++h) {
        if (!std::isnan(mx[h]) && !std::isnan(my[h])) {
          px.push_back(mx[h]);
          py.push_back(my[h]);
        }
      }
      const WilcoxonResult w = wilcoxon_signed_rank(px, py);
      out << to_string(x) << "_vs_" << to_string(y) << "," << fmt(w.z) << ","
          << fmt(w.p) << "," << w.n_used << "\n";
      std::cout << to_string(x) << " vs " << to_string(y) << ": z="
                << fmt(w.z, "%.3f") << " p=" << fmt(w.p, "%.2g") << "\n";
    };
    compare(RetrainSchedule::Yearly, RetrainSchedule::Never);
    compare(RetrainSchedule::Monthly, RetrainSchedule::Yearly);
    compare(RetrainSchedule::Monthly, RetrainSchedule::Never);
  }

  std::map<std::string, std::string> resolved = c.values();
  resolved["schedule"] = a.schedule;
  resolved["kind"] = a.kind;
  resolved["repeats"] = std::to_string(a.repeats);
  resolved["initial_years"] = std::to_string(a.initial_years);
  resolved["horizon_years"] = std::to_string(a.horizon_years);
  resolved["window"] = std::to_string(a.window);
  a.resolved.inputs.push_back(a.data);
  std::vector<std::uint64_t> seeds;
  for (int r = 0; r < a.repeats; ++r) seeds.push_back(options.base_seed + r);
  write_manifest(a.out, "retrain-sim", resolved, seeds, a.resolved.inputs);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"character-sequence price regression for auctioned vehicle plates"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate the synthetic auction dataset");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--n", gen.n, "number of auction records");
  gen_cmd->add_option("--seed", gen.seed, "generator seed");
  gen_cmd->add_option("--start-year", gen.start_year, "first auction year");
  gen_cmd->add_option("--years", gen.years, "span in years");
  gen_cmd->add_option("--noise-std", gen.noise_std, "log-price noise std");
  gen_cmd->add_option("--unsold-rate", gen.unsold_rate, "unsold tail fraction");
  gen_cmd->add_option("--drift", gen.drift, "taste drift scale (0 = stationary)");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train the recurrent network");
  train_cmd->add_option("--data", train_args.data, "auction CSV")->required();
  train_cmd->add_option("--out", train_args.out, "output directory")->required();
  train_cmd->add_option("--config", train_args.config_path, "key=value config file");
  double tr_dropout = 0.05, tr_lr = 0.001, tr_clip = 15.0;
  long long tr_hidden = 128, tr_embed = 24, tr_rec = 3, tr_fc = 1, tr_epochs = 40,
            tr_batch = 256, tr_runs = 1, tr_workers = 1;
  std::uint64_t tr_seed = 1, tr_split_seed = 1;
  train_cmd->add_option("--hidden-units", tr_hidden);
  train_cmd->add_option("--embed-dim", tr_embed);
  train_cmd->add_option("--recurrent-layers", tr_rec);
  train_cmd->add_option("--fc-layers", tr_fc);
  train_cmd->add_option("--dropout", tr_dropout);
  train_cmd->add_option("--epochs", tr_epochs);
  train_cmd->add_option("--batch-size", tr_batch);
  train_cmd->add_option("--learning-rate", tr_lr);
  train_cmd->add_option("--clip", tr_clip);
  train_cmd->add_option("--seed", tr_seed);
  train_cmd->add_option("--split-seed", tr_split_seed);
  train_cmd->add_option("--runs", tr_runs);
  train_cmd->add_option("--workers", tr_workers);

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "score a checkpoint on a dataset");
  eval_cmd->add_option("--model", eval_args.model, "checkpoint")->required();
  eval_cmd->add_option("--data", eval_args.data, "auction CSV")->required();
  eval_cmd->add_option("--split", eval_args.split, "train|valid|test|all");
  eval_cmd->add_option("--split-seed", eval_args.split_seed);
  eval_cmd->add_option("--out", eval_args.out, "optional output directory");

  PredictArgs pred_args;
  auto* pred_cmd = app.add_subcommand("predict", "estimate prices for plates");
  pred_cmd->add_option("--model", pred_args.model, "checkpoint")->required();
  pred_cmd->add_option("--plate", pred_args.plates, "plate string (repeatable)");
  pred_cmd->add_option("--plates-file", pred_args.plates_file, "file, one plate per line");
  pred_cmd->add_option("--hedonic", pred_args.hedonic_path, "hedonic coefficient CSV");
  pred_cmd->add_option("--ensemble", pred_args.ensemble_path, "ensemble coefficient CSV");
  pred_cmd->add_option("--data", pred_args.data, "auction CSV with covariate rows");
  pred_cmd->add_option("--out", pred_args.out, "write predictions CSV here");

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "hyperparameter grid sweep");
  sweep_cmd->add_option("--data", sweep_args.data, "auction CSV")->required();
  sweep_cmd->add_option("--out", sweep_args.out, "output directory")->required();
  sweep_cmd->add_option("--grid", sweep_args.grid_path, "grid file with list values")
      ->required();
  long long sw_runs = 5, sw_workers = 1, sw_epochs = 40, sw_batch = 256;
  double sw_lr = 0.001, sw_clip = 15.0;
  std::uint64_t sw_seed = 1, sw_split_seed = 1;
  sweep_cmd->add_option("--runs", sw_runs);
  sweep_cmd->add_option("--workers", sw_workers);
  sweep_cmd->add_option("--epochs", sw_epochs);
  sweep_cmd->add_option("--batch-size", sw_batch);
  sweep_cmd->add_option("--learning-rate", sw_lr);
  sweep_cmd->add_option("--clip", sw_clip);
  sweep_cmd->add_option("--seed", sw_seed);
  sweep_cmd->add_option("--split-seed", sw_split_seed);

  BaselineArgs base_args;
  auto* base_cmd = app.add_subcommand("baseline", "fit a hedonic baseline");
  base_cmd->add_option("--data", base_args.data, "auction CSV")->required();
  base_cmd->add_option("--out", base_args.out, "output directory")->required();
  base_cmd->add_option("--preset", base_args.preset, "woo2008|ng2010");
  base_cmd->add_option("--split-seed", base_args.split_seed);

  EnsembleArgs ens_args;
  auto* ens_cmd = app.add_subcommand("ensemble", "fit a stacked combination");
  ens_cmd->add_option("--data", ens_args.data, "auction CSV")->required();
  ens_cmd->add_option("--model", ens_args.model, "RNN checkpoint")->required();
  ens_cmd->add_option("--baseline", ens_args.baseline, "hedonic coefficient CSV")
      ->required();
  ens_cmd->add_option("--out", ens_args.out, "output directory")->required();
  ens_cmd->add_option("--variant", ens_args.variant, "combined|combined_extra");
  ens_cmd->add_option("--split-seed", ens_args.split_seed);

  RetrainArgs retrain_args;
  auto* retrain_cmd = app.add_subcommand("retrain-sim", "walk-forward retraining study");
  retrain_cmd->add_option("--data", retrain_args.data, "auction CSV")->required();
  retrain_cmd->add_option("--out", retrain_args.out, "output directory")->required();
  retrain_cmd->add_option("--schedule", retrain_args.schedule,
                          "never|yearly|monthly|all");
  retrain_cmd->add_option("--kind", retrain_args.kind, "rnn|combined_extra");
  retrain_cmd->add_option("--repeats", retrain_args.repeats);
  retrain_cmd->add_option("--initial-years", retrain_args.initial_years);
  retrain_cmd->add_option("--horizon-years", retrain_args.horizon_years);
  retrain_cmd->add_option("--window", retrain_args.window,
                          "training window rows (0 = initial window size)");
  retrain_cmd->add_option("--config", retrain_args.config_path, "key=value config file");
  double rt_dropout = 0.05, rt_lr = 0.001, rt_clip = 15.0;
  long long rt_hidden = 128, rt_embed = 24, rt_rec = 3, rt_fc = 1, rt_epochs = 40,
            rt_batch = 256, rt_workers = 1;
  std::uint64_t rt_seed = 1;
  retrain_cmd->add_option("--hidden-units", rt_hidden);
  retrain_cmd->add_option("--embed-dim", rt_embed);
  retrain_cmd->add_option("--recurrent-layers", rt_rec);
  retrain_cmd->add_option("--fc-layers", rt_fc);
  retrain_cmd->add_option("--dropout", rt_dropout);
  retrain_cmd->add_option("--epochs", rt_epochs);
  retrain_cmd->add_option("--batch-size", rt_batch);
  retrain_cmd->add_option("--learning-rate", rt_lr);
  retrain_cmd->add_option("--clip", rt_clip);
  retrain_cmd->add_option("--seed", rt_seed);
  retrain_cmd->add_option("--workers", rt_workers);

  try {
    app.parse(argc, argv);

    if (gen_cmd->parsed()) return cmd_gen_data(gen);

    if (train_cmd->parsed()) {
      KeyValueConfig& c = train_args.resolved.config;
      c.set("hidden_units", "128");
      c.set("embed_dim", "24");
      c.set("recurrent_layers", "3");
      c.set("fc_layers", "1");
      c.set("dropout", "0.05");
      c.set("epochs", "40");
      c.set("batch_size", "256");
      c.set("learning_rate", "0.001");
      c.set("clip", "15");
      c.set("split_seed", "1");
      c.set("seed", "1");
      c.set("runs", "1");
      c.set("workers", "1");
      train_args.resolved.load_file(train_args.config_path,
                                    merge_keys({kModelKeys, kTrainKeys}));
      auto maybe = [&](const char* flag, const char* key, const std::string& v) {
        if (train_cmd->count(flag)) c.set(key, v);
      };
      maybe("--hidden-units", "hidden_units", std::to_string(tr_hidden));
      maybe("--embed-dim", "embed_dim", std::to_string(tr_embed));
      maybe("--recurrent-layers", "recurrent_layers", std::to_string(tr_rec));
      maybe("--fc-layers", "fc_layers", std::to_string(tr_fc));
      maybe("--dropout", "dropout", fmt(tr_dropout));
      maybe("--epochs", "epochs", std::to_string(tr_epochs));
      maybe("--batch-size", "batch_size", std::to_string(tr_batch));
      maybe("--learning-rate", "learning_rate", fmt(tr_lr));
      maybe("--clip", "clip", fmt(tr_clip));
      maybe("--seed", "seed", std::to_string(tr_seed));
      maybe("--split-seed", "split_seed", std::to_string(tr_split_seed));
      maybe("--runs", "runs", std::to_string(tr_runs));
      maybe("--workers", "workers", std::to_string(tr_workers));
      return cmd_train(train_args);
    }

    if (eval_cmd->parsed()) return cmd_evaluate(eval_args);
    if (pred_cmd->parsed()) return cmd_predict(pred_args);

    if (sweep_cmd->parsed()) {
      KeyValueConfig& c = sweep_args.resolved.config;
      c.set("epochs", std::to_string(sw_epochs));
      c.set("batch_size", std::to_string(sw_batch));
      c.set("learning_rate", fmt(sw_lr));
      c.set("clip", fmt(sw_clip));
      c.set("seed", std::to_string(sw_seed));
      c.set("split_seed", std::to_string(sw_split_seed));
      c.set("runs", std::to_string(sw_runs));
      c.set("workers", std::to_string(sw_workers));
      return cmd_sweep(sweep_args);
    }

    if (base_cmd->parsed()) return cmd_baseline(base_args);
    if (ens_cmd->parsed()) return cmd_ensemble(ens_args);

    if (retrain_cmd->parsed()) {
      KeyValueConfig& c = retrain_args.resolved.config;
      c.set("hidden_units", std::to_string(rt_hidden));
      c.set("embed_dim", std::to_string(rt_embed));
      c.set("recurrent_layers", std::to_string(rt_rec));
      c.set("fc_layers", std::to_string(rt_fc));
      c.set("dropout", fmt(rt_dropout));
      c.set("epochs", std::to_string(rt_epochs));
      c.set("batch_size", std::to_string(rt_batch));
      c.set("learning_rate", fmt(rt_lr));
      c.set("clip", fmt(rt_clip));
      c.set("seed", std::to_string(rt_seed));
      c.set("workers", std::to_string(rt_workers));
      retrain_args.resolved.load_file(retrain_args.config_path,
                                      merge_keys({kModelKeys, kTrainKeys}));
      return cmd_retrain_sim(retrain_args);
    }

    throw UsageError("no subcommand selected");
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
