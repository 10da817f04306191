// Python bindings for the main operations: synthetic data generation,
// training, checkpoint inference, baselines and the statistics helpers.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>

#include "plateprice/ensemble.hpp"
#include "plateprice/experiment.hpp"
#include "plateprice/hedonic.hpp"
#include "plateprice/plate_data.hpp"
#include "plateprice/retrain_sim.hpp"
#include "plateprice/rnn_model.hpp"
#include "plateprice/synth.hpp"
#include "plateprice/trainer.hpp"

namespace py = pybind11;
using namespace plateprice;

namespace {

std::vector<int> py_tokenize(const std::string& plate) {
  const TokenSeq seq = tokenize_plate(plate);
  return {seq.ids.begin(), seq.ids.end()};
}

std::string py_detokenize(const std::vector<int>& ids) {
  if (ids.size() != static_cast<std::size_t>(kSeqLen)) {
    throw DataError("detokenize expects exactly 6 token ids");
  }
  TokenSeq seq;
  for (int t = 0; t < kSeqLen; ++t) {
    if (ids[t] < 0 || ids[t] >= kVocabSize) {
      throw DataError("token id " + std::to_string(ids[t]) + " out of range");
    }
    seq.ids[t] = static_cast<std::uint8_t>(ids[t]);
  }
  return detokenize(seq);
}

py::dict py_gen_data(const std::string& csv_path, const std::string& oracle_path,
                     std::size_t n, std::uint64_t seed, int years,
                     int start_year, double drift, double noise_std) {
  SynthConfig config = drift != 0.0 ? SynthConfig::with_drift(drift) : SynthConfig{};
  config.n_records = n;
  config.seed = seed;
  config.years = years;
  config.start_year = start_year;
  if (noise_std > 0.0) config.noise_std = noise_std;
  const SynthOutput output = generate(config);
  write_auction_csv(output.records, csv_path);
  if (!oracle_path.empty()) write_oracle_csv(output, oracle_path);
  std::size_t unsold = 0;
  for (const auto& r : output.records) unsold += r.sold ? 0 : 1;
  py::dict out;
  out["n"] = output.records.size();
  out["unsold"] = unsold;
  out["r2_ceiling"] = output.r2_ceiling;
  out["det_variance"] = output.det_variance;
  return out;
}

py::dict metrics_dict(const MetricPair& m) {
  py::dict d;
  d["rmse"] = m.rmse;
  d["r2"] = m.r2;
  return d;
}

py::dict py_train(const std::string& data_csv, const std::string& ckpt_path,
                  int hidden_units, int embed_dim, int recurrent_layers,
                  int fc_layers, double dropout, int epochs,
                  std::size_t batch_size, double learning_rate, double clip,
                  std::uint64_t seed, std::uint64_t split_seed) {
  ModelConfig config;
  config.hidden_units = hidden_units;
  config.embed_dim = embed_dim;
  config.recurrent_layers = recurrent_layers;
  config.fc_layers = fc_layers;
  config.dropout_rate = dropout;
  TrainOptions options;
  options.epochs = epochs;
  options.batch_size = batch_size;
  options.learning_rate = learning_rate;
  options.clip_threshold = clip;

  const auto split = split_dataset(preprocess(load_auction_csv(data_csv)), split_seed);
  const TrainedModel model = train(config, split, seed, options);
  if (!ckpt_path.empty()) save_params(model.params, model.bn_state, ckpt_path);

  py::dict out;
  out["config_id"] = config.id();
  out["best_epoch"] = model.result.best_epoch;
  out["best_valid_rmse"] = model.result.best_valid_rmse;
  out["train"] = metrics_dict(model.result.train);
  out["valid"] = metrics_dict(model.result.valid);
  out["test"] = metrics_dict(model.result.test);
  out["valid_rmse_trace"] = model.result.valid_rmse_trace;
  return out;
}

py::dict py_hedonic_fit(const std::string& data_csv, const std::string& preset,
                        std::uint64_t split_seed, const std::string& out_csv) {
  const auto split = split_dataset(preprocess(load_auction_csv(data_csv)), split_seed);
  std::vector<std::string> plates;
  for (const auto& r : split.train.records) plates.push_back(r.plate);
  const HedonicModel model =
      fit_hedonic(plates, split.train.targets, hedonic_preset_from_string(preset));
  if (!out_csv.empty()) save_hedonic_csv(model, out_csv);
  auto metrics_for = [&](const DataPart& part) {
    std::vector<double> preds;
    for (const auto& r : part.records) preds.push_back(predict(model, r.plate));
    return evaluate(preds, part.targets);
  };
  py::dict out;
  out["train"] = metrics_dict(metrics_for(split.train));
  out["valid"] = metrics_dict(metrics_for(split.valid));
  out["test"] = metrics_dict(metrics_for(split.test));
  out["coef"] = model.coef;
  out["feature_names"] = hedonic_feature_names(model.preset);
  return out;
}

py::tuple py_evaluate(const std::vector<double>& predictions,
                      const std::vector<double>& targets) {
  const MetricPair m = evaluate(predictions, targets);
  return py::make_tuple(m.rmse, m.r2);
}

py::dict py_wilcoxon(const std::vector<double>& a, const std::vector<double>& b) {
  const WilcoxonResult w = wilcoxon_signed_rank(a, b);
  py::dict out;
  out["z"] = w.z;
  out["p"] = w.p;
  out["w_plus"] = w.w_plus;
  out["n"] = w.n_used;
  return out;
}

/// Loaded checkpoint with batch inference.
class PyModel {
 public:
  explicit PyModel(const std::string& path) : ckpt_(load_params(path)) {}

  std::vector<double> predict_log(const std::vector<std::string>& plates) const {
    std::vector<TokenSeq> tokens;
    tokens.reserve(plates.size());
    for (const auto& p : plates) tokens.push_back(tokenize_plate(p));
    return predict_all(ckpt_.params, ckpt_.bn_state, tokens);
  }

  std::vector<double> predict_hkd(const std::vector<std::string>& plates) const {
    auto out = predict_log(plates);
    for (double& v : out) v = std::exp(v);
    return out;
  }

  std::string config_id() const { return ckpt_.params.config.id(); }

 private:
  Checkpoint ckpt_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "character-sequence price regression for auctioned vehicle plates";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def("tokenize", &py_tokenize, py::arg("plate"),
        "Encode a plate as 6 token ids (PAD=0).");
  m.def("detokenize", &py_detokenize, py::arg("ids"),
        "Recover the plate string from 6 token ids.");
  m.def("gen_data", &py_gen_data, py::arg("csv_path"), py::arg("oracle_path") = "",
        py::arg("n") = 50000, py::arg("seed") = 20260101, py::arg("years") = 13,
        py::arg("start_year") = 1997, py::arg("drift") = 0.0,
        py::arg("noise_std") = -1.0,
        "Write a synthetic auction CSV (and oracle sidecar).");
  m.def("train", &py_train, py::arg("data_csv"), py::arg("ckpt_path") = "",
        py::arg("hidden_units") = 128, py::arg("embed_dim") = 24,
        py::arg("recurrent_layers") = 3, py::arg("fc_layers") = 1,
        py::arg("dropout") = 0.05, py::arg("epochs") = 40,
        py::arg("batch_size") = 256, py::arg("learning_rate") = 0.001,
        py::arg("clip") = 15.0, py::arg("seed") = 1, py::arg("split_seed") = 1,
        "Train one session and return its metrics.");
  m.def("hedonic_fit", &py_hedonic_fit, py::arg("data_csv"),
        py::arg("preset") = "woo2008", py::arg("split_seed") = 1,
        py::arg("out_csv") = "", "Fit a hedonic baseline preset.");
  m.def("extract_features",
        [](const std::string& plate, const std::string& preset) {
          return extract_features(plate, hedonic_preset_from_string(preset));
        },
        py::arg("plate"), py::arg("preset") = "woo2008");
  m.def("evaluate_metrics", &py_evaluate, py::arg("predictions"), py::arg("targets"),
        "Returns (rmse, r2).");
  m.def("wilcoxon", &py_wilcoxon, py::arg("a"), py::arg("b"),
        "Paired two-sided Wilcoxon signed-rank test.");
  m.def("plate_score",
        [](const std::string& plate, double years_elapsed) {
          const auto w = ScoreWeights::defaults();
          return plate_score(plate, w, ScoreWeights::zero(), years_elapsed);
        },
        py::arg("plate"), py::arg("years_elapsed") = 0.0,
        "Deterministic synthetic-oracle score of a plate.");

  py::class_<PyModel>(m, "Model")
      .def(py::init<const std::string&>(), py::arg("checkpoint_path"))
      .def("predict_log", &PyModel::predict_log, py::arg("plates"),
           "Log-price estimates.")
      .def("predict_hkd", &PyModel::predict_hkd, py::arg("plates"),
           "Price estimates in HKD (exponentiated log estimates).")
      .def_property_readonly("config_id", &PyModel::config_id);
}
