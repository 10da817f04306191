#include "plateprice/ensemble.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "plateprice/hedonic.hpp"

namespace plateprice {

std::vector<std::string> extra_feature_names() {
  return {"auction_year",     "auction_month", "afternoon_session",
          "order_in_session", "has_prefix",    "digit_count",
          "log_stock_index",  "log_cpi"};
}

std::vector<double> extract_extra_features(const AuctionRecord& record) {
  validate_plate(record.plate);
  std::size_t prefix_len = 0;
  while (prefix_len < record.plate.size() && record.plate[prefix_len] >= 'A' &&
         record.plate[prefix_len] <= 'Z') {
    ++prefix_len;
  }
  if (!(record.stock_index > 0.0) || !(record.cpi > 0.0)) {
    throw DataError("plate " + record.plate + ": stock index and cpi must be positive");
  }
  return {static_cast<double>(record.auction_date.year),
          static_cast<double>(record.auction_date.month),
          record.afternoon_session ? 1.0 : 0.0,
          static_cast<double>(record.order_in_session),
          prefix_len > 0 ? 1.0 : 0.0,
          static_cast<double>(record.plate.size() - prefix_len),
          std::log(record.stock_index),
          std::log(record.cpi)};
}

std::string to_string(EnsembleVariant variant) {
  return variant == EnsembleVariant::Combined ? "combined" : "combined_extra";
}

EnsembleVariant ensemble_variant_from_string(const std::string& name) {
  if (name == "combined") return EnsembleVariant::Combined;
  if (name == "combined_extra") return EnsembleVariant::CombinedExtra;
  throw DataError("unknown ensemble variant '" + name +
                  "', want combined or combined_extra");
}

EnsembleModel fit_ensemble(EnsembleVariant variant,
                           const std::vector<double>& rnn_preds,
                           const std::vector<double>& hedonic_preds,
                           const std::vector<std::vector<double>>& extras,
                           const std::vector<double>& targets) {
  const std::size_t n = targets.size();
  if (rnn_preds.size() != n || hedonic_preds.size() != n || n == 0) {
    throw DataError("fit_ensemble: prediction/target length mismatch");
  }
  const bool with_extras = variant == EnsembleVariant::CombinedExtra;
  std::size_t n_extra = 0;
  if (with_extras) {
    if (extras.size() != n) {
      throw DataError("fit_ensemble: combined_extra needs one extras row per sample");
    }
    n_extra = extra_feature_names().size();
  }
  Matrix design(n, 3 + n_extra);
  for (std::size_t i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = rnn_preds[i];
    design(i, 2) = hedonic_preds[i];
    if (with_extras) {
      if (extras[i].size() != n_extra) {
        throw DataError("fit_ensemble: extras row " + std::to_string(i) +
                        " has " + std::to_string(extras[i].size()) +
                        " values, want " + std::to_string(n_extra));
      }
      for (std::size_t j = 0; j < n_extra; ++j) design(i, 3 + j) = extras[i][j];
    }
  }
  const OlsResult ols = ols_fit(design, targets);
  EnsembleModel model;
  model.variant = variant;
  model.intercept = ols.coef[0];
  model.rnn_weight = ols.coef[1];
  model.hedonic_weight = ols.coef[2];
  if (with_extras) {
    model.extra_weights.assign(ols.coef.begin() + 3, ols.coef.end());
  }
  return model;
}

double predict_ensemble(const EnsembleModel& model, double rnn_pred,
                        double hedonic_pred, const std::vector<double>& extras) {
  double y = model.intercept + model.rnn_weight * rnn_pred +
             model.hedonic_weight * hedonic_pred;
  if (model.variant == EnsembleVariant::CombinedExtra) {
    if (extras.size() != model.extra_weights.size()) {
      throw DataError("predict_ensemble: combined_extra needs " +
                      std::to_string(model.extra_weights.size()) +
                      " extra features, got " + std::to_string(extras.size()));
    }
    for (std::size_t j = 0; j < extras.size(); ++j) {
      y += model.extra_weights[j] * extras[j];
    }
  }
  return y;
}

void save_ensemble_csv(const EnsembleModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "term,value\n";
  out << "variant," << to_string(model.variant) << "\n";
  char row[128];
  auto emit = [&](const std::string& term, double v) {
    std::snprintf(row, sizeof(row), "%s,%.17g", term.c_str(), v);
    out << row << "\n";
  };
  emit("intercept", model.intercept);
  emit("rnn_weight", model.rnn_weight);
  emit("hedonic_weight", model.hedonic_weight);
  const auto names = extra_feature_names();
  for (std::size_t j = 0; j < model.extra_weights.size(); ++j) {
    emit(names[j], model.extra_weights[j]);
  }
}

EnsembleModel load_ensemble_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("term,value", 0) != 0) {
    throw DataError("'" + path + "' is not an ensemble coefficient file");
  }
  if (!std::getline(in, line) || line.rfind("variant,", 0) != 0) {
    throw DataError("'" + path + "' is missing the variant row");
  }
  EnsembleModel model;
  model.variant = ensemble_variant_from_string(line.substr(8));
  auto next_value = [&](const std::string& term) {
    if (!std::getline(in, line)) {
      throw DataError("'" + path + "' is truncated at term " + term);
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.substr(0, comma) != term) {
      throw DataError("'" + path + "' has unexpected row '" + line + "', want " + term);
    }
    return std::stod(line.substr(comma + 1));
  };
  model.intercept = next_value("intercept");
  model.rnn_weight = next_value("rnn_weight");
  model.hedonic_weight = next_value("hedonic_weight");
  if (model.variant == EnsembleVariant::CombinedExtra) {
    for (const auto& name : extra_feature_names()) {
      model.extra_weights.push_back(next_value(name));
    }
  }
  return model;
}

}  // namespace plateprice
