#pragma once

#include <string>
#include <vector>

#include "plateprice/plate_data.hpp"

namespace plateprice {

/// Covariates beyond the characters on a plate, in fixed order:
/// auction_year, auction_month, afternoon_session, order_in_session,
/// has_prefix, digit_count, log_stock_index, log_cpi. Year and month enter
/// as plain linear terms.
std::vector<std::string> extra_feature_names();
std::vector<double> extract_extra_features(const AuctionRecord& record);

enum class EnsembleVariant { Combined, CombinedExtra };

std::string to_string(EnsembleVariant variant);
EnsembleVariant ensemble_variant_from_string(const std::string& name);

/// Stacked linear combination of the network and hedonic predictions; the
/// CombinedExtra variant adds the extra covariates.
struct EnsembleModel {
  EnsembleVariant variant = EnsembleVariant::Combined;
  double intercept = 0.0;
  double rnn_weight = 0.0;
  double hedonic_weight = 0.0;
  std::vector<double> extra_weights;  // empty for the Combined variant
};

/// Ordinary least squares over [1, rnn, hedonic, extras...]. Fit on
/// training-split predictions only. `extras` is ignored by the Combined
/// variant and required (one row per sample) by CombinedExtra.
EnsembleModel fit_ensemble(EnsembleVariant variant,
                           const std::vector<double>& rnn_preds,
                           const std::vector<double>& hedonic_preds,
                           const std::vector<std::vector<double>>& extras,
                           const std::vector<double>& targets);

double predict_ensemble(const EnsembleModel& model, double rnn_pred,
                        double hedonic_pred,
                        const std::vector<double>& extras = {});

/// (term,value) CSV round-trip.
void save_ensemble_csv(const EnsembleModel& model, const std::string& path);
EnsembleModel load_ensemble_csv(const std::string& path);

}  // namespace plateprice
