#pragma once

#include <string>
#include <vector>

#include "plateprice/numerics.hpp"
#include "plateprice/trainer.hpp"

namespace plateprice {

/// Feature-set presets for the handcrafted baselines. Both are best-effort
/// reconstructions built only from the characters on a plate; woo2008 is the
/// full list, ng2010 leaves out the pairwise pattern flags.
enum class HedonicPreset { Woo2008, Ng2010 };

std::string to_string(HedonicPreset preset);
HedonicPreset hedonic_preset_from_string(const std::string& name);

std::vector<std::string> hedonic_feature_names(HedonicPreset preset);

/// Deterministic feature vector for a grammar-valid plate. The trailing
/// entry is the intercept. is_special_plate is a simplified rule set (single
/// digit, solid repeated digits, short prefix-free plates), not the full
/// statutory schedule.
std::vector<double> extract_features(const std::string& plate,
                                     HedonicPreset preset);

struct OlsResult {
  std::vector<double> coef;
  std::vector<std::size_t> dependent_columns;  // near-collinear, ridged
  bool used_ridge = false;
};

/// Least squares via normal equations. Collinear columns are detected by a
/// Gram-Schmidt sweep and handled with a ridge fallback (lambda = 1e-8)
/// rather than rejected. Requires rows >= columns.
OlsResult ols_fit(const Matrix& design, const std::vector<double>& targets);

struct HedonicModel {
  HedonicPreset preset = HedonicPreset::Woo2008;
  std::vector<double> coef;  // aligned with hedonic_feature_names(preset)
  MetricPair train_fit;
};

HedonicModel fit_hedonic(const std::vector<std::string>& plates,
                         const std::vector<double>& targets,
                         HedonicPreset preset);

double predict(const HedonicModel& model, const std::string& plate);

/// (feature_name,coefficient) CSV round-trip.
void save_hedonic_csv(const HedonicModel& model, const std::string& path);
HedonicModel load_hedonic_csv(const std::string& path);

}  // namespace plateprice
