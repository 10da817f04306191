#include "plateprice/hedonic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <Eigen/Dense>

#include "plateprice/plate_data.hpp"

namespace plateprice {

std::string to_string(HedonicPreset preset) {
  return preset == HedonicPreset::Woo2008 ? "woo2008" : "ng2010";
}

HedonicPreset hedonic_preset_from_string(const std::string& name) {
  if (name == "woo2008") return HedonicPreset::Woo2008;
  if (name == "ng2010") return HedonicPreset::Ng2010;
  throw DataError("unknown hedonic preset '" + name + "', want woo2008 or ng2010");
}

std::vector<std::string> hedonic_feature_names(HedonicPreset preset) {
  std::vector<std::string> names = {
      "digit_count",
      "has_prefix",
      "count_of_8s",
      "count_of_4s",
      "contains_168",
      "contains_13",
      "all_digits_identical",
      "leading_repeat_run_length",
      "is_sequential_ascending",
      "is_sequential_descending",
      "is_special_plate",
      "single_digit_value",
  };
  if (preset == HedonicPreset::Woo2008) {
    names.insert(names.end(), {"pattern_aabb", "pattern_abab", "pattern_abba"});
  }
  names.push_back("intercept");
  return names;
}

std::vector<double> extract_features(const std::string& plate,
                                     HedonicPreset preset) {
  validate_plate(plate);
  std::size_t prefix_len = 0;
  while (prefix_len < plate.size() && plate[prefix_len] >= 'A' && plate[prefix_len] <= 'Z') {
    ++prefix_len;
  }
  const std::string digits = plate.substr(prefix_len);
  const auto k = digits.size();

  const double digit_count = static_cast<double>(k);
  const double has_prefix = prefix_len > 0 ? 1.0 : 0.0;
  double count8 = 0.0, count4 = 0.0;
  for (char c : digits) {
    if (c == '8') count8 += 1.0;
    if (c == '4') count4 += 1.0;
  }
  const double has168 = digits.find("168") != std::string::npos ? 1.0 : 0.0;
  const double has13 = digits.find("13") != std::string::npos ? 1.0 : 0.0;
  const bool all_same =
      k >= 2 && std::all_of(digits.begin(), digits.end(),
                            [&](char c) { return c == digits[0]; });
  std::size_t lead_run = 1;
  while (lead_run < k && digits[lead_run] == digits[0]) ++lead_run;
  bool asc = k >= 2, desc = k >= 2;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    if (digits[i + 1] != digits[i] + 1) asc = false;
    if (digits[i + 1] != digits[i] - 1) desc = false;
  }
  const bool special =
      (prefix_len == 0 && k == 1) || all_same || (prefix_len == 0 && k <= 2);
  const double single_value =
      (prefix_len == 0 && k == 1) ? static_cast<double>(digits[0] - '0') : 0.0;

  std::vector<double> f = {
      digit_count,
      has_prefix,
      count8,
      count4,
      has168,
      has13,
      all_same ? 1.0 : 0.0,
      static_cast<double>(lead_run),
      asc ? 1.0 : 0.0,
      desc ? 1.0 : 0.0,
      special ? 1.0 : 0.0,
      single_value,
  };
  if (preset == HedonicPreset::Woo2008) {
    const bool four = k == 4;
    const bool aabb = four && digits[0] == digits[1] && digits[2] == digits[3] &&
                      digits[0] != digits[2];
    const bool abab = four && digits[0] == digits[2] && digits[1] == digits[3] &&
                      digits[0] != digits[1];
    const bool abba = four && digits[0] == digits[3] && digits[1] == digits[2] &&
                      digits[0] != digits[1];
    f.push_back(aabb ? 1.0 : 0.0);
    f.push_back(abab ? 1.0 : 0.0);
    f.push_back(abba ? 1.0 : 0.0);
  }
  f.push_back(1.0);  // intercept
  return f;
}

OlsResult ols_fit(const Matrix& design, const std::vector<double>& targets) {
  const std::size_t n = design.rows, p = design.cols;
  if (n != targets.size()) throw DataError("ols_fit: design/target length mismatch");
  if (n < p) {
    throw DataError("ols_fit: " + std::to_string(n) + " rows cannot identify " +
                    std::to_string(p) + " coefficients");
  }
  OlsResult out;

  // Gram-Schmidt sweep to name near-dependent columns before solving.
  {
    std::vector<Eigen::VectorXd> basis;
    for (std::size_t j = 0; j < p; ++j) {
      Eigen::VectorXd col(n);
      for (std::size_t i = 0; i < n; ++i) col(i) = design(i, j);
      const double orig = col.norm();
      for (const auto& q : basis) col -= q.dot(col) * q;
      if (col.norm() <= 1e-10 * std::max(orig, 1.0)) {
        out.dependent_columns.push_back(j);
      } else {
        basis.push_back(col.normalized());
      }
    }
  }
  out.used_ridge = !out.dependent_columns.empty();

  const auto x = emap(design);
  Eigen::MatrixXd xtx = x.transpose() * x;
  Eigen::VectorXd xty(p);
  Eigen::Map<const Eigen::VectorXd> y(targets.data(), n);
  xty = x.transpose() * y;
  if (out.used_ridge) {
    for (std::size_t j = 0; j < p; ++j) xtx(j, j) += 1e-8;
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
  if (ldlt.info() != Eigen::Success) {
    throw NumericError("ols_fit: normal equations factorization failed");
  }
  Eigen::VectorXd beta = ldlt.solve(xty);
  if (!beta.allFinite()) {
    throw NumericError("ols_fit: non-finite solution");
  }
  out.coef.assign(beta.data(), beta.data() + p);
  return out;
}

HedonicModel fit_hedonic(const std::vector<std::string>& plates,
                         const std::vector<double>& targets,
                         HedonicPreset preset) {
  if (plates.size() != targets.size() || plates.empty()) {
    throw DataError("fit_hedonic: plates/targets length mismatch");
  }
  const std::size_t p = hedonic_feature_names(preset).size();
  Matrix design(plates.size(), p);
  for (std::size_t i = 0; i < plates.size(); ++i) {
    const auto f = extract_features(plates[i], preset);
    std::copy(f.begin(), f.end(), &design(i, 0));
  }
  HedonicModel model;
  model.preset = preset;
  model.coef = ols_fit(design, targets).coef;
  std::vector<double> fitted(plates.size());
  for (std::size_t i = 0; i < plates.size(); ++i) {
    double v = 0.0;
    for (std::size_t j = 0; j < p; ++j) v += design(i, j) * model.coef[j];
    fitted[i] = v;
  }
  model.train_fit = evaluate(fitted, targets);
  return model;
}

double predict(const HedonicModel& model, const std::string& plate) {
  const auto f = extract_features(plate, model.preset);
  if (f.size() != model.coef.size()) {
    throw DataError("hedonic predict: model/feature length mismatch");
  }
  double v = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) v += f[j] * model.coef[j];
  return v;
}

void save_hedonic_csv(const HedonicModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "feature_name,coefficient\n";
  out << "preset," << to_string(model.preset) << "\n";
  const auto names = hedonic_feature_names(model.preset);
  char row[128];
  for (std::size_t j = 0; j < names.size(); ++j) {
    std::snprintf(row, sizeof(row), "%s,%.17g", names[j].c_str(), model.coef[j]);
    out << row << "\n";
  }
}

HedonicModel load_hedonic_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("feature_name,coefficient", 0) != 0) {
    throw DataError("'" + path + "' is not a hedonic coefficient file");
  }
  if (!std::getline(in, line) || line.rfind("preset,", 0) != 0) {
    throw DataError("'" + path + "' is missing the preset row");
  }
  HedonicModel model;
  model.preset = hedonic_preset_from_string(line.substr(7));
  const auto names = hedonic_feature_names(model.preset);
  for (const auto& name : names) {
    if (!std::getline(in, line)) {
      throw DataError("'" + path + "' is truncated at feature " + name);
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.substr(0, comma) != name) {
      throw DataError("'" + path + "' has unexpected row '" + line + "', want " + name);
    }
    model.coef.push_back(std::stod(line.substr(comma + 1)));
  }
  return model;
}

}  // namespace plateprice
