#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "plateprice/hedonic.hpp"

using namespace plateprice;

namespace {

std::map<std::string, double> named_features(const std::string& plate,
                                             HedonicPreset preset) {
  const auto names = hedonic_feature_names(preset);
  const auto values = extract_features(plate, preset);
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < names.size(); ++i) out[names[i]] = values[i];
  return out;
}

std::string random_valid_plate(SeededRng& rng) {
  static const char* letters = "ABCDEFGHJKLMNPRSTUVWXYZ";
  std::string plate;
  if (rng.below(2) == 0) {
    plate.push_back(letters[rng.below(23)]);
    plate.push_back(letters[rng.below(23)]);
  }
  const auto k = 1 + rng.below(4);
  for (std::uint64_t i = 0; i < k; ++i) {
    plate.push_back(static_cast<char>('0' + rng.below(10)));
  }
  return plate;
}

// random plates plus guaranteed hits for the rare features, so every design
// column carries signal and the coefficients are identifiable
std::vector<std::string> covering_plates(std::size_t n, SeededRng& rng) {
  std::vector<std::string> plates = {
      "168",  "2168", "AB168", "13",   "WX13", "2134", "888",  "8888",
      "XY77", "1234", "AB4321", "9876", "2345", "7",    "3",    "9",
      "1122", "AB3344", "1212", "XY2323", "1221", "AB5665", "55", "21",
  };
  while (plates.size() < n) plates.push_back(random_valid_plate(rng));
  return plates;
}

}  // namespace

TEST_CASE("feature definitions on the canonical plates") {
  const auto solid = named_features("888", HedonicPreset::Woo2008);
  CHECK(solid.at("count_of_8s") == 3);
  CHECK(solid.at("all_digits_identical") == 1);
  CHECK(solid.at("digit_count") == 3);
  CHECK(solid.at("leading_repeat_run_length") == 3);
  CHECK(solid.at("has_prefix") == 0);
  CHECK(solid.at("is_special_plate") == 1);
  CHECK(solid.at("intercept") == 1);

  const auto spoiled = named_features("5888", HedonicPreset::Woo2008);
  CHECK(spoiled.at("count_of_8s") == 3);
  CHECK(spoiled.at("all_digits_identical") == 0);
  CHECK(spoiled.at("leading_repeat_run_length") == 1);

  const auto seq = named_features("AB1234", HedonicPreset::Woo2008);
  CHECK(seq.at("is_sequential_ascending") == 1);
  CHECK(seq.at("is_sequential_descending") == 0);
  CHECK(seq.at("has_prefix") == 1);
  CHECK(seq.at("digit_count") == 4);

  const auto single = named_features("7", HedonicPreset::Woo2008);
  CHECK(single.at("single_digit_value") == 7);
  CHECK(single.at("is_special_plate") == 1);

  const auto aabb = named_features("XY1188", HedonicPreset::Woo2008);
  CHECK(aabb.at("pattern_aabb") == 1);
  CHECK(aabb.at("pattern_abab") == 0);
  const auto abab = named_features("1212", HedonicPreset::Woo2008);
  CHECK(abab.at("pattern_abab") == 1);
  const auto abba = named_features("1221", HedonicPreset::Woo2008);
  CHECK(abba.at("pattern_abba") == 1);

  const auto lucky = named_features("168", HedonicPreset::Woo2008);
  CHECK(lucky.at("contains_168") == 1);
  const auto unlucky = named_features("WX13", HedonicPreset::Woo2008);
  CHECK(unlucky.at("contains_13") == 1);
}

TEST_CASE("presets differ only by the pattern flags") {
  CHECK(hedonic_feature_names(HedonicPreset::Woo2008).size() == 16);
  CHECK(hedonic_feature_names(HedonicPreset::Ng2010).size() == 13);
  CHECK(extract_features("888", HedonicPreset::Ng2010).size() == 13);
}

TEST_CASE("extract_features is a pure function of the plate") {
  SeededRng rng(3);
  for (int i = 0; i < 300; ++i) {
    const std::string plate = random_valid_plate(rng);
    CHECK(extract_features(plate, HedonicPreset::Woo2008) ==
          extract_features(plate, HedonicPreset::Woo2008));
  }
  CHECK_THROWS_AS(extract_features("Q88", HedonicPreset::Woo2008), DataError);
}

TEST_CASE("ols recovers planted coefficients on a noiseless design") {
  SeededRng rng(5);
  const std::size_t n = 400;
  const auto names = hedonic_feature_names(HedonicPreset::Woo2008);
  std::vector<double> planted;
  for (std::size_t j = 0; j < names.size(); ++j) planted.push_back(rng.uniform(-1.0, 1.0));

  std::vector<std::string> plates;
  std::vector<double> targets;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string plate = random_valid_plate(rng);
    const auto f = extract_features(plate, HedonicPreset::Woo2008);
    double y = 0;
    for (std::size_t j = 0; j < f.size(); ++j) y += planted[j] * f[j];
    plates.push_back(plate);
    targets.push_back(y);
  }
  const HedonicModel model = fit_hedonic(plates, targets, HedonicPreset::Woo2008);
  for (std::size_t j = 0; j < planted.size(); ++j) {
    CHECK(std::fabs(model.coef[j] - planted[j]) <= 1e-6);
  }
  CHECK(model.train_fit.rmse <= 1e-7);
}

TEST_CASE("intercept-only design returns the target mean") {
  Matrix design(50, 1, 1.0);
  std::vector<double> targets;
  SeededRng rng(6);
  double mean = 0.0;
  for (int i = 0; i < 50; ++i) {
    targets.push_back(rng.uniform(0.0, 4.0));
    mean += targets.back();
  }
  mean /= 50.0;
  const OlsResult fit = ols_fit(design, targets);
  CHECK(fit.coef[0] == doctest::Approx(mean).epsilon(1e-12));
  CHECK(!fit.used_ridge);
}

TEST_CASE("duplicated columns get named and ridged") {
  SeededRng rng(7);
  Matrix design(40, 3);
  std::vector<double> targets;
  for (std::size_t i = 0; i < 40; ++i) {
    const double x = rng.uniform(-1.0, 1.0);
    design(i, 0) = 1.0;
    design(i, 1) = x;
    design(i, 2) = x;  // exact duplicate
    targets.push_back(2.0 + 3.0 * x);
  }
  const OlsResult fit = ols_fit(design, targets);
  CHECK(fit.used_ridge);
  REQUIRE(fit.dependent_columns.size() == 1);
  CHECK(fit.dependent_columns[0] == 2);  // the later duplicate is the dependent one
  // the duplicated pair still predicts correctly in combination
  const double slope = fit.coef[1] + fit.coef[2];
  CHECK(slope == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("ols rejects designs with more columns than rows") {
  Matrix design(3, 5);
  CHECK_THROWS_AS(ols_fit(design, {1.0, 2.0, 3.0}), DataError);
}

TEST_CASE("residuals are orthogonal to the design columns") {
  SeededRng rng(8);
  std::vector<std::string> plates;
  std::vector<double> targets;
  for (int i = 0; i < 300; ++i) {
    plates.push_back(random_valid_plate(rng));
    targets.push_back(rng.uniform(4.0, 12.0));
  }
  const HedonicModel model = fit_hedonic(plates, targets, HedonicPreset::Ng2010);
  const auto names = hedonic_feature_names(HedonicPreset::Ng2010);
  std::vector<double> dot(names.size(), 0.0);
  for (std::size_t i = 0; i < plates.size(); ++i) {
    const double resid = targets[i] - predict(model, plates[i]);
    const auto f = extract_features(plates[i], HedonicPreset::Ng2010);
    for (std::size_t j = 0; j < f.size(); ++j) dot[j] += resid * f[j];
  }
  for (double d : dot) CHECK(std::fabs(d) <= 1e-8 * plates.size());
}

TEST_CASE("shifting all targets moves only the intercept") {
  SeededRng rng(9);
  std::vector<std::string> plates;
  std::vector<double> targets;
  for (int i = 0; i < 250; ++i) {
    plates.push_back(random_valid_plate(rng));
    targets.push_back(rng.uniform(4.0, 12.0));
  }
  const HedonicModel base = fit_hedonic(plates, targets, HedonicPreset::Woo2008);
  std::vector<double> shifted = targets;
  for (double& t : shifted) t += 3.25;
  const HedonicModel moved = fit_hedonic(plates, shifted, HedonicPreset::Woo2008);
  const std::size_t last = base.coef.size() - 1;  // intercept slot
  for (std::size_t j = 0; j < last; ++j) {
    CHECK(std::fabs(moved.coef[j] - base.coef[j]) <= 1e-8);
  }
  CHECK(moved.coef[last] == doctest::Approx(base.coef[last] + 3.25).epsilon(1e-10));
}

TEST_CASE("prediction is linear and zero under zero coefficients") {
  HedonicModel zero;
  zero.preset = HedonicPreset::Woo2008;
  zero.coef.assign(hedonic_feature_names(HedonicPreset::Woo2008).size(), 0.0);
  CHECK(predict(zero, "888") == 0.0);
  CHECK(predict(zero, "XY128") == 0.0);
}

TEST_CASE("hedonic csv round-trips") {
  SeededRng rng(10);
  std::vector<std::string> plates;
  std::vector<double> targets;
  for (int i = 0; i < 120; ++i) {
    plates.push_back(random_valid_plate(rng));
    targets.push_back(rng.uniform(4.0, 12.0));
  }
  const HedonicModel model = fit_hedonic(plates, targets, HedonicPreset::Woo2008);
  const std::string path =
      (std::filesystem::temp_directory_path() / "hedonic_rt.csv").string();
  save_hedonic_csv(model, path);
  const HedonicModel loaded = load_hedonic_csv(path);
  CHECK(loaded.preset == model.preset);
  REQUIRE(loaded.coef.size() == model.coef.size());
  for (std::size_t j = 0; j < model.coef.size(); ++j) {
    CHECK(loaded.coef[j] == model.coef[j]);  // %.17g round-trips exactly
  }
  CHECK_THROWS_AS(load_hedonic_csv("/nonexistent/h.csv"), DataError);
}
