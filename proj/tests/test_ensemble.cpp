#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "plateprice/ensemble.hpp"
#include "plateprice/trainer.hpp"

using namespace plateprice;

namespace {

struct StackData {
  std::vector<double> rnn, hedonic, targets;
  std::vector<std::vector<double>> extras;
};

StackData random_stack(std::size_t n, std::uint64_t seed) {
  SeededRng rng(seed);
  StackData d;
  for (std::size_t i = 0; i < n; ++i) {
    const double rnn = rng.uniform(5.0, 10.0);
    const double hed = rnn + rng.normal();  // correlated but not collinear
    d.rnn.push_back(rnn);
    d.hedonic.push_back(hed);
    std::vector<double> x;
    for (std::size_t j = 0; j < extra_feature_names().size(); ++j) {
      x.push_back(rng.uniform(-1.0, 1.0));
    }
    d.extras.push_back(x);
    d.targets.push_back(rnn + 0.3 * rng.normal());
  }
  return d;
}

}  // namespace

TEST_CASE("extra features follow the fixed order") {
  AuctionRecord r;
  r.plate = "XY128";
  r.auction_date = {2003, 7, 19};
  r.afternoon_session = true;
  r.order_in_session = 42;
  r.stock_index = 12000.0;
  r.cpi = 80.0;
  const auto x = extract_extra_features(r);
  const auto names = extra_feature_names();
  REQUIRE(x.size() == names.size());
  CHECK(x[0] == 2003.0);
  CHECK(x[1] == 7.0);
  CHECK(x[2] == 1.0);
  CHECK(x[3] == 42.0);
  CHECK(x[4] == 1.0);                          // has_prefix
  CHECK(x[5] == 3.0);                          // digit_count
  CHECK(x[6] == doctest::Approx(std::log(12000.0)));
  CHECK(x[7] == doctest::Approx(std::log(80.0)));

  r.plate = "168";
  const auto y = extract_extra_features(r);
  CHECK(y[4] == 0.0);
  CHECK(y[5] == 3.0);
}

TEST_CASE("exact rnn targets give a pass-through combination") {
  StackData d = random_stack(300, 1);
  d.targets = d.rnn;
  const EnsembleModel model =
      fit_ensemble(EnsembleVariant::Combined, d.rnn, d.hedonic, {}, d.targets);
  CHECK(std::fabs(model.intercept) <= 1e-8);
  CHECK(std::fabs(model.rnn_weight - 1.0) <= 1e-8);
  CHECK(std::fabs(model.hedonic_weight) <= 1e-8);
  CHECK(model.extra_weights.empty());
}

TEST_CASE("planted stacking coefficients are recovered") {
  StackData d = random_stack(400, 2);
  for (std::size_t i = 0; i < d.targets.size(); ++i) {
    d.targets[i] = 2.0 + 0.5 * d.rnn[i] + 0.5 * d.hedonic[i];
  }
  const EnsembleModel model =
      fit_ensemble(EnsembleVariant::Combined, d.rnn, d.hedonic, {}, d.targets);
  CHECK(model.intercept == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(model.rnn_weight == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(model.hedonic_weight == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("combined variant ignores extras even when provided") {
  const StackData d = random_stack(200, 3);
  const EnsembleModel model =
      fit_ensemble(EnsembleVariant::Combined, d.rnn, d.hedonic, d.extras, d.targets);
  CHECK(model.variant == EnsembleVariant::Combined);
  CHECK(model.extra_weights.empty());
}

TEST_CASE("combined_extra uses and requires the covariates") {
  StackData d = random_stack(400, 4);
  for (std::size_t i = 0; i < d.targets.size(); ++i) {
    d.targets[i] += 0.7 * d.extras[i][2];
  }
  const EnsembleModel model = fit_ensemble(EnsembleVariant::CombinedExtra, d.rnn,
                                           d.hedonic, d.extras, d.targets);
  REQUIRE(model.extra_weights.size() == extra_feature_names().size());
  CHECK(model.extra_weights[2] == doctest::Approx(0.7).epsilon(1e-2));

  CHECK_THROWS_AS(
      fit_ensemble(EnsembleVariant::CombinedExtra, d.rnn, d.hedonic, {}, d.targets),
      DataError);
  CHECK_THROWS_AS(predict_ensemble(model, 1.0, 1.0), DataError);
  CHECK_NOTHROW(predict_ensemble(model, 1.0, 1.0, d.extras[0]));
}

TEST_CASE("prediction is the stated linear combination") {
  EnsembleModel model;
  model.variant = EnsembleVariant::Combined;
  model.intercept = 0.0;
  model.rnn_weight = 1.0;
  model.hedonic_weight = 0.0;
  CHECK(predict_ensemble(model, 7.25, 3.0) == 7.25);

  model.rnn_weight = 0.0;
  CHECK(predict_ensemble(model, 7.25, 3.0) == 0.0);

  model.intercept = 1.0;
  model.rnn_weight = 2.0;
  model.hedonic_weight = -0.5;
  CHECK(predict_ensemble(model, 3.0, 2.0) == doctest::Approx(1.0 + 6.0 - 1.0));
}

TEST_CASE("in-sample r2 of the stack dominates its constituents") {
  SeededRng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    StackData d = random_stack(300, 10 + trial);
    for (std::size_t i = 0; i < d.targets.size(); ++i) {
      d.targets[i] = 0.8 * d.rnn[i] + 0.1 * d.hedonic[i] + 0.4 * rng.normal();
    }
    const EnsembleModel model =
        fit_ensemble(EnsembleVariant::Combined, d.rnn, d.hedonic, {}, d.targets);
    std::vector<double> stacked(d.targets.size());
    for (std::size_t i = 0; i < d.targets.size(); ++i) {
      stacked[i] = predict_ensemble(model, d.rnn[i], d.hedonic[i]);
    }
    const double r2_stack = evaluate(stacked, d.targets).r2;
    const double r2_rnn = evaluate(d.rnn, d.targets).r2;
    const double r2_hed = evaluate(d.hedonic, d.targets).r2;
    CHECK(r2_stack >= std::max(r2_rnn, r2_hed) - 1e-9);
  }
}

TEST_CASE("fit then predict reproduces the ols fitted values") {
  StackData d = random_stack(250, 20);
  const EnsembleModel model = fit_ensemble(EnsembleVariant::CombinedExtra, d.rnn,
                                           d.hedonic, d.extras, d.targets);
  // refit on the model's own predictions: coefficients stay put within 1e-9
  std::vector<double> fitted(d.targets.size());
  for (std::size_t i = 0; i < d.targets.size(); ++i) {
    fitted[i] = predict_ensemble(model, d.rnn[i], d.hedonic[i], d.extras[i]);
  }
  const EnsembleModel refit = fit_ensemble(EnsembleVariant::CombinedExtra, d.rnn,
                                           d.hedonic, d.extras, fitted);
  CHECK(std::fabs(refit.intercept - model.intercept) <= 1e-9);
  CHECK(std::fabs(refit.rnn_weight - model.rnn_weight) <= 1e-9);
  CHECK(std::fabs(refit.hedonic_weight - model.hedonic_weight) <= 1e-9);
}

TEST_CASE("ensemble csv round-trips both variants") {
  const StackData d = random_stack(200, 30);
  for (const auto variant :
       {EnsembleVariant::Combined, EnsembleVariant::CombinedExtra}) {
    const EnsembleModel model =
        fit_ensemble(variant, d.rnn, d.hedonic, d.extras, d.targets);
    const std::string path =
        (std::filesystem::temp_directory_path() / "ens_rt.csv").string();
    save_ensemble_csv(model, path);
    const EnsembleModel loaded = load_ensemble_csv(path);
    CHECK(loaded.variant == model.variant);
    CHECK(loaded.intercept == model.intercept);
    CHECK(loaded.rnn_weight == model.rnn_weight);
    CHECK(loaded.hedonic_weight == model.hedonic_weight);
    CHECK(loaded.extra_weights == model.extra_weights);
  }
}
