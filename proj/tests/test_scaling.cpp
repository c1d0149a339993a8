#include <doctest.h>

#include <cmath>

#include "riskdec/error.hpp"
#include "riskdec/rng.hpp"
#include "riskdec/scaling.hpp"

using namespace riskdec;

namespace {

ScalingObservation obs_from(double approx, double eg, double us, double pg, double n_dec,
                            double n_probe, double risk, const std::string& enc = "e") {
  ScalingObservation o;
  o.encoder = enc;
  o.approx = approx;
  o.encoder_gen = eg;
  o.usability = us;
  o.probe_gen = pg;
  o.n_decomposition = n_dec;
  o.n_probe = n_probe;
  o.observed_risk = risk;
  return o;
}

// Components drawn to roughly mimic decomposed encoders.
std::vector<ScalingObservation> generate_noiseless(double alpha, double w, int n_encoders,
                                                   const std::vector<double>& n_values,
                                                   double n_dec, Rng& rng) {
  std::vector<ScalingObservation> obs;
  for (int e = 0; e < n_encoders; ++e) {
    const double approx = 0.005 + 0.02 * rng.unit();
    const double eg = 0.01 * rng.unit();
    const double us = 0.05 + 0.3 * rng.unit();
    const double pg = 0.05 + 0.25 * rng.unit();
    for (double n : n_values) {
      const double risk = predict_risk(approx, eg, us, pg, n_dec, n, alpha, w);
      auto o = obs_from(approx, eg, us, pg, n_dec, n, risk, "enc" + std::to_string(e));
      obs.push_back(o);
    }
  }
  return obs;
}

}  // namespace

TEST_CASE("prediction reduces to the component sum at the estimation count") {
  // (N/n)^alpha = 1, so alpha and w drop out.
  const double v = predict_risk(0.01, 0.02, 0.10, 0.15, 1000, 1000, 0.73, 0.31);
  CHECK(std::fabs(v - (0.01 + 0.02 + 0.10 + 0.15)) < 1e-12);

  SUBCASE("zero exponent makes the prediction constant in n") {
    const double a = predict_risk(0.01, 0.02, 0.10, 0.15, 1000, 10, 0.0, 0.4);
    const double b = predict_risk(0.01, 0.02, 0.10, 0.15, 1000, 900, 0.0, 0.4);
    CHECK(a == b);
  }
  SUBCASE("hand-evaluated closed form") {
    // 0.01 + 0.02 + 0.5*0.10 + (0.5*0.10 + 0.15) * 10^0.15
    const double expected = 0.08 + 0.20 * std::pow(10.0, 0.15);
    CHECK(predict_risk(0.01, 0.02, 0.10, 0.15, 1000, 100, 0.15, 0.5) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("counts below one are rejected") {
    CHECK_THROWS_AS(predict_risk(0, 0, 0, 0, 1000, 0, 0.1, 0.5), Error);
  }
}

TEST_CASE("prediction strictly decreases in n when the decaying part is positive") {
  Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const double alpha = 0.05 + rng.unit();
    const double w = rng.unit();
    const double us = 0.05 + rng.unit() * 0.2;
    const double pg = 0.05 + rng.unit() * 0.2;
    double prev = std::numeric_limits<double>::infinity();
    for (double n : {10.0, 30.0, 100.0, 300.0, 1000.0}) {
      const double v = predict_risk(0.01, 0.01, us, pg, 1000, n, alpha, w);
      CHECK(v < prev);
      prev = v;
    }
  }
}

TEST_CASE("noiseless generation is recovered by the fit") {
  Rng rng(42);
  auto obs = generate_noiseless(0.15, 0.51, 10, {50, 150, 400, 700, 1000}, 1000, rng);
  auto fit = fit_decomposition_law(obs);
  CHECK(std::fabs(fit.alpha - 0.15) < 0.02);
  CHECK(std::fabs(fit.w - 0.51) < 0.02);
  CHECK(fit.r2_train >= 0.999);

  SUBCASE("refit on own predictions is idempotent") {
    std::vector<ScalingObservation> echo = obs;
    for (auto& o : echo) o.observed_risk = predict_risk(o, fit.alpha, fit.w);
    auto fit2 = fit_decomposition_law(echo);
    CHECK(std::fabs(fit2.alpha - fit.alpha) < 1e-6);
    CHECK(std::fabs(fit2.w - fit.w) < 1e-6);
  }
}

TEST_CASE("two consistent constraints interpolate exactly") {
  auto a = obs_from(0.01, 0.02, 0.2, 0.1, 1000, 100, 0.0);
  auto b = obs_from(0.01, 0.02, 0.2, 0.1, 1000, 500, 0.0);
  a.observed_risk = predict_risk(a, 0.3, 0.4);
  b.observed_risk = predict_risk(b, 0.3, 0.4);
  auto fit = fit_decomposition_law(std::vector<ScalingObservation>{a, b});
  for (double r : fit.residuals) CHECK(std::fabs(r) < 1e-10);
}

TEST_CASE("mixture weight at the boundary is recovered") {
  Rng rng(43);
  auto obs = generate_noiseless(0.2, 1.0, 8, {50, 200, 600, 1000}, 1000, rng);
  auto fit = fit_decomposition_law(obs);
  CHECK(fit.w >= 0.98);
}

TEST_CASE("single probe count is unidentifiable") {
  auto a = obs_from(0.01, 0.02, 0.2, 0.1, 1000, 100, 0.3, "x");
  auto b = obs_from(0.02, 0.01, 0.1, 0.2, 1000, 100, 0.4, "y");
  CHECK_THROWS_WITH_AS(fit_decomposition_law(std::vector<ScalingObservation>{a, b}),
                       doctest::Contains("unidentifiable"), Error);
}

TEST_CASE("coefficient of determination") {
  std::vector<double> actual = {1.0, 2.0, 3.0};
  CHECK(r_squared(actual, actual) == 1.0);
  std::vector<double> mean_pred = {2.0, 2.0, 2.0};
  CHECK(r_squared(mean_pred, actual) == 0.0);
  // Worse than the mean goes negative.
  std::vector<double> bad = {3.5, 2.0, 0.5};
  CHECK(r_squared(bad, actual) < 0.0);
  std::vector<double> constant = {5.0, 5.0, 5.0};
  CHECK_THROWS_AS(r_squared(mean_pred, constant), Error);
}

TEST_CASE("standard per-group law recovers noiseless parameters") {
  std::vector<ScalingObservation> obs;
  const double k = 2.0, beta = 0.5;
  struct G {
    const char* name;
    double i, c, a;
  };
  for (const auto& g : {G{"resnet", 0.1, 3.0, 0.4}, G{"vit", 0.05, 5.0, 0.7}}) {
    int idx = 0;
    for (double n : {20.0, 50.0, 100.0, 400.0, 1000.0}) {
      ScalingObservation o;
      o.encoder = std::string(g.name) + std::to_string(idx++);
      o.group = g.name;
      o.n_probe = n;
      o.n_decomposition = 1000;
      o.probe_params = 100.0 + 50.0 * idx;
      o.observed_risk = g.i + g.c * std::pow(n, -g.a) + k * std::pow(*o.probe_params, -beta);
      obs.push_back(o);
    }
  }
  auto fit = fit_standard_law(obs);
  REQUIRE(fit.groups.size() == 2);
  CHECK(!fit.beta_indeterminate);
  CHECK(std::fabs(fit.beta - beta) < 1e-4);
  CHECK(std::fabs(fit.k - k) < 1e-3);
  for (const auto& g : fit.groups) {
    if (g.group == "resnet") {
      CHECK(std::fabs(g.intercept - 0.1) < 1e-4);
      CHECK(std::fabs(g.coef - 3.0) < 1e-3);
      CHECK(std::fabs(g.exponent - 0.4) < 1e-4);
    }
  }
  CHECK(fit.parameter_count == 2 * 3 + 2);

  SUBCASE("single group counts five parameters") {
    std::vector<ScalingObservation> one;
    for (const auto& o : obs) {
      if (o.group == std::optional<std::string>("resnet")) one.push_back(o);
    }
    auto f1 = fit_standard_law(one);
    CHECK(f1.parameter_count == 5);
  }
  SUBCASE("constant probe size flags beta as indeterminate") {
    for (auto& o : obs) o.probe_params = 128.0;
    auto f = fit_standard_law(obs);
    CHECK(f.beta_indeterminate);
    CHECK(f.k == 0.0);
  }
  SUBCASE("a group with too few probe counts errors by name") {
    std::vector<ScalingObservation> bad = obs;
    ScalingObservation extra = obs[0];
    extra.group = "tiny";
    bad.push_back(extra);
    CHECK_THROWS_WITH_AS(fit_standard_law(bad), doctest::Contains("tiny"), Error);
  }
}

TEST_CASE("holdout protocols") {
  Rng rng(44);
  auto obs = generate_noiseless(0.15, 0.51, 4, {50, 150, 400, 700, 1000}, 1000, rng);
  SUBCASE("iid holds out two settings per encoder") {
    auto spec = parse_holdout("iid");
    auto [train, test] = split_holdout(obs, spec);
    CHECK(train.size() == 4 * 3);
    CHECK(test.size() == 4 * 2);
    // Fitting on the kept settings predicts the held-out ones (noiseless).
    std::vector<ScalingObservation> train_obs, test_obs;
    for (auto i : train) train_obs.push_back(obs[i]);
    for (auto i : test) test_obs.push_back(obs[i]);
    auto fit = fit_decomposition_law(train_obs);
    std::vector<double> pred, actual;
    for (const auto& o : test_obs) {
      pred.push_back(predict_risk(o, fit.alpha, fit.w));
      actual.push_back(o.observed_risk);
    }
    CHECK(r_squared(pred, actual) >= 0.99);
  }
  SUBCASE("group holdout picks the named group") {
    for (std::size_t i = 0; i < obs.size(); ++i)
      obs[i].group = i % 2 == 0 ? "even" : "odd";
    auto [train, test] = split_holdout(obs, parse_holdout("group:odd"));
    CHECK(test.size() == obs.size() / 2);
    for (auto i : test) CHECK(obs[i].group == std::optional<std::string>("odd"));
  }
  SUBCASE("unknown spec is rejected") { CHECK_THROWS_AS(parse_holdout("half"), Error); }
}

TEST_CASE("observation JSON round trip") {
  auto o = obs_from(0.01, 0.02, 0.10, 0.15, 1000, 100, 0.31, "enc0");
  o.group = "vit";
  o.probe_params = 512.0;
  auto j = observation_to_json(o);
  auto parsed = observations_from_json(json::array({j}));
  REQUIRE(parsed.size() == 1);
  CHECK(parsed[0].encoder == "enc0");
  CHECK(parsed[0].usability == 0.10);
  CHECK(parsed[0].group == std::optional<std::string>("vit"));
  CHECK(parsed[0].probe_params == std::optional<double>(512.0));

  SUBCASE("n above N is flagged, not fatal") {
    j["n"] = 5000.0;
    auto flagged = observations_from_json(json::array({j}));
    CHECK(!flagged[0].flags.empty());
  }
}
