#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "sae/trader_state.hpp"

using namespace sae;

namespace {

// Brute force over all consecutive-block partitions with nondecreasing block
// means; returns the least-squares monotone fit. Usable up to n ~ 12.
std::vector<double> pav_oracle(const std::vector<double>& y) {
  const std::size_t n = y.size();
  std::vector<double> best;
  double best_sse = 1e300;
  const unsigned masks = 1u << (n - 1);
  for (unsigned mask = 0; mask < masks; ++mask) {
    std::vector<double> fit(n);
    double sse = 0.0;
    bool monotone = true;
    double prev_mean = -1e300;
    std::size_t start = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool boundary = i + 1 == n || (mask >> i) & 1u;
      if (!boundary) continue;
      double sum = 0.0;
      for (std::size_t k = start; k <= i; ++k) sum += y[k];
      const double mean = sum / static_cast<double>(i - start + 1);
      if (mean < prev_mean - 1e-12) {
        monotone = false;
        break;
      }
      prev_mean = mean;
      for (std::size_t k = start; k <= i; ++k) {
        fit[k] = mean;
        sse += (y[k] - mean) * (y[k] - mean);
      }
      start = i + 1;
    }
    if (monotone && sse < best_sse) {
      best_sse = sse;
      best = fit;
    }
  }
  return best;
}

CalibratedModel zero_model() {
  CalibratedModel m;
  m.coefficients.assign(6, 0.0);
  return m;
}

}  // namespace

TEST_CASE("extract_features on an empty history zeroes the pacing stats") {
  AccountState acct;
  acct.equity = 10000.0;
  acct.peak_equity = 10000.0;
  const auto f = extract_features({}, acct, 1700000000000, 60.0);
  CHECK(f.loss_streak == 0.0);
  CHECK(f.orders_in_window == 0.0);
  CHECK(f.leverage_after_loss == 1.0);
  CHECK(f.recent_pnl_sum == 0.0);
}

TEST_CASE("drawdown feature follows the definition") {
  AccountState acct;
  acct.equity = 90.0;
  acct.peak_equity = 100.0;
  const auto f = extract_features({}, acct, 0, 60.0);
  CHECK(f.drawdown == doctest::Approx(0.10).epsilon(1e-15));
}

TEST_CASE("five-trade fixture produces the hand-computed feature vector") {
  // Trades: pnl (+5, -3, -2, +4, -1), requested leverage (2, 3, 4, 2, 5).
  std::vector<TradeRecord> trades = {
      {1000, 5.0, 2.0, 60.0},  {2000, -3.0, 3.0, 60.0}, {3000, -2.0, 4.0, 60.0},
      {4000, 4.0, 2.0, 60.0},  {5000, -1.0, 5.0, 60.0},
  };
  AccountState acct;
  acct.equity = 10000.0;
  acct.peak_equity = 10000.0;
  acct.recent_order_times = {99000, 60000, 35000};
  acct.recent_pnl = {5.0, -3.0, -2.0, 4.0, -1.0};
  const auto f = extract_features(trades, acct, 100000, 60.0);

  CHECK(f.loss_streak == 1.0);  // only the last trade lost
  // Post-loss trades follow indices 1 and 2: leverages 4 and 2, mean 3.
  // Overall mean leverage = 16/5 = 3.2; ratio = 3 / 3.2 = 0.9375.
  CHECK(f.leverage_after_loss == doctest::Approx(0.9375).epsilon(1e-12));
  // Window (40000, 100000]: orders at 99000 and 60000 count, 35000 is out.
  CHECK(f.orders_in_window == 2.0);
  CHECK(f.recent_pnl_sum == doctest::Approx(3.0));
}

TEST_CASE("predict_raw is the logistic of the linear score") {
  TraderFeatures f;  // all-zero features except the neutral ratio
  f.leverage_after_loss = 0.0;
  CHECK(predict_raw(f, zero_model()) == doctest::Approx(0.5));

  auto m = zero_model();
  m.intercept = 10.0;
  CHECK(predict_raw(f, m) >= 0.9999);

  // Frozen oracle: coefficients (0.8,-0.2,0.05,0.3,0.4,-0.001), intercept
  // -1.1, features (0.15,2.5,3,2,1.3,-120) -> logistic(-0.09).
  CalibratedModel fm;
  fm.coefficients = {0.8, -0.2, 0.05, 0.3, 0.4, -0.001};
  fm.intercept = -1.1;
  TraderFeatures ff;
  ff.drawdown = 0.15;
  ff.margin_ratio = 2.5;
  ff.orders_in_window = 3.0;
  ff.loss_streak = 2.0;
  ff.leverage_after_loss = 1.3;
  ff.recent_pnl_sum = -120.0;
  CHECK(predict_raw(ff, fm) ==
        doctest::Approx(0.47751517520819988).epsilon(1e-14));

  CalibratedModel bad;
  bad.coefficients = {1.0};
  CHECK_THROWS_AS(predict_raw(ff, bad), ConfigError);
}

TEST_CASE("pav_fit reproduces known poolings") {
  CHECK(pav_fit({0.0, 0.0, 1.0, 1.0}) == std::vector<double>{0.0, 0.0, 1.0, 1.0});

  const auto fit = pav_fit({0.0, 1.0, 0.0, 1.0});
  CHECK(fit[0] == doctest::Approx(0.0));
  CHECK(fit[1] == doctest::Approx(0.5));
  CHECK(fit[2] == doctest::Approx(0.5));
  CHECK(fit[3] == doctest::Approx(1.0));

  CHECK(pav_fit({1.0}) == std::vector<double>{1.0});
  CHECK_THROWS_AS(pav_fit({}), DataError);
}

TEST_CASE("pav_fit matches the exhaustive monotone-fit oracle for n <= 6") {
  std::mt19937_64 rng(29);
  auto unit = [&rng]() {
    return (static_cast<double>(rng() >> 11) + 0.5) / 9007199254740992.0;
  };
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 5;
    std::vector<double> y(n);
    for (auto& v : y) v = unit();
    const auto fit = pav_fit(y);
    const auto oracle = pav_oracle(y);
    REQUIRE(oracle.size() == n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(fit[i] == doctest::Approx(oracle[i]).epsilon(1e-10));
    }
  }
}

TEST_CASE("fit_calibration produces a nondecreasing step map") {
  const auto map =
      fit_calibration({{0.2, 0.0}, {0.4, 1.0}, {0.6, 0.0}, {0.8, 1.0}});
  CHECK(map(0.1) == doctest::Approx(0.0));
  CHECK(map(0.5) == doctest::Approx(0.5));
  CHECK(map(0.9) == doctest::Approx(1.0));

  const auto single = fit_calibration({{0.5, 1.0}});
  CHECK(single(0.0) == doctest::Approx(1.0));
  CHECK(single(1.0) == doctest::Approx(1.0));

  CHECK_THROWS_AS(fit_calibration({}), DataError);
}

TEST_CASE("calibration is monotone on random inputs") {
  std::mt19937_64 rng(31);
  auto unit = [&rng]() {
    return (static_cast<double>(rng() >> 11) + 0.5) / 9007199254740992.0;
  };
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::pair<double, double>> pairs;
    const std::size_t n = 2 + rng() % 20;
    for (std::size_t i = 0; i < n; ++i) {
      pairs.emplace_back(unit(), rng() % 2 ? 1.0 : 0.0);
    }
    const auto map = fit_calibration(pairs);
    double prev = -1.0;
    for (double x = 0.0; x <= 1.0; x += 0.01) {
      const double v = map(x);
      CHECK(v >= prev - 1e-12);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      prev = v;
    }
  }
}

TEST_CASE("risk_score composes model and calibration and stays in [0,1]") {
  auto m = zero_model();
  TraderFeatures f;
  f.leverage_after_loss = 0.0;
  CHECK(risk_score(f, m) == doctest::Approx(0.5));  // identity calibration

  m.calibration = CalibrationMap({{0.0, 0.1}, {0.5, 0.9}});
  CHECK(risk_score(f, m) == doctest::Approx(0.9));

  m.intercept = 100.0;  // saturated raw score
  CHECK(risk_score(f, m) == doctest::Approx(0.9));
  CHECK(risk_score(f, m) <= 1.0);
}

TEST_CASE("model validation enforces threshold ordering") {
  auto m = zero_model();
  m.tau_limit = 0.8;
  m.tau_block = 0.7;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  CHECK_THROWS_AS(CalibrationMap({{0.5, 0.9}, {0.6, 0.1}}), ConfigError);
}
