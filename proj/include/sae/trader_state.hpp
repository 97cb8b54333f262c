#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "sae/common.hpp"
#include "sae/contract.hpp"

namespace sae {

// Closed-trade summary consumed by the escalation predictor.
struct TradeRecord {
  TimestampMs close_time_ms{0};
  double pnl{0.0};
  double requested_leverage{1.0};
  double holding_sec{0.0};
};

struct TraderFeatures {
  double drawdown{0.0};
  double margin_ratio{0.0};       // clamped to [0, 10] for model stability
  double orders_in_window{0.0};   // orders within the trailing rate window
  double loss_streak{0.0};        // consecutive losses at the window tail
  double leverage_after_loss{1.0};  // mean post-loss leverage / overall mean
  double recent_pnl_sum{0.0};

  std::vector<double> as_vector() const {
    return {drawdown,    margin_ratio,        orders_in_window,
            loss_streak, leverage_after_loss, recent_pnl_sum};
  }
};

// Monotone piecewise-constant map [0,1] -> [0,1]. Evaluation takes the
// fitted value of the largest knot at or below the input; inputs below the
// first knot take the first value. An empty map is the identity.
class CalibrationMap {
 public:
  CalibrationMap() = default;
  explicit CalibrationMap(std::vector<std::pair<double, double>> knots);

  double operator()(double raw) const;
  bool empty() const { return knots_.empty(); }
  const std::vector<std::pair<double, double>>& knots() const { return knots_; }

 private:
  std::vector<std::pair<double, double>> knots_;  // sorted by x, y nondecreasing
};

struct CalibratedModel {
  std::vector<double> coefficients;  // order matches TraderFeatures::as_vector
  double intercept{0.0};
  CalibrationMap calibration;
  double tau_limit{0.50};
  double tau_block{0.70};

  void validate() const;
};

TraderFeatures extract_features(const std::vector<TradeRecord>& trades,
                                const AccountState& account, TimestampMs now_ms,
                                double rate_window_sec, std::size_t max_trades = 200);

// Logistic of the linear score.
double predict_raw(const TraderFeatures& f, const CalibratedModel& model);

// Pool-adjacent-violators on a sequence assumed ordered by score. Returns
// the least-squares monotone (nondecreasing) fit.
std::vector<double> pav_fit(const std::vector<double>& y);

// Isotonic calibration from (raw score, binary label) pairs. Ties in score
// keep their input order (stable left-to-right pooling).
CalibrationMap fit_calibration(const std::vector<std::pair<double, double>>& pairs);

double risk_score(const TraderFeatures& f, const CalibratedModel& model);

}  // namespace sae
