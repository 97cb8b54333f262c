#include "sae/trader_state.hpp"

#include <algorithm>
#include <cmath>

namespace sae {

CalibrationMap::CalibrationMap(std::vector<std::pair<double, double>> knots)
    : knots_(std::move(knots)) {
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    if (knots_[i].first < knots_[i - 1].first) {
      throw ConfigError("calibration knots must be sorted by score");
    }
    if (knots_[i].second < knots_[i - 1].second) {
      throw ConfigError("calibration map must be nondecreasing");
    }
  }
}

double CalibrationMap::operator()(double raw) const {
  if (knots_.empty()) return raw;
  if (raw < knots_.front().first) return knots_.front().second;
  auto it = std::upper_bound(
      knots_.begin(), knots_.end(), raw,
      [](double v, const std::pair<double, double>& k) { return v < k.first; });
  return std::prev(it)->second;
}

void CalibratedModel::validate() const {
  if (coefficients.size() != TraderFeatures{}.as_vector().size()) {
    throw ConfigError("trader model coefficient dimension mismatch");
  }
  if (!(tau_limit >= 0.0 && tau_limit < tau_block && tau_block <= 1.0)) {
    throw ConfigError("thresholds must satisfy 0 <= tau_limit < tau_block <= 1");
  }
}

TraderFeatures extract_features(const std::vector<TradeRecord>& trades,
                                const AccountState& account, TimestampMs now_ms,
                                double rate_window_sec, std::size_t max_trades) {
  TraderFeatures f;
  f.drawdown = account.drawdown();
  f.margin_ratio = std::clamp(account.margin_ratio, 0.0, 10.0);

  const auto window_start =
      now_ms - static_cast<TimestampMs>(rate_window_sec * 1000.0);
  for (TimestampMs t : account.recent_order_times) {
    if (t > window_start && t <= now_ms) f.orders_in_window += 1.0;
  }

  const std::size_t begin =
      trades.size() > max_trades ? trades.size() - max_trades : 0;
  double lev_sum = 0.0;
  double post_loss_lev_sum = 0.0;
  std::size_t n = 0, post_loss_n = 0;
  for (std::size_t i = begin; i < trades.size(); ++i) {
    lev_sum += trades[i].requested_leverage;
    ++n;
    if (i > begin && trades[i - 1].pnl < 0.0) {
      post_loss_lev_sum += trades[i].requested_leverage;
      ++post_loss_n;
    }
  }
  for (std::size_t i = trades.size(); i > begin; --i) {
    if (trades[i - 1].pnl < 0.0) {
      f.loss_streak += 1.0;
    } else {
      break;
    }
  }
  if (post_loss_n > 0 && lev_sum > 0.0) {
    f.leverage_after_loss =
        (post_loss_lev_sum / static_cast<double>(post_loss_n)) /
        (lev_sum / static_cast<double>(n));
  }
  for (double pnl : account.recent_pnl) f.recent_pnl_sum += pnl;
  return f;
}

double predict_raw(const TraderFeatures& f, const CalibratedModel& model) {
  const auto x = f.as_vector();
  if (x.size() != model.coefficients.size()) {
    throw ConfigError("predict_raw: coefficient dimension mismatch");
  }
  double score = model.intercept;
  for (std::size_t i = 0; i < x.size(); ++i) score += model.coefficients[i] * x[i];
  return 1.0 / (1.0 + std::exp(-score));
}

std::vector<double> pav_fit(const std::vector<double>& y) {
  if (y.empty()) throw DataError("pav_fit: empty input");
  struct Block {
    double sum;
    double weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  blocks.reserve(y.size());
  for (double v : y) {
    blocks.push_back({v, 1.0, 1});
    while (blocks.size() >= 2) {
      auto& a = blocks[blocks.size() - 2];
      auto& b = blocks.back();
      if (a.sum / a.weight <= b.sum / b.weight) break;
      a.sum += b.sum;
      a.weight += b.weight;
      a.count += b.count;
      blocks.pop_back();
    }
  }
  std::vector<double> fitted;
  fitted.reserve(y.size());
  for (const auto& b : blocks) {
    const double mean = b.sum / b.weight;
    for (std::size_t i = 0; i < b.count; ++i) fitted.push_back(mean);
  }
  return fitted;
}

CalibrationMap fit_calibration(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.empty()) throw DataError("fit_calibration: empty input");
  std::vector<std::pair<double, double>> sorted = pairs;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<double> labels(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) labels[i] = sorted[i].second;
  const auto fitted = pav_fit(labels);
  // Equal scores can straddle a block boundary; keep the last (largest)
  // fitted value per distinct score so the map stays a function.
  std::vector<std::pair<double, double>> knots;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (!knots.empty() && knots.back().first == sorted[i].first) {
      knots.back().second = fitted[i];
    } else {
      knots.emplace_back(sorted[i].first, fitted[i]);
    }
  }
  return CalibrationMap(std::move(knots));
}

double risk_score(const TraderFeatures& f, const CalibratedModel& model) {
  const double p = model.calibration(predict_raw(f, model));
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace sae
