#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "sae/common.hpp"
#include "sae/contract.hpp"

namespace sae {

struct FeatureConfig {
  int w_sigma{60};            // realized-vol window, bars
  int ema_period{20};         // liquidity EMA period, bars
  double eps{1e-9};
  double tau_sigma_1{1.0};
  double tau_sigma_2{2.0};
  double tau_f{0.01};
  double tau_lambda{0.0};     // 0 disables the illiquidity trigger
  int vol_norm_window{480};   // rolling-median normalizer window, bars

  void validate() const;
};

// r_t = log p_t - log p_{t-1}; output length = input length - 1.
std::vector<double> log_returns(const std::vector<double>& prices);

// sigma_t = sqrt(sum of r_i^2 over trailing w_sigma returns); shorter
// prefixes use whatever is available (warm-up convention).
std::vector<double> realized_vol(const std::vector<double>& returns, int w_sigma);

// lambda_t = EMA(volume)_t / (sigma_t + eps); EMA seeded by the first
// observation with alpha = 2/(period+1).
std::vector<double> liquidity_proxy(const std::vector<double>& volume,
                                    const std::vector<double>& sigma,
                                    const FeatureConfig& cfg);

// Each funding event lands on the first bar whose open time >= event time
// (inclusive). Events mapped to the same bar sum. Events after the last bar
// open are dropped; the count of dropped events is returned.
struct FundingAlignment {
  std::vector<double> per_bar;
  std::size_t dropped{0};
};
FundingAlignment align_funding(const std::vector<TimestampMs>& bar_open_times,
                               const std::vector<std::pair<TimestampMs, double>>& events);

Regime classify_regime(double sigma, double funding, double lambda,
                       double sigma_norm, const FeatureConfig& cfg);

// Rolling median of the trailing `window` values (inclusive), floored at
// `floor_value`. Used as the self-calibrating volatility normalizer.
std::vector<double> rolling_median(const std::vector<double>& values, int window,
                                   double floor_value);
// Serial reference implementation; kept for tests and the kernel benchmark.
std::vector<double> rolling_median_serial(const std::vector<double>& values,
                                          int window, double floor_value);

// Per-bar feature table for a replay stream. Row i describes bar i.
struct FeatureTable {
  std::vector<TimestampMs> open_time;
  std::vector<double> close;
  std::vector<double> volume;
  std::vector<double> ret;        // ret[0] = 0 by convention
  std::vector<double> sigma;
  std::vector<double> sigma_norm;
  std::vector<double> sigma_ratio;
  std::vector<double> funding;    // aligned, 0 on bars without an event
  std::vector<double> lambda;
  std::vector<Regime> regime;

  std::size_t size() const { return close.size(); }
  MarketState at(std::size_t i) const;
};

FeatureTable build_features(const std::vector<TimestampMs>& open_times,
                            const std::vector<double>& close,
                            const std::vector<double>& volume,
                            const std::vector<std::pair<TimestampMs, double>>& funding_events,
                            const FeatureConfig& cfg);

// Columnar debug dump (CSV with header).
std::string feature_table_csv(const FeatureTable& t);

}  // namespace sae
