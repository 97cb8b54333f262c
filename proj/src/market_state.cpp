#include "sae/market_state.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sae {

void FeatureConfig::validate() const {
  if (w_sigma < 1) throw ConfigError("w_sigma must be >= 1");
  if (ema_period < 1) throw ConfigError("ema_period must be >= 1");
  if (!(eps > 0.0)) throw ConfigError("eps must be > 0");
  if (!(tau_sigma_1 < tau_sigma_2)) {
    throw ConfigError("tau_sigma_1 must be < tau_sigma_2");
  }
  if (vol_norm_window < 1) throw ConfigError("vol_norm_window must be >= 1");
}

std::vector<double> log_returns(const std::vector<double>& prices) {
  if (prices.size() < 2) throw DataError("log_returns: need at least 2 prices");
  std::vector<double> out(prices.size() - 1);
  for (std::size_t i = 0; i + 1 < prices.size(); ++i) {
    if (!(prices[i] > 0.0) || !(prices[i + 1] > 0.0)) {
      throw DataError("log_returns: non-positive price");
    }
    out[i] = std::log(prices[i + 1]) - std::log(prices[i]);
  }
  return out;
}

std::vector<double> realized_vol(const std::vector<double>& returns, int w_sigma) {
  if (returns.empty()) throw DataError("realized_vol: empty series");
  if (w_sigma < 1) throw ConfigError("realized_vol: w_sigma must be >= 1");
  std::vector<double> out(returns.size());
  for (std::size_t t = 0; t < returns.size(); ++t) {
    std::size_t lo = t + 1 >= static_cast<std::size_t>(w_sigma)
                         ? t + 1 - static_cast<std::size_t>(w_sigma)
                         : 0;
    double ss = 0.0;
    for (std::size_t i = lo; i <= t; ++i) ss += returns[i] * returns[i];
    out[t] = std::sqrt(ss);
  }
  return out;
}

std::vector<double> liquidity_proxy(const std::vector<double>& volume,
                                    const std::vector<double>& sigma,
                                    const FeatureConfig& cfg) {
  cfg.validate();
  if (volume.size() != sigma.size()) {
    throw DataError("liquidity_proxy: length mismatch");
  }
  std::vector<double> out(volume.size());
  const double alpha = 2.0 / (cfg.ema_period + 1.0);
  double ema = 0.0;
  for (std::size_t t = 0; t < volume.size(); ++t) {
    ema = t == 0 ? volume[0] : ema + alpha * (volume[t] - ema);
    out[t] = ema / (sigma[t] + cfg.eps);
  }
  return out;
}

FundingAlignment align_funding(
    const std::vector<TimestampMs>& bar_open_times,
    const std::vector<std::pair<TimestampMs, double>>& events) {
  for (std::size_t i = 1; i < bar_open_times.size(); ++i) {
    if (bar_open_times[i] <= bar_open_times[i - 1]) {
      throw DataError("align_funding: bar open times must be strictly increasing");
    }
  }
  FundingAlignment out;
  out.per_bar.assign(bar_open_times.size(), 0.0);
  for (const auto& [time, rate] : events) {
    auto it = std::lower_bound(bar_open_times.begin(), bar_open_times.end(), time);
    if (it == bar_open_times.end()) {
      ++out.dropped;
      continue;
    }
    out.per_bar[static_cast<std::size_t>(it - bar_open_times.begin())] += rate;
  }
  return out;
}

Regime classify_regime(double sigma, double funding, double lambda,
                       double sigma_norm, const FeatureConfig& cfg) {
  const double norm = std::max(sigma_norm, cfg.eps);
  const double ratio = sigma / norm;
  if (ratio >= cfg.tau_sigma_2 || std::fabs(funding) >= cfg.tau_f) {
    return Regime::kExtreme;
  }
  if (ratio >= cfg.tau_sigma_1 || lambda <= cfg.tau_lambda) {
    return Regime::kVolatile;
  }
  return Regime::kCalm;
}

namespace {

double window_median(const std::vector<double>& values, std::size_t t, int window,
                     std::vector<double>& scratch) {
  std::size_t lo = t + 1 >= static_cast<std::size_t>(window)
                       ? t + 1 - static_cast<std::size_t>(window)
                       : 0;
  scratch.assign(values.begin() + static_cast<std::ptrdiff_t>(lo),
                 values.begin() + static_cast<std::ptrdiff_t>(t + 1));
  const std::size_t n = scratch.size();
  auto mid = scratch.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(scratch.begin(), mid, scratch.end());
  double med = *mid;
  if (n % 2 == 0) {
    auto lo_it = scratch.begin() + static_cast<std::ptrdiff_t>(n / 2 - 1);
    std::nth_element(scratch.begin(), lo_it, mid);
    med = 0.5 * (*lo_it + med);
  }
  return med;
}

}  // namespace

std::vector<double> rolling_median(const std::vector<double>& values, int window,
                                   double floor_value) {
  if (window < 1) throw ConfigError("rolling_median: window must be >= 1");
  std::vector<double> out(values.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(values.size());
#pragma omp parallel
  {
    std::vector<double> scratch;
#pragma omp for schedule(static)
    for (std::ptrdiff_t t = 0; t < n; ++t) {
      out[static_cast<std::size_t>(t)] = std::max(
          window_median(values, static_cast<std::size_t>(t), window, scratch),
          floor_value);
    }
  }
  return out;
}

std::vector<double> rolling_median_serial(const std::vector<double>& values,
                                          int window, double floor_value) {
  if (window < 1) throw ConfigError("rolling_median: window must be >= 1");
  std::vector<double> out(values.size());
  std::vector<double> scratch;
  for (std::size_t t = 0; t < values.size(); ++t) {
    out[t] = std::max(window_median(values, t, window, scratch), floor_value);
  }
  return out;
}

MarketState FeatureTable::at(std::size_t i) const {
  MarketState m;
  m.sigma = sigma[i];
  m.sigma_ratio = sigma_ratio[i];
  m.funding = funding[i];
  m.liquidity = lambda[i];
  m.regime = regime[i];
  m.close_price = close[i];
  m.volume = volume[i];
  return m;
}

FeatureTable build_features(
    const std::vector<TimestampMs>& open_times, const std::vector<double>& close,
    const std::vector<double>& volume,
    const std::vector<std::pair<TimestampMs, double>>& funding_events,
    const FeatureConfig& cfg) {
  cfg.validate();
  if (open_times.size() != close.size() || close.size() != volume.size()) {
    throw DataError("build_features: column length mismatch");
  }
  if (close.empty()) throw DataError("build_features: empty series");

  FeatureTable t;
  t.open_time = open_times;
  t.close = close;
  t.volume = volume;
  const std::size_t n = close.size();

  t.ret.assign(n, 0.0);
  t.sigma.assign(n, 0.0);
  if (n >= 2) {
    auto rts = log_returns(close);
    auto sig = realized_vol(rts, cfg.w_sigma);
    for (std::size_t i = 1; i < n; ++i) {
      t.ret[i] = rts[i - 1];
      t.sigma[i] = sig[i - 1];
    }
  }
  t.sigma_norm = rolling_median(t.sigma, cfg.vol_norm_window, cfg.eps);
  t.sigma_ratio.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) t.sigma_ratio[i] = t.sigma[i] / t.sigma_norm[i];

  t.funding = align_funding(open_times, funding_events).per_bar;
  t.lambda = liquidity_proxy(volume, t.sigma, cfg);

  t.regime.assign(n, Regime::kCalm);
  for (std::size_t i = 0; i < n; ++i) {
    t.regime[i] = classify_regime(t.sigma[i], t.funding[i], t.lambda[i],
                                  t.sigma_norm[i], cfg);
  }
  return t;
}

std::string feature_table_csv(const FeatureTable& t) {
  std::ostringstream os;
  os << "open_time,close,volume,ret,sigma,sigma_norm,sigma_ratio,funding,lambda,regime\n";
  os.precision(17);
  for (std::size_t i = 0; i < t.size(); ++i) {
    os << t.open_time[i] << ',' << t.close[i] << ',' << t.volume[i] << ','
       << t.ret[i] << ',' << t.sigma[i] << ',' << t.sigma_norm[i] << ','
       << t.sigma_ratio[i] << ',' << t.funding[i] << ',' << t.lambda[i] << ','
       << to_string(t.regime[i]) << '\n';
  }
  return os.str();
}

}  // namespace sae
