#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sae/common.hpp"
#include "sae/contract.hpp"
#include "sae/simulator.hpp"

namespace sae {

// --- synthetic replay data -------------------------------------------------

struct RegimeSegment {
  int n_bars{0};
  double vol{0.001};          // per-bar log-return scale
  double drift{0.0};          // per-bar log drift
  double funding_rate{0.0};   // emitted every funding_period_bars; 0 = none
};

struct SynthScript {
  std::vector<RegimeSegment> segments;
  int funding_period_bars{32};  // 8h at 15m bars
  double start_price{30000.0};
  double base_volume{500.0};
  TimestampMs start_time_ms{1'700'000'000'000};
  TimestampMs interval_ms{900'000};  // 15m
};

SynthScript default_synth_script(int n_bars);

// Deterministic geometric random walk with scripted volatility regimes and
// periodic funding events.
std::vector<ReplayBar> synth_generate(std::uint64_t seed, const SynthScript& script);

// --- gap handling ------------------------------------------------------------

enum class GapPolicy { kFail, kForwardFill };

// Verifies bars sit on a fixed interval grid. Missing bars either raise
// DataError or are forward-filled with flat, zero-volume bars (flagged via
// the returned count).
std::size_t normalize_gaps(std::vector<ReplayBar>& bars, TimestampMs interval_ms,
                           GapPolicy policy);

// --- disk cache --------------------------------------------------------------

// One columnar text file per (endpoint, symbol, interval, window) plus a
// manifest carrying sha256 checksums, so reruns are reproducible and
// tampering fails loudly.
class BarCache {
 public:
  explicit BarCache(std::string dir);

  std::optional<std::vector<ReplayBar>> load_klines(const std::string& symbol,
                                                    const std::string& interval,
                                                    TimestampMs start_ms,
                                                    TimestampMs end_ms) const;
  void store_klines(const std::string& symbol, const std::string& interval,
                    TimestampMs start_ms, TimestampMs end_ms,
                    const std::vector<ReplayBar>& bars);

  std::optional<std::vector<std::pair<TimestampMs, double>>> load_funding(
      const std::string& symbol, TimestampMs start_ms, TimestampMs end_ms) const;
  void store_funding(const std::string& symbol, TimestampMs start_ms,
                     TimestampMs end_ms,
                     const std::vector<std::pair<TimestampMs, double>>& events);

  std::optional<ojson> load_exchange_info(const std::string& symbol) const;
  void store_exchange_info(const std::string& symbol, const ojson& info);

  const std::string& dir() const { return dir_; }
  ojson manifest() const;

 private:
  std::string entry_path(const std::string& key, const std::string& ext) const;
  void record(const std::string& key, const std::string& file,
              const std::string& checksum);
  std::optional<std::string> verified_content(const std::string& key) const;

  std::string dir_;
};

std::string klines_csv(const std::vector<ReplayBar>& bars);
std::vector<ReplayBar> parse_klines_csv(const std::string& text);

// --- REST client -------------------------------------------------------------

struct ClientConfig {
  std::string base_url{"https://fapi.binance.com"};
  std::string cache_dir{"cache"};
  int max_retries{5};
  double backoff_base_sec{0.5};
  int timeout_sec{20};
  GapPolicy gap_policy{GapPolicy::kFail};
};

using KlinesPageFetcher = std::function<std::vector<ReplayBar>(
    TimestampMs start_ms, TimestampMs end_ms, int limit)>;
using FundingPageFetcher =
    std::function<std::vector<std::pair<TimestampMs, double>>(
        TimestampMs start_ms, TimestampMs end_ms, int limit)>;

// Pages through [start, end] honoring the per-request row limit; duplicate
// open times across page boundaries collapse.
std::vector<ReplayBar> paginate_klines(TimestampMs start_ms, TimestampMs end_ms,
                                       TimestampMs interval_ms, int page_limit,
                                       const KlinesPageFetcher& fetch);
std::vector<std::pair<TimestampMs, double>> paginate_funding(
    TimestampMs start_ms, TimestampMs end_ms, int page_limit,
    const FundingPageFetcher& fetch);

class MarketDataClient {
 public:
  explicit MarketDataClient(ClientConfig cfg);

  // Cache-first: zero network traffic when the checksummed cache covers the
  // window exactly.
  std::vector<ReplayBar> fetch_klines(const std::string& symbol,
                                      const std::string& interval,
                                      TimestampMs start_ms, TimestampMs end_ms);
  std::vector<std::pair<TimestampMs, double>> fetch_funding(
      const std::string& symbol, TimestampMs start_ms, TimestampMs end_ms);
  ojson fetch_exchange_info(const std::string& symbol);

  BarCache& cache() { return cache_; }

 private:
  ojson http_get_json(const std::string& path_and_query);

  ClientConfig cfg_;
  BarCache cache_;
};

TimestampMs interval_to_ms(const std::string& interval);

// Rounds a base-asset quantity down to the contract quantity step.
double round_to_step(double quantity, double step);

// Folds funding events into the matching bars (first bar at or after the
// event time), dropping events beyond the last bar.
void merge_funding(std::vector<ReplayBar>& bars,
                   const std::vector<std::pair<TimestampMs, double>>& events);

}  // namespace sae
