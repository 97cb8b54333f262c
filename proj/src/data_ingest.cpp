#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "sae/data_ingest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "httplib.h"

#include "sae/market_state.hpp"
#include "sae/sha256.hpp"

namespace fs = std::filesystem;

namespace sae {

SynthScript default_synth_script(int n_bars) {
  SynthScript s;
  // Calm base with volatile stretches, a vol spike and a funding-extreme
  // stretch, repeated to fill the requested length.
  const int unit = 512;
  int remaining = n_bars;
  while (remaining > 0) {
    auto take = [&](int want) { return std::min(want, remaining); };
    int k = take(unit);
    s.segments.push_back({k, 0.0008, 0.0, 0.0001});
    remaining -= k;
    if (remaining <= 0) break;
    k = take(unit / 2);
    s.segments.push_back({k, 0.0025, -0.0002, 0.0001});
    remaining -= k;
    if (remaining <= 0) break;
    k = take(unit / 4);
    s.segments.push_back({k, 0.012, -0.001, 0.0001});
    remaining -= k;
    if (remaining <= 0) break;
    k = take(unit / 4);
    s.segments.push_back({k, 0.004, 0.0, 0.015});  // funding extreme
    remaining -= k;
  }
  return s;
}

namespace {

// Deterministic standard normal from raw 64-bit draws (no reliance on
// libstdc++ distribution internals).
double draw_normal(std::mt19937_64& rng) {
  const double u1 =
      (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  const double u2 =
      (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace

std::vector<ReplayBar> synth_generate(std::uint64_t seed, const SynthScript& script) {
  std::mt19937_64 rng(splitmix64(seed ^ 0x5e07a11dULL));
  std::vector<ReplayBar> bars;
  double price = script.start_price;
  TimestampMs t = script.start_time_ms;
  int bar_index = 0;
  for (const auto& seg : script.segments) {
    for (int i = 0; i < seg.n_bars; ++i, ++bar_index) {
      const double z = draw_normal(rng);
      const double r = seg.drift + seg.vol * z;
      ReplayBar b;
      b.open_time_ms = t;
      b.open = price;
      b.close = price * std::exp(r);
      const double lo = std::min(b.open, b.close);
      const double hi = std::max(b.open, b.close);
      const double wick = 0.25 * std::fabs(r) + 1e-6;
      b.low = lo * (1.0 - wick);
      b.high = hi * (1.0 + wick);
      b.volume = script.base_volume * (1.0 + 10.0 * std::fabs(r));
      if (seg.funding_rate != 0.0 && script.funding_period_bars > 0 &&
          bar_index % script.funding_period_bars == 0) {
        b.funding_rate = seg.funding_rate;
      }
      bars.push_back(b);
      price = b.close;
      t += script.interval_ms;
    }
  }
  validate_bars(bars);
  return bars;
}

std::size_t normalize_gaps(std::vector<ReplayBar>& bars, TimestampMs interval_ms,
                           GapPolicy policy) {
  if (bars.size() < 2) return 0;
  std::vector<ReplayBar> filled;
  filled.reserve(bars.size());
  std::size_t inserted = 0;
  filled.push_back(bars[0]);
  for (std::size_t i = 1; i < bars.size(); ++i) {
    const TimestampMs gap = bars[i].open_time_ms - bars[i - 1].open_time_ms;
    if (gap == interval_ms) {
      filled.push_back(bars[i]);
      continue;
    }
    if (gap <= 0 || gap % interval_ms != 0) {
      throw DataError("bars not aligned to interval at index " + std::to_string(i));
    }
    if (policy == GapPolicy::kFail) {
      throw DataError("gap of " + std::to_string(gap / interval_ms - 1) +
                      " bars before open_time " +
                      std::to_string(bars[i].open_time_ms));
    }
    const double px = bars[i - 1].close;
    for (TimestampMs ts = bars[i - 1].open_time_ms + interval_ms;
         ts < bars[i].open_time_ms; ts += interval_ms) {
      filled.push_back({ts, px, px, px, px, 0.0, 0.0});
      ++inserted;
    }
    filled.push_back(bars[i]);
  }
  bars = std::move(filled);
  return inserted;
}

// --- cache -------------------------------------------------------------------

BarCache::BarCache(std::string dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
}

std::string BarCache::entry_path(const std::string& key, const std::string& ext) const {
  return (fs::path(dir_) / (key + ext)).string();
}

ojson BarCache::manifest() const {
  const auto path = fs::path(dir_) / "manifest.json";
  if (!fs::exists(path)) return ojson::object();
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (ss.str().empty()) return ojson::object();
  return ojson::parse(ss.str());
}

void BarCache::record(const std::string& key, const std::string& file,
                      const std::string& checksum) {
  ojson m = manifest();
  m[key] = ojson{{"file", file},
                 {"sha256", checksum},
                 {"fetched_at_ms",
                  std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::system_clock::now().time_since_epoch())
                      .count()}};
  std::ofstream out(fs::path(dir_) / "manifest.json");
  out << m.dump(2) << "\n";
}

std::optional<std::string> BarCache::verified_content(const std::string& key) const {
  const ojson m = manifest();
  if (!m.contains(key)) return std::nullopt;
  const std::string file = m.at(key).at("file").get<std::string>();
  const std::string expected = m.at(key).at("sha256").get<std::string>();
  std::ifstream in(fs::path(dir_) / file, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string content = ss.str();
  if (sha256_hex(content) != expected) {
    throw DataError("cache checksum mismatch for " + file);
  }
  return content;
}

std::string klines_csv(const std::vector<ReplayBar>& bars) {
  std::ostringstream os;
  os.precision(17);
  os << "open_time_ms,open,high,low,close,volume,funding_rate\n";
  for (const auto& b : bars) {
    os << b.open_time_ms << ',' << b.open << ',' << b.high << ',' << b.low << ','
       << b.close << ',' << b.volume << ',' << b.funding_rate << '\n';
  }
  return os.str();
}

std::vector<ReplayBar> parse_klines_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("klines csv: empty");
  std::vector<ReplayBar> bars;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    ReplayBar b;
    std::getline(row, cell, ',');
    b.open_time_ms = std::stoll(cell);
    double* fields[6] = {&b.open, &b.high, &b.low, &b.close, &b.volume,
                         &b.funding_rate};
    for (int i = 0; i < 6; ++i) {
      if (!std::getline(row, cell, ',')) throw DataError("klines csv: short row");
      *fields[i] = std::stod(cell);
    }
    bars.push_back(b);
  }
  return bars;
}

namespace {

std::string window_key(const std::string& endpoint, const std::string& symbol,
                       const std::string& interval, TimestampMs start,
                       TimestampMs end) {
  std::ostringstream os;
  os << endpoint << '_' << symbol;
  if (!interval.empty()) os << '_' << interval;
  os << '_' << start << '_' << end;
  return os.str();
}

}  // namespace

std::optional<std::vector<ReplayBar>> BarCache::load_klines(
    const std::string& symbol, const std::string& interval, TimestampMs start_ms,
    TimestampMs end_ms) const {
  const auto key = window_key("klines", symbol, interval, start_ms, end_ms);
  auto content = verified_content(key);
  if (!content) return std::nullopt;
  return parse_klines_csv(*content);
}

void BarCache::store_klines(const std::string& symbol, const std::string& interval,
                            TimestampMs start_ms, TimestampMs end_ms,
                            const std::vector<ReplayBar>& bars) {
  const auto key = window_key("klines", symbol, interval, start_ms, end_ms);
  const std::string content = klines_csv(bars);
  const std::string file = key + ".csv";
  std::ofstream out(fs::path(dir_) / file, std::ios::binary);
  out << content;
  out.close();
  record(key, file, sha256_hex(content));
}

std::optional<std::vector<std::pair<TimestampMs, double>>> BarCache::load_funding(
    const std::string& symbol, TimestampMs start_ms, TimestampMs end_ms) const {
  const auto key = window_key("funding", symbol, "", start_ms, end_ms);
  auto content = verified_content(key);
  if (!content) return std::nullopt;
  std::istringstream in(*content);
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::pair<TimestampMs, double>> events;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string a, b;
    std::getline(row, a, ',');
    std::getline(row, b, ',');
    events.emplace_back(std::stoll(a), std::stod(b));
  }
  return events;
}

void BarCache::store_funding(
    const std::string& symbol, TimestampMs start_ms, TimestampMs end_ms,
    const std::vector<std::pair<TimestampMs, double>>& events) {
  const auto key = window_key("funding", symbol, "", start_ms, end_ms);
  std::ostringstream os;
  os.precision(17);
  os << "funding_time_ms,funding_rate\n";
  for (const auto& [t, r] : events) os << t << ',' << r << '\n';
  const std::string file = key + ".csv";
  std::ofstream out(fs::path(dir_) / file, std::ios::binary);
  out << os.str();
  out.close();
  record(key, file, sha256_hex(os.str()));
}

std::optional<ojson> BarCache::load_exchange_info(const std::string& symbol) const {
  auto content = verified_content("exchangeInfo_" + symbol);
  if (!content) return std::nullopt;
  return ojson::parse(*content);
}

void BarCache::store_exchange_info(const std::string& symbol, const ojson& info) {
  const std::string key = "exchangeInfo_" + symbol;
  const std::string content = info.dump(2);
  const std::string file = key + ".json";
  std::ofstream out(fs::path(dir_) / file, std::ios::binary);
  out << content;
  out.close();
  record(key, file, sha256_hex(content));
}

// --- pagination ---------------------------------------------------------------

std::vector<ReplayBar> paginate_klines(TimestampMs start_ms, TimestampMs end_ms,
                                       TimestampMs interval_ms, int page_limit,
                                       const KlinesPageFetcher& fetch) {
  if (page_limit < 1) throw ConfigError("paginate_klines: page_limit must be >= 1");
  std::vector<ReplayBar> out;
  TimestampMs cursor = start_ms;
  while (cursor <= end_ms) {
    auto page = fetch(cursor, end_ms, page_limit);
    if (page.empty()) break;
    for (const auto& b : page) {
      if (!out.empty() && b.open_time_ms <= out.back().open_time_ms) continue;
      if (b.open_time_ms > end_ms) break;
      out.push_back(b);
    }
    if (static_cast<int>(page.size()) < page_limit) break;
    cursor = page.back().open_time_ms + interval_ms;
  }
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].open_time_ms <= out[i - 1].open_time_ms) {
      throw DataError("paginate_klines: duplicate or unsorted open_time");
    }
  }
  return out;
}

std::vector<std::pair<TimestampMs, double>> paginate_funding(
    TimestampMs start_ms, TimestampMs end_ms, int page_limit,
    const FundingPageFetcher& fetch) {
  if (page_limit < 1) throw ConfigError("paginate_funding: page_limit must be >= 1");
  std::vector<std::pair<TimestampMs, double>> out;
  TimestampMs cursor = start_ms;
  while (cursor <= end_ms) {
    auto page = fetch(cursor, end_ms, page_limit);
    if (page.empty()) break;
    for (const auto& e : page) {
      if (!out.empty() && e.first <= out.back().first) continue;
      if (e.first > end_ms) break;
      out.push_back(e);
    }
    if (static_cast<int>(page.size()) < page_limit) break;
    cursor = page.back().first + 1;
  }
  return out;
}

// --- HTTP client ----------------------------------------------------------------

MarketDataClient::MarketDataClient(ClientConfig cfg)
    : cfg_(std::move(cfg)), cache_(cfg_.cache_dir) {}

ojson MarketDataClient::http_get_json(const std::string& path_and_query) {
  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      const double delay = cfg_.backoff_base_sec * std::pow(2.0, attempt - 1);
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
    httplib::Client client(cfg_.base_url);
    client.set_connection_timeout(cfg_.timeout_sec);
    client.set_read_timeout(cfg_.timeout_sec);
    auto res = client.Get(path_and_query);
    if (!res) {
      last_error = "transport error " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "http status " + std::to_string(res->status);
      continue;  // rate limited or server-side: back off and retry
    }
    if (res->status != 200) {
      throw DataError("http " + std::to_string(res->status) + " for " +
                      path_and_query + ": " + res->body);
    }
    return ojson::parse(res->body);
  }
  throw DataError("http retries exhausted for " + path_and_query + ": " + last_error);
}

TimestampMs interval_to_ms(const std::string& interval) {
  if (interval.empty()) throw ConfigError("empty interval");
  const char unit = interval.back();
  const long value = std::stol(interval.substr(0, interval.size() - 1));
  switch (unit) {
    case 'm': return value * 60'000LL;
    case 'h': return value * 3'600'000LL;
    case 'd': return value * 86'400'000LL;
    default: throw ConfigError("unsupported interval '" + interval + "'");
  }
}

std::vector<ReplayBar> MarketDataClient::fetch_klines(const std::string& symbol,
                                                      const std::string& interval,
                                                      TimestampMs start_ms,
                                                      TimestampMs end_ms) {
  if (auto cached = cache_.load_klines(symbol, interval, start_ms, end_ms)) {
    return *cached;
  }
  const TimestampMs step = interval_to_ms(interval);
  auto fetcher = [&](TimestampMs s, TimestampMs e, int limit) {
    std::ostringstream q;
    q << "/fapi/v1/klines?symbol=" << symbol << "&interval=" << interval
      << "&startTime=" << s << "&endTime=" << e << "&limit=" << limit;
    const ojson rows = http_get_json(q.str());
    std::vector<ReplayBar> bars;
    for (const auto& row : rows) {
      ReplayBar b;
      b.open_time_ms = row.at(0).get<TimestampMs>();
      b.open = std::stod(row.at(1).get<std::string>());
      b.high = std::stod(row.at(2).get<std::string>());
      b.low = std::stod(row.at(3).get<std::string>());
      b.close = std::stod(row.at(4).get<std::string>());
      b.volume = std::stod(row.at(5).get<std::string>());
      bars.push_back(b);
    }
    return bars;
  };
  auto bars = paginate_klines(start_ms, end_ms, step, 1500, fetcher);
  normalize_gaps(bars, step, cfg_.gap_policy);
  cache_.store_klines(symbol, interval, start_ms, end_ms, bars);
  return bars;
}

std::vector<std::pair<TimestampMs, double>> MarketDataClient::fetch_funding(
    const std::string& symbol, TimestampMs start_ms, TimestampMs end_ms) {
  if (auto cached = cache_.load_funding(symbol, start_ms, end_ms)) {
    return *cached;
  }
  auto fetcher = [&](TimestampMs s, TimestampMs e, int limit) {
    std::ostringstream q;
    q << "/fapi/v1/fundingRate?symbol=" << symbol << "&startTime=" << s
      << "&endTime=" << e << "&limit=" << limit;
    const ojson rows = http_get_json(q.str());
    std::vector<std::pair<TimestampMs, double>> events;
    for (const auto& row : rows) {
      events.emplace_back(row.at("fundingTime").get<TimestampMs>(),
                          std::stod(row.at("fundingRate").get<std::string>()));
    }
    std::sort(events.begin(), events.end());
    return events;
  };
  auto events = paginate_funding(start_ms, end_ms, 1000, fetcher);
  cache_.store_funding(symbol, start_ms, end_ms, events);
  return events;
}

ojson MarketDataClient::fetch_exchange_info(const std::string& symbol) {
  if (auto cached = cache_.load_exchange_info(symbol)) return *cached;
  const ojson info = http_get_json("/fapi/v1/exchangeInfo?symbol=" + symbol);
  cache_.store_exchange_info(symbol, info);
  return info;
}

double round_to_step(double quantity, double step) {
  if (!(step > 0.0)) throw ConfigError("round_to_step: step must be > 0");
  return std::floor(quantity / step + 1e-12) * step;
}

void merge_funding(std::vector<ReplayBar>& bars,
                   const std::vector<std::pair<TimestampMs, double>>& events) {
  std::vector<TimestampMs> opens(bars.size());
  for (std::size_t i = 0; i < bars.size(); ++i) opens[i] = bars[i].open_time_ms;
  const auto aligned = align_funding(opens, events);
  for (std::size_t i = 0; i < bars.size(); ++i) {
    bars[i].funding_rate = aligned.per_bar[i];
  }
}

}  // namespace sae
