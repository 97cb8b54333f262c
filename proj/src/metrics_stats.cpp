#include "sae/metrics_stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace sae {
namespace stats {

double max_drawdown(const std::vector<double>& equity) {
  if (equity.empty()) throw DataError("max_drawdown: empty series");
  double peak = 0.0;
  double mdd = 0.0;
  for (double e : equity) {
    if (!(e > 0.0)) throw DataError("max_drawdown: non-positive equity");
    peak = std::max(peak, e);
    mdd = std::max(mdd, 1.0 - e / peak);
  }
  return mdd;
}

double cvar(const std::vector<double>& returns, double alpha) {
  if (returns.empty()) throw DataError("cvar: empty series");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("cvar: alpha must be in (0,1)");
  const std::size_t n = returns.size();
  std::size_t k = static_cast<std::size_t>(
      std::ceil((1.0 - alpha) * static_cast<double>(n)));
  k = std::max<std::size_t>(k, 1);
  std::vector<double> sorted = returns;
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += sorted[i];
  return sum / static_cast<double>(k);
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const std::size_t m = sorted.size();
  if (m == 1) return sorted[0];
  const double pos = q * static_cast<double>(m - 1);
  const std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= m) return sorted[m - 1];
  const double frac = pos - static_cast<double>(i);
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

double replicate_mean(const std::vector<double>& x, int block_len,
                      std::uint64_t seed, int replicate) {
  const std::size_t n = x.size();
  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(replicate)));
  const std::size_t blocks =
      (n + static_cast<std::size_t>(block_len) - 1) / static_cast<std::size_t>(block_len);
  double sum = 0.0;
  std::size_t taken = 0;
  for (std::size_t b = 0; b < blocks && taken < n; ++b) {
    const std::size_t start = static_cast<std::size_t>(rng() % n);
    for (int j = 0; j < block_len && taken < n; ++j, ++taken) {
      sum += x[(start + static_cast<std::size_t>(j)) % n];
    }
  }
  return sum / static_cast<double>(n);
}

BootstrapCi bootstrap_impl(const std::vector<double>& returns, int block_len,
                           int n_boot, std::uint64_t seed, double level,
                           bool parallel) {
  if (returns.empty()) throw DataError("block_bootstrap_ci: empty series");
  if (block_len < 1) throw ConfigError("block_bootstrap_ci: block_len must be >= 1");
  if (n_boot < 100) throw ConfigError("block_bootstrap_ci: n_boot must be >= 100");
  if (!(level > 0.0 && level < 1.0)) {
    throw ConfigError("block_bootstrap_ci: level must be in (0,1)");
  }
  BootstrapCi out;
  int L = block_len;
  if (static_cast<std::size_t>(L) > returns.size()) {
    L = static_cast<int>(returns.size());
    out.block_len_clamped = true;
  }
  std::vector<double> means(static_cast<std::size_t>(n_boot));
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < n_boot; ++r) {
      means[static_cast<std::size_t>(r)] = replicate_mean(returns, L, seed, r);
    }
  } else {
    for (int r = 0; r < n_boot; ++r) {
      means[static_cast<std::size_t>(r)] = replicate_mean(returns, L, seed, r);
    }
  }
  std::sort(means.begin(), means.end());
  const double tail = (1.0 - level) / 2.0;
  out.lo = quantile_sorted(means, tail);
  out.hi = quantile_sorted(means, 1.0 - tail);
  return out;
}

}  // namespace

BootstrapCi block_bootstrap_ci(const std::vector<double>& returns, int block_len,
                               int n_boot, std::uint64_t seed, double level) {
  return bootstrap_impl(returns, block_len, n_boot, seed, level, true);
}

BootstrapCi block_bootstrap_ci_serial(const std::vector<double>& returns,
                                      int block_len, int n_boot,
                                      std::uint64_t seed, double level) {
  return bootstrap_impl(returns, block_len, n_boot, seed, level, false);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a,
                                    const std::vector<double>& b) {
  if (a.size() != b.size()) throw DataError("wilcoxon: length mismatch");
  std::vector<double> diffs;
  diffs.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) diffs.push_back(d);
  }
  WilcoxonResult res;
  if (diffs.empty()) {
    res.degenerate = true;
    res.p = 1.0;
    return res;
  }
  res.n = static_cast<int>(diffs.size());
  if (res.n < 5) throw DataError("wilcoxon: fewer than 5 nonzero differences");

  // Midranks of |d|, doubled so ties stay integral.
  const std::size_t n = diffs.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::fabs(diffs[x]) < std::fabs(diffs[y]);
  });
  std::vector<std::int64_t> rank2(n);
  std::map<std::int64_t, int> tie_counts;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n &&
           std::fabs(diffs[order[j + 1]]) == std::fabs(diffs[order[i]])) {
      ++j;
    }
    // Average rank over the tie group, doubled: (i+1 + j+1).
    const std::int64_t r2 = static_cast<std::int64_t>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = r2;
    tie_counts[r2] += static_cast<int>(j - i + 1);
    i = j + 1;
  }

  std::int64_t w2_plus = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (diffs[i] > 0.0) w2_plus += rank2[i];
  }
  res.w_plus = static_cast<double>(w2_plus) / 2.0;

  const std::int64_t total2 = static_cast<std::int64_t>(n) *
                              static_cast<std::int64_t>(n + 1);  // sum of 2*rank
  // Exact through n = 20: the corrected normal approximation only agrees
  // with the enumeration to 0.01 from about that size on.
  if (n <= 20) {
    res.exact = true;
    // Distribution of the doubled positive-rank sum over all 2^n sign
    // assignments, built by polynomial counting. Everything stays integral,
    // so the comparison against the enumeration oracle is exact.
    std::vector<std::int64_t> count(static_cast<std::size_t>(total2) + 1, 0);
    count[0] = 1;
    std::int64_t reach = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::int64_t r2 = rank2[i];
      for (std::int64_t s = reach; s >= 0; --s) {
        if (count[static_cast<std::size_t>(s)] != 0) {
          count[static_cast<std::size_t>(s + r2)] +=
              count[static_cast<std::size_t>(s)];
        }
      }
      reach += r2;
    }
    // Deviations doubled once more so the midpoint total2/2 stays integral.
    const std::int64_t dev4 = std::llabs(2 * w2_plus - total2);
    std::int64_t extreme = 0, total = 0;
    for (std::int64_t s = 0; s <= total2; ++s) {
      const std::int64_t c = count[static_cast<std::size_t>(s)];
      total += c;
      if (std::llabs(2 * s - total2) >= dev4) extreme += c;
    }
    res.p = static_cast<double>(extreme) / static_cast<double>(total);
  } else {
    const double nn = static_cast<double>(n);
    const double mu = nn * (nn + 1.0) / 4.0;
    double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
    for (const auto& [r2, t] : tie_counts) {
      if (t > 1) {
        const double td = static_cast<double>(t);
        var -= (td * td * td - td) / 48.0;
      }
    }
    const double w = res.w_plus;
    if (var <= 0.0 || w == mu) {
      res.p = 1.0;
    } else {
      const double cc = w > mu ? -0.5 : 0.5;  // continuity correction
      const double z = (w - mu + cc) / std::sqrt(var);
      res.p = std::min(1.0, 2.0 * (1.0 - normal_cdf(std::fabs(z))));
    }
  }
  return res;
}

TwoProportionResult two_proportion_test(std::int64_t s1, std::int64_t n1,
                                        std::int64_t s2, std::int64_t n2) {
  if (n1 < 1 || n2 < 1) throw DataError("two_proportion_test: n must be >= 1");
  if (s1 < 0 || s1 > n1 || s2 < 0 || s2 > n2) {
    throw DataError("two_proportion_test: successes out of range");
  }
  TwoProportionResult res;
  const double p1 = static_cast<double>(s1) / static_cast<double>(n1);
  const double p2 = static_cast<double>(s2) / static_cast<double>(n2);
  res.extreme = s1 == 0 || s1 == n1 || s2 == 0 || s2 == n2;
  const double pooled = static_cast<double>(s1 + s2) / static_cast<double>(n1 + n2);
  if (pooled <= 0.0 || pooled >= 1.0) {
    // Both proportions are forced equal here; there is nothing to test.
    res.degenerate = true;
    res.p = 1.0;
    res.z = 0.0;
    return res;
  }
  const double se = std::sqrt(pooled * (1.0 - pooled) *
                              (1.0 / static_cast<double>(n1) +
                               1.0 / static_cast<double>(n2)));
  res.z = (p1 - p2) / se;
  res.p = std::min(1.0, 2.0 * (1.0 - normal_cdf(std::fabs(res.z))));
  return res;
}

LatencySummary latency_overhead(const std::vector<double>& latencies_ms) {
  LatencySummary out;
  if (latencies_ms.empty()) {
    out.empty = true;
    return out;
  }
  double sum = 0.0;
  for (double v : latencies_ms) sum += v;
  out.mean_ms = sum / static_cast<double>(latencies_ms.size());
  return out;
}

}  // namespace stats
}  // namespace sae
