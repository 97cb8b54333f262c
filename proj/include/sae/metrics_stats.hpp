#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sae/common.hpp"

namespace sae {
namespace stats {

// Largest peak-to-trough decline as a fraction of the running peak.
double max_drawdown(const std::vector<double>& equity);

// Expected shortfall: mean of the worst ceil((1-alpha)*n) returns, signed
// (negative for losses). |cvar| is what enters the optimizer score.
double cvar(const std::vector<double>& returns, double alpha);

struct BootstrapCi {
  double lo{0.0};
  double hi{0.0};
  bool block_len_clamped{false};
};

// Circular moving-block bootstrap percentile interval for the mean.
// Replicate r draws from mt19937_64(mix_seed(seed, r)); start indices are
// rng() % n. Deterministic for a fixed seed regardless of thread count.
BootstrapCi block_bootstrap_ci(const std::vector<double>& returns, int block_len,
                               int n_boot, std::uint64_t seed, double level = 0.95);
// Serial reference implementation; must produce identical intervals.
BootstrapCi block_bootstrap_ci_serial(const std::vector<double>& returns,
                                      int block_len, int n_boot,
                                      std::uint64_t seed, double level = 0.95);

struct WilcoxonResult {
  double p{1.0};
  double w_plus{0.0};
  int n{0};          // pairs after dropping zero differences
  bool exact{false};
  bool degenerate{false};  // all differences were zero
};

// Two-sided paired signed-rank test. Exact distribution by enumeration
// counting for n <= 20 (midranks handled by rank doubling), normal
// approximation with tie and continuity corrections beyond.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a,
                                    const std::vector<double>& b);

struct TwoProportionResult {
  double p{1.0};
  double z{0.0};
  bool degenerate{false};  // pooled proportion 0 or 1
  bool extreme{false};     // a sample proportion at 0 or 1
};

TwoProportionResult two_proportion_test(std::int64_t s1, std::int64_t n1,
                                        std::int64_t s2, std::int64_t n2);

// Arithmetic mean of recorded decision latencies; 0 with flag when empty.
struct LatencySummary {
  double mean_ms{0.0};
  bool empty{false};
};
LatencySummary latency_overhead(const std::vector<double>& latencies_ms);

double normal_cdf(double x);

}  // namespace stats
}  // namespace sae
