// Kernel benchmark: OpenMP-parallel paths against their serial references.
// The pairs must agree exactly; the benchmark reports timing and a speedup.

#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sae/app_config.hpp"
#include "sae/autoopt.hpp"
#include "sae/data_ingest.hpp"
#include "sae/market_state.hpp"
#include "sae/metrics_stats.hpp"
#include "sae/run_io.hpp"
#include "sae/simulator.hpp"

using namespace sae;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void row(const std::string& name, double serial_s, double parallel_s, bool equal) {
  std::cout << std::left << std::setw(28) << name << std::right << std::fixed
            << std::setprecision(4) << std::setw(10) << serial_s << "s"
            << std::setw(10) << parallel_s << "s" << std::setw(9)
            << std::setprecision(2) << (serial_s / std::max(parallel_s, 1e-9))
            << "x   " << (equal ? "outputs match" : "OUTPUT MISMATCH") << "\n";
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::cout << "openmp threads: " << omp_get_max_threads() << "\n";
#else
  std::cout << "built without openmp; parallel paths run serially\n";
#endif
  std::cout << std::left << std::setw(28) << "kernel" << std::right
            << std::setw(11) << "serial" << std::setw(11) << "parallel"
            << std::setw(10) << "speedup" << "\n";

  std::mt19937_64 rng(123);
  auto unit = [&rng]() {
    return (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  };

  {
    std::vector<double> returns(20000);
    for (auto& r : returns) r = 0.002 * (unit() - 0.5);
    auto t0 = Clock::now();
    const auto serial = stats::block_bootstrap_ci_serial(returns, 24, 4000, 99);
    const double ts = seconds_since(t0);
    t0 = Clock::now();
    const auto parallel = stats::block_bootstrap_ci(returns, 24, 4000, 99);
    const double tp = seconds_since(t0);
    row("block_bootstrap_ci", ts, tp,
        serial.lo == parallel.lo && serial.hi == parallel.hi);
  }

  {
    std::vector<double> sigma(40000);
    for (auto& s : sigma) s = 0.001 + 0.01 * unit();
    auto t0 = Clock::now();
    const auto serial = rolling_median_serial(sigma, 480, 1e-9);
    const double ts = seconds_since(t0);
    t0 = Clock::now();
    const auto parallel = rolling_median(sigma, 480, 1e-9);
    const double tp = seconds_since(t0);
    row("rolling_median", ts, tp, serial == parallel);
  }

  {
    AppConfig cfg = AppConfig::defaults();
    cfg.n_bars = 768;
    cfg.autoopt.batch_trials = 16;
    cfg.autoopt.max_batches = 1;
    const auto bars = load_bars(cfg);

    auto evaluate = [&](std::int64_t trial) {
      AppConfig c = cfg;
      c.variant = cfg.autoopt.variant;
      apply_params(c, sample_candidate(cfg.autoopt.space, cfg.seed, trial));
      const RunResult run = run_replay(c.replay_config(), bars);
      return compute_metrics(run, "full", "bench").mdd;
    };

    const int n = cfg.autoopt.batch_trials;
    std::vector<double> serial_scores(n), parallel_scores(n);
    auto t0 = Clock::now();
    for (int i = 0; i < n; ++i) serial_scores[i] = evaluate(i);
    const double ts = seconds_since(t0);
    t0 = Clock::now();
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) parallel_scores[i] = evaluate(i);
    const double tp = seconds_since(t0);
    row("candidate_batch_replay", ts, tp, serial_scores == parallel_scores);
  }
  return 0;
}
