#pragma once

#include <string>
#include <vector>

#include "sae/metrics_stats.hpp"
#include "sae/run_io.hpp"

namespace sae {

struct RunSummary {
  std::string dir;
  MetricsReport metrics;
  std::vector<double> returns;  // recomputed from equity.csv
};

RunSummary load_run_summary(const std::string& run_dir);

// Main results table: one row per run, Table-3 column set.
std::string main_results_table(const std::vector<RunSummary>& runs);

struct PairStats {
  stats::BootstrapCi ci_a;
  stats::BootstrapCi ci_b;
  stats::WilcoxonResult wilcoxon;
  stats::TwoProportionResult attack_success_test;
  bool as_available{false};
};

PairStats pair_statistics(const RunSummary& a, const RunSummary& b, int block_len,
                          int n_boot, std::uint64_t seed);

std::string significance_table(const RunSummary& a, const RunSummary& b,
                               const PairStats& s);
ojson significance_json(const RunSummary& a, const RunSummary& b,
                        const PairStats& s);

}  // namespace sae
