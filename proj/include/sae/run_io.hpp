#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sae/intended_policy.hpp"
#include "sae/simulator.hpp"

namespace sae {

struct MetricsReport {
  std::string variant;
  std::string run_id;
  std::int64_t n_bars{0};
  std::int64_t requests{0};
  double mdd{0.0};
  double cvar_95{0.0};
  double cvar_99{0.0};
  double mean_return{0.0};
  std::int64_t liquidations{0};
  std::optional<double> attack_success;
  std::optional<double> false_block;
  AttackCounts as_counts;
  FalseBlockCounts fb_counts;
  double dg_rate{0.0};
  double dg_loss{0.0};
  double gate_ops_per_request{0.0};  // deterministic decision-cost proxy
  double wallet_start{0.0};
  double wallet_end{0.0};
  double fees{0.0};
  double funding{0.0};
  double realized{0.0};
  double penalties{0.0};
  std::vector<std::string> flags;
};

MetricsReport compute_metrics(const RunResult& run, const std::string& variant,
                              const std::string& run_id);

ojson metrics_to_json(const MetricsReport& m);
MetricsReport metrics_from_json(const ojson& j);

// Writes equity.csv, actions.jsonl, audit.jsonl and metrics.json with
// deterministic bytes. Wall-clock latency goes to timing.json, which is the
// one file allowed to differ between otherwise identical runs.
void write_run_dir(const std::string& dir, const RunResult& run,
                   const MetricsReport& metrics);

std::vector<double> load_equity_csv(const std::string& path,
                                    std::vector<TimestampMs>* times = nullptr);
MetricsReport load_metrics(const std::string& run_dir);
std::vector<ActionRecord> load_actions(const std::string& run_dir);

}  // namespace sae
