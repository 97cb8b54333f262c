#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sae/app_config.hpp"
#include "sae/run_io.hpp"

namespace sae {

class NoFeasibleCandidate : public Error {
 public:
  explicit NoFeasibleCandidate(const std::string& what)
      : Error("no feasible candidate: " + what) {}
};

// Ordered map keeps parameter serialization deterministic.
using ParamSet = std::map<std::string, double>;

// Uniform draw per parameter; deterministic in (seed, trial_index) so
// candidate streams are identical under resume and parallel evaluation.
ParamSet sample_candidate(const std::vector<ParamSpec>& space, std::uint64_t seed,
                          std::int64_t trial_index);

// Applies search-space values onto a run configuration.
void apply_params(AppConfig& cfg, const ParamSet& params);

bool feasible(const MetricsReport& m, const AutooptConstraints& c);

// J = w1*MDD + w2*|CVaR_99| + w3*DG_loss + w4*latency_proxy. The latency
// term uses the deterministic gate-ops proxy so scores are reproducible.
double score(const MetricsReport& m, const AutooptWeights& w);

struct Incumbent {
  ParamSet params;
  double score{0.0};
  std::int64_t trial_index{-1};
  MetricsReport metrics;
};

struct OptimizeOptions {
  std::string out_dir{"outputs_auto"};
  bool resume{false};
};

struct OptimizeOutcome {
  std::optional<Incumbent> best;
  std::optional<Incumbent> best_infeasible;
  std::int64_t trials_done{0};
  int batches_done{0};
  bool early_stopped{false};
};

// Which bar windows each phase touched; the walk-forward guard's evidence.
struct DataAccess {
  std::string phase;
  TimestampMs first_ms{0};
  TimestampMs last_ms{0};
};

class DataAccessGuard {
 public:
  void note(const std::string& phase, const std::vector<ReplayBar>& bars);
  const std::vector<DataAccess>& entries() const { return entries_; }
  // True when no entry of `phase` overlaps [from_ms, to_ms].
  bool phase_avoids(const std::string& phase, TimestampMs from_ms,
                    TimestampMs to_ms) const;

 private:
  std::vector<DataAccess> entries_;
};

// Batched best-so-far search on the validation slice. Candidates within a
// batch may run in parallel; incumbent updates merge in trial-index order.
OptimizeOutcome optimize(const AppConfig& base, const std::vector<ReplayBar>& bars,
                         const OptimizeOptions& opts,
                         DataAccessGuard* guard = nullptr);

struct WalkForwardReport {
  Incumbent best;
  MetricsReport validation_metrics;
  MetricsReport test_metrics;
  std::vector<DataAccess> accesses;
  TimestampMs split_ms{0};
};

// Optimize on the validation segment, freeze, evaluate exactly once on the
// disjoint test segment. The guard proves the test window stayed unread
// during optimization.
WalkForwardReport walk_forward(const AppConfig& base,
                               const std::vector<ReplayBar>& bars,
                               const OptimizeOptions& opts);

}  // namespace sae
