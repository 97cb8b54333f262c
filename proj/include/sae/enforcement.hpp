#pragma once

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sae/common.hpp"
#include "sae/contract.hpp"
#include "sae/intended_policy.hpp"
#include "sae/policy_engine.hpp"
#include "sae/trader_state.hpp"

namespace sae {

enum class Variant { kNoSae, kStaticOms, kBudget, kBudgetCooldown, kFull };

const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);

// Which enforcement stages a variant runs. NoSAE is a pure pass-through.
struct GateSwitches {
  bool pass_through{false};
  bool static_oms{false};      // fixed caps, no regime/trust conditioning
  bool projection{false};
  bool regime_budgets{false};  // g
  bool account_budgets{false}; // h
  bool trust_budgets{false};   // q
  bool temporal{false};        // cooldown + order-rate guards
  bool staging{false};
  bool rules{false};
  bool allowlists{false};

  static GateSwitches for_variant(Variant v);
};

inline constexpr double kUnboundedCap = 1e18;

struct ProjectionWeights {
  double leverage{1.0};
  double notional{1.0};
  double slippage{1.0};
};

struct ProjectedAction {
  double leverage{0.0};
  double notional{0.0};
  double slippage_bps{0.0};
  double distance{0.0};  // weighted l2 distance to the request
};

// Weighted-l2 projection of (leverage, notional, slippage) onto the budget
// box. `exposure_in_use` shrinks the notional headroom so the resulting
// total exposure stays inside the cap.
ProjectedAction project_action(double req_leverage, double req_notional,
                               double req_slippage_bps, const BudgetVector& b,
                               const ProjectionWeights& w = {},
                               double exposure_in_use = 0.0);

enum class GuardResult { kPass, kNoOp, kClockRegression };

class TemporalState {
 public:
  GuardResult check_cooldown(const std::string& symbol, TimestampMs now_ms,
                             double cooldown_sec) const;
  GuardResult check_rate_limit(const std::string& symbol, TimestampMs now_ms,
                               double window_sec, double rate_cap) const;
  int executed_in_window(const std::string& symbol, TimestampMs now_ms,
                         double window_sec) const;
  std::optional<TimestampMs> last_execution(const std::string& symbol) const;
  // Recorded only when an order actually executes; guard checks are pure.
  void note_execution(const std::string& symbol, TimestampMs now_ms);

 private:
  std::map<std::string, TimestampMs> last_exec_;
  std::map<std::string, std::deque<TimestampMs>> order_times_;
};

// Equal child slices, last absorbs rounding so the sequential sum is exact.
// Child i is scheduled at now + i * spacing_sec.
std::vector<StagingSlice> stage_plan(double notional, int slices,
                                     double spacing_sec);

// Returns the violated allowlist entry, or nullopt when permitted.
std::optional<std::string> allowlist_violation(const ExecutionRequest& r,
                                               const Allowlists& allow);

struct GateConfig {
  PolicyConfig policy;
  IntendedPolicySpec spec;
  CalibratedModel trader_model;
  GateSwitches switches;
  BudgetVector static_oms{3.0, 0.5, 4.0, 120.0, 86400.0, 0.0, 1};
  double staging_spacing_sec{60.0};
  ProjectionWeights weights;
};

struct GateResult {
  ExecutionDecision decision;
  AuditRecord audit;
  int ops{0};  // deterministic pipeline-stage count (latency proxy)
};

// The non-bypassable last mile. A single gate instance serves one ordered
// request stream; temporal state mutates only on note_execution.
class EnforcementGate {
 public:
  explicit EnforcementGate(GateConfig cfg);

  GateResult decide(const ExecutionRequest& req, const ExecutionContext& ctx,
                    double p_t);
  void note_execution(const std::string& symbol, TimestampMs now_ms);

  const TemporalState& temporal() const { return temporal_; }
  const GateConfig& config() const { return cfg_; }
  std::int64_t decisions_made() const { return next_seq_; }

 private:
  GateResult blocked(AuditRecord&& audit, const std::string& reason,
                     std::vector<std::string> violations, int ops);

  GateConfig cfg_;
  TemporalState temporal_;
  std::int64_t next_seq_{0};
};

}  // namespace sae
