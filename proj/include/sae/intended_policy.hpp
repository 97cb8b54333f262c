#pragma once

#include <set>
#include <string>
#include <vector>

#include "sae/common.hpp"
#include "sae/contract.hpp"
#include "sae/policy_engine.hpp"

namespace sae {

// S = (T, R, M, U): machine-checkable intent. The same spec drives the
// gate's allowlists and the deterministic out-of-scope labeling.
struct Allowlists {  // T
  std::set<std::string> intents{"open", "close"};
  std::set<std::string> venues{"binance-usdm"};
  std::set<std::string> symbols{"BTCUSDT", "ETHUSDT", "SYNTH"};
  std::set<std::string> accounts{"primary"};
};

struct RiskCaps {  // R
  double max_leverage{3.0};
  double max_notional{1.0};  // resulting exposure as a fraction of equity
  double max_order_rate{4.0};
  double rate_window_sec{60.0};
  double max_slippage_bps{120.0};
  double max_holding_time_sec{86400.0};
  int max_concurrent_positions{1};
};

// Market predicates: regime-conditioned cap tightening (the same g-table as
// the gate, with the same leverage floor) plus a reduce-only trigger on
// funding extremes. Volatility extremes tighten budgets but do not force
// reduce-only; that keeps LIMITed opens possible under vol stress.
struct MarketPredicates {  // M
  bool regime_tighten{true};
  GTable g_table;
  double leverage_floor{1.0};
  bool reduce_only_funding_extreme{true};
  double tau_f{0.01};
};

struct AccountPredicates {  // U
  double min_margin_ratio{1.1};  // below: reduce-only
  double max_drawdown{0.30};     // at or above: reduce-only
  double cooldown_sec{30.0};     // min spacing between executed orders
};

struct IntendedPolicySpec {
  Allowlists allow;
  RiskCaps caps;
  MarketPredicates market;
  AccountPredicates account;
};

// R caps after applying M's regime tightening.
RiskCaps tightened_caps(const IntendedPolicySpec& spec, Regime regime);

struct ActionLabel {
  bool in_scope{true};
  std::string violation_class;         // first violated: tool_venue|state|cap
  std::vector<std::string> violations;  // all violated sub-rules
};

// Everything the labeling rules look at, for one attempted/executed action.
struct LabelInputs {
  Intent intent{Intent::kOpen};
  std::string symbol;
  std::string venue;
  std::string account{"primary"};
  double leverage{1.0};
  double resulting_exposure_fraction{0.0};  // position after this action
  double slippage_bps{0.0};
  TimestampMs timestamp_ms{0};
  TimestampMs last_executed_ms{-1};  // -1: no prior executed action
  int executed_in_rate_window{0};    // prior executed orders in (t-W, t]
  Regime regime{Regime::kCalm};
  double funding{0.0};
  double margin_ratio{kUnconstrainedMarginRatio};
  double drawdown{0.0};
  double position_age_sec{0.0};  // oldest open position, 0 if flat
};

// Deterministic out-of-scope labeling. Violation classes are reported in
// the fixed order tool_venue, state, cap.
ActionLabel out_of_scope(const LabelInputs& in, const IntendedPolicySpec& spec);

// One attempt as it flows through the gate, carrying both the label of the
// requested action and (when executed) of the effective action.
struct ActionRecord {
  std::int64_t seq{0};
  TimestampMs timestamp_ms{0};
  std::string symbol;
  std::string strategy_id;
  std::string attack_family;  // empty for legitimate attempts
  bool is_attack{false};
  Intent intent{Intent::kOpen};
  Side side{Side::kLong};
  double requested_leverage{0.0};
  double requested_notional{0.0};
  double requested_slippage_bps{0.0};
  Decision decision{Decision::kBlock};
  std::string decision_reason;
  bool forwarded{false};  // gate returned ALLOW/LIMIT (executor received it)
  bool executed{false};   // the fill actually went through
  double effective_leverage{0.0};
  double effective_notional{0.0};
  double effective_slippage_bps{0.0};
  ActionLabel requested_label;
  ActionLabel effective_label;  // labels the effective action when forwarded
  bool exceeds_own_decision{false};  // effective action outside its budgets
  double loss_contrib{0.0};          // fixed loss proxy, executed steps only
};

ojson to_json(const ActionRecord& r);
ActionRecord action_record_from_json(const ojson& j);

// DG estimators over executed actions (blocked attempts carry no harm).
double dg_rate(const std::vector<ActionRecord>& log);
double dg_loss(const std::vector<ActionRecord>& log, double eps = 1e-12);

// AttackSuccess: attack attempts whose forwarded effective action is
// out-of-scope or exceeds its own decision's caps, over all attack attempts.
// Receipt at the executor counts; a later venue-side rejection does not
// rescue the gate.
double attack_success(const std::vector<ActionRecord>& log);

// FalseBlock: legitimate attempts that were in scope as requested and got
// BLOCKed, over legitimate in-scope attempts. With strict=true a LIMIT that
// modified the request also counts as blocked.
double false_block(const std::vector<ActionRecord>& log, bool strict = false);

struct AttackCounts {
  std::int64_t successes{0};
  std::int64_t attempts{0};
};
AttackCounts attack_counts(const std::vector<ActionRecord>& log);

struct FalseBlockCounts {
  std::int64_t blocked{0};
  std::int64_t legitimate_in_scope{0};
};
FalseBlockCounts false_block_counts(const std::vector<ActionRecord>& log,
                                    bool strict = false);

}  // namespace sae
