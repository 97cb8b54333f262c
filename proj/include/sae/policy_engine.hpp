#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sae/common.hpp"
#include "sae/contract.hpp"

namespace sae {

class PolicyParseError : public ConfigError {
 public:
  explicit PolicyParseError(const std::string& what) : ConfigError("policy: " + what) {}
};

// Per-regime multipliers for the risk components of the budget vector.
struct RegimeFactors {
  double leverage{1.0};
  double notional{1.0};
  double order_rate{1.0};
  double slippage{1.0};
};

struct GTable {
  RegimeFactors calm{1.0, 1.0, 1.0, 1.0};
  RegimeFactors volatile_{2.0 / 3.0, 0.75, 0.75, 0.5};
  RegimeFactors extreme{1.0 / 3.0, 0.5, 0.5, 0.25};

  const RegimeFactors& for_regime(Regime r) const {
    switch (r) {
      case Regime::kCalm: return calm;
      case Regime::kVolatile: return volatile_;
      case Regime::kExtreme: return extreme;
    }
    return calm;
  }
};

// Cooldown and staging are set per regime rather than multiplied.
struct RegimeOps {
  double cooldown_calm{30.0};
  double cooldown_volatile{60.0};
  double cooldown_extreme{120.0};
  int slices_calm{1};
  int slices_volatile{4};
  int slices_extreme{5};

  double cooldown(Regime r) const {
    return r == Regime::kCalm ? cooldown_calm
           : r == Regime::kVolatile ? cooldown_volatile
                                    : cooldown_extreme;
  }
  int slices(Regime r) const {
    return r == Regime::kCalm ? slices_calm
           : r == Regime::kVolatile ? slices_volatile
                                    : slices_extreme;
  }
};

// h(m, DD): 1 inside the safe region, linear to h_min as margin falls to
// margin_min or drawdown rises to dd_max.
struct HParams {
  double margin_safe{2.0};
  double margin_min{1.0};
  double dd_safe{0.10};
  double dd_max{0.30};
  double h_min{0.25};
};

// q(z): per-component trust multipliers built from three monotone terms.
// Which terms apply to which component is part of the shipped policy; the
// defaults reproduce the leverage/notional tightening pair (0.5, 0.4) at
// p_prov = 0.3 with an active injection alert.
struct QTermMask {
  bool prov{false};
  bool cap{false};
  bool inj{false};
};

struct QParams {
  double prov_pivot{0.75};
  double q_min{0.25};
  double cap_slope{0.5};
  double inj_mult{0.5};
  QTermMask leverage{false, true, true};
  QTermMask notional{true, true, false};
  QTermMask order_rate{false, true, true};
  QTermMask slippage{false, false, false};
};

struct TrustFactors {
  double leverage{1.0};
  double notional{1.0};
  double order_rate{1.0};
  double slippage{1.0};
};

struct TighteningConfig {
  GTable g_table;
  RegimeOps regime_ops;
  HParams h_params;
  QParams q_params;
  double leverage_floor{1.0};
};

struct TightenSwitches {
  bool regime{true};   // g
  bool account{true};  // h
  bool trust{true};    // q
};

TrustFactors trust_factor(const TrustState& z, const QParams& cfg);
double account_factor(const AccountState& a, const HParams& cfg);

BudgetVector tighten_budgets(const BudgetVector& b0, const MarketState& market,
                             const AccountState& account, const TrustState& trust,
                             const TighteningConfig& cfg,
                             const TightenSwitches& on = {});

// Rule predicates are conjunctions of optional comparisons.
struct RulePredicate {
  std::optional<Regime> regime;
  std::optional<Intent> intent;
  std::optional<double> p_t_gte;
  std::optional<double> p_t_lt;
  std::optional<double> p_prov_lt;
  std::optional<double> r_cap_gte;
  std::optional<bool> inj_alert;
  std::optional<double> margin_ratio_lt;
  std::optional<double> drawdown_gte;
  std::optional<double> funding_abs_gte;
  std::optional<double> position_age_gte_sec;
};

struct BudgetMutation {
  std::string component;  // leverage|notional|order_rate|slippage|cooldown|holding
  bool multiplicative{true};
  double value{1.0};
};

struct PolicyRule {
  std::string rule_id;
  RulePredicate when;
  Decision decision{Decision::kAllow};
  std::vector<BudgetMutation> mutations;
};

struct RuleEvalInput {
  Regime regime{Regime::kCalm};
  Intent intent{Intent::kOpen};
  double p_t{0.0};
  double funding{0.0};
  TimestampMs now_ms{0};
  TrustState trust;
  const AccountState* account{nullptr};
};

struct RuleOutcome {
  Decision decision{Decision::kAllow};
  BudgetVector budgets;
  std::string matched_rule_id;  // empty when no rule fired
};

// First matching rule fires once; no match means ALLOW with budgets
// unchanged. Any evaluation error fails closed to BLOCK.
RuleOutcome evaluate_rules(const std::vector<PolicyRule>& rules,
                           const RuleEvalInput& in, const BudgetVector& budgets);

struct PolicyConfig {
  BudgetVector defaults;
  TighteningConfig tightening;
  double rate_window_sec{60.0};
  double tau_limit{0.50};
  double tau_block{0.70};
  std::vector<PolicyRule> rules;
};

// Parses the YAML policy document. Unknown keys are rejected with their
// location; invariant violations (e.g. tau_limit >= tau_block) throw.
PolicyConfig load_policy(const std::string& yaml_text);
PolicyConfig load_policy_file(const std::string& path);
std::string policy_to_yaml(const PolicyConfig& p);

}  // namespace sae
