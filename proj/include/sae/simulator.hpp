#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sae/attack_gen.hpp"
#include "sae/common.hpp"
#include "sae/contract.hpp"
#include "sae/enforcement.hpp"
#include "sae/intended_policy.hpp"
#include "sae/market_state.hpp"
#include "sae/trader_state.hpp"

namespace sae {

struct ReplayBar {
  TimestampMs open_time_ms{0};
  double open{0.0};
  double high{0.0};
  double low{0.0};
  double close{0.0};
  double volume{0.0};
  double funding_rate{0.0};  // 0 when no funding event this bar
};

// Throws DataError on OHLC violations or non-increasing times.
void validate_bars(const std::vector<ReplayBar>& bars);

struct MarginTier {
  double notional_floor{0.0};
  double notional_cap{0.0};  // exclusive upper bound; <=0 means unbounded
  double mmr{0.0};
  double maint_amount{0.0};
};

// Conservative single-tier placeholder used when no table is supplied.
std::vector<MarginTier> fallback_tiers();
void validate_tiers(const std::vector<MarginTier>& tiers);
double maintenance_margin(double notional, const std::vector<MarginTier>& tiers);
std::vector<MarginTier> parse_tiers_csv(const std::string& text);
std::vector<MarginTier> load_tiers_csv(const std::string& path);

struct FillModel {
  double taker_fee_bps{4.0};
  double base_slippage_bps{2.0};
  double impact_coeff_bps{10.0};  // bps per unit of notional / bar quote volume
  double liq_penalty_bps{50.0};
};

struct SimPosition {
  Side side{Side::kLong};
  double size_base{0.0};
  double entry_price{0.0};
  double leverage{1.0};
  TimestampMs entry_time_ms{0};
  double open_req_leverage{1.0};  // as requested, for pacing features
  std::int64_t owner_action{-1};  // action that owns subsequent losses
};

struct SimAccount {
  double wallet{10000.0};
  std::optional<SimPosition> position;
  double peak_equity{10000.0};
  std::int64_t liquidations{0};
  // Cash decomposition accumulators (wallet deltas).
  double fees{0.0};
  double funding{0.0};
  double realized{0.0};
  double penalties{0.0};
  std::vector<TradeRecord> trades;
  std::vector<TimestampMs> order_times;

  double unrealized(double price) const;
  double equity(double price) const { return wallet + unrealized(price); }
  double position_notional(double price) const;
};

double margin_ratio_of(const SimAccount& acct, double price,
                       const std::vector<MarginTier>& tiers);

struct FillOutcome {
  bool executed{false};
  bool traded{false};  // an order actually hit the book (counts for pacing)
  std::string reason;  // set when not executed
  double fill_price{0.0};
  double fee{0.0};
};

// Applies an approved effective action to the account at the bar close.
// Orders whose modeled slippage exceeds the enforced cap are cancelled.
FillOutcome execute_fill(SimAccount& acct, const ReplayBar& bar, Intent intent,
                         Side side, double notional_fraction, double leverage,
                         double slippage_cap_bps, double req_leverage,
                         const FillModel& fill, std::int64_t action_seq);

// Funding cash flow for bars carrying an event; longs pay positive rates.
void apply_funding(SimAccount& acct, const ReplayBar& bar);

// True when margin balance <= maintenance margin; force-closes the position
// at the bar close minus a penalty and increments the liquidation counter.
bool check_liquidation(SimAccount& acct, const ReplayBar& bar,
                       const std::vector<MarginTier>& tiers,
                       const FillModel& fill);

struct StrategyParams {
  std::string kind{"momentum"};  // momentum | churn | none
  int lookback{8};
  double entry_threshold{0.0005};
  double req_leverage{2.0};
  double req_notional{0.3};
  double req_slippage_bps{20.0};
};

struct ReplayConfig {
  std::string symbol{"SYNTH"};
  std::string venue{"binance-usdm"};
  Variant variant{Variant::kFull};
  std::uint64_t seed{42};
  double initial_wallet{10000.0};
  FillModel fill;
  std::vector<MarginTier> tiers;  // empty -> conservative fallback, flagged
  FeatureConfig features;
  PolicyConfig policy;
  IntendedPolicySpec spec;
  CalibratedModel trader_model;
  bool attacks_enabled{true};
  AttackConfig attacks;
  StrategyParams strategy;
  TrustState default_trust{0.9, 0.2, false, std::nullopt};
  TrustState attack_trust{0.3, 0.7, true, std::nullopt};
  double stop_loss_frac{0.02};      // StaticOMS stop-loss, fraction of equity
  double step_loss_cap_frac{0.01};  // liquidation penalty basis for the DG proxy
  double staging_spacing_sec{60.0};
};

struct RunResult {
  std::vector<TimestampMs> times;
  std::vector<double> equity;
  std::vector<double> returns;  // per-step simple returns
  std::vector<ActionRecord> actions;
  std::vector<AuditRecord> audits;
  std::int64_t liquidations{0};
  double wallet_start{0.0};
  double wallet_end{0.0};
  double fees{0.0};
  double funding{0.0};
  double realized{0.0};
  double penalties{0.0};
  std::int64_t requests{0};
  std::int64_t gate_ops{0};
  double wall_latency_ms_total{0.0};
  bool tiers_fallback{false};
  std::vector<std::string> flags;
};

RunResult run_replay(const ReplayConfig& cfg, const std::vector<ReplayBar>& bars);

}  // namespace sae
