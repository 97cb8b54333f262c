#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "sae/common.hpp"

namespace sae {

using ojson = nlohmann::ordered_json;

enum class Intent { kOpen, kClose, kModify, kCancel };
enum class Side { kLong, kShort };
enum class OrderType { kMarket, kLimit };
enum class Decision { kAllow, kLimit, kBlock };
enum class Regime { kCalm, kVolatile, kExtreme };
enum class NotionalMode { kFraction, kAbsolute };

const char* to_string(Intent v);
const char* to_string(Side v);
const char* to_string(OrderType v);
const char* to_string(Decision v);
const char* to_string(Regime v);
const char* to_string(NotionalMode v);

Intent intent_from_string(const std::string& s);
Side side_from_string(const std::string& s);
OrderType order_type_from_string(const std::string& s);
Decision decision_from_string(const std::string& s);
Regime regime_from_string(const std::string& s);
NotionalMode notional_mode_from_string(const std::string& s);

// Sentinel for "no maintenance margin requirement" (flat account). Kept
// finite so contexts stay JSON-serializable.
inline constexpr double kUnconstrainedMarginRatio = 1e9;

struct ExecutionRequest {
  std::string symbol;
  std::string venue;
  TimestampMs timestamp_ms{0};
  Intent intent{Intent::kOpen};
  Side side{Side::kLong};
  double requested_notional{0.0};  // fraction of equity or quote amount
  NotionalMode notional_mode{NotionalMode::kFraction};
  double requested_leverage{1.0};
  OrderType order_type{OrderType::kMarket};
  double max_slippage_bps{0.0};
  std::string strategy_id;
  std::map<std::string, std::string> meta;  // provenance tags, sorted
};

struct Position {
  std::string symbol;
  Side side{Side::kLong};
  double notional{0.0};  // quote currency at entry
  double entry_price{0.0};
  double leverage{1.0};
  TimestampMs entry_time_ms{0};
};

struct AccountState {
  double equity{0.0};
  double peak_equity{0.0};
  double margin_ratio{kUnconstrainedMarginRatio};
  std::vector<Position> positions;
  std::vector<TimestampMs> recent_order_times;
  std::vector<double> recent_pnl;
  double avg_holding_time_sec{0.0};

  double drawdown() const {
    if (peak_equity <= 0.0) return 0.0;
    double dd = 1.0 - equity / peak_equity;
    return dd < 0.0 ? 0.0 : dd;
  }
};

struct MarketState {
  double sigma{0.0};
  double sigma_ratio{0.0};  // sigma / rolling normalizer
  double funding{0.0};
  double liquidity{0.0};
  Regime regime{Regime::kCalm};
  double close_price{0.0};
  double volume{0.0};
};

struct TrustState {
  double p_prov{1.0};
  double r_cap{0.0};
  bool inj_alert{false};
  std::optional<bool> narrative_flag;  // opaque; never interpreted
};

struct ExecutionContext {
  AccountState account;
  MarketState market;
  TrustState trust;
};

struct BudgetVector {
  double leverage_cap{3.0};
  double notional_cap{1.0};
  double order_rate_cap{4.0};  // orders per rate window
  double slippage_cap_bps{120.0};
  double max_holding_time_sec{86400.0};
  double cooldown_sec{0.0};
  int staging_slices{1};
};

// Throws ConfigError when a budget violates its own invariants.
void check_budget(const BudgetVector& b);

struct StagingSlice {
  double notional{0.0};
  double delay_sec{0.0};
};

struct AuditRecord {
  std::int64_t seq{0};
  TimestampMs timestamp_ms{0};
  ExecutionRequest request;
  std::string context_hash;
  std::string matched_rule_id;
  BudgetVector budgets;
  double requested_leverage{0.0};
  double requested_notional{0.0};
  double requested_slippage_bps{0.0};
  double effective_leverage{0.0};
  double effective_notional{0.0};
  double effective_slippage_bps{0.0};
  Decision decision{Decision::kBlock};
  std::string reason;
  std::vector<std::string> violation_labels;
  // Wall-clock decision latency. Volatile across runs, so it is excluded
  // from the canonical audit line and persisted in a timing sidecar.
  double latency_ms{0.0};
};

struct ExecutionDecision {
  Decision decision{Decision::kBlock};
  double effective_leverage{0.0};
  double effective_notional{0.0};
  double effective_slippage_bps{0.0};
  double cooldown_sec{0.0};
  std::vector<StagingSlice> staging_plan;
  std::string reason;
  std::int64_t audit_seq{0};
};

// Request with the notional normalized to a fraction of current equity.
struct ValidatedRequest {
  ExecutionRequest request;
  double notional_fraction{0.0};
};

// Validates type invariants and normalizes absolute notionals against the
// account's current equity. Malformed requests are rejected, never repaired.
ValidatedRequest validate_request(const ExecutionRequest& r, double equity);

ojson to_json(const ExecutionRequest& r);
ojson to_json(const Position& p);
ojson to_json(const AccountState& a);
ojson to_json(const MarketState& m);
ojson to_json(const TrustState& t);
ojson to_json(const ExecutionContext& c);
ojson to_json(const BudgetVector& b);
ojson to_json(const ExecutionDecision& d);

ExecutionRequest request_from_json(const ojson& j);
Position position_from_json(const ojson& j);
AccountState account_from_json(const ojson& j);
MarketState market_from_json(const ojson& j);
TrustState trust_from_json(const ojson& j);
ExecutionContext context_from_json(const ojson& j);
BudgetVector budget_from_json(const ojson& j);
ExecutionDecision decision_from_json(const ojson& j);

// Canonical audit line (stable field order, latency excluded). Identical
// runs must produce byte-identical lines.
std::string audit_line(const AuditRecord& rec);
AuditRecord audit_from_line(const std::string& line);

// Stable digest over the canonical context serialization.
std::string snapshot_hash(const ExecutionContext& c);

}  // namespace sae
