#include "sae/contract.hpp"

#include <cmath>

#include "sae/sha256.hpp"

namespace sae {

namespace {

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

[[noreturn]] void bad_enum(const char* what, const std::string& s) {
  throw MalformedRequest(std::string("unknown ") + what + " '" + s + "'");
}

}  // namespace

const char* to_string(Intent v) {
  switch (v) {
    case Intent::kOpen: return "open";
    case Intent::kClose: return "close";
    case Intent::kModify: return "modify";
    case Intent::kCancel: return "cancel";
  }
  return "?";
}

const char* to_string(Side v) {
  return v == Side::kLong ? "LONG" : "SHORT";
}

const char* to_string(OrderType v) {
  return v == OrderType::kMarket ? "market" : "limit";
}

const char* to_string(Decision v) {
  switch (v) {
    case Decision::kAllow: return "ALLOW";
    case Decision::kLimit: return "LIMIT";
    case Decision::kBlock: return "BLOCK";
  }
  return "?";
}

const char* to_string(Regime v) {
  switch (v) {
    case Regime::kCalm: return "calm";
    case Regime::kVolatile: return "volatile";
    case Regime::kExtreme: return "extreme";
  }
  return "?";
}

const char* to_string(NotionalMode v) {
  return v == NotionalMode::kFraction ? "fraction" : "absolute";
}

Intent intent_from_string(const std::string& s) {
  if (s == "open") return Intent::kOpen;
  if (s == "close") return Intent::kClose;
  if (s == "modify") return Intent::kModify;
  if (s == "cancel") return Intent::kCancel;
  bad_enum("intent", s);
}

Side side_from_string(const std::string& s) {
  if (s == "LONG") return Side::kLong;
  if (s == "SHORT") return Side::kShort;
  bad_enum("side", s);
}

OrderType order_type_from_string(const std::string& s) {
  if (s == "market") return OrderType::kMarket;
  if (s == "limit") return OrderType::kLimit;
  bad_enum("order_type", s);
}

Decision decision_from_string(const std::string& s) {
  if (s == "ALLOW") return Decision::kAllow;
  if (s == "LIMIT") return Decision::kLimit;
  if (s == "BLOCK") return Decision::kBlock;
  bad_enum("decision", s);
}

Regime regime_from_string(const std::string& s) {
  if (s == "calm") return Regime::kCalm;
  if (s == "volatile") return Regime::kVolatile;
  if (s == "extreme") return Regime::kExtreme;
  bad_enum("regime", s);
}

NotionalMode notional_mode_from_string(const std::string& s) {
  if (s == "fraction") return NotionalMode::kFraction;
  if (s == "absolute") return NotionalMode::kAbsolute;
  bad_enum("notional_mode", s);
}

void check_budget(const BudgetVector& b) {
  if (!finite_nonneg(b.leverage_cap) || !finite_nonneg(b.notional_cap) ||
      !finite_nonneg(b.order_rate_cap) || !finite_nonneg(b.slippage_cap_bps) ||
      !finite_nonneg(b.max_holding_time_sec) || !finite_nonneg(b.cooldown_sec)) {
    throw ConfigError("budget components must be finite and nonnegative");
  }
  if (b.staging_slices < 1) {
    throw ConfigError("staging_slices must be >= 1");
  }
}

ValidatedRequest validate_request(const ExecutionRequest& r, double equity) {
  if (r.symbol.empty()) throw MalformedRequest("empty symbol");
  if (r.venue.empty()) throw MalformedRequest("empty venue");
  if (!std::isfinite(r.requested_leverage) || r.requested_leverage <= 0.0) {
    throw MalformedRequest("requested_leverage must be > 0");
  }
  if (!finite_nonneg(r.requested_notional)) {
    throw MalformedRequest("requested_notional must be >= 0");
  }
  if (!finite_nonneg(r.max_slippage_bps)) {
    throw MalformedRequest("max_slippage_bps must be >= 0");
  }
  ValidatedRequest out{r, r.requested_notional};
  if (r.notional_mode == NotionalMode::kAbsolute) {
    if (equity <= 0.0) {
      throw MalformedRequest("cannot normalize absolute notional: equity <= 0");
    }
    out.notional_fraction = r.requested_notional / equity;
    out.request.requested_notional = out.notional_fraction;
    out.request.notional_mode = NotionalMode::kFraction;
  }
  return out;
}

ojson to_json(const ExecutionRequest& r) {
  ojson j;
  j["symbol"] = r.symbol;
  j["venue"] = r.venue;
  j["timestamp_ms"] = r.timestamp_ms;
  j["intent"] = to_string(r.intent);
  j["side"] = to_string(r.side);
  j["requested_notional"] = r.requested_notional;
  j["notional_mode"] = to_string(r.notional_mode);
  j["requested_leverage"] = r.requested_leverage;
  j["order_type"] = to_string(r.order_type);
  j["max_slippage_bps"] = r.max_slippage_bps;
  j["strategy_id"] = r.strategy_id;
  j["meta"] = ojson::object();
  for (const auto& [k, v] : r.meta) j["meta"][k] = v;
  return j;
}

ExecutionRequest request_from_json(const ojson& j) {
  ExecutionRequest r;
  r.symbol = j.at("symbol").get<std::string>();
  r.venue = j.at("venue").get<std::string>();
  r.timestamp_ms = j.at("timestamp_ms").get<TimestampMs>();
  r.intent = intent_from_string(j.at("intent").get<std::string>());
  r.side = side_from_string(j.at("side").get<std::string>());
  r.requested_notional = j.at("requested_notional").get<double>();
  r.notional_mode =
      notional_mode_from_string(j.at("notional_mode").get<std::string>());
  r.requested_leverage = j.at("requested_leverage").get<double>();
  r.order_type = order_type_from_string(j.at("order_type").get<std::string>());
  r.max_slippage_bps = j.at("max_slippage_bps").get<double>();
  r.strategy_id = j.at("strategy_id").get<std::string>();
  for (const auto& [k, v] : j.at("meta").items()) {
    r.meta[k] = v.get<std::string>();
  }
  return r;
}

ojson to_json(const Position& p) {
  ojson j;
  j["symbol"] = p.symbol;
  j["side"] = to_string(p.side);
  j["notional"] = p.notional;
  j["entry_price"] = p.entry_price;
  j["leverage"] = p.leverage;
  j["entry_time_ms"] = p.entry_time_ms;
  return j;
}

Position position_from_json(const ojson& j) {
  Position p;
  p.symbol = j.at("symbol").get<std::string>();
  p.side = side_from_string(j.at("side").get<std::string>());
  p.notional = j.at("notional").get<double>();
  p.entry_price = j.at("entry_price").get<double>();
  p.leverage = j.at("leverage").get<double>();
  p.entry_time_ms = j.at("entry_time_ms").get<TimestampMs>();
  return p;
}

ojson to_json(const AccountState& a) {
  ojson j;
  j["equity"] = a.equity;
  j["peak_equity"] = a.peak_equity;
  j["drawdown"] = a.drawdown();
  j["margin_ratio"] = a.margin_ratio;
  j["positions"] = ojson::array();
  for (const auto& p : a.positions) j["positions"].push_back(to_json(p));
  j["recent_order_times"] = a.recent_order_times;
  j["recent_pnl"] = a.recent_pnl;
  j["avg_holding_time_sec"] = a.avg_holding_time_sec;
  return j;
}

AccountState account_from_json(const ojson& j) {
  AccountState a;
  a.equity = j.at("equity").get<double>();
  a.peak_equity = j.at("peak_equity").get<double>();
  a.margin_ratio = j.at("margin_ratio").get<double>();
  for (const auto& p : j.at("positions")) a.positions.push_back(position_from_json(p));
  a.recent_order_times = j.at("recent_order_times").get<std::vector<TimestampMs>>();
  a.recent_pnl = j.at("recent_pnl").get<std::vector<double>>();
  a.avg_holding_time_sec = j.at("avg_holding_time_sec").get<double>();
  return a;
}

ojson to_json(const MarketState& m) {
  ojson j;
  j["sigma"] = m.sigma;
  j["sigma_ratio"] = m.sigma_ratio;
  j["funding"] = m.funding;
  j["liquidity"] = m.liquidity;
  j["regime"] = to_string(m.regime);
  j["close_price"] = m.close_price;
  j["volume"] = m.volume;
  return j;
}

MarketState market_from_json(const ojson& j) {
  MarketState m;
  m.sigma = j.at("sigma").get<double>();
  m.sigma_ratio = j.at("sigma_ratio").get<double>();
  m.funding = j.at("funding").get<double>();
  m.liquidity = j.at("liquidity").get<double>();
  m.regime = regime_from_string(j.at("regime").get<std::string>());
  m.close_price = j.at("close_price").get<double>();
  m.volume = j.at("volume").get<double>();
  return m;
}

ojson to_json(const TrustState& t) {
  ojson j;
  j["p_prov"] = t.p_prov;
  j["r_cap"] = t.r_cap;
  j["inj_alert"] = t.inj_alert;
  if (t.narrative_flag.has_value()) {
    j["narrative_flag"] = *t.narrative_flag;
  } else {
    j["narrative_flag"] = nullptr;
  }
  return j;
}

TrustState trust_from_json(const ojson& j) {
  TrustState t;
  t.p_prov = j.at("p_prov").get<double>();
  t.r_cap = j.at("r_cap").get<double>();
  t.inj_alert = j.at("inj_alert").get<bool>();
  if (!j.at("narrative_flag").is_null()) {
    t.narrative_flag = j.at("narrative_flag").get<bool>();
  }
  return t;
}

ojson to_json(const ExecutionContext& c) {
  ojson j;
  j["account"] = to_json(c.account);
  j["market"] = to_json(c.market);
  j["trust"] = to_json(c.trust);
  return j;
}

ExecutionContext context_from_json(const ojson& j) {
  ExecutionContext c;
  c.account = account_from_json(j.at("account"));
  c.market = market_from_json(j.at("market"));
  c.trust = trust_from_json(j.at("trust"));
  return c;
}

ojson to_json(const BudgetVector& b) {
  ojson j;
  j["leverage_cap"] = b.leverage_cap;
  j["notional_cap"] = b.notional_cap;
  j["order_rate_cap"] = b.order_rate_cap;
  j["slippage_cap_bps"] = b.slippage_cap_bps;
  j["max_holding_time_sec"] = b.max_holding_time_sec;
  j["cooldown_sec"] = b.cooldown_sec;
  j["staging_slices"] = b.staging_slices;
  return j;
}

BudgetVector budget_from_json(const ojson& j) {
  BudgetVector b;
  b.leverage_cap = j.at("leverage_cap").get<double>();
  b.notional_cap = j.at("notional_cap").get<double>();
  b.order_rate_cap = j.at("order_rate_cap").get<double>();
  b.slippage_cap_bps = j.at("slippage_cap_bps").get<double>();
  b.max_holding_time_sec = j.at("max_holding_time_sec").get<double>();
  b.cooldown_sec = j.at("cooldown_sec").get<double>();
  b.staging_slices = j.at("staging_slices").get<int>();
  return b;
}

ojson to_json(const ExecutionDecision& d) {
  ojson j;
  j["decision"] = to_string(d.decision);
  j["effective_leverage"] = d.effective_leverage;
  j["effective_notional"] = d.effective_notional;
  j["effective_slippage_bps"] = d.effective_slippage_bps;
  j["cooldown_sec"] = d.cooldown_sec;
  j["staging_plan"] = ojson::array();
  for (const auto& s : d.staging_plan) {
    j["staging_plan"].push_back(ojson{{"notional", s.notional}, {"delay_sec", s.delay_sec}});
  }
  j["reason"] = d.reason;
  j["audit_seq"] = d.audit_seq;
  return j;
}

ExecutionDecision decision_from_json(const ojson& j) {
  ExecutionDecision d;
  d.decision = decision_from_string(j.at("decision").get<std::string>());
  d.effective_leverage = j.at("effective_leverage").get<double>();
  d.effective_notional = j.at("effective_notional").get<double>();
  d.effective_slippage_bps = j.at("effective_slippage_bps").get<double>();
  d.cooldown_sec = j.at("cooldown_sec").get<double>();
  for (const auto& s : j.at("staging_plan")) {
    d.staging_plan.push_back({s.at("notional").get<double>(), s.at("delay_sec").get<double>()});
  }
  d.reason = j.at("reason").get<std::string>();
  d.audit_seq = j.at("audit_seq").get<std::int64_t>();
  return d;
}

std::string audit_line(const AuditRecord& rec) {
  ojson j;
  j["v"] = 1;
  j["seq"] = rec.seq;
  j["timestamp_ms"] = rec.timestamp_ms;
  j["request"] = to_json(rec.request);
  j["context_hash"] = rec.context_hash;
  j["matched_rule_id"] = rec.matched_rule_id;
  j["budgets"] = to_json(rec.budgets);
  j["requested"] = ojson{{"leverage", rec.requested_leverage},
                         {"notional", rec.requested_notional},
                         {"slippage_bps", rec.requested_slippage_bps}};
  j["effective"] = ojson{{"leverage", rec.effective_leverage},
                         {"notional", rec.effective_notional},
                         {"slippage_bps", rec.effective_slippage_bps}};
  j["decision"] = to_string(rec.decision);
  j["reason"] = rec.reason;
  j["violations"] = rec.violation_labels;
  return j.dump();
}

AuditRecord audit_from_line(const std::string& line) {
  ojson j = ojson::parse(line);
  AuditRecord rec;
  rec.seq = j.at("seq").get<std::int64_t>();
  rec.timestamp_ms = j.at("timestamp_ms").get<TimestampMs>();
  rec.request = request_from_json(j.at("request"));
  rec.context_hash = j.at("context_hash").get<std::string>();
  rec.matched_rule_id = j.at("matched_rule_id").get<std::string>();
  rec.budgets = budget_from_json(j.at("budgets"));
  rec.requested_leverage = j.at("requested").at("leverage").get<double>();
  rec.requested_notional = j.at("requested").at("notional").get<double>();
  rec.requested_slippage_bps = j.at("requested").at("slippage_bps").get<double>();
  rec.effective_leverage = j.at("effective").at("leverage").get<double>();
  rec.effective_notional = j.at("effective").at("notional").get<double>();
  rec.effective_slippage_bps = j.at("effective").at("slippage_bps").get<double>();
  rec.decision = decision_from_string(j.at("decision").get<std::string>());
  rec.reason = j.at("reason").get<std::string>();
  rec.violation_labels = j.at("violations").get<std::vector<std::string>>();
  return rec;
}

std::string snapshot_hash(const ExecutionContext& c) {
  return sha256_hex(to_json(c).dump());
}

}  // namespace sae
