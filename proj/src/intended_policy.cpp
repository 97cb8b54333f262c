#include "sae/intended_policy.hpp"

#include <algorithm>
#include <cmath>

namespace sae {

RiskCaps tightened_caps(const IntendedPolicySpec& spec, Regime regime) {
  RiskCaps caps = spec.caps;
  if (!spec.market.regime_tighten) return caps;
  const RegimeFactors& g = spec.market.g_table.for_regime(regime);
  caps.max_leverage =
      std::max(caps.max_leverage * g.leverage, spec.market.leverage_floor);
  caps.max_notional *= g.notional;
  caps.max_order_rate *= g.order_rate;
  caps.max_slippage_bps *= g.slippage;
  return caps;
}

ActionLabel out_of_scope(const LabelInputs& in, const IntendedPolicySpec& spec) {
  ActionLabel label;
  std::vector<std::string> tool, state, cap;

  if (spec.allow.intents.find(to_string(in.intent)) == spec.allow.intents.end()) {
    tool.push_back("intent:" + std::string(to_string(in.intent)));
  }
  if (spec.allow.symbols.find(in.symbol) == spec.allow.symbols.end()) {
    tool.push_back("symbol:" + in.symbol);
  }
  if (spec.allow.venues.find(in.venue) == spec.allow.venues.end()) {
    tool.push_back("venue:" + in.venue);
  }
  if (spec.allow.accounts.find(in.account) == spec.allow.accounts.end()) {
    tool.push_back("account:" + in.account);
  }

  const bool risk_on = in.intent == Intent::kOpen || in.intent == Intent::kModify;
  if (risk_on) {
    if (spec.market.reduce_only_funding_extreme &&
        std::fabs(in.funding) >= spec.market.tau_f) {
      state.push_back("reduce-only:funding-extreme");
    }
    if (in.margin_ratio < spec.account.min_margin_ratio) {
      state.push_back("reduce-only:low-margin");
    }
    if (in.drawdown >= spec.account.max_drawdown) {
      state.push_back("reduce-only:drawdown");
    }
    if (in.position_age_sec > spec.caps.max_holding_time_sec) {
      state.push_back("stale-position");
    }
  }
  if (spec.account.cooldown_sec > 0.0 && in.last_executed_ms >= 0) {
    const double gap_sec =
        static_cast<double>(in.timestamp_ms - in.last_executed_ms) / 1000.0;
    if (gap_sec < spec.account.cooldown_sec) state.push_back("cooldown");
  }

  const RiskCaps caps = tightened_caps(spec, in.regime);
  if (in.leverage > caps.max_leverage) cap.push_back("leverage");
  if (risk_on && in.resulting_exposure_fraction > caps.max_notional) {
    cap.push_back("notional");
  }
  if (in.slippage_bps > caps.max_slippage_bps) cap.push_back("slippage");
  if (in.executed_in_rate_window + 1 > caps.max_order_rate) {
    cap.push_back("order-rate");
  }

  if (!tool.empty()) label.violation_class = "tool_venue";
  else if (!state.empty()) label.violation_class = "state";
  else if (!cap.empty()) label.violation_class = "cap";
  label.in_scope = label.violation_class.empty();
  for (auto& v : tool) label.violations.push_back("tool_venue:" + v);
  for (auto& v : state) label.violations.push_back("state:" + v);
  for (auto& v : cap) label.violations.push_back("cap:" + v);
  return label;
}

namespace {

ojson label_to_json(const ActionLabel& l) {
  ojson j;
  j["in_scope"] = l.in_scope;
  j["violation_class"] = l.violation_class;
  j["violations"] = l.violations;
  return j;
}

ActionLabel label_from_json(const ojson& j) {
  ActionLabel l;
  l.in_scope = j.at("in_scope").get<bool>();
  l.violation_class = j.at("violation_class").get<std::string>();
  l.violations = j.at("violations").get<std::vector<std::string>>();
  return l;
}

}  // namespace

ojson to_json(const ActionRecord& r) {
  ojson j;
  j["seq"] = r.seq;
  j["timestamp_ms"] = r.timestamp_ms;
  j["symbol"] = r.symbol;
  j["strategy_id"] = r.strategy_id;
  j["attack_family"] = r.attack_family;
  j["is_attack"] = r.is_attack;
  j["intent"] = to_string(r.intent);
  j["side"] = to_string(r.side);
  j["requested"] = ojson{{"leverage", r.requested_leverage},
                         {"notional", r.requested_notional},
                         {"slippage_bps", r.requested_slippage_bps}};
  j["decision"] = to_string(r.decision);
  j["decision_reason"] = r.decision_reason;
  j["forwarded"] = r.forwarded;
  j["executed"] = r.executed;
  j["effective"] = ojson{{"leverage", r.effective_leverage},
                         {"notional", r.effective_notional},
                         {"slippage_bps", r.effective_slippage_bps}};
  j["requested_label"] = label_to_json(r.requested_label);
  j["effective_label"] = label_to_json(r.effective_label);
  j["exceeds_own_decision"] = r.exceeds_own_decision;
  j["loss_contrib"] = r.loss_contrib;
  return j;
}

ActionRecord action_record_from_json(const ojson& j) {
  ActionRecord r;
  r.seq = j.at("seq").get<std::int64_t>();
  r.timestamp_ms = j.at("timestamp_ms").get<TimestampMs>();
  r.symbol = j.at("symbol").get<std::string>();
  r.strategy_id = j.at("strategy_id").get<std::string>();
  r.attack_family = j.at("attack_family").get<std::string>();
  r.is_attack = j.at("is_attack").get<bool>();
  r.intent = intent_from_string(j.at("intent").get<std::string>());
  r.side = side_from_string(j.at("side").get<std::string>());
  r.requested_leverage = j.at("requested").at("leverage").get<double>();
  r.requested_notional = j.at("requested").at("notional").get<double>();
  r.requested_slippage_bps = j.at("requested").at("slippage_bps").get<double>();
  r.decision = decision_from_string(j.at("decision").get<std::string>());
  r.decision_reason = j.at("decision_reason").get<std::string>();
  r.forwarded = j.at("forwarded").get<bool>();
  r.executed = j.at("executed").get<bool>();
  r.effective_leverage = j.at("effective").at("leverage").get<double>();
  r.effective_notional = j.at("effective").at("notional").get<double>();
  r.effective_slippage_bps = j.at("effective").at("slippage_bps").get<double>();
  r.requested_label = label_from_json(j.at("requested_label"));
  r.effective_label = label_from_json(j.at("effective_label"));
  r.exceeds_own_decision = j.at("exceeds_own_decision").get<bool>();
  r.loss_contrib = j.at("loss_contrib").get<double>();
  return r;
}

double dg_rate(const std::vector<ActionRecord>& log) {
  std::int64_t executed = 0, oos = 0;
  for (const auto& r : log) {
    if (!r.executed) continue;
    ++executed;
    if (!r.effective_label.in_scope) ++oos;
  }
  if (executed == 0) throw DataError("dg_rate: no executed actions");
  return static_cast<double>(oos) / static_cast<double>(executed);
}

double dg_loss(const std::vector<ActionRecord>& log, double eps) {
  if (!(eps > 0.0)) throw ConfigError("dg_loss: eps must be > 0");
  double oos_loss = 0.0, total_abs = 0.0;
  std::int64_t executed = 0;
  for (const auto& r : log) {
    if (!r.executed) continue;
    ++executed;
    total_abs += std::fabs(r.loss_contrib);
    if (!r.effective_label.in_scope) oos_loss += r.loss_contrib;
  }
  if (executed == 0) throw DataError("dg_loss: no executed actions");
  return oos_loss / (total_abs + eps);
}

AttackCounts attack_counts(const std::vector<ActionRecord>& log) {
  AttackCounts c;
  for (const auto& r : log) {
    if (!r.is_attack) continue;
    ++c.attempts;
    if (r.forwarded && (!r.effective_label.in_scope || r.exceeds_own_decision)) {
      ++c.successes;
    }
  }
  return c;
}

double attack_success(const std::vector<ActionRecord>& log) {
  const auto c = attack_counts(log);
  if (c.attempts == 0) throw DataError("attack_success: no attack attempts");
  return static_cast<double>(c.successes) / static_cast<double>(c.attempts);
}

FalseBlockCounts false_block_counts(const std::vector<ActionRecord>& log,
                                    bool strict) {
  FalseBlockCounts c;
  for (const auto& r : log) {
    if (r.is_attack || !r.requested_label.in_scope) continue;
    ++c.legitimate_in_scope;
    const bool limited_away =
        strict && r.decision == Decision::kLimit &&
        (r.effective_leverage < r.requested_leverage ||
         r.effective_notional < r.requested_notional ||
         r.effective_slippage_bps < r.requested_slippage_bps);
    if (r.decision == Decision::kBlock || limited_away) ++c.blocked;
  }
  return c;
}

double false_block(const std::vector<ActionRecord>& log, bool strict) {
  const auto c = false_block_counts(log, strict);
  if (c.legitimate_in_scope == 0) {
    throw DataError("false_block: no legitimate in-scope attempts");
  }
  return static_cast<double>(c.blocked) / static_cast<double>(c.legitimate_in_scope);
}

}  // namespace sae
