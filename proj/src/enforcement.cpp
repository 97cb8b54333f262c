#include "sae/enforcement.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace sae {

const char* to_string(Variant v) {
  switch (v) {
    case Variant::kNoSae: return "nosae";
    case Variant::kStaticOms: return "static-oms";
    case Variant::kBudget: return "budget";
    case Variant::kBudgetCooldown: return "budget-cooldown";
    case Variant::kFull: return "full";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "nosae") return Variant::kNoSae;
  if (s == "static-oms") return Variant::kStaticOms;
  if (s == "budget") return Variant::kBudget;
  if (s == "budget-cooldown") return Variant::kBudgetCooldown;
  if (s == "full") return Variant::kFull;
  throw ConfigError("unknown variant '" + s + "'");
}

GateSwitches GateSwitches::for_variant(Variant v) {
  GateSwitches s;
  switch (v) {
    case Variant::kNoSae:
      s.pass_through = true;
      break;
    case Variant::kStaticOms:
      s.static_oms = true;
      s.projection = true;
      s.temporal = true;  // rate limit only; static cooldown is 0
      break;
    case Variant::kFull:
      s.trust_budgets = true;
      s.rules = true;
      s.allowlists = true;
      [[fallthrough]];
    case Variant::kBudgetCooldown:
      s.temporal = true;
      s.staging = true;
      [[fallthrough]];
    case Variant::kBudget:
      s.projection = true;
      s.regime_budgets = true;
      s.account_budgets = true;
      break;
  }
  return s;
}

ProjectedAction project_action(double req_leverage, double req_notional,
                               double req_slippage_bps, const BudgetVector& b,
                               const ProjectionWeights& w, double exposure_in_use) {
  check_budget(b);
  if (!(w.leverage > 0.0 && w.notional > 0.0 && w.slippage > 0.0)) {
    throw ConfigError("projection weights must be > 0");
  }
  ProjectedAction out;
  const double headroom = std::max(0.0, b.notional_cap - exposure_in_use);
  out.leverage = std::clamp(req_leverage, 0.0, b.leverage_cap);
  out.notional = std::clamp(req_notional, 0.0, headroom);
  out.slippage_bps = std::clamp(req_slippage_bps, 0.0, b.slippage_cap_bps);
  const double dl = req_leverage - out.leverage;
  const double dn = req_notional - out.notional;
  const double ds = req_slippage_bps - out.slippage_bps;
  out.distance =
      std::sqrt(w.leverage * dl * dl + w.notional * dn * dn + w.slippage * ds * ds);
  return out;
}

GuardResult TemporalState::check_cooldown(const std::string& symbol,
                                          TimestampMs now_ms,
                                          double cooldown_sec) const {
  auto it = last_exec_.find(symbol);
  if (it == last_exec_.end()) return GuardResult::kPass;
  if (now_ms < it->second) return GuardResult::kClockRegression;
  const double elapsed_ms = static_cast<double>(now_ms - it->second);
  return elapsed_ms < cooldown_sec * 1000.0 ? GuardResult::kNoOp
                                            : GuardResult::kPass;
}

int TemporalState::executed_in_window(const std::string& symbol,
                                      TimestampMs now_ms,
                                      double window_sec) const {
  auto it = order_times_.find(symbol);
  if (it == order_times_.end()) return 0;
  const auto window_start =
      now_ms - static_cast<TimestampMs>(window_sec * 1000.0);
  int count = 0;
  for (auto rit = it->second.rbegin(); rit != it->second.rend(); ++rit) {
    if (*rit > now_ms) continue;
    if (*rit <= window_start) break;
    ++count;
  }
  return count;
}

GuardResult TemporalState::check_rate_limit(const std::string& symbol,
                                            TimestampMs now_ms,
                                            double window_sec,
                                            double rate_cap) const {
  auto it = last_exec_.find(symbol);
  if (it != last_exec_.end() && now_ms < it->second) {
    return GuardResult::kClockRegression;
  }
  return executed_in_window(symbol, now_ms, window_sec) >= rate_cap
             ? GuardResult::kNoOp
             : GuardResult::kPass;
}

std::optional<TimestampMs> TemporalState::last_execution(
    const std::string& symbol) const {
  auto it = last_exec_.find(symbol);
  if (it == last_exec_.end()) return std::nullopt;
  return it->second;
}

void TemporalState::note_execution(const std::string& symbol, TimestampMs now_ms) {
  auto& times = order_times_[symbol];
  if (!times.empty() && now_ms < times.back()) {
    throw Error("temporal state: execution timestamps must be nondecreasing");
  }
  times.push_back(now_ms);
  // Keep an hour of history; no guard window is longer.
  while (!times.empty() && times.front() < now_ms - 3'600'000) times.pop_front();
  last_exec_[symbol] = now_ms;
}

std::vector<StagingSlice> stage_plan(double notional, int slices,
                                     double spacing_sec) {
  if (slices < 1) throw ConfigError("stage_plan: slices must be >= 1");
  std::vector<StagingSlice> plan;
  plan.reserve(static_cast<std::size_t>(slices));
  const double base = notional / slices;
  double allocated = 0.0;
  for (int i = 0; i < slices - 1; ++i) {
    plan.push_back({base, spacing_sec * i});
    allocated += base;
  }
  plan.push_back({notional - allocated, spacing_sec * (slices - 1)});
  return plan;
}

std::optional<std::string> allowlist_violation(const ExecutionRequest& r,
                                               const Allowlists& allow) {
  if (allow.intents.find(to_string(r.intent)) == allow.intents.end()) {
    return "intent:" + std::string(to_string(r.intent));
  }
  if (allow.symbols.find(r.symbol) == allow.symbols.end()) {
    return "symbol:" + r.symbol;
  }
  if (allow.venues.find(r.venue) == allow.venues.end()) {
    return "venue:" + r.venue;
  }
  auto acct = r.meta.find("account");
  const std::string account = acct == r.meta.end() ? "primary" : acct->second;
  if (allow.accounts.find(account) == allow.accounts.end()) {
    return "account:" + account;
  }
  return std::nullopt;
}

EnforcementGate::EnforcementGate(GateConfig cfg) : cfg_(std::move(cfg)) {
  check_budget(cfg_.policy.defaults);
  check_budget(cfg_.static_oms);
}

GateResult EnforcementGate::blocked(AuditRecord&& audit, const std::string& reason,
                                    std::vector<std::string> violations, int ops) {
  audit.decision = Decision::kBlock;
  audit.reason = reason;
  audit.violation_labels = std::move(violations);
  audit.effective_leverage = 0.0;
  audit.effective_notional = 0.0;
  audit.effective_slippage_bps = 0.0;
  GateResult out;
  out.decision.decision = Decision::kBlock;
  out.decision.reason = reason;
  out.decision.audit_seq = audit.seq;
  out.audit = std::move(audit);
  out.ops = ops;
  return out;
}

namespace {

std::string tightening_reason(const ExecutionContext& ctx, const GateConfig& cfg,
                              const GateSwitches& sw) {
  std::string reason;
  auto add = [&](const char* part) {
    if (!reason.empty()) reason += " + ";
    reason += part;
  };
  if (sw.regime_budgets && ctx.market.regime == Regime::kExtreme) add("extreme regime");
  if (sw.regime_budgets && ctx.market.regime == Regime::kVolatile) add("volatile regime");
  if (sw.trust_budgets) {
    if (ctx.trust.p_prov < cfg.policy.tightening.q_params.prov_pivot) add("low provenance");
    if (ctx.trust.inj_alert) add("injection alert");
    if (ctx.trust.r_cap >= 0.5) add("capability risk");
  }
  if (sw.account_budgets &&
      account_factor(ctx.account, cfg.policy.tightening.h_params) < 1.0) {
    add("account stress");
  }
  if (reason.empty()) reason = "budget caps";
  return reason;
}

}  // namespace

GateResult EnforcementGate::decide(const ExecutionRequest& req,
                                   const ExecutionContext& ctx, double p_t) {
  const auto t0 = std::chrono::steady_clock::now();
  const GateSwitches& sw = cfg_.switches;
  int ops = 0;

  AuditRecord audit;
  audit.seq = next_seq_++;
  audit.timestamp_ms = req.timestamp_ms;
  audit.request = req;
  audit.requested_leverage = req.requested_leverage;
  audit.requested_slippage_bps = req.max_slippage_bps;

  GateResult result;
  try {
    const ValidatedRequest validated = validate_request(req, ctx.account.equity);
    ++ops;
    audit.request = validated.request;
    audit.requested_notional = validated.notional_fraction;

    const bool is_open = validated.request.intent == Intent::kOpen;

    if (sw.pass_through) {
      // No middleware work at all, snapshot hashing included.
      BudgetVector unbounded{kUnboundedCap, kUnboundedCap, kUnboundedCap,
                             kUnboundedCap, kUnboundedCap, 0.0, 1};
      audit.budgets = unbounded;
      audit.decision = Decision::kAllow;
      audit.reason = "pass-through";
      audit.effective_leverage = validated.request.requested_leverage;
      audit.effective_notional = is_open ? validated.notional_fraction : 0.0;
      audit.effective_slippage_bps = validated.request.max_slippage_bps;
      result.decision.decision = Decision::kAllow;
      result.decision.effective_leverage = audit.effective_leverage;
      result.decision.effective_notional = audit.effective_notional;
      result.decision.effective_slippage_bps = audit.effective_slippage_bps;
      result.decision.reason = audit.reason;
      result.decision.audit_seq = audit.seq;
      result.audit = audit;
      result.ops = ops;
    } else {
      audit.context_hash = snapshot_hash(ctx);
      ++ops;
      if (sw.allowlists) {
        ++ops;
        if (auto violation = allowlist_violation(validated.request, cfg_.spec.allow)) {
          audit.budgets = sw.static_oms ? cfg_.static_oms : cfg_.policy.defaults;
          result = blocked(std::move(audit), "allowlist: " + *violation,
                           {"tool_venue:" + *violation}, ops);
          goto done;
        }
      }

      BudgetVector budgets;
      if (sw.static_oms) {
        budgets = cfg_.static_oms;
      } else {
        ++ops;
        budgets = tighten_budgets(
            cfg_.policy.defaults, ctx.market, ctx.account, ctx.trust,
            cfg_.policy.tightening,
            {sw.regime_budgets, sw.account_budgets, sw.trust_budgets});
      }

      std::string matched_rule;
      Decision rule_decision = Decision::kAllow;
      if (sw.rules) {
        ++ops;
        RuleEvalInput in;
        in.regime = ctx.market.regime;
        in.intent = validated.request.intent;
        in.p_t = p_t;
        in.funding = ctx.market.funding;
        in.trust = ctx.trust;
        in.account = &ctx.account;
        const RuleOutcome outcome = evaluate_rules(cfg_.policy.rules, in, budgets);
        matched_rule = outcome.matched_rule_id;
        audit.matched_rule_id = matched_rule;
        if (outcome.decision == Decision::kBlock) {
          audit.budgets = outcome.budgets;
          result = blocked(std::move(audit),
                           matched_rule.empty() ? "rule block" : "rule: " + matched_rule,
                           {"rule:" + matched_rule}, ops);
          goto done;
        }
        rule_decision = outcome.decision;
        budgets = outcome.budgets;
      }
      audit.budgets = budgets;

      double exposure_in_use = 0.0;
      if (is_open && ctx.account.equity > 0.0) {
        for (const auto& pos : ctx.account.positions) {
          if (pos.symbol == validated.request.symbol) {
            exposure_in_use += pos.notional / ctx.account.equity;
          }
        }
      }

      double eff_leverage = validated.request.requested_leverage;
      double eff_notional = is_open ? validated.notional_fraction : 0.0;
      double eff_slippage = validated.request.max_slippage_bps;
      bool modified = false;
      if (sw.projection) {
        ++ops;
        const ProjectedAction proj =
            project_action(validated.request.requested_leverage,
                           is_open ? validated.notional_fraction : 0.0,
                           validated.request.max_slippage_bps, budgets,
                           cfg_.weights, is_open ? exposure_in_use : 0.0);
        if (is_open && validated.notional_fraction > 0.0 && proj.notional <= 0.0) {
          result = blocked(std::move(audit), "exposure-cap: no notional headroom",
                           {"cap:notional"}, ops);
          goto done;
        }
        eff_leverage = proj.leverage;
        eff_slippage = proj.slippage_bps;
        if (is_open) {
          eff_notional = proj.notional;
          modified = proj.distance > 0.0;
        } else {
          modified = eff_slippage < validated.request.max_slippage_bps;
        }
      }

      if (sw.temporal) {
        ++ops;
        const auto cd = temporal_.check_cooldown(validated.request.symbol,
                                                 validated.request.timestamp_ms,
                                                 budgets.cooldown_sec);
        if (cd == GuardResult::kClockRegression) {
          result = blocked(std::move(audit), "cooldown: clock regression",
                           {"state:cooldown", "clock-regression"}, ops);
          goto done;
        }
        if (cd == GuardResult::kNoOp) {
          result = blocked(std::move(audit), "cooldown", {"state:cooldown"}, ops);
          goto done;
        }
        ++ops;
        const auto rl = temporal_.check_rate_limit(
            validated.request.symbol, validated.request.timestamp_ms,
            cfg_.policy.rate_window_sec, budgets.order_rate_cap);
        if (rl == GuardResult::kNoOp) {
          result = blocked(std::move(audit), "rate", {"cap:order-rate"}, ops);
          goto done;
        }
      }

      ExecutionDecision decision;
      decision.decision =
          rule_decision == Decision::kLimit || modified ? Decision::kLimit
                                                        : Decision::kAllow;
      decision.effective_leverage = eff_leverage;
      decision.effective_notional = eff_notional;
      decision.effective_slippage_bps = eff_slippage;
      decision.cooldown_sec = budgets.cooldown_sec;
      if (sw.staging && is_open && budgets.staging_slices > 1 && eff_notional > 0.0) {
        ++ops;
        decision.staging_plan =
            stage_plan(eff_notional, budgets.staging_slices, cfg_.staging_spacing_sec);
      }
      if (decision.decision == Decision::kLimit) {
        decision.reason = !matched_rule.empty() && rule_decision == Decision::kLimit
                              ? "rule: " + matched_rule
                              : tightening_reason(ctx, cfg_, sw);
      } else {
        decision.reason = "within budgets";
      }
      decision.audit_seq = audit.seq;

      audit.decision = decision.decision;
      audit.reason = decision.reason;
      audit.effective_leverage = decision.effective_leverage;
      audit.effective_notional = decision.effective_notional;
      audit.effective_slippage_bps = decision.effective_slippage_bps;

      result.decision = std::move(decision);
      result.audit = std::move(audit);
      result.ops = ops;
    }
  } catch (const MalformedRequest& e) {
    result = blocked(std::move(audit), std::string("malformed: ") + e.what(),
                     {"malformed"}, ops);
  } catch (const std::exception& e) {
    // Fail closed: availability loss beats out-of-scope execution.
    result = blocked(std::move(audit), std::string("internal-error: ") + e.what(),
                     {"internal-error"}, ops);
  }

done:
  const auto t1 = std::chrono::steady_clock::now();
  result.audit.latency_ms =
      std::chrono::duration<double, std::milli>(t1 - t0).count();
  return result;
}

void EnforcementGate::note_execution(const std::string& symbol, TimestampMs now_ms) {
  temporal_.note_execution(symbol, now_ms);
}

}  // namespace sae
