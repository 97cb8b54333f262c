#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "sae/app_config.hpp"
#include "sae/enforcement.hpp"

using namespace sae;

namespace {

ExecutionRequest aggressive_request() {
  ExecutionRequest r;
  r.symbol = "BTCUSDT";
  r.venue = "binance-usdm";
  r.timestamp_ms = 1700000000000;
  r.intent = Intent::kOpen;
  r.side = Side::kLong;
  r.requested_notional = 0.5;
  r.requested_leverage = 5.0;
  r.order_type = OrderType::kMarket;
  r.max_slippage_bps = 80.0;
  r.strategy_id = "momentum";
  return r;
}

ExecutionContext walkthrough_context() {
  ExecutionContext c;
  c.account.equity = 10000.0;
  c.account.peak_equity = 10000.0;
  c.market.regime = Regime::kExtreme;
  c.market.sigma_ratio = 2.5;
  c.market.close_price = 30000.0;
  c.trust = TrustState{0.3, 0.0, true, std::nullopt};
  return c;
}

GateConfig full_gate_config() {
  GateConfig g;
  g.policy = default_policy();
  g.spec = default_intended_spec();
  g.trader_model = default_trader_model();
  g.switches = GateSwitches::for_variant(Variant::kFull);
  return g;
}

// Dense grid argmin of the weighted l2 distance over the budget box. The
// objective is separable across components, so the box argmin factors into
// per-axis argmins; scanning each axis densely is the same search with the
// cross-product collapsed.
double axis_argmin(double cap, double req, double step) {
  double best = 0.0, best_d = 1e300;
  for (double v = 0.0; v <= cap + 1e-12; v += step) {
    const double d = (req - v) * (req - v);
    if (d < best_d) {
      best_d = d;
      best = v;
    }
  }
  return best;
}

ProjectedAction grid_oracle(double rl, double rn, double rs, const BudgetVector& b,
                            double step = 1e-3) {
  ProjectedAction best;
  best.leverage = axis_argmin(b.leverage_cap, rl, step);
  best.notional = axis_argmin(b.notional_cap, rn, step);
  best.slippage_bps = axis_argmin(b.slippage_cap_bps, rs, step * 100.0);
  return best;
}

// Literal 3-d dense grid, affordable only at a coarse step; cross-checks the
// separability argument above.
ProjectedAction grid_oracle_3d(double rl, double rn, double rs,
                               const BudgetVector& b, double step) {
  ProjectedAction best;
  double best_d = 1e300;
  for (double l = 0.0; l <= b.leverage_cap + 1e-12; l += step) {
    const double dl = (rl - l) * (rl - l);
    for (double n = 0.0; n <= b.notional_cap + 1e-12; n += step) {
      const double dn = (rn - n) * (rn - n);
      for (double s = 0.0; s <= b.slippage_cap_bps / 100.0 + 1e-12; s += step) {
        const double ds = (rs / 100.0 - s) * (rs / 100.0 - s);
        const double d = dl + dn + ds;
        if (d < best_d) {
          best_d = d;
          best = {l, n, s * 100.0, std::sqrt(d)};
        }
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("projection clamps the aggressive request to the tight caps") {
  BudgetVector caps;
  caps.leverage_cap = 1.0;
  caps.notional_cap = 0.20;
  caps.slippage_cap_bps = 30.0;
  const auto p = project_action(5.0, 0.5, 80.0, caps);
  CHECK(p.leverage == doctest::Approx(1.0));
  CHECK(p.notional == doctest::Approx(0.20));
  CHECK(p.slippage_bps == doctest::Approx(30.0));
  CHECK(p.distance > 0.0);
}

TEST_CASE("projection is the identity on feasible requests") {
  const auto p = project_action(2.0, 0.3, 20.0, BudgetVector{});
  CHECK(p.leverage == 2.0);
  CHECK(p.notional == 0.3);
  CHECK(p.slippage_bps == 20.0);
  CHECK(p.distance == 0.0);
}

TEST_CASE("projection is idempotent") {
  std::mt19937_64 rng(101);
  auto unit = [&rng]() {
    return (static_cast<double>(rng() >> 11) + 0.5) / 9007199254740992.0;
  };
  for (int i = 0; i < 300; ++i) {
    BudgetVector b;
    b.leverage_cap = unit() * 5.0;
    b.notional_cap = unit();
    b.slippage_cap_bps = unit() * 100.0;
    const double rl = unit() * 10.0, rn = unit() * 2.0, rs = unit() * 200.0;
    const auto once = project_action(rl, rn, rs, b);
    const auto twice = project_action(once.leverage, once.notional,
                                      once.slippage_bps, b);
    CHECK(twice.leverage == once.leverage);
    CHECK(twice.notional == once.notional);
    CHECK(twice.slippage_bps == once.slippage_bps);
    CHECK(twice.distance == 0.0);
  }
}

TEST_CASE("projection matches the dense grid argmin") {
  std::mt19937_64 rng(107);
  auto unit = [&rng]() {
    return (static_cast<double>(rng() >> 11) + 0.5) / 9007199254740992.0;
  };
  for (int i = 0; i < 200; ++i) {
    BudgetVector b;
    b.leverage_cap = 0.5 + unit() * 2.0;
    b.notional_cap = 0.2 + unit() * 0.8;
    b.slippage_cap_bps = 20.0 + unit() * 60.0;
    const double rl = unit() * 5.0, rn = unit() * 1.5, rs = unit() * 150.0;
    const auto got = project_action(rl, rn, rs, b);
    const auto oracle = grid_oracle(rl, rn, rs, b);
    CHECK(std::fabs(got.leverage - oracle.leverage) <= 1e-3);
    CHECK(std::fabs(got.notional - oracle.notional) <= 1e-3);
    CHECK(std::fabs(got.slippage_bps - oracle.slippage_bps) <= 1e-3 * 100.0);
    if (i < 5) {
      const auto full = grid_oracle_3d(rl, rn, rs, b, 1e-2);
      CHECK(std::fabs(got.leverage - full.leverage) <= 1e-2);
      CHECK(std::fabs(got.notional - full.notional) <= 1e-2);
      CHECK(std::fabs(got.slippage_bps - full.slippage_bps) <= 1.0);
    }
  }
}

TEST_CASE("projection respects notional headroom from standing exposure") {
  BudgetVector b;
  b.notional_cap = 0.5;
  const auto p = project_action(1.0, 0.4, 10.0, b, ProjectionWeights{}, 0.35);
  CHECK(p.notional == doctest::Approx(0.15));
  const auto full = project_action(1.0, 0.4, 10.0, b, ProjectionWeights{}, 0.6);
  CHECK(full.notional == 0.0);
}

TEST_CASE("cooldown guard: strict below, pass at the boundary") {
  TemporalState ts;
  CHECK(ts.check_cooldown("BTCUSDT", 1000, 120.0) == GuardResult::kPass);
  ts.note_execution("BTCUSDT", 0);
  CHECK(ts.check_cooldown("BTCUSDT", 60'000, 120.0) == GuardResult::kNoOp);
  CHECK(ts.check_cooldown("BTCUSDT", 120'000, 120.0) == GuardResult::kPass);
  CHECK(ts.check_cooldown("BTCUSDT", 50'000, 0.0) == GuardResult::kPass);
  CHECK(ts.check_cooldown("BTCUSDT", -5, 120.0) == GuardResult::kClockRegression);
}

TEST_CASE("rate limit counts executions in the half-open window") {
  TemporalState ts;
  CHECK(ts.check_rate_limit("S", 1000, 60.0, 4.0) == GuardResult::kPass);
  for (TimestampMs t : {10'000, 20'000, 30'000, 40'000}) ts.note_execution("S", t);
  // Four executions inside (now-60s, now]: at the cap, so NoOp.
  CHECK(ts.executed_in_window("S", 60'000, 60.0) == 4);
  CHECK(ts.check_rate_limit("S", 60'000, 60.0, 4.0) == GuardResult::kNoOp);
  // An order exactly at the window's open edge drops out: 10'000 <= 70k-60k.
  CHECK(ts.executed_in_window("S", 70'000, 60.0) == 3);
  CHECK(ts.check_rate_limit("S", 70'000, 60.0, 4.0) == GuardResult::kPass);
  CHECK_THROWS_AS(ts.note_execution("S", 1000), Error);
}

TEST_CASE("stage_plan splits evenly with an exact sequential sum") {
  const auto single = stage_plan(0.3, 1, 60.0);
  REQUIRE(single.size() == 1);
  CHECK(single[0].notional == 0.3);
  CHECK(single[0].delay_sec == 0.0);

  const auto five = stage_plan(0.20, 5, 60.0);
  REQUIRE(five.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(five[i].notional == doctest::Approx(0.04).epsilon(1e-15));
    CHECK(five[i].delay_sec == doctest::Approx(60.0 * i));
  }

  const auto four = stage_plan(0.10, 4, 30.0);
  for (const auto& s : four) CHECK(s.notional == doctest::Approx(0.025));

  std::mt19937_64 rng(211);
  auto unit = [&rng]() {
    return (static_cast<double>(rng() >> 11) + 0.5) / 9007199254740992.0;
  };
  for (int i = 0; i < 200; ++i) {
    const double notional = unit();
    const int slices = 1 + static_cast<int>(rng() % 9);
    const auto plan = stage_plan(notional, slices, 60.0);
    double sum = 0.0;
    for (const auto& s : plan) sum += s.notional;
    CHECK(sum == notional);  // exact, not approximate
  }
  CHECK_THROWS_AS(stage_plan(0.1, 0, 60.0), ConfigError);
}

TEST_CASE("allowlists block unlisted venues, symbols, intents and accounts") {
  const Allowlists allow;
  auto r = aggressive_request();
  CHECK(!allowlist_violation(r, allow).has_value());

  r.venue = "shadow-venue";
  CHECK(allowlist_violation(r, allow).value().find("venue:") == 0);

  r = aggressive_request();
  r.intent = Intent::kCancel;
  CHECK(allowlist_violation(r, allow).value().find("intent:") == 0);

  r = aggressive_request();
  r.meta["account"] = "shadow";
  CHECK(allowlist_violation(r, allow).value().find("account:") == 0);
}

TEST_CASE("decide reproduces the aggressive-request walkthrough") {
  EnforcementGate gate(full_gate_config());
  const auto res = gate.decide(aggressive_request(), walkthrough_context(), 0.1);
  CHECK(res.decision.decision == Decision::kLimit);
  CHECK(res.decision.effective_leverage == doctest::Approx(1.0));
  CHECK(res.decision.effective_notional == doctest::Approx(0.20).epsilon(1e-12));
  CHECK(res.decision.effective_slippage_bps <= 30.0 + 1e-12);
  CHECK(res.decision.cooldown_sec == doctest::Approx(120.0));
  CHECK(res.decision.staging_plan.size() == 5);
  CHECK(res.decision.reason.find("extreme regime") != std::string::npos);
  CHECK(res.decision.reason.find("low provenance") != std::string::npos);
  CHECK(res.audit.decision == Decision::kLimit);
}

TEST_CASE("decide allows trusted in-budget requests unchanged") {
  EnforcementGate gate(full_gate_config());
  ExecutionContext ctx;
  ctx.account.equity = 10000.0;
  ctx.account.peak_equity = 10000.0;
  ctx.market.regime = Regime::kCalm;
  ctx.trust = TrustState{1.0, 0.0, false, std::nullopt};
  auto r = aggressive_request();
  r.requested_leverage = 2.0;
  r.requested_notional = 0.3;
  r.max_slippage_bps = 20.0;
  const auto res = gate.decide(r, ctx, 0.1);
  CHECK(res.decision.decision == Decision::kAllow);
  CHECK(res.decision.effective_leverage == 2.0);
  CHECK(res.decision.effective_notional == 0.3);
  CHECK(res.decision.effective_slippage_bps == 20.0);
  CHECK(res.decision.reason == "within budgets");
}

TEST_CASE("a flood is rate-limited once the window fills") {
  GateConfig cfg = full_gate_config();
  // Isolate the rate limiter: no cooldown anywhere.
  cfg.policy.tightening.regime_ops.cooldown_calm = 0.0;
  cfg.policy.defaults.cooldown_sec = 0.0;
  EnforcementGate gate(cfg);

  ExecutionContext ctx;
  ctx.account.equity = 10000.0;
  ctx.account.peak_equity = 10000.0;
  ctx.market.regime = Regime::kCalm;
  ctx.trust = TrustState{1.0, 0.0, false, std::nullopt};

  int allowed = 0, rate_blocked = 0;
  for (int i = 0; i < 10; ++i) {
    auto r = aggressive_request();
    r.requested_leverage = 1.0;
    r.requested_notional = 0.01;
    r.max_slippage_bps = 10.0;
    r.timestamp_ms = 1700000000000 + i * 500;
    const auto res = gate.decide(r, ctx, 0.1);
    if (res.decision.decision != Decision::kBlock) {
      ++allowed;
      gate.note_execution(r.symbol, r.timestamp_ms);
      Position p;
      p.symbol = r.symbol;
      p.notional = ctx.account.equity * 0.01 * allowed;
      ctx.account.positions = {p};
    } else {
      CHECK(res.decision.reason == "rate");
      ++rate_blocked;
    }
  }
  CHECK(allowed == 4);  // default rate cap
  CHECK(rate_blocked == 6);
}

TEST_CASE("decide blocks opens with no notional headroom left") {
  EnforcementGate gate(full_gate_config());
  ExecutionContext ctx;
  ctx.account.equity = 10000.0;
  ctx.account.peak_equity = 10000.0;
  ctx.market.regime = Regime::kCalm;
  ctx.trust = TrustState{1.0, 0.0, false, std::nullopt};
  Position p;
  p.symbol = "BTCUSDT";
  p.notional = 10000.0;  // full cap already deployed
  ctx.account.positions = {p};
  const auto res = gate.decide(aggressive_request(), ctx, 0.1);
  CHECK(res.decision.decision == Decision::kBlock);
  CHECK(res.decision.reason.find("exposure-cap") == 0);
}

TEST_CASE("malformed requests are blocked, never thrown") {
  EnforcementGate gate(full_gate_config());
  auto r = aggressive_request();
  r.requested_leverage = -2.0;
  const auto res = gate.decide(r, walkthrough_context(), 0.1);
  CHECK(res.decision.decision == Decision::kBlock);
  CHECK(res.decision.reason.find("malformed") == 0);
}

TEST_CASE("pass-through gate forwards requests untouched") {
  GateConfig cfg = full_gate_config();
  cfg.switches = GateSwitches::for_variant(Variant::kNoSae);
  EnforcementGate gate(cfg);
  const auto res = gate.decide(aggressive_request(), walkthrough_context(), 0.0);
  CHECK(res.decision.decision == Decision::kAllow);
  CHECK(res.decision.effective_leverage == 5.0);
  CHECK(res.decision.effective_notional == 0.5);
  CHECK(res.decision.effective_slippage_bps == 80.0);
}

TEST_CASE("every allow/limit decision is feasible against its own budgets") {
  EnforcementGate gate(full_gate_config());
  std::mt19937_64 rng(301);
  auto unit = [&rng]() {
    return (static_cast<double>(rng() >> 11) + 0.5) / 9007199254740992.0;
  };
  for (int i = 0; i < 300; ++i) {
    auto r = aggressive_request();
    r.timestamp_ms = 1700000000000 + i * 1'000'000;
    r.requested_leverage = unit() * 10.0 + 0.01;
    r.requested_notional = unit() * 2.0;
    r.max_slippage_bps = unit() * 200.0;
    ExecutionContext ctx;
    ctx.account.equity = 10000.0;
    ctx.account.peak_equity = 10000.0 * (1.0 + unit());
    ctx.account.margin_ratio = unit() * 5.0;
    ctx.market.regime = static_cast<Regime>(rng() % 3);
    ctx.trust = TrustState{unit(), unit(), rng() % 2 == 0, std::nullopt};
    const auto res = gate.decide(r, ctx, unit() * 0.4);
    if (res.decision.decision == Decision::kBlock) continue;
    CHECK(res.decision.effective_leverage <= res.audit.budgets.leverage_cap + 1e-12);
    CHECK(res.decision.effective_notional <= res.audit.budgets.notional_cap + 1e-12);
    CHECK(res.decision.effective_slippage_bps <=
          res.audit.budgets.slippage_cap_bps + 1e-12);
  }
}
