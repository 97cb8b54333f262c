#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "sae/contract.hpp"

using namespace sae;

namespace {

ExecutionRequest sample_request() {
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
  r.meta["source"] = "strategy";
  return r;
}

ExecutionContext fixture_context() {
  ExecutionContext c;
  c.account.equity = 10000.0;
  c.account.peak_equity = 10500.0;
  c.account.margin_ratio = 3.25;
  Position p;
  p.symbol = "BTCUSDT";
  p.side = Side::kLong;
  p.notional = 2000.0;
  p.entry_price = 30000.0;
  p.leverage = 2.0;
  p.entry_time_ms = 1700000000000;
  c.account.positions.push_back(p);
  c.account.recent_order_times = {1700000000000, 1700000900000};
  c.account.recent_pnl = {12.5, -3.75};
  c.account.avg_holding_time_sec = 5400.0;
  c.market.sigma = 0.0125;
  c.market.sigma_ratio = 1.6;
  c.market.funding = 0.0001;
  c.market.liquidity = 52000.0;
  c.market.regime = Regime::kVolatile;
  c.market.close_price = 30120.5;
  c.market.volume = 812.0;
  c.trust.p_prov = 0.35;
  c.trust.r_cap = 0.6;
  c.trust.inj_alert = true;
  return c;
}

}  // namespace

TEST_CASE("validate_request accepts the aggressive but well-formed request") {
  const auto v = validate_request(sample_request(), 10000.0);
  CHECK(v.notional_fraction == 0.5);
  CHECK(v.request.requested_leverage == 5.0);
  CHECK(v.request.max_slippage_bps == 80.0);
}

TEST_CASE("validate_request rejects boundary violations") {
  auto r = sample_request();
  r.requested_leverage = 0.0;
  CHECK_THROWS_AS(validate_request(r, 10000.0), MalformedRequest);
  r = sample_request();
  r.requested_notional = -0.1;
  CHECK_THROWS_AS(validate_request(r, 10000.0), MalformedRequest);
  r = sample_request();
  r.max_slippage_bps = -1.0;
  CHECK_THROWS_AS(validate_request(r, 10000.0), MalformedRequest);
  r = sample_request();
  r.symbol.clear();
  CHECK_THROWS_AS(validate_request(r, 10000.0), MalformedRequest);
}

TEST_CASE("absolute notionals normalize against current equity") {
  auto r = sample_request();
  r.notional_mode = NotionalMode::kAbsolute;
  r.requested_notional = 2000.0;
  const auto v = validate_request(r, 10000.0);
  CHECK(v.notional_fraction == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(v.request.notional_mode == NotionalMode::kFraction);

  r.requested_notional = 2000.0;
  CHECK_THROWS_AS(validate_request(r, 0.0), MalformedRequest);
}

TEST_CASE("snapshot_hash is deterministic and field-sensitive") {
  const auto c = fixture_context();
  CHECK(snapshot_hash(c) == snapshot_hash(fixture_context()));

  std::mt19937_64 rng(7);
  for (int i = 0; i < 20; ++i) {
    auto other = fixture_context();
    other.trust.p_prov =
        (static_cast<double>(rng() >> 11) + 0.5) / 9007199254740992.0;
    if (other.trust.p_prov == c.trust.p_prov) continue;
    CHECK(snapshot_hash(other) != snapshot_hash(c));
  }
}

TEST_CASE("snapshot_hash golden fixture") {
  CHECK(snapshot_hash(fixture_context()) ==
        "4852d9c98cb10a721d3b9f51929d34c2c99341fc56b3268d3a3b5392f01695ea");
}

TEST_CASE("contract types round-trip through their canonical serialization") {
  std::mt19937_64 rng(42);
  auto unit = [&rng]() {
    return (static_cast<double>(rng() >> 11) + 0.5) / 9007199254740992.0;
  };
  for (int i = 0; i < 50; ++i) {
    auto r = sample_request();
    r.timestamp_ms += static_cast<TimestampMs>(rng() % 1000000);
    r.requested_notional = unit() * 3.0;
    r.requested_leverage = unit() * 10.0 + 0.01;
    r.max_slippage_bps = unit() * 200.0;
    r.intent = static_cast<Intent>(rng() % 4);
    r.side = static_cast<Side>(rng() % 2);
    r.meta["k" + std::to_string(rng() % 5)] = std::to_string(rng() % 100);
    const auto back = request_from_json(to_json(r));
    CHECK(to_json(back).dump() == to_json(r).dump());

    auto c = fixture_context();
    c.account.equity = unit() * 20000.0 + 1.0;
    c.market.sigma = unit() * 0.1;
    c.trust.p_prov = unit();
    if (i % 3 == 0) c.trust.narrative_flag = (i % 2 == 0);
    const auto cback = context_from_json(to_json(c));
    CHECK(to_json(cback).dump() == to_json(c).dump());

    BudgetVector b{unit() * 5.0, unit(), unit() * 10.0, unit() * 100.0,
                   unit() * 100000.0, unit() * 300.0,
                   1 + static_cast<int>(rng() % 6)};
    CHECK(to_json(budget_from_json(to_json(b))).dump() == to_json(b).dump());

    ExecutionDecision d;
    d.decision = static_cast<Decision>(rng() % 3);
    d.effective_leverage = unit() * 3.0;
    d.effective_notional = unit();
    d.effective_slippage_bps = unit() * 50.0;
    d.cooldown_sec = unit() * 120.0;
    d.staging_plan = {{unit(), 0.0}, {unit(), 60.0}};
    d.reason = "test";
    d.audit_seq = static_cast<std::int64_t>(rng() % 1000);
    CHECK(to_json(decision_from_json(to_json(d))).dump() == to_json(d).dump());
  }
}

TEST_CASE("audit lines round-trip and stay latency-free") {
  AuditRecord rec;
  rec.seq = 12;
  rec.timestamp_ms = 1700000000123;
  rec.request = sample_request();
  rec.context_hash = "abc123";
  rec.matched_rule_id = "limit-elevated-risk";
  rec.budgets = BudgetVector{};
  rec.requested_leverage = 5.0;
  rec.requested_notional = 0.5;
  rec.requested_slippage_bps = 80.0;
  rec.effective_leverage = 1.0;
  rec.effective_notional = 0.2;
  rec.effective_slippage_bps = 30.0;
  rec.decision = Decision::kLimit;
  rec.reason = "extreme regime + low provenance";
  rec.violation_labels = {"cap:leverage"};
  rec.latency_ms = 0.123;  // volatile; must not appear in the line

  const std::string line = audit_line(rec);
  CHECK(line.find("latency") == std::string::npos);
  const auto back = audit_from_line(line);
  CHECK(audit_line(back) == line);
  CHECK(back.decision == Decision::kLimit);
  CHECK(back.effective_notional == 0.2);
}

TEST_CASE("budget invariants are enforced") {
  BudgetVector b;
  b.staging_slices = 0;
  CHECK_THROWS_AS(check_budget(b), ConfigError);
  b = BudgetVector{};
  b.leverage_cap = -1.0;
  CHECK_THROWS_AS(check_budget(b), ConfigError);
  CHECK_NOTHROW(check_budget(BudgetVector{}));
}

TEST_CASE("enum parsing rejects unknown values") {
  CHECK_THROWS_AS(intent_from_string("openn"), MalformedRequest);
  CHECK_THROWS_AS(side_from_string("long"), MalformedRequest);
  CHECK_THROWS_AS(decision_from_string("allow"), MalformedRequest);
  CHECK(regime_from_string("volatile") == Regime::kVolatile);
}
