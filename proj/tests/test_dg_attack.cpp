#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <set>

#include "sae/app_config.hpp"
#include "sae/attack_gen.hpp"
#include "sae/data_ingest.hpp"
#include "sae/intended_policy.hpp"
#include "sae/run_io.hpp"
#include "sae/simulator.hpp"

using namespace sae;

namespace {

LabelInputs clean_open() {
  LabelInputs in;
  in.intent = Intent::kOpen;
  in.symbol = "BTCUSDT";
  in.venue = "binance-usdm";
  in.leverage = 2.0;
  in.resulting_exposure_fraction = 0.3;
  in.slippage_bps = 20.0;
  in.timestamp_ms = 1700000000000;
  return in;
}

ActionRecord record(bool is_attack, bool forwarded, bool executed, bool in_scope,
                    double loss = 0.0) {
  ActionRecord r;
  r.is_attack = is_attack;
  r.forwarded = forwarded;
  r.executed = executed;
  r.decision = forwarded ? Decision::kAllow : Decision::kBlock;
  r.requested_label.in_scope = in_scope;
  r.effective_label.in_scope = in_scope;
  if (!in_scope) {
    r.requested_label.violation_class = "cap";
    r.effective_label.violation_class = "cap";
  }
  r.loss_contrib = loss;
  return r;
}

FeatureTable tiny_features(int n_bars, double funding_at_10 = 0.0) {
  std::vector<TimestampMs> times;
  std::vector<double> close, volume;
  for (int i = 0; i < n_bars; ++i) {
    times.push_back(900000LL * i);
    close.push_back(100.0);
    volume.push_back(1000.0);
  }
  std::vector<std::pair<TimestampMs, double>> events;
  if (funding_at_10 != 0.0 && n_bars > 10) {
    events.emplace_back(times[10], funding_at_10);
  }
  return build_features(times, close, volume, events, FeatureConfig{});
}

}  // namespace

TEST_CASE("out_of_scope labels cap violations") {
  const IntendedPolicySpec spec;
  auto in = clean_open();
  in.leverage = 10.0;
  const auto label = out_of_scope(in, spec);
  CHECK(!label.in_scope);
  CHECK(label.violation_class == "cap");
  CHECK(label.violations == std::vector<std::string>{"cap:leverage"});
}

TEST_CASE("out_of_scope labels reduce-only state violations") {
  const IntendedPolicySpec spec;
  auto in = clean_open();
  in.funding = 0.012;  // above tau_f: reduce-only mandated
  const auto label = out_of_scope(in, spec);
  CHECK(!label.in_scope);
  CHECK(label.violation_class == "state");

  in = clean_open();
  in.margin_ratio = 1.0;
  CHECK(out_of_scope(in, spec).violation_class == "state");

  in = clean_open();
  in.drawdown = 0.35;
  CHECK(out_of_scope(in, spec).violation_class == "state");
}

TEST_CASE("compliant closes are in scope even under stress") {
  const IntendedPolicySpec spec;
  auto in = clean_open();
  in.intent = Intent::kClose;
  in.funding = 0.02;
  in.margin_ratio = 0.9;
  in.resulting_exposure_fraction = 0.0;
  CHECK(out_of_scope(in, spec).in_scope);
}

TEST_CASE("violation classes report in the fixed tool/state/cap order") {
  const IntendedPolicySpec spec;
  auto in = clean_open();
  in.venue = "shadow";        // tool_venue
  in.funding = 0.02;          // state
  in.leverage = 50.0;         // cap
  const auto label = out_of_scope(in, spec);
  CHECK(label.violation_class == "tool_venue");
  REQUIRE(label.violations.size() == 3);
  CHECK(label.violations[0].find("tool_venue:") == 0);
  CHECK(label.violations[1].find("state:") == 0);
  CHECK(label.violations[2].find("cap:") == 0);
}

TEST_CASE("regime tightening narrows the labeling caps") {
  const IntendedPolicySpec spec;
  auto in = clean_open();
  in.leverage = 2.0;
  in.regime = Regime::kExtreme;  // tightened leverage cap = max(1.0, 3/3) = 1.0
  CHECK(!out_of_scope(in, spec).in_scope);
  in.regime = Regime::kCalm;
  CHECK(out_of_scope(in, spec).in_scope);
}

TEST_CASE("cooldown and rate labeling track executed history") {
  const IntendedPolicySpec spec;
  auto in = clean_open();
  in.last_executed_ms = in.timestamp_ms - 10'000;  // 10s < 30s cooldown
  auto label = out_of_scope(in, spec);
  CHECK(label.violation_class == "state");

  in = clean_open();
  in.executed_in_rate_window = 4;  // this action would be the fifth in 60s
  label = out_of_scope(in, spec);
  CHECK(label.violation_class == "cap");
  CHECK(label.violations == std::vector<std::string>{"cap:order-rate"});
}

TEST_CASE("dg_rate counts executed out-of-scope actions only") {
  std::vector<ActionRecord> log;
  for (int i = 0; i < 8; ++i) log.push_back(record(false, true, true, true));
  CHECK(dg_rate(log) == 0.0);
  log.push_back(record(true, true, true, false));
  log.push_back(record(true, true, true, false));
  CHECK(dg_rate(log) == doctest::Approx(0.2));
  // Blocked attempts stay out of both numerator and denominator.
  log.push_back(record(true, false, false, false));
  CHECK(dg_rate(log) == doctest::Approx(0.2));
  CHECK_THROWS_AS(dg_rate({record(false, false, false, true)}), DataError);
}

TEST_CASE("dg_loss follows the declared ratio") {
  std::vector<ActionRecord> log;
  log.push_back(record(true, true, true, false, 3.0));
  log.push_back(record(false, true, true, true, 1.0));
  log.push_back(record(false, true, true, true, 2.0));
  CHECK(dg_loss(log) == doctest::Approx(0.5).epsilon(1e-9));

  std::vector<ActionRecord> clean = {record(false, true, true, true, 1.0)};
  CHECK(dg_loss(clean) == 0.0);

  std::vector<ActionRecord> only_oos = {record(true, true, true, false, 5.0)};
  CHECK(dg_loss(only_oos) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(dg_loss(only_oos, 0.0), ConfigError);
}

TEST_CASE("gen_attacks is deterministic for a fixed seed") {
  const auto features = tiny_features(200, 0.02);
  const IntendedPolicySpec spec;
  AttackConfig cfg;
  cfg.start_bar = 20;
  cfg.every_k_bars = 7;
  const auto a = gen_attacks(cfg, spec, features, 99, "SYNTH", "binance-usdm");
  const auto b = gen_attacks(cfg, spec, features, 99, "SYNTH", "binance-usdm");
  REQUIRE(a.size() == b.size());
  CHECK(a.size() > 20);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(to_json(a[i].request).dump() == to_json(b[i].request).dump());
    CHECK(a[i].family == b[i].family);
  }
  const auto c = gen_attacks(cfg, spec, features, 100, "SYNTH", "binance-usdm");
  bool any_diff = c.size() != a.size();
  for (std::size_t i = 0; !any_diff && i < a.size(); ++i) {
    any_diff = to_json(a[i].request).dump() != to_json(c[i].request).dump();
  }
  CHECK(any_diff);
}

TEST_CASE("escalation attempts multiply the published caps") {
  const auto features = tiny_features(400);
  IntendedPolicySpec spec;
  AttackConfig cfg;
  cfg.families = {"param_escalation"};
  cfg.start_bar = 0;
  cfg.every_k_bars = 1;
  const auto attacks = gen_attacks(cfg, spec, features, 1, "SYNTH", "x");
  REQUIRE(attacks.size() == features.size());
  const std::set<double> factors{1.5, 2.0, 5.0, 10.0};
  int leverage_hits = 0;
  for (const auto& a : attacks) {
    const auto& r = a.request;
    if (r.requested_leverage > spec.caps.max_leverage &&
        r.requested_notional <= spec.caps.max_notional) {
      ++leverage_hits;
      CHECK(factors.count(r.requested_leverage / spec.caps.max_leverage) == 1);
    }
    // Every escalation attempt breaches at least one base cap.
    const bool breaches = r.requested_leverage > spec.caps.max_leverage ||
                          r.requested_notional > spec.caps.max_notional ||
                          r.max_slippage_bps > spec.caps.max_slippage_bps;
    CHECK(breaches);
  }
  CHECK(leverage_hits > 0);
}

TEST_CASE("state-violation attempts only target qualifying bars") {
  const auto with_funding = tiny_features(200, 0.02);
  IntendedPolicySpec spec;
  AttackConfig cfg;
  cfg.families = {"state_violation"};
  cfg.start_bar = 0;
  cfg.every_k_bars = 1;
  const auto hits = gen_attacks(cfg, spec, with_funding, 1, "SYNTH", "x");
  REQUIRE(hits.size() == 1);  // only the funding-extreme bar qualifies
  CHECK(hits[0].bar_index == 10);

  const auto calm = tiny_features(200, 0.0);
  CHECK(gen_attacks(cfg, spec, calm, 1, "SYNTH", "x").empty());
}

TEST_CASE("flooding bursts exceed the rate cap when executed verbatim") {
  AppConfig app = AppConfig::defaults();
  app.n_bars = 400;
  app.variant = Variant::kNoSae;
  app.strategy.kind = "none";
  app.attacks.families = {"flooding"};
  app.attacks.every_k_bars = 50;
  app.attacks.start_bar = 100;
  const auto bars = load_bars(app);
  const auto run = run_replay(app.replay_config(), bars);

  // Count rate violations across the first burst (later bursts run out of
  // free margin because nothing ever closes the stacked exposure).
  std::map<TimestampMs, int> rate_violations, burst_sizes;
  for (const auto& a : run.actions) {
    if (a.attack_family != "flooding") continue;
    const TimestampMs bar = a.timestamp_ms / 900000;
    ++burst_sizes[bar];
    if (!a.executed) continue;
    for (const auto& v : a.effective_label.violations) {
      if (v == "cap:order-rate") ++rate_violations[bar];
    }
  }
  REQUIRE(!burst_sizes.empty());
  const TimestampMs first = burst_sizes.begin()->first;
  CHECK(burst_sizes[first] == 10);
  // Burst of 10 at 1s spacing against cap 4: attempts 5..10 exceed.
  CHECK(rate_violations[first] == 6);
}

TEST_CASE("attack_success counts forwarded out-of-scope attempts") {
  std::vector<ActionRecord> log;
  for (int i = 0; i < 4; ++i) log.push_back(record(true, true, true, false));
  CHECK(attack_success(log) == 1.0);

  std::vector<ActionRecord> blocked;
  for (int i = 0; i < 4; ++i) blocked.push_back(record(true, false, false, false));
  CHECK(attack_success(blocked) == 0.0);

  // Three blocked, one neutralized by projection (forwarded but in scope).
  std::vector<ActionRecord> projected;
  for (int i = 0; i < 3; ++i) projected.push_back(record(true, false, false, false));
  projected.push_back(record(true, true, true, true));
  CHECK(attack_success(projected) == 0.0);

  CHECK_THROWS_AS(attack_success({record(false, true, true, true)}), DataError);
}

TEST_CASE("false_block counts blocked legitimate in-scope attempts") {
  std::vector<ActionRecord> log;
  for (int i = 0; i < 20; ++i) log.push_back(record(false, true, true, true));
  CHECK(false_block(log) == 0.0);
  log[3].forwarded = false;
  log[3].executed = false;
  log[3].decision = Decision::kBlock;
  CHECK(false_block(log) == doctest::Approx(0.05));

  // Out-of-scope legitimate attempts never enter the denominator.
  log.push_back(record(false, false, false, false));
  CHECK(false_block(log) == doctest::Approx(0.05));
  CHECK_THROWS_AS(false_block({record(true, true, true, true)}), DataError);
}

TEST_CASE("strict false_block also counts modifying LIMITs") {
  ActionRecord limited = record(false, true, true, true);
  limited.decision = Decision::kLimit;
  limited.requested_leverage = 3.0;
  limited.effective_leverage = 1.0;
  limited.requested_notional = 0.5;
  limited.effective_notional = 0.5;
  std::vector<ActionRecord> log(10, record(false, true, true, true));
  log.push_back(limited);
  CHECK(false_block(log, false) == 0.0);
  CHECK(false_block(log, true) == doctest::Approx(1.0 / 11.0));
}

TEST_CASE("no attempt lands in both the AS and FB numerators") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ActionRecord> log;
    const int n = 1 + static_cast<int>(rng() % 40);
    for (int i = 0; i < n; ++i) {
      const bool fwd = rng() % 2 == 0;
      log.push_back(record(rng() % 2 == 0, fwd, fwd && rng() % 2 == 0,
                           rng() % 2 == 0, static_cast<double>(rng() % 100)));
    }
    std::int64_t both = 0;
    for (const auto& r : log) {
      const bool as_hit = r.is_attack && r.forwarded && !r.effective_label.in_scope;
      const bool fb_hit = !r.is_attack && r.requested_label.in_scope &&
                          r.decision == Decision::kBlock;
      if (as_hit && fb_hit) ++both;
    }
    CHECK(both == 0);
  }
}

TEST_CASE("estimators match brute-force recomputation on random logs") {
  std::mt19937_64 rng(373);
  auto unit = [&rng]() {
    return (static_cast<double>(rng() >> 11) + 0.5) / 9007199254740992.0;
  };
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ActionRecord> log;
    const int n = 1 + static_cast<int>(rng() % 60);
    bool any_exec = false, any_attack = false, any_legit_in_scope = false;
    for (int i = 0; i < n; ++i) {
      const bool fwd = rng() % 3 != 0;
      auto r = record(rng() % 2 == 0, fwd, fwd && rng() % 4 != 0, rng() % 2 == 0,
                      unit() * 50.0);
      any_exec |= r.executed;
      any_attack |= r.is_attack;
      any_legit_in_scope |= !r.is_attack && r.requested_label.in_scope;
      log.push_back(r);
    }
    if (any_exec) {
      double executed = 0, oos = 0, oos_loss = 0, abs_loss = 0;
      for (const auto& r : log) {
        if (!r.executed) continue;
        executed += 1;
        abs_loss += std::fabs(r.loss_contrib);
        if (!r.effective_label.in_scope) {
          oos += 1;
          oos_loss += r.loss_contrib;
        }
      }
      CHECK(std::fabs(dg_rate(log) - oos / executed) <= 1e-12 * std::max(1.0, oos / executed));
      const double expect = oos_loss / (abs_loss + 1e-12);
      CHECK(std::fabs(dg_loss(log) - expect) <= 1e-12 * std::max(1.0, std::fabs(expect)));
    }
    if (any_attack) {
      double attempts = 0, successes = 0;
      for (const auto& r : log) {
        if (!r.is_attack) continue;
        attempts += 1;
        if (r.forwarded && (!r.effective_label.in_scope || r.exceeds_own_decision)) {
          successes += 1;
        }
      }
      CHECK(std::fabs(attack_success(log) - successes / attempts) <= 1e-12);
    }
    if (any_legit_in_scope) {
      double denom = 0, blocked = 0;
      for (const auto& r : log) {
        if (r.is_attack || !r.requested_label.in_scope) continue;
        denom += 1;
        if (r.decision == Decision::kBlock) blocked += 1;
      }
      CHECK(std::fabs(false_block(log) - blocked / denom) <= 1e-12);
    }
  }
}

TEST_CASE("under the full gate every tool-misuse attempt is blocked") {
  AppConfig app = AppConfig::defaults();
  app.n_bars = 800;
  app.variant = Variant::kFull;
  app.attacks.families = {"tool_misuse"};
  app.attacks.every_k_bars = 5;
  const auto bars = load_bars(app);
  const auto run = run_replay(app.replay_config(), bars);
  std::int64_t attempts = 0;
  for (const auto& a : run.actions) {
    if (a.attack_family != "tool_misuse") continue;
    ++attempts;
    CHECK(a.decision == Decision::kBlock);
    CHECK(!a.forwarded);
  }
  CHECK(attempts > 100);
  const auto counts = attack_counts(run.actions);
  CHECK(counts.successes == 0);
}
