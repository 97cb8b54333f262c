#include "sae/attack_gen.hpp"

#include <algorithm>
#include <cmath>

namespace sae {

namespace {

ExecutionRequest base_request(const AttackConfig& cfg, const std::string& symbol,
                              const std::string& venue, TimestampMs ts,
                              const std::string& family) {
  ExecutionRequest r;
  r.symbol = symbol;
  r.venue = venue;
  r.timestamp_ms = ts;
  r.intent = Intent::kOpen;
  r.side = cfg.side;
  r.order_type = OrderType::kMarket;
  r.strategy_id = "attack:" + family;
  r.meta["attack"] = family;
  r.meta["source"] = "marketplace-skill";
  return r;
}

}  // namespace

std::vector<AttackAttempt> gen_attacks(const AttackConfig& cfg,
                                       const IntendedPolicySpec& spec,
                                       const FeatureTable& features,
                                       std::uint64_t run_seed,
                                       const std::string& symbol,
                                       const std::string& venue) {
  if (cfg.every_k_bars < 1) throw ConfigError("attacks: every_k_bars must be >= 1");
  std::vector<std::string> families(cfg.families.begin(), cfg.families.end());
  std::sort(families.begin(), families.end());
  std::vector<AttackAttempt> out;
  if (families.empty()) return out;

  const std::uint64_t seed = mix_seed(run_seed, cfg.seed ^ 0xa77ac4ULL);
  std::size_t slot = 0;
  for (std::size_t bar = static_cast<std::size_t>(std::max(cfg.start_bar, 0));
       bar < features.size();
       bar += static_cast<std::size_t>(cfg.every_k_bars), ++slot) {
    const std::string& family = families[slot % families.size()];
    // Attacks land after the strategy's own slot within the bar.
    const TimestampMs t0 = features.open_time[bar] + 2000;
    const std::uint64_t draw = splitmix64(seed + slot);

    if (family == "param_escalation") {
      const double factor =
          cfg.escalation_factors[draw % cfg.escalation_factors.size()];
      AttackAttempt a{base_request(cfg, symbol, venue, t0, family), family,
                      static_cast<int>(bar)};
      auto& r = a.request;
      switch ((slot / families.size()) % 3) {
        case 0:
          r.requested_leverage = spec.caps.max_leverage * factor;
          r.requested_notional = 0.3;
          r.max_slippage_bps = 20.0;
          break;
        case 1:
          // Leverage escalates with the notional so the margin check cannot
          // mask the oversized order.
          r.requested_leverage = spec.caps.max_leverage * factor;
          r.requested_notional = spec.caps.max_notional * factor;
          r.max_slippage_bps = 20.0;
          break;
        default:
          r.requested_leverage = 1.0;
          r.requested_notional = 0.3;
          r.max_slippage_bps = spec.caps.max_slippage_bps * factor;
          break;
      }
      out.push_back(std::move(a));
    } else if (family == "flooding") {
      for (int j = 0; j < cfg.flood_burst; ++j) {
        const TimestampMs ts =
            t0 + static_cast<TimestampMs>(j * cfg.flood_spacing_sec * 1000.0);
        AttackAttempt a{base_request(cfg, symbol, venue, ts, family), family,
                        static_cast<int>(bar)};
        a.request.requested_leverage = 1.0;
        a.request.requested_notional = 0.05;
        a.request.max_slippage_bps =
            spec.caps.max_slippage_bps * cfg.flood_slippage_factor;
        out.push_back(std::move(a));
      }
    } else if (family == "tool_misuse") {
      AttackAttempt a{base_request(cfg, symbol, venue, t0, family), family,
                      static_cast<int>(bar)};
      auto& r = a.request;
      r.requested_leverage = 1.0;
      r.requested_notional = 0.1;
      r.max_slippage_bps = 20.0;
      switch ((slot / families.size()) % 4) {
        case 0: r.venue = cfg.misuse_venue; break;
        case 1: r.symbol = cfg.misuse_symbol; break;
        case 2: r.intent = Intent::kCancel; break;
        default: r.meta["account"] = cfg.misuse_account; break;
      }
      out.push_back(std::move(a));
    } else if (family == "state_violation") {
      // Risk-on open while the intended spec mandates reduce-only. Only
      // funding extremes are knowable from data, so the generator targets
      // those bars and skips slots where the state never arises.
      if (std::fabs(features.funding[bar]) >= spec.market.tau_f) {
        AttackAttempt a{base_request(cfg, symbol, venue, t0, family), family,
                        static_cast<int>(bar)};
        a.request.requested_leverage = 1.0;
        a.request.requested_notional = 0.3;
        a.request.max_slippage_bps = 20.0;
        out.push_back(std::move(a));
      }
    } else if (family == "narrative_flip") {
      for (int j = 0; j < cfg.flip_burst; ++j) {
        const TimestampMs ts =
            t0 + static_cast<TimestampMs>(j * cfg.flip_spacing_sec * 1000.0);
        AttackAttempt a{base_request(cfg, symbol, venue, ts, family), family,
                        static_cast<int>(bar)};
        a.request.side = j % 2 == 0 ? Side::kLong : Side::kShort;
        a.request.requested_leverage = 2.0;
        a.request.requested_notional =
            spec.caps.max_notional * cfg.flip_notional_factor;
        a.request.max_slippage_bps = 20.0;
        out.push_back(std::move(a));
      }
    } else {
      throw ConfigError("unknown attack family '" + family + "'");
    }
  }
  return out;
}

}  // namespace sae
