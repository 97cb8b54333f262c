#include "sae/app_config.hpp"

#include <yaml-cpp/yaml.h>

#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "sae/sha256.hpp"

namespace fs = std::filesystem;

namespace sae {

PolicyConfig default_policy() {
  PolicyConfig p;  // struct defaults carry the Table-2 values
  PolicyRule funding_rule;
  funding_rule.rule_id = "reduce-only-funding-extreme";
  funding_rule.when.funding_abs_gte = 0.01;
  funding_rule.when.intent = Intent::kOpen;
  funding_rule.decision = Decision::kBlock;
  PolicyRule margin_rule;
  margin_rule.rule_id = "reduce-only-low-margin";
  margin_rule.when.margin_ratio_lt = 1.1;
  margin_rule.when.intent = Intent::kOpen;
  margin_rule.decision = Decision::kBlock;
  PolicyRule dd_rule;
  dd_rule.rule_id = "reduce-only-drawdown";
  dd_rule.when.drawdown_gte = 0.30;
  dd_rule.when.intent = Intent::kOpen;
  dd_rule.decision = Decision::kBlock;
  PolicyRule stale_rule;
  stale_rule.rule_id = "block-stale-position-open";
  stale_rule.when.position_age_gte_sec = 86400.0;
  stale_rule.when.intent = Intent::kOpen;
  stale_rule.decision = Decision::kBlock;
  PolicyRule block_rule;
  block_rule.rule_id = "block-high-risk";
  block_rule.when.p_t_gte = 0.70;
  block_rule.decision = Decision::kBlock;
  PolicyRule limit_rule;
  limit_rule.rule_id = "limit-elevated-risk";
  limit_rule.when.p_t_gte = 0.50;
  limit_rule.decision = Decision::kLimit;
  limit_rule.mutations.push_back({"notional", true, 0.5});
  p.rules = {funding_rule, margin_rule, dd_rule, stale_rule, block_rule, limit_rule};
  return p;
}

CalibratedModel default_trader_model() {
  CalibratedModel m;
  m.coefficients = {4.0, -0.3, 0.1, 0.3, 0.5, -5e-5};
  m.intercept = -3.0;
  m.calibration = CalibrationMap(
      {{0.0, 0.0}, {0.25, 0.2}, {0.5, 0.5}, {0.75, 0.8}, {1.0, 1.0}});
  return m;
}

IntendedPolicySpec default_intended_spec() { return IntendedPolicySpec{}; }

namespace {

std::vector<ParamSpec> default_search_space() {
  using K = ParamSpec::Kind;
  return {
      {"strategy.lookback", K::kInt, 4, 32, {}},
      {"strategy.entry_threshold", K::kReal, 0.0, 0.004, {}},
      {"strategy.req_leverage", K::kReal, 1.0, 5.0, {}},
      {"strategy.req_notional", K::kReal, 0.1, 0.8, {}},
      {"policy.b0_leverage", K::kReal, 1.0, 5.0, {}},
      {"policy.b0_notional", K::kReal, 0.2, 1.0, {}},
      {"policy.cooldown_volatile", K::kChoice, 0, 0, {30, 60, 90}},
      {"policy.cooldown_extreme", K::kChoice, 0, 0, {60, 120, 180}},
  };
}

void require_keys(const YAML::Node& node, const std::set<std::string>& allowed,
                  const std::string& section) {
  if (!node.IsMap()) throw ConfigError(section + " must be a map");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (allowed.find(key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + section);
    }
  }
}

TrustState parse_trust(const YAML::Node& n, const TrustState& fallback,
                       const std::string& section) {
  require_keys(n, {"p_prov", "r_cap", "inj_alert"}, section);
  TrustState t = fallback;
  if (n["p_prov"]) t.p_prov = n["p_prov"].as<double>();
  if (n["r_cap"]) t.r_cap = n["r_cap"].as<double>();
  if (n["inj_alert"]) t.inj_alert = n["inj_alert"].as<bool>();
  if (!(t.p_prov >= 0.0 && t.p_prov <= 1.0 && t.r_cap >= 0.0 && t.r_cap <= 1.0)) {
    throw ConfigError(section + ": trust scores must lie in [0,1]");
  }
  return t;
}

}  // namespace

AppConfig AppConfig::defaults() {
  AppConfig c;
  c.policy = default_policy();
  c.trader_model = default_trader_model();
  c.spec = default_intended_spec();
  c.autoopt.space = default_search_space();
  return c;
}

AppConfig AppConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();

  AppConfig c = defaults();
  c.config_text = ss.str();

  YAML::Node root;
  try {
    root = YAML::Load(c.config_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config parse: ") + e.what());
  }
  require_keys(root,
               {"run", "policy_file", "features", "fill", "strategy", "attacks",
                "trust", "intended_spec", "trader_model", "sim", "autoopt"},
               "config");

  if (root["run"]) {
    const auto& r = root["run"];
    require_keys(r,
                 {"mode", "symbol", "venue", "interval", "start", "end", "n_bars",
                  "seed", "variant", "initial_wallet", "output_dir", "cache_dir",
                  "tiers_file", "gap_policy"},
                 "run");
    if (r["mode"]) c.mode = r["mode"].as<std::string>();
    if (c.mode != "synth" && c.mode != "binance") {
      throw ConfigError("run.mode must be synth or binance");
    }
    if (r["symbol"]) c.symbol = r["symbol"].as<std::string>();
    if (r["venue"]) c.venue = r["venue"].as<std::string>();
    if (r["interval"]) c.interval = r["interval"].as<std::string>();
    if (r["start"]) c.start_date = r["start"].as<std::string>();
    if (r["end"]) c.end_date = r["end"].as<std::string>();
    if (r["n_bars"]) c.n_bars = r["n_bars"].as<int>();
    if (r["seed"]) c.seed = r["seed"].as<std::uint64_t>();
    if (r["variant"]) c.variant = variant_from_string(r["variant"].as<std::string>());
    if (r["initial_wallet"]) c.initial_wallet = r["initial_wallet"].as<double>();
    if (r["output_dir"]) c.output_dir = r["output_dir"].as<std::string>();
    if (r["cache_dir"]) c.cache_dir = r["cache_dir"].as<std::string>();
    if (r["tiers_file"]) c.tiers_file = r["tiers_file"].as<std::string>();
    if (r["gap_policy"]) {
      const auto g = r["gap_policy"].as<std::string>();
      if (g == "fail") c.gap_policy = GapPolicy::kFail;
      else if (g == "forward_fill") c.gap_policy = GapPolicy::kForwardFill;
      else throw ConfigError("run.gap_policy must be fail or forward_fill");
    }
  }
  if (const char* env = std::getenv("SAE_CACHE_DIR")) c.cache_dir = env;

  if (root["policy_file"]) {
    c.policy_file = root["policy_file"].as<std::string>();
    fs::path p(c.policy_file);
    if (p.is_relative()) p = fs::path(path).parent_path() / p;
    c.policy = load_policy_file(p.string());
  }

  if (root["features"]) {
    const auto& f = root["features"];
    require_keys(f,
                 {"w_sigma", "ema_period", "eps", "tau_sigma_1", "tau_sigma_2",
                  "tau_f", "tau_lambda", "vol_norm_window"},
                 "features");
    if (f["w_sigma"]) c.features.w_sigma = f["w_sigma"].as<int>();
    if (f["ema_period"]) c.features.ema_period = f["ema_period"].as<int>();
    if (f["eps"]) c.features.eps = f["eps"].as<double>();
    if (f["tau_sigma_1"]) c.features.tau_sigma_1 = f["tau_sigma_1"].as<double>();
    if (f["tau_sigma_2"]) c.features.tau_sigma_2 = f["tau_sigma_2"].as<double>();
    if (f["tau_f"]) c.features.tau_f = f["tau_f"].as<double>();
    if (f["tau_lambda"]) c.features.tau_lambda = f["tau_lambda"].as<double>();
    if (f["vol_norm_window"]) c.features.vol_norm_window = f["vol_norm_window"].as<int>();
    c.features.validate();
  }

  if (root["fill"]) {
    const auto& f = root["fill"];
    require_keys(f, {"taker_fee_bps", "base_slippage_bps", "impact_coeff_bps",
                     "liq_penalty_bps"},
                 "fill");
    if (f["taker_fee_bps"]) c.fill.taker_fee_bps = f["taker_fee_bps"].as<double>();
    if (f["base_slippage_bps"]) c.fill.base_slippage_bps = f["base_slippage_bps"].as<double>();
    if (f["impact_coeff_bps"]) c.fill.impact_coeff_bps = f["impact_coeff_bps"].as<double>();
    if (f["liq_penalty_bps"]) c.fill.liq_penalty_bps = f["liq_penalty_bps"].as<double>();
  }

  if (root["strategy"]) {
    const auto& s = root["strategy"];
    require_keys(s, {"kind", "lookback", "entry_threshold", "req_leverage",
                     "req_notional", "req_slippage_bps"},
                 "strategy");
    if (s["kind"]) c.strategy.kind = s["kind"].as<std::string>();
    if (s["lookback"]) c.strategy.lookback = s["lookback"].as<int>();
    if (s["entry_threshold"]) c.strategy.entry_threshold = s["entry_threshold"].as<double>();
    if (s["req_leverage"]) c.strategy.req_leverage = s["req_leverage"].as<double>();
    if (s["req_notional"]) c.strategy.req_notional = s["req_notional"].as<double>();
    if (s["req_slippage_bps"]) c.strategy.req_slippage_bps = s["req_slippage_bps"].as<double>();
  }

  if (root["attacks"]) {
    const auto& a = root["attacks"];
    require_keys(a,
                 {"enabled", "families", "every_k_bars", "start_bar", "seed", "side",
                  "escalation_factors", "flood_burst", "flood_spacing_sec",
                  "flood_slippage_factor", "flip_burst", "flip_spacing_sec",
                  "flip_notional_factor", "misuse_venue", "misuse_symbol",
                  "misuse_account"},
                 "attacks");
    if (a["enabled"]) c.attacks_enabled = a["enabled"].as<bool>();
    if (a["families"]) {
      c.attacks.families.clear();
      for (const auto& f : a["families"]) {
        c.attacks.families.insert(f.as<std::string>());
      }
    }
    if (a["every_k_bars"]) c.attacks.every_k_bars = a["every_k_bars"].as<int>();
    if (a["start_bar"]) c.attacks.start_bar = a["start_bar"].as<int>();
    if (a["seed"]) c.attacks.seed = a["seed"].as<std::uint64_t>();
    if (a["side"]) c.attacks.side = side_from_string(a["side"].as<std::string>());
    if (a["escalation_factors"]) {
      c.attacks.escalation_factors.clear();
      for (const auto& v : a["escalation_factors"]) {
        c.attacks.escalation_factors.push_back(v.as<double>());
      }
      if (c.attacks.escalation_factors.empty()) {
        throw ConfigError("attacks.escalation_factors must be nonempty");
      }
    }
    if (a["flood_burst"]) c.attacks.flood_burst = a["flood_burst"].as<int>();
    if (a["flood_spacing_sec"]) c.attacks.flood_spacing_sec = a["flood_spacing_sec"].as<double>();
    if (a["flood_slippage_factor"]) c.attacks.flood_slippage_factor = a["flood_slippage_factor"].as<double>();
    if (a["flip_burst"]) c.attacks.flip_burst = a["flip_burst"].as<int>();
    if (a["flip_spacing_sec"]) c.attacks.flip_spacing_sec = a["flip_spacing_sec"].as<double>();
    if (a["flip_notional_factor"]) c.attacks.flip_notional_factor = a["flip_notional_factor"].as<double>();
    if (a["misuse_venue"]) c.attacks.misuse_venue = a["misuse_venue"].as<std::string>();
    if (a["misuse_symbol"]) c.attacks.misuse_symbol = a["misuse_symbol"].as<std::string>();
    if (a["misuse_account"]) c.attacks.misuse_account = a["misuse_account"].as<std::string>();
  }

  if (root["trust"]) {
    require_keys(root["trust"], {"default", "attack_channel"}, "trust");
    if (root["trust"]["default"]) {
      c.default_trust = parse_trust(root["trust"]["default"], c.default_trust,
                                    "trust.default");
    }
    if (root["trust"]["attack_channel"]) {
      c.attack_trust = parse_trust(root["trust"]["attack_channel"], c.attack_trust,
                                   "trust.attack_channel");
    }
  }

  if (root["intended_spec"]) {
    const auto& s = root["intended_spec"];
    require_keys(s, {"allow", "caps", "market", "account"}, "intended_spec");
    if (s["allow"]) {
      require_keys(s["allow"], {"intents", "venues", "symbols", "accounts"},
                   "intended_spec.allow");
      auto read_set = [&](const char* key, std::set<std::string>& into) {
        if (!s["allow"][key]) return;
        into.clear();
        for (const auto& v : s["allow"][key]) into.insert(v.as<std::string>());
      };
      read_set("intents", c.spec.allow.intents);
      read_set("venues", c.spec.allow.venues);
      read_set("symbols", c.spec.allow.symbols);
      read_set("accounts", c.spec.allow.accounts);
    }
    if (s["caps"]) {
      const auto& k = s["caps"];
      require_keys(k,
                   {"max_leverage", "max_notional", "max_order_rate",
                    "rate_window_sec", "max_slippage_bps", "max_holding_time_sec",
                    "max_concurrent_positions"},
                   "intended_spec.caps");
      if (k["max_leverage"]) c.spec.caps.max_leverage = k["max_leverage"].as<double>();
      if (k["max_notional"]) c.spec.caps.max_notional = k["max_notional"].as<double>();
      if (k["max_order_rate"]) c.spec.caps.max_order_rate = k["max_order_rate"].as<double>();
      if (k["rate_window_sec"]) c.spec.caps.rate_window_sec = k["rate_window_sec"].as<double>();
      if (k["max_slippage_bps"]) c.spec.caps.max_slippage_bps = k["max_slippage_bps"].as<double>();
      if (k["max_holding_time_sec"]) c.spec.caps.max_holding_time_sec = k["max_holding_time_sec"].as<double>();
      if (k["max_concurrent_positions"]) c.spec.caps.max_concurrent_positions = k["max_concurrent_positions"].as<int>();
    }
    if (s["market"]) {
      const auto& m = s["market"];
      require_keys(m, {"regime_tighten", "reduce_only_funding_extreme", "tau_f",
                       "leverage_floor"},
                   "intended_spec.market");
      if (m["regime_tighten"]) c.spec.market.regime_tighten = m["regime_tighten"].as<bool>();
      if (m["reduce_only_funding_extreme"]) c.spec.market.reduce_only_funding_extreme = m["reduce_only_funding_extreme"].as<bool>();
      if (m["tau_f"]) c.spec.market.tau_f = m["tau_f"].as<double>();
      if (m["leverage_floor"]) c.spec.market.leverage_floor = m["leverage_floor"].as<double>();
    }
    if (s["account"]) {
      const auto& u = s["account"];
      require_keys(u, {"min_margin_ratio", "max_drawdown", "cooldown_sec"},
                   "intended_spec.account");
      if (u["min_margin_ratio"]) c.spec.account.min_margin_ratio = u["min_margin_ratio"].as<double>();
      if (u["max_drawdown"]) c.spec.account.max_drawdown = u["max_drawdown"].as<double>();
      if (u["cooldown_sec"]) c.spec.account.cooldown_sec = u["cooldown_sec"].as<double>();
    }
  }
  // The intended spec's regime tightening mirrors the gate's g-table so the
  // same specification drives enforcement and measurement.
  c.spec.market.g_table = c.policy.tightening.g_table;
  c.spec.market.leverage_floor = c.policy.tightening.leverage_floor;

  if (root["trader_model"]) {
    const auto& t = root["trader_model"];
    require_keys(t, {"coefficients", "intercept", "calibration", "tau_limit",
                     "tau_block"},
                 "trader_model");
    if (t["coefficients"]) {
      c.trader_model.coefficients.clear();
      for (const auto& v : t["coefficients"]) {
        c.trader_model.coefficients.push_back(v.as<double>());
      }
    }
    if (t["intercept"]) c.trader_model.intercept = t["intercept"].as<double>();
    if (t["calibration"]) {
      std::vector<std::pair<double, double>> knots;
      for (const auto& kv : t["calibration"]) {
        knots.emplace_back(kv[0].as<double>(), kv[1].as<double>());
      }
      c.trader_model.calibration = CalibrationMap(std::move(knots));
    }
    if (t["tau_limit"]) c.trader_model.tau_limit = t["tau_limit"].as<double>();
    if (t["tau_block"]) c.trader_model.tau_block = t["tau_block"].as<double>();
    c.trader_model.validate();
  }

  if (root["sim"]) {
    const auto& s = root["sim"];
    require_keys(s, {"stop_loss_frac", "step_loss_cap_frac", "staging_spacing_sec"},
                 "sim");
    if (s["stop_loss_frac"]) c.stop_loss_frac = s["stop_loss_frac"].as<double>();
    if (s["step_loss_cap_frac"]) c.step_loss_cap_frac = s["step_loss_cap_frac"].as<double>();
    if (s["staging_spacing_sec"]) c.staging_spacing_sec = s["staging_spacing_sec"].as<double>();
  }

  if (root["autoopt"]) {
    const auto& a = root["autoopt"];
    require_keys(a,
                 {"weights", "constraints", "batch_trials", "max_batches",
                  "patience", "validation_frac", "variant", "space"},
                 "autoopt");
    if (a["weights"]) {
      const auto& w = a["weights"];
      require_keys(w, {"w_mdd", "w_cvar", "w_dg", "w_lat"}, "autoopt.weights");
      if (w["w_mdd"]) c.autoopt.weights.w_mdd = w["w_mdd"].as<double>();
      if (w["w_cvar"]) c.autoopt.weights.w_cvar = w["w_cvar"].as<double>();
      if (w["w_dg"]) c.autoopt.weights.w_dg = w["w_dg"].as<double>();
      if (w["w_lat"]) c.autoopt.weights.w_lat = w["w_lat"].as<double>();
    }
    if (a["constraints"]) {
      const auto& k = a["constraints"];
      require_keys(k, {"attacksucc_max", "falseblock_max", "latency_max",
                       "max_liquidations"},
                   "autoopt.constraints");
      if (k["attacksucc_max"]) c.autoopt.constraints.attacksucc_max = k["attacksucc_max"].as<double>();
      if (k["falseblock_max"]) c.autoopt.constraints.falseblock_max = k["falseblock_max"].as<double>();
      if (k["latency_max"]) c.autoopt.constraints.latency_max = k["latency_max"].as<double>();
      if (k["max_liquidations"]) c.autoopt.constraints.max_liquidations = k["max_liquidations"].as<std::int64_t>();
    }
    if (a["batch_trials"]) c.autoopt.batch_trials = a["batch_trials"].as<int>();
    if (a["max_batches"]) c.autoopt.max_batches = a["max_batches"].as<int>();
    if (a["patience"]) c.autoopt.patience = a["patience"].as<int>();
    if (a["validation_frac"]) c.autoopt.validation_frac = a["validation_frac"].as<double>();
    if (a["variant"]) c.autoopt.variant = variant_from_string(a["variant"].as<std::string>());
    if (a["space"]) {
      c.autoopt.space.clear();
      for (const auto& pn : a["space"]) {
        require_keys(pn, {"name", "type", "lo", "hi", "values"}, "autoopt.space entry");
        ParamSpec spec;
        spec.name = pn["name"].as<std::string>();
        const auto type = pn["type"].as<std::string>();
        if (type == "real") spec.kind = ParamSpec::Kind::kReal;
        else if (type == "int") spec.kind = ParamSpec::Kind::kInt;
        else if (type == "choice") spec.kind = ParamSpec::Kind::kChoice;
        else throw ConfigError("autoopt.space: unknown type '" + type + "'");
        if (spec.kind == ParamSpec::Kind::kChoice) {
          if (!pn["values"]) throw ConfigError("choice param needs values");
          for (const auto& v : pn["values"]) spec.choices.push_back(v.as<double>());
          if (spec.choices.empty()) throw ConfigError("choice param needs values");
        } else {
          spec.lo = pn["lo"].as<double>();
          spec.hi = pn["hi"].as<double>();
          if (!(spec.lo <= spec.hi)) throw ConfigError("param bounds out of order");
        }
        c.autoopt.space.push_back(std::move(spec));
      }
    }
  }
  return c;
}

ReplayConfig AppConfig::replay_config() const {
  ReplayConfig r;
  r.symbol = symbol;
  r.venue = venue;
  r.variant = variant;
  r.seed = seed;
  r.initial_wallet = initial_wallet;
  r.fill = fill;
  if (!tiers_file.empty()) r.tiers = load_tiers_csv(tiers_file);
  r.features = features;
  r.policy = policy;
  r.spec = spec;
  r.trader_model = trader_model;
  r.attacks_enabled = attacks_enabled;
  r.attacks = attacks;
  r.strategy = strategy;
  r.default_trust = default_trust;
  r.attack_trust = attack_trust;
  r.stop_loss_frac = stop_loss_frac;
  r.step_loss_cap_frac = step_loss_cap_frac;
  r.staging_spacing_sec = staging_spacing_sec;
  return r;
}

std::string AppConfig::run_id() const {
  std::ostringstream key;
  key << config_text << '\n'
      << "seed=" << seed << "|variant=" << to_string(variant)
      << "|symbol=" << symbol << "|mode=" << mode << "|n_bars=" << n_bars
      << "|version=" << kVersionTag;
  return sha256_hex(key.str()).substr(0, 12);
}

TimestampMs parse_date_ms(const std::string& yyyy_mm_dd) {
  std::tm tm{};
  std::istringstream in(yyyy_mm_dd);
  in >> std::get_time(&tm, "%Y-%m-%d");
  if (in.fail()) throw ConfigError("bad date '" + yyyy_mm_dd + "' (want YYYY-MM-DD)");
  tm.tm_isdst = 0;
  return static_cast<TimestampMs>(timegm(&tm)) * 1000;
}

std::vector<ReplayBar> load_bars(const AppConfig& cfg) {
  if (cfg.mode == "synth") {
    return synth_generate(cfg.seed, default_synth_script(cfg.n_bars));
  }
  if (cfg.start_date.empty() || cfg.end_date.empty()) {
    throw ConfigError("binance mode requires run.start and run.end dates");
  }
  ClientConfig cc;
  cc.cache_dir = cfg.cache_dir;
  cc.gap_policy = cfg.gap_policy;
  MarketDataClient client(cc);
  const TimestampMs start = parse_date_ms(cfg.start_date);
  const TimestampMs end = parse_date_ms(cfg.end_date) - 1;
  auto bars = client.fetch_klines(cfg.symbol, cfg.interval, start, end);
  if (bars.empty()) throw DataError("no bars for requested window");
  auto funding = client.fetch_funding(cfg.symbol, start, end);
  merge_funding(bars, funding);
  return bars;
}

}  // namespace sae
