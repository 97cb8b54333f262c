#include "sae/policy_engine.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace sae {

namespace {

double clampd(double v, double lo, double hi) { return std::clamp(v, lo, hi); }

std::string where(const YAML::Node& n) {
  std::ostringstream os;
  os << "line " << n.Mark().line + 1 << ", col " << n.Mark().column + 1;
  return os.str();
}

void require_keys(const YAML::Node& node, const std::set<std::string>& allowed,
                  const std::string& section) {
  if (!node.IsMap()) {
    throw PolicyParseError(section + " must be a map (" + where(node) + ")");
  }
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (allowed.find(key) == allowed.end()) {
      throw PolicyParseError("unknown key '" + key + "' in " + section + " (" +
                             where(kv.first) + ")");
    }
  }
}

double get_num(const YAML::Node& node, const char* key, double fallback) {
  return node[key] ? node[key].as<double>() : fallback;
}

RegimeFactors parse_factors(const YAML::Node& n, const std::string& section,
                            const RegimeFactors& fallback) {
  require_keys(n, {"leverage", "notional", "order_rate", "slippage"}, section);
  RegimeFactors f = fallback;
  f.leverage = get_num(n, "leverage", f.leverage);
  f.notional = get_num(n, "notional", f.notional);
  f.order_rate = get_num(n, "order_rate", f.order_rate);
  f.slippage = get_num(n, "slippage", f.slippage);
  for (double v : {f.leverage, f.notional, f.order_rate, f.slippage}) {
    if (!(v > 0.0 && v <= 1.0)) {
      throw PolicyParseError(section + ": multipliers must lie in (0, 1]");
    }
  }
  return f;
}

QTermMask parse_mask(const YAML::Node& n, const std::string& section) {
  QTermMask m;
  if (!n.IsSequence()) {
    throw PolicyParseError(section + " must be a list of terms (" + where(n) + ")");
  }
  for (const auto& item : n) {
    const auto term = item.as<std::string>();
    if (term == "prov") m.prov = true;
    else if (term == "cap") m.cap = true;
    else if (term == "inj") m.inj = true;
    else throw PolicyParseError(section + ": unknown trust term '" + term + "'");
  }
  return m;
}

const char* mask_terms_yaml(const QTermMask& m, std::vector<std::string>& out) {
  out.clear();
  if (m.prov) out.push_back("prov");
  if (m.cap) out.push_back("cap");
  if (m.inj) out.push_back("inj");
  return "";
}

}  // namespace

TrustFactors trust_factor(const TrustState& z, const QParams& cfg) {
  const double prov_term =
      clampd(z.p_prov / cfg.prov_pivot, cfg.q_min, 1.0);
  const double cap_term =
      std::max(cfg.q_min, 1.0 - cfg.cap_slope * clampd(z.r_cap, 0.0, 1.0));
  const double inj_term = z.inj_alert ? cfg.inj_mult : 1.0;
  auto combine = [&](const QTermMask& m) {
    double q = 1.0;
    if (m.prov) q *= prov_term;
    if (m.cap) q *= cap_term;
    if (m.inj) q *= inj_term;
    return q;
  };
  TrustFactors out;
  out.leverage = combine(cfg.leverage);
  out.notional = combine(cfg.notional);
  out.order_rate = combine(cfg.order_rate);
  out.slippage = combine(cfg.slippage);
  return out;
}

double account_factor(const AccountState& a, const HParams& cfg) {
  auto ramp_down = [&](double x, double safe, double floor_at) {
    // 1 at x >= safe, h_min at x <= floor_at, linear between.
    if (x >= safe) return 1.0;
    if (x <= floor_at) return cfg.h_min;
    return cfg.h_min + (1.0 - cfg.h_min) * (x - floor_at) / (safe - floor_at);
  };
  const double h_margin = ramp_down(a.margin_ratio, cfg.margin_safe, cfg.margin_min);
  const double dd = a.drawdown();
  double h_dd = 1.0;
  if (dd >= cfg.dd_max) {
    h_dd = cfg.h_min;
  } else if (dd > cfg.dd_safe) {
    h_dd = 1.0 - (1.0 - cfg.h_min) * (dd - cfg.dd_safe) / (cfg.dd_max - cfg.dd_safe);
  }
  return std::min(h_margin, h_dd);
}

BudgetVector tighten_budgets(const BudgetVector& b0, const MarketState& market,
                             const AccountState& account, const TrustState& trust,
                             const TighteningConfig& cfg, const TightenSwitches& on) {
  check_budget(b0);
  BudgetVector b = b0;
  RegimeFactors g{1.0, 1.0, 1.0, 1.0};
  if (on.regime) g = cfg.g_table.for_regime(market.regime);
  const double h = on.account ? account_factor(account, cfg.h_params) : 1.0;
  TrustFactors q;
  if (on.trust) q = trust_factor(trust, cfg.q_params);

  b.leverage_cap = b0.leverage_cap * g.leverage * h * q.leverage;
  b.notional_cap = b0.notional_cap * g.notional * h * q.notional;
  b.order_rate_cap = b0.order_rate_cap * g.order_rate * q.order_rate;
  b.slippage_cap_bps = b0.slippage_cap_bps * g.slippage * q.slippage;
  b.leverage_cap = std::max(b.leverage_cap, cfg.leverage_floor);
  if (on.regime) {
    b.cooldown_sec = cfg.regime_ops.cooldown(market.regime);
    b.staging_slices = cfg.regime_ops.slices(market.regime);
  }
  return b;
}

namespace {

bool predicate_matches(const RulePredicate& p, const RuleEvalInput& in) {
  if (p.regime && *p.regime != in.regime) return false;
  if (p.intent && *p.intent != in.intent) return false;
  if (p.p_t_gte && !(in.p_t >= *p.p_t_gte)) return false;
  if (p.p_t_lt && !(in.p_t < *p.p_t_lt)) return false;
  if (p.p_prov_lt && !(in.trust.p_prov < *p.p_prov_lt)) return false;
  if (p.r_cap_gte && !(in.trust.r_cap >= *p.r_cap_gte)) return false;
  if (p.inj_alert && in.trust.inj_alert != *p.inj_alert) return false;
  if (p.margin_ratio_lt || p.drawdown_gte) {
    if (in.account == nullptr) throw Error("rule needs account state");
    if (p.margin_ratio_lt && !(in.account->margin_ratio < *p.margin_ratio_lt)) {
      return false;
    }
    if (p.drawdown_gte && !(in.account->drawdown() >= *p.drawdown_gte)) return false;
  }
  if (p.funding_abs_gte && !(std::fabs(in.funding) >= *p.funding_abs_gte)) {
    return false;
  }
  if (p.position_age_gte_sec) {
    if (in.account == nullptr) throw Error("rule needs account state");
    double oldest_sec = 0.0;
    for (const auto& pos : in.account->positions) {
      oldest_sec = std::max(
          oldest_sec, static_cast<double>(in.now_ms - pos.entry_time_ms) / 1000.0);
    }
    if (!(oldest_sec >= *p.position_age_gte_sec)) return false;
  }
  return true;
}

void apply_mutation(BudgetVector& b, const BudgetMutation& m) {
  auto apply = [&](double& field) {
    field = m.multiplicative ? field * m.value : m.value;
  };
  if (m.component == "leverage") apply(b.leverage_cap);
  else if (m.component == "notional") apply(b.notional_cap);
  else if (m.component == "order_rate") apply(b.order_rate_cap);
  else if (m.component == "slippage") apply(b.slippage_cap_bps);
  else if (m.component == "cooldown") apply(b.cooldown_sec);
  else if (m.component == "holding") apply(b.max_holding_time_sec);
  else throw Error("unknown budget component '" + m.component + "'");
}

}  // namespace

RuleOutcome evaluate_rules(const std::vector<PolicyRule>& rules,
                           const RuleEvalInput& in, const BudgetVector& budgets) {
  RuleOutcome out{Decision::kAllow, budgets, ""};
  try {
    for (const auto& rule : rules) {
      if (!predicate_matches(rule.when, in)) continue;
      out.decision = rule.decision;
      out.matched_rule_id = rule.rule_id;
      for (const auto& m : rule.mutations) apply_mutation(out.budgets, m);
      return out;
    }
  } catch (const std::exception& e) {
    // Fail closed: a broken predicate must never let an action through.
    out.decision = Decision::kBlock;
    out.budgets = budgets;
    out.matched_rule_id = std::string("rule-eval-error: ") + e.what();
  }
  return out;
}

namespace {

BudgetVector parse_defaults(const YAML::Node& n) {
  require_keys(n,
               {"leverage_cap", "notional_cap", "order_rate_cap", "slippage_cap_bps",
                "max_holding_time_sec", "cooldown_sec", "staging_slices"},
               "defaults");
  BudgetVector b;
  b.leverage_cap = get_num(n, "leverage_cap", b.leverage_cap);
  b.notional_cap = get_num(n, "notional_cap", b.notional_cap);
  b.order_rate_cap = get_num(n, "order_rate_cap", b.order_rate_cap);
  b.slippage_cap_bps = get_num(n, "slippage_cap_bps", b.slippage_cap_bps);
  b.max_holding_time_sec = get_num(n, "max_holding_time_sec", b.max_holding_time_sec);
  b.cooldown_sec = get_num(n, "cooldown_sec", b.cooldown_sec);
  if (n["staging_slices"]) b.staging_slices = n["staging_slices"].as<int>();
  check_budget(b);
  return b;
}

RulePredicate parse_predicate(const YAML::Node& n) {
  require_keys(n,
               {"regime", "intent", "p_t_gte", "p_t_lt", "p_prov_lt", "r_cap_gte",
                "inj_alert", "margin_ratio_lt", "drawdown_gte", "funding_abs_gte",
                "position_age_gte_sec"},
               "rule predicate");
  RulePredicate p;
  if (n["regime"]) p.regime = regime_from_string(n["regime"].as<std::string>());
  if (n["intent"]) p.intent = intent_from_string(n["intent"].as<std::string>());
  if (n["p_t_gte"]) p.p_t_gte = n["p_t_gte"].as<double>();
  if (n["p_t_lt"]) p.p_t_lt = n["p_t_lt"].as<double>();
  if (n["p_prov_lt"]) p.p_prov_lt = n["p_prov_lt"].as<double>();
  if (n["r_cap_gte"]) p.r_cap_gte = n["r_cap_gte"].as<double>();
  if (n["inj_alert"]) p.inj_alert = n["inj_alert"].as<bool>();
  if (n["margin_ratio_lt"]) p.margin_ratio_lt = n["margin_ratio_lt"].as<double>();
  if (n["drawdown_gte"]) p.drawdown_gte = n["drawdown_gte"].as<double>();
  if (n["funding_abs_gte"]) p.funding_abs_gte = n["funding_abs_gte"].as<double>();
  if (n["position_age_gte_sec"]) {
    p.position_age_gte_sec = n["position_age_gte_sec"].as<double>();
  }
  return p;
}

std::vector<BudgetMutation> parse_mutations(const YAML::Node& n) {
  require_keys(n, {"mul", "set"}, "rule budgets");
  std::vector<BudgetMutation> out;
  static const std::set<std::string> components = {
      "leverage", "notional", "order_rate", "slippage", "cooldown", "holding"};
  auto parse_group = [&](const char* key, bool multiplicative) {
    if (!n[key]) return;
    for (const auto& kv : n[key]) {
      const auto comp = kv.first.as<std::string>();
      if (components.find(comp) == components.end()) {
        throw PolicyParseError("unknown budget component '" + comp + "' (" +
                               where(kv.first) + ")");
      }
      out.push_back({comp, multiplicative, kv.second.as<double>()});
    }
  };
  parse_group("mul", true);
  parse_group("set", false);
  return out;
}

}  // namespace

PolicyConfig load_policy(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw PolicyParseError(e.what());
  }
  require_keys(root,
               {"version", "defaults", "rate_window_sec", "thresholds", "g_table",
                "regime_ops", "h_params", "q_params", "leverage_floor", "rules"},
               "policy");
  PolicyConfig p;
  if (root["defaults"]) p.defaults = parse_defaults(root["defaults"]);
  if (root["rate_window_sec"]) p.rate_window_sec = root["rate_window_sec"].as<double>();

  if (root["thresholds"]) {
    require_keys(root["thresholds"], {"tau_limit", "tau_block"}, "thresholds");
    p.tau_limit = get_num(root["thresholds"], "tau_limit", p.tau_limit);
    p.tau_block = get_num(root["thresholds"], "tau_block", p.tau_block);
  }
  if (!(p.tau_limit >= 0.0 && p.tau_limit < p.tau_block && p.tau_block <= 1.0)) {
    throw PolicyParseError("thresholds must satisfy 0 <= tau_limit < tau_block <= 1");
  }

  if (root["g_table"]) {
    require_keys(root["g_table"], {"calm", "volatile", "extreme"}, "g_table");
    auto& g = p.tightening.g_table;
    if (root["g_table"]["calm"]) g.calm = parse_factors(root["g_table"]["calm"], "g_table.calm", g.calm);
    if (root["g_table"]["volatile"]) g.volatile_ = parse_factors(root["g_table"]["volatile"], "g_table.volatile", g.volatile_);
    if (root["g_table"]["extreme"]) g.extreme = parse_factors(root["g_table"]["extreme"], "g_table.extreme", g.extreme);
  }

  if (root["regime_ops"]) {
    require_keys(root["regime_ops"], {"cooldown_sec", "staging_slices"}, "regime_ops");
    auto& ops = p.tightening.regime_ops;
    if (root["regime_ops"]["cooldown_sec"]) {
      const auto& c = root["regime_ops"]["cooldown_sec"];
      require_keys(c, {"calm", "volatile", "extreme"}, "regime_ops.cooldown_sec");
      ops.cooldown_calm = get_num(c, "calm", ops.cooldown_calm);
      ops.cooldown_volatile = get_num(c, "volatile", ops.cooldown_volatile);
      ops.cooldown_extreme = get_num(c, "extreme", ops.cooldown_extreme);
    }
    if (root["regime_ops"]["staging_slices"]) {
      const auto& s = root["regime_ops"]["staging_slices"];
      require_keys(s, {"calm", "volatile", "extreme"}, "regime_ops.staging_slices");
      if (s["calm"]) ops.slices_calm = s["calm"].as<int>();
      if (s["volatile"]) ops.slices_volatile = s["volatile"].as<int>();
      if (s["extreme"]) ops.slices_extreme = s["extreme"].as<int>();
      if (ops.slices_calm < 1 || ops.slices_volatile < 1 || ops.slices_extreme < 1) {
        throw PolicyParseError("staging_slices must be >= 1");
      }
    }
  }

  if (root["h_params"]) {
    const auto& h = root["h_params"];
    require_keys(h, {"margin_safe", "margin_min", "dd_safe", "dd_max", "h_min"}, "h_params");
    auto& hp = p.tightening.h_params;
    hp.margin_safe = get_num(h, "margin_safe", hp.margin_safe);
    hp.margin_min = get_num(h, "margin_min", hp.margin_min);
    hp.dd_safe = get_num(h, "dd_safe", hp.dd_safe);
    hp.dd_max = get_num(h, "dd_max", hp.dd_max);
    hp.h_min = get_num(h, "h_min", hp.h_min);
    if (!(hp.margin_min < hp.margin_safe) || !(hp.dd_safe < hp.dd_max) ||
        !(hp.h_min > 0.0 && hp.h_min <= 1.0)) {
      throw PolicyParseError("h_params invariants violated");
    }
  }

  if (root["q_params"]) {
    const auto& q = root["q_params"];
    require_keys(q, {"prov_pivot", "q_min", "cap_slope", "inj_mult", "components"},
                 "q_params");
    auto& qp = p.tightening.q_params;
    qp.prov_pivot = get_num(q, "prov_pivot", qp.prov_pivot);
    qp.q_min = get_num(q, "q_min", qp.q_min);
    qp.cap_slope = get_num(q, "cap_slope", qp.cap_slope);
    qp.inj_mult = get_num(q, "inj_mult", qp.inj_mult);
    if (!(qp.prov_pivot > 0.0) || !(qp.q_min > 0.0 && qp.q_min <= 1.0) ||
        !(qp.inj_mult > 0.0 && qp.inj_mult <= 1.0) || qp.cap_slope < 0.0) {
      throw PolicyParseError("q_params invariants violated");
    }
    if (q["components"]) {
      require_keys(q["components"], {"leverage", "notional", "order_rate", "slippage"},
                   "q_params.components");
      const auto& c = q["components"];
      if (c["leverage"]) qp.leverage = parse_mask(c["leverage"], "q_params.components.leverage");
      if (c["notional"]) qp.notional = parse_mask(c["notional"], "q_params.components.notional");
      if (c["order_rate"]) qp.order_rate = parse_mask(c["order_rate"], "q_params.components.order_rate");
      if (c["slippage"]) qp.slippage = parse_mask(c["slippage"], "q_params.components.slippage");
    }
  }

  if (root["leverage_floor"]) {
    p.tightening.leverage_floor = root["leverage_floor"].as<double>();
    if (!(p.tightening.leverage_floor > 0.0)) {
      throw PolicyParseError("leverage_floor must be > 0");
    }
  }

  if (root["rules"]) {
    if (!root["rules"].IsSequence()) {
      throw PolicyParseError("rules must be a list (" + where(root["rules"]) + ")");
    }
    for (const auto& rn : root["rules"]) {
      require_keys(rn, {"id", "when", "decision", "budgets"}, "rule");
      PolicyRule rule;
      if (!rn["id"]) throw PolicyParseError("rule missing id (" + where(rn) + ")");
      rule.rule_id = rn["id"].as<std::string>();
      if (rn["when"]) rule.when = parse_predicate(rn["when"]);
      if (!rn["decision"]) {
        throw PolicyParseError("rule '" + rule.rule_id + "' missing decision");
      }
      rule.decision = decision_from_string(rn["decision"].as<std::string>());
      if (rn["budgets"]) rule.mutations = parse_mutations(rn["budgets"]);
      p.rules.push_back(std::move(rule));
    }
  }
  return p;
}

PolicyConfig load_policy_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open policy file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_policy(ss.str());
}

std::string policy_to_yaml(const PolicyConfig& p) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "version" << YAML::Value << 1;
  out << YAML::Key << "defaults" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "leverage_cap" << YAML::Value << p.defaults.leverage_cap;
  out << YAML::Key << "notional_cap" << YAML::Value << p.defaults.notional_cap;
  out << YAML::Key << "order_rate_cap" << YAML::Value << p.defaults.order_rate_cap;
  out << YAML::Key << "slippage_cap_bps" << YAML::Value << p.defaults.slippage_cap_bps;
  out << YAML::Key << "max_holding_time_sec" << YAML::Value << p.defaults.max_holding_time_sec;
  out << YAML::Key << "cooldown_sec" << YAML::Value << p.defaults.cooldown_sec;
  out << YAML::Key << "staging_slices" << YAML::Value << p.defaults.staging_slices;
  out << YAML::EndMap;
  out << YAML::Key << "rate_window_sec" << YAML::Value << p.rate_window_sec;
  out << YAML::Key << "thresholds" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "tau_limit" << YAML::Value << p.tau_limit;
  out << YAML::Key << "tau_block" << YAML::Value << p.tau_block;
  out << YAML::EndMap;

  auto emit_factors = [&](const char* name, const RegimeFactors& f) {
    out << YAML::Key << name << YAML::Value << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "leverage" << YAML::Value << f.leverage;
    out << YAML::Key << "notional" << YAML::Value << f.notional;
    out << YAML::Key << "order_rate" << YAML::Value << f.order_rate;
    out << YAML::Key << "slippage" << YAML::Value << f.slippage;
    out << YAML::EndMap;
  };
  out << YAML::Key << "g_table" << YAML::Value << YAML::BeginMap;
  emit_factors("calm", p.tightening.g_table.calm);
  emit_factors("volatile", p.tightening.g_table.volatile_);
  emit_factors("extreme", p.tightening.g_table.extreme);
  out << YAML::EndMap;

  const auto& ops = p.tightening.regime_ops;
  out << YAML::Key << "regime_ops" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "cooldown_sec" << YAML::Value << YAML::Flow << YAML::BeginMap;
  out << YAML::Key << "calm" << YAML::Value << ops.cooldown_calm;
  out << YAML::Key << "volatile" << YAML::Value << ops.cooldown_volatile;
  out << YAML::Key << "extreme" << YAML::Value << ops.cooldown_extreme;
  out << YAML::EndMap;
  out << YAML::Key << "staging_slices" << YAML::Value << YAML::Flow << YAML::BeginMap;
  out << YAML::Key << "calm" << YAML::Value << ops.slices_calm;
  out << YAML::Key << "volatile" << YAML::Value << ops.slices_volatile;
  out << YAML::Key << "extreme" << YAML::Value << ops.slices_extreme;
  out << YAML::EndMap << YAML::EndMap;

  const auto& hp = p.tightening.h_params;
  out << YAML::Key << "h_params" << YAML::Value << YAML::Flow << YAML::BeginMap;
  out << YAML::Key << "margin_safe" << YAML::Value << hp.margin_safe;
  out << YAML::Key << "margin_min" << YAML::Value << hp.margin_min;
  out << YAML::Key << "dd_safe" << YAML::Value << hp.dd_safe;
  out << YAML::Key << "dd_max" << YAML::Value << hp.dd_max;
  out << YAML::Key << "h_min" << YAML::Value << hp.h_min;
  out << YAML::EndMap;

  const auto& qp = p.tightening.q_params;
  out << YAML::Key << "q_params" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "prov_pivot" << YAML::Value << qp.prov_pivot;
  out << YAML::Key << "q_min" << YAML::Value << qp.q_min;
  out << YAML::Key << "cap_slope" << YAML::Value << qp.cap_slope;
  out << YAML::Key << "inj_mult" << YAML::Value << qp.inj_mult;
  out << YAML::Key << "components" << YAML::Value << YAML::BeginMap;
  std::vector<std::string> terms;
  auto emit_mask = [&](const char* name, const QTermMask& m) {
    mask_terms_yaml(m, terms);
    out << YAML::Key << name << YAML::Value << YAML::Flow << terms;
  };
  emit_mask("leverage", qp.leverage);
  emit_mask("notional", qp.notional);
  emit_mask("order_rate", qp.order_rate);
  emit_mask("slippage", qp.slippage);
  out << YAML::EndMap << YAML::EndMap;

  out << YAML::Key << "leverage_floor" << YAML::Value << p.tightening.leverage_floor;

  out << YAML::Key << "rules" << YAML::Value << YAML::BeginSeq;
  for (const auto& r : p.rules) {
    out << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << r.rule_id;
    out << YAML::Key << "when" << YAML::Value << YAML::Flow << YAML::BeginMap;
    if (r.when.regime) out << YAML::Key << "regime" << YAML::Value << to_string(*r.when.regime);
    if (r.when.intent) out << YAML::Key << "intent" << YAML::Value << to_string(*r.when.intent);
    if (r.when.p_t_gte) out << YAML::Key << "p_t_gte" << YAML::Value << *r.when.p_t_gte;
    if (r.when.p_t_lt) out << YAML::Key << "p_t_lt" << YAML::Value << *r.when.p_t_lt;
    if (r.when.p_prov_lt) out << YAML::Key << "p_prov_lt" << YAML::Value << *r.when.p_prov_lt;
    if (r.when.r_cap_gte) out << YAML::Key << "r_cap_gte" << YAML::Value << *r.when.r_cap_gte;
    if (r.when.inj_alert) out << YAML::Key << "inj_alert" << YAML::Value << *r.when.inj_alert;
    if (r.when.margin_ratio_lt) out << YAML::Key << "margin_ratio_lt" << YAML::Value << *r.when.margin_ratio_lt;
    if (r.when.drawdown_gte) out << YAML::Key << "drawdown_gte" << YAML::Value << *r.when.drawdown_gte;
    if (r.when.funding_abs_gte) out << YAML::Key << "funding_abs_gte" << YAML::Value << *r.when.funding_abs_gte;
    if (r.when.position_age_gte_sec) out << YAML::Key << "position_age_gte_sec" << YAML::Value << *r.when.position_age_gte_sec;
    out << YAML::EndMap;
    out << YAML::Key << "decision" << YAML::Value << to_string(r.decision);
    if (!r.mutations.empty()) {
      out << YAML::Key << "budgets" << YAML::Value << YAML::BeginMap;
      bool any_mul = false, any_set = false;
      for (const auto& m : r.mutations) (m.multiplicative ? any_mul : any_set) = true;
      if (any_mul) {
        out << YAML::Key << "mul" << YAML::Value << YAML::Flow << YAML::BeginMap;
        for (const auto& m : r.mutations) {
          if (m.multiplicative) out << YAML::Key << m.component << YAML::Value << m.value;
        }
        out << YAML::EndMap;
      }
      if (any_set) {
        out << YAML::Key << "set" << YAML::Value << YAML::Flow << YAML::BeginMap;
        for (const auto& m : r.mutations) {
          if (!m.multiplicative) out << YAML::Key << m.component << YAML::Value << m.value;
        }
        out << YAML::EndMap;
      }
      out << YAML::EndMap;
    }
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace sae
