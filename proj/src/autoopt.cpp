#include "sae/autoopt.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;

namespace sae {

ParamSet sample_candidate(const std::vector<ParamSpec>& space, std::uint64_t seed,
                          std::int64_t trial_index) {
  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(trial_index)));
  auto unit = [&rng]() {
    return (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  };
  ParamSet out;
  for (const auto& p : space) {
    switch (p.kind) {
      case ParamSpec::Kind::kReal:
        out[p.name] = p.lo + (p.hi - p.lo) * unit();
        break;
      case ParamSpec::Kind::kInt: {
        const auto span = static_cast<std::int64_t>(p.hi) -
                          static_cast<std::int64_t>(p.lo) + 1;
        out[p.name] = static_cast<double>(
            static_cast<std::int64_t>(p.lo) +
            static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(span)));
        break;
      }
      case ParamSpec::Kind::kChoice:
        out[p.name] = p.choices[rng() % p.choices.size()];
        break;
    }
  }
  return out;
}

void apply_params(AppConfig& cfg, const ParamSet& params) {
  for (const auto& [name, value] : params) {
    if (name == "strategy.lookback") cfg.strategy.lookback = static_cast<int>(value);
    else if (name == "strategy.entry_threshold") cfg.strategy.entry_threshold = value;
    else if (name == "strategy.req_leverage") cfg.strategy.req_leverage = value;
    else if (name == "strategy.req_notional") cfg.strategy.req_notional = value;
    else if (name == "strategy.req_slippage_bps") cfg.strategy.req_slippage_bps = value;
    else if (name == "policy.b0_leverage") cfg.policy.defaults.leverage_cap = value;
    else if (name == "policy.b0_notional") cfg.policy.defaults.notional_cap = value;
    else if (name == "policy.b0_order_rate") cfg.policy.defaults.order_rate_cap = value;
    else if (name == "policy.b0_slippage_bps") cfg.policy.defaults.slippage_cap_bps = value;
    else if (name == "policy.cooldown_volatile") cfg.policy.tightening.regime_ops.cooldown_volatile = value;
    else if (name == "policy.cooldown_extreme") cfg.policy.tightening.regime_ops.cooldown_extreme = value;
    else if (name == "policy.tau_limit") cfg.policy.tau_limit = value;
    else if (name == "policy.tau_block") cfg.policy.tau_block = value;
    else if (name == "policy.q_inj_mult") cfg.policy.tightening.q_params.inj_mult = value;
    else if (name == "policy.q_prov_pivot") cfg.policy.tightening.q_params.prov_pivot = value;
    else throw ConfigError("unknown search parameter '" + name + "'");
  }
}

bool feasible(const MetricsReport& m, const AutooptConstraints& c) {
  const double as = m.attack_success.value_or(0.0);
  const double fb = m.false_block.value_or(0.0);
  if (!(as <= c.attacksucc_max)) return false;
  if (!(fb <= c.falseblock_max)) return false;
  if (c.latency_max && !(m.gate_ops_per_request <= *c.latency_max)) return false;
  return m.liquidations <= c.max_liquidations;
}

double score(const MetricsReport& m, const AutooptWeights& w) {
  return w.w_mdd * m.mdd + w.w_cvar * std::fabs(m.cvar_99) + w.w_dg * m.dg_loss +
         w.w_lat * m.gate_ops_per_request;
}

void DataAccessGuard::note(const std::string& phase,
                           const std::vector<ReplayBar>& bars) {
  if (bars.empty()) return;
  entries_.push_back({phase, bars.front().open_time_ms, bars.back().open_time_ms});
}

bool DataAccessGuard::phase_avoids(const std::string& phase, TimestampMs from_ms,
                                   TimestampMs to_ms) const {
  for (const auto& e : entries_) {
    if (e.phase != phase) continue;
    if (e.first_ms <= to_ms && e.last_ms >= from_ms) return false;
  }
  return true;
}

namespace {

ojson params_to_json(const ParamSet& p) {
  ojson j = ojson::object();
  for (const auto& [k, v] : p) j[k] = v;
  return j;
}

ParamSet params_from_json(const ojson& j) {
  ParamSet p;
  for (const auto& [k, v] : j.items()) p[k] = v.get<double>();
  return p;
}

ojson incumbent_to_json(const Incumbent& inc) {
  ojson j;
  j["score"] = inc.score;
  j["trial_index"] = inc.trial_index;
  j["params"] = params_to_json(inc.params);
  j["metrics"] = metrics_to_json(inc.metrics);
  return j;
}

Incumbent incumbent_from_json(const ojson& j) {
  Incumbent inc;
  inc.score = j.at("score").get<double>();
  inc.trial_index = j.at("trial_index").get<std::int64_t>();
  inc.params = params_from_json(j.at("params"));
  inc.metrics = metrics_from_json(j.at("metrics"));
  return inc;
}

struct Checkpoint {
  std::uint64_t seed{0};
  std::int64_t next_trial{0};
  int batches_done{0};
  int batches_since_improve{0};
  std::optional<Incumbent> incumbent;
  std::optional<Incumbent> best_infeasible;
};

void write_checkpoint(const std::string& dir, const Checkpoint& ck) {
  ojson j;
  j["seed"] = ck.seed;
  j["next_trial"] = ck.next_trial;
  j["batches_done"] = ck.batches_done;
  j["batches_since_improve"] = ck.batches_since_improve;
  j["incumbent"] = ck.incumbent ? incumbent_to_json(*ck.incumbent) : ojson(nullptr);
  j["best_infeasible"] =
      ck.best_infeasible ? incumbent_to_json(*ck.best_infeasible) : ojson(nullptr);
  const auto tmp = fs::path(dir) / "checkpoint.json.tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << j.dump(2) << '\n';
  }
  fs::rename(tmp, fs::path(dir) / "checkpoint.json");
}

std::optional<Checkpoint> read_checkpoint(const std::string& dir) {
  const auto path = fs::path(dir) / "checkpoint.json";
  if (!fs::exists(path)) return std::nullopt;
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const ojson j = ojson::parse(ss.str());
  Checkpoint ck;
  ck.seed = j.at("seed").get<std::uint64_t>();
  ck.next_trial = j.at("next_trial").get<std::int64_t>();
  ck.batches_done = j.at("batches_done").get<int>();
  ck.batches_since_improve = j.at("batches_since_improve").get<int>();
  if (!j.at("incumbent").is_null()) {
    ck.incumbent = incumbent_from_json(j.at("incumbent"));
  }
  if (!j.at("best_infeasible").is_null()) {
    ck.best_infeasible = incumbent_from_json(j.at("best_infeasible"));
  }
  return ck;
}

struct TrialResult {
  std::int64_t trial{0};
  ParamSet params;
  MetricsReport metrics;
  bool ok{false};
  std::string error;
};

std::string params_yaml(const AppConfig& cfg, const Incumbent& inc) {
  std::ostringstream os;
  os.precision(17);
  os << "# Frozen best-so-far parameters (strategy phi + gate theta).\n";
  os << "seed: " << cfg.seed << "\n";
  os << "variant: " << to_string(cfg.autoopt.variant) << "\n";
  os << "score: " << inc.score << "\n";
  os << "trial_index: " << inc.trial_index << "\n";
  os << "params:\n";
  for (const auto& [k, v] : inc.params) os << "  " << k << ": " << v << "\n";
  return os.str();
}

}  // namespace

OptimizeOutcome optimize(const AppConfig& base, const std::vector<ReplayBar>& bars,
                         const OptimizeOptions& opts, DataAccessGuard* guard) {
  if (bars.empty()) throw DataError("optimize: no bars");
  fs::create_directories(opts.out_dir);
  const auto& ao = base.autoopt;
  if (ao.batch_trials < 1 || ao.max_batches < 1) {
    throw ConfigError("optimize: batch_trials and max_batches must be >= 1");
  }

  Checkpoint ck;
  ck.seed = base.seed;
  if (opts.resume) {
    if (auto prev = read_checkpoint(opts.out_dir)) {
      ck = *prev;
      if (ck.seed != base.seed) {
        throw ConfigError("optimize: checkpoint seed differs from config seed");
      }
    }
  }

  std::ofstream trace(fs::path(opts.out_dir) / "trials.jsonl",
                      opts.resume ? std::ios::app : std::ios::trunc);

  OptimizeOutcome out;
  out.batches_done = ck.batches_done;

  auto evaluate = [&](std::int64_t trial) {
    TrialResult tr;
    tr.trial = trial;
    tr.params = sample_candidate(ao.space, base.seed, trial);
    try {
      AppConfig cfg = base;
      cfg.variant = ao.variant;
      apply_params(cfg, tr.params);
      ReplayConfig rc = cfg.replay_config();
      // Candidate evaluations share the run seed: the data and attack
      // schedule stay fixed while parameters vary.
      const RunResult run = run_replay(rc, bars);
      tr.metrics = compute_metrics(run, to_string(cfg.variant), cfg.run_id());
      tr.ok = true;
    } catch (const std::exception& e) {
      tr.error = e.what();
    }
    return tr;
  };

  while (ck.batches_done < ao.max_batches) {
    if (ck.incumbent && ck.batches_since_improve >= ao.patience) {
      out.early_stopped = true;
      break;
    }
    const std::int64_t t0 = ck.next_trial;
    const int n = ao.batch_trials;
    std::vector<TrialResult> results(static_cast<std::size_t>(n));
    if (guard) guard->note("optimize", bars);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
      results[static_cast<std::size_t>(i)] = evaluate(t0 + i);
    }

    bool improved = false;
    for (const auto& tr : results) {  // merge strictly in trial order
      ojson line;
      line["trial"] = tr.trial;
      line["params"] = params_to_json(tr.params);
      if (tr.ok) {
        const double j = score(tr.metrics, ao.weights);
        const bool is_feasible = feasible(tr.metrics, ao.constraints);
        line["score"] = j;
        line["feasible"] = is_feasible;
        line["metrics"] = metrics_to_json(tr.metrics);
        if (is_feasible && (!ck.incumbent || j < ck.incumbent->score)) {
          ck.incumbent = Incumbent{tr.params, j, tr.trial, tr.metrics};
          improved = true;
        }
        if (!is_feasible && (!ck.best_infeasible || j < ck.best_infeasible->score)) {
          ck.best_infeasible = Incumbent{tr.params, j, tr.trial, tr.metrics};
        }
        line["incumbent_trial"] =
            ck.incumbent ? ojson(ck.incumbent->trial_index) : ojson(nullptr);
      } else {
        line["error"] = tr.error;
      }
      trace << line.dump() << '\n';
    }
    trace.flush();

    ck.next_trial = t0 + n;
    ck.batches_done += 1;
    ck.batches_since_improve = improved ? 0 : ck.batches_since_improve + 1;
    write_checkpoint(opts.out_dir, ck);
  }

  out.best = ck.incumbent;
  out.best_infeasible = ck.best_infeasible;
  out.trials_done = ck.next_trial;
  out.batches_done = ck.batches_done;

  if (ck.incumbent) {
    ojson best;
    best["score"] = ck.incumbent->score;
    best["trial_index"] = ck.incumbent->trial_index;
    best["params"] = params_to_json(ck.incumbent->params);
    best["metrics"] = metrics_to_json(ck.incumbent->metrics);
    best["seed"] = base.seed;
    best["trials_total"] = ck.next_trial;
    best["early_stopped"] = out.early_stopped;
    std::ofstream bj(fs::path(opts.out_dir) / "best.json", std::ios::binary);
    bj << best.dump(2) << '\n';
    std::ofstream by(fs::path(opts.out_dir) / "best_full_params.yaml",
                     std::ios::binary);
    by << params_yaml(base, *ck.incumbent);
  } else {
    ojson rep;
    rep["error"] = "no feasible candidate";
    rep["trials_total"] = ck.next_trial;
    rep["best_infeasible"] =
        ck.best_infeasible ? incumbent_to_json(*ck.best_infeasible) : ojson(nullptr);
    std::ofstream bj(fs::path(opts.out_dir) / "best_infeasible.json",
                     std::ios::binary);
    bj << rep.dump(2) << '\n';
  }
  return out;
}

WalkForwardReport walk_forward(const AppConfig& base,
                               const std::vector<ReplayBar>& bars,
                               const OptimizeOptions& opts) {
  const double frac = base.autoopt.validation_frac;
  if (!(frac > 0.0 && frac < 1.0)) {
    throw ConfigError("walk_forward: validation_frac must be in (0,1)");
  }
  const std::size_t split = static_cast<std::size_t>(
      frac * static_cast<double>(bars.size()));
  if (split < 2 || split + 2 > bars.size()) {
    throw ConfigError("walk_forward: segments too small (split overlap or empty)");
  }
  const std::vector<ReplayBar> validation(bars.begin(),
                                          bars.begin() + static_cast<std::ptrdiff_t>(split));
  const std::vector<ReplayBar> test(bars.begin() + static_cast<std::ptrdiff_t>(split),
                                    bars.end());

  DataAccessGuard guard;
  const OptimizeOutcome outcome = optimize(base, validation, opts, &guard);
  if (!outcome.best) {
    throw NoFeasibleCandidate("walk_forward found no feasible incumbent");
  }
  if (!guard.phase_avoids("optimize", test.front().open_time_ms,
                          test.back().open_time_ms)) {
    throw Error("walk_forward: optimization touched the test window");
  }

  AppConfig frozen = base;
  frozen.variant = base.autoopt.variant;
  apply_params(frozen, outcome.best->params);
  guard.note("test", test);
  const RunResult test_run = run_replay(frozen.replay_config(), test);
  const MetricsReport test_metrics =
      compute_metrics(test_run, to_string(frozen.variant), frozen.run_id());

  WalkForwardReport rep;
  rep.best = *outcome.best;
  rep.validation_metrics = outcome.best->metrics;
  rep.test_metrics = test_metrics;
  rep.accesses = guard.entries();
  rep.split_ms = test.front().open_time_ms;

  ojson j;
  j["split_ms"] = rep.split_ms;
  j["params"] = params_to_json(rep.best.params);
  j["validation_metrics"] = metrics_to_json(rep.validation_metrics);
  j["test_metrics"] = metrics_to_json(rep.test_metrics);
  j["accesses"] = ojson::array();
  for (const auto& a : rep.accesses) {
    j["accesses"].push_back(
        ojson{{"phase", a.phase}, {"first_ms", a.first_ms}, {"last_ms", a.last_ms}});
  }
  fs::create_directories(opts.out_dir);
  std::ofstream out(fs::path(opts.out_dir) / "walkforward.json", std::ios::binary);
  out << j.dump(2) << '\n';
  return rep;
}

}  // namespace sae
