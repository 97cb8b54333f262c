#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sae/autoopt.hpp"
#include "sae/data_ingest.hpp"

namespace fs = std::filesystem;
using namespace sae;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() /
           ("sae_opt_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

AppConfig tiny_config() {
  AppConfig cfg = AppConfig::defaults();
  cfg.n_bars = 700;
  cfg.seed = 77;
  cfg.autoopt.batch_trials = 4;
  cfg.autoopt.max_batches = 3;
  cfg.autoopt.patience = 3;
  cfg.attacks.every_k_bars = 20;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

MetricsReport metrics_with(double as, double fb, double mdd, std::int64_t liq) {
  MetricsReport m;
  m.attack_success = as;
  m.false_block = fb;
  m.mdd = mdd;
  m.liquidations = liq;
  return m;
}

}  // namespace

TEST_CASE("sample_candidate is deterministic per (seed, trial)") {
  const auto space = AppConfig::defaults().autoopt.space;
  const auto a = sample_candidate(space, 5, 17);
  const auto b = sample_candidate(space, 5, 17);
  CHECK(a == b);
  CHECK(a != sample_candidate(space, 5, 18));
  CHECK(a != sample_candidate(space, 6, 17));
}

TEST_CASE("sampled values respect their declared ranges") {
  const auto space = AppConfig::defaults().autoopt.space;
  for (std::int64_t t = 0; t < 1000; ++t) {
    const auto p = sample_candidate(space, 11, t);
    for (const auto& spec : space) {
      const double v = p.at(spec.name);
      if (spec.kind == ParamSpec::Kind::kChoice) {
        bool found = false;
        for (double c : spec.choices) found = found || c == v;
        CHECK(found);
      } else {
        CHECK(v >= spec.lo);
        CHECK(v <= spec.hi);
        if (spec.kind == ParamSpec::Kind::kInt) {
          CHECK(v == static_cast<double>(static_cast<std::int64_t>(v)));
        }
      }
    }
  }
}

TEST_CASE("two-way choices are sampled roughly evenly") {
  std::vector<ParamSpec> space = {
      {"coin", ParamSpec::Kind::kChoice, 0, 0, {0.0, 1.0}}};
  int heads = 0;
  const int n = 1000;
  for (std::int64_t t = 0; t < n; ++t) {
    heads += sample_candidate(space, 3, t).at("coin") == 1.0 ? 1 : 0;
  }
  // 4-sigma binomial band around 500.
  CHECK(heads > 500 - 64);
  CHECK(heads < 500 + 64);
}

TEST_CASE("feasibility is inclusive at the constraint boundary") {
  AutooptConstraints c;
  CHECK(feasible(metrics_with(0.80, 0.0, 0.1, 0), c));   // AS == alpha passes
  CHECK(!feasible(metrics_with(0.81, 0.0, 0.1, 0), c));
  CHECK(!feasible(metrics_with(0.0, 0.25, 0.1, 0), c));  // FB 0.25 > 0.20
  CHECK(feasible(metrics_with(0.0, 0.0, 0.0, 0), c));
  CHECK(!feasible(metrics_with(0.0, 0.0, 0.0, 1), c));   // liquidation budget 0

  c.latency_max = 5.0;
  auto m = metrics_with(0.0, 0.0, 0.0, 0);
  m.gate_ops_per_request = 6.0;
  CHECK(!feasible(m, c));
}

TEST_CASE("score is the declared weighted sum") {
  AutooptWeights w;
  MetricsReport zero;
  CHECK(score(zero, w) == 0.0);

  MetricsReport m;
  m.mdd = 0.1;
  CHECK(score(m, AutooptWeights{1.0, 0.0, 0.0, 0.0}) == doctest::Approx(0.1));

  m.cvar_99 = -0.002;
  m.dg_loss = 0.3;
  m.gate_ops_per_request = 6.0;
  // 1*0.1 + 10*0.002 + 1*0.3 + 0.01*6 = 0.48
  CHECK(score(m, w) == doctest::Approx(0.48).epsilon(1e-12));
}

TEST_CASE("apply_params rejects unknown names") {
  AppConfig cfg = AppConfig::defaults();
  CHECK_THROWS_AS(apply_params(cfg, {{"warp.factor", 9.0}}), ConfigError);
  apply_params(cfg, {{"strategy.lookback", 12.0}, {"policy.b0_leverage", 2.5}});
  CHECK(cfg.strategy.lookback == 12);
  CHECK(cfg.policy.defaults.leverage_cap == 2.5);
}

TEST_CASE("optimize keeps a feasible, strictly improving incumbent") {
  TempDir tmp;
  AppConfig cfg = tiny_config();
  const auto bars = load_bars(cfg);
  OptimizeOptions opts;
  opts.out_dir = tmp.path.string();
  const auto outcome = optimize(cfg, bars, opts);
  REQUIRE(outcome.best.has_value());
  CHECK(outcome.trials_done == 12);

  // Replay the trace: incumbents must be feasible and strictly decreasing.
  std::ifstream trace(tmp.path / "trials.jsonl");
  REQUIRE(trace.good());
  std::string line;
  double incumbent_score = 1e300;
  std::int64_t incumbent_trial = -1;
  int improvements = 0;
  while (std::getline(trace, line)) {
    const ojson j = ojson::parse(line);
    if (!j.contains("score")) continue;
    const bool is_feasible = j.at("feasible").get<bool>();
    const double s = j.at("score").get<double>();
    if (is_feasible && s < incumbent_score) {
      incumbent_score = s;
      incumbent_trial = j.at("trial").get<std::int64_t>();
      ++improvements;
    }
    // The trace's incumbent pointer must agree with the recomputation.
    if (!j.at("incumbent_trial").is_null()) {
      CHECK(j.at("incumbent_trial").get<std::int64_t>() == incumbent_trial);
    }
  }
  CHECK(improvements >= 1);
  CHECK(outcome.best->trial_index == incumbent_trial);
  CHECK(outcome.best->score == doctest::Approx(incumbent_score));
  CHECK(feasible(outcome.best->metrics, cfg.autoopt.constraints));
}

TEST_CASE("infeasible candidates never become the incumbent") {
  TempDir tmp;
  AppConfig cfg = tiny_config();
  // Impossible feasibility region: everything is infeasible.
  cfg.autoopt.constraints.attacksucc_max = -1.0;
  const auto bars = load_bars(cfg);
  OptimizeOptions opts;
  opts.out_dir = tmp.path.string();
  const auto outcome = optimize(cfg, bars, opts);
  CHECK(!outcome.best.has_value());
  CHECK(outcome.best_infeasible.has_value());
  CHECK(fs::exists(tmp.path / "best_infeasible.json"));
  CHECK(!fs::exists(tmp.path / "best.json"));
}

TEST_CASE("resume reproduces the single-process run byte for byte") {
  AppConfig cfg = tiny_config();
  const auto bars = load_bars(cfg);

  TempDir one_shot;
  {
    OptimizeOptions opts;
    opts.out_dir = one_shot.path.string();
    optimize(cfg, bars, opts);
  }

  TempDir split;
  {
    AppConfig first = cfg;
    first.autoopt.max_batches = 1;
    OptimizeOptions opts;
    opts.out_dir = split.path.string();
    optimize(first, bars, opts);
    CHECK(fs::exists(split.path / "checkpoint.json"));

    OptimizeOptions resume_opts;
    resume_opts.out_dir = split.path.string();
    resume_opts.resume = true;
    optimize(cfg, bars, resume_opts);  // continues to 3 total batches
  }

  const std::string a = slurp(one_shot.path / "best.json");
  const std::string b = slurp(split.path / "best.json");
  REQUIRE(!a.empty());
  CHECK(a == b);
  CHECK(slurp(one_shot.path / "best_full_params.yaml") ==
        slurp(split.path / "best_full_params.yaml"));
}

#ifdef _OPENMP
TEST_CASE("the incumbent is independent of the worker count") {
  AppConfig cfg = tiny_config();
  const auto bars = load_bars(cfg);

  const int saved = omp_get_max_threads();
  TempDir one, four;
  omp_set_num_threads(1);
  {
    OptimizeOptions opts;
    opts.out_dir = one.path.string();
    optimize(cfg, bars, opts);
  }
  omp_set_num_threads(4);
  {
    OptimizeOptions opts;
    opts.out_dir = four.path.string();
    optimize(cfg, bars, opts);
  }
  omp_set_num_threads(saved);
  CHECK(slurp(one.path / "best.json") == slurp(four.path / "best.json"));
}
#endif

TEST_CASE("walk_forward keeps the test window unread during optimization") {
  TempDir tmp;
  AppConfig cfg = tiny_config();
  cfg.n_bars = 900;
  const auto bars = load_bars(cfg);
  OptimizeOptions opts;
  opts.out_dir = tmp.path.string();
  const auto rep = walk_forward(cfg, bars, opts);

  CHECK(rep.split_ms > bars.front().open_time_ms);
  bool saw_optimize = false, saw_test = false;
  for (const auto& a : rep.accesses) {
    if (a.phase == "optimize") {
      saw_optimize = true;
      CHECK(a.last_ms < rep.split_ms);  // never touches the test window
    }
    if (a.phase == "test") {
      saw_test = true;
      CHECK(a.first_ms >= rep.split_ms);
    }
  }
  CHECK(saw_optimize);
  CHECK(saw_test);
  CHECK(fs::exists(tmp.path / "walkforward.json"));
  CHECK(rep.test_metrics.n_bars > 0);
}

TEST_CASE("walk_forward rejects degenerate splits") {
  TempDir tmp;
  AppConfig cfg = tiny_config();
  cfg.autoopt.validation_frac = 1.5;
  const auto bars = load_bars(cfg);
  OptimizeOptions opts;
  opts.out_dir = tmp.path.string();
  CHECK_THROWS_AS(walk_forward(cfg, bars, opts), ConfigError);
  cfg.autoopt.validation_frac = 0.0001;
  CHECK_THROWS_AS(walk_forward(cfg, bars, opts), ConfigError);
}

TEST_CASE("optimize refuses a checkpoint from a different seed") {
  TempDir tmp;
  AppConfig cfg = tiny_config();
  cfg.autoopt.max_batches = 1;
  const auto bars = load_bars(cfg);
  OptimizeOptions opts;
  opts.out_dir = tmp.path.string();
  optimize(cfg, bars, opts);

  cfg.seed = 78;
  opts.resume = true;
  CHECK_THROWS_AS(optimize(cfg, bars, opts), ConfigError);
}
