#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "sae/app_config.hpp"
#include "sae/autoopt.hpp"
#include "sae/data_ingest.hpp"
#include "sae/report.hpp"
#include "sae/run_io.hpp"
#include "sae/simulator.hpp"

namespace fs = std::filesystem;
using namespace sae;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInfeasible = 4;

struct GlobalFlags {
  std::string config_path{"configs/default.yaml"};
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
};

AppConfig load_config(const GlobalFlags& g) {
  AppConfig cfg = fs::exists(g.config_path) ? AppConfig::load_file(g.config_path)
                                            : AppConfig::defaults();
  if (!fs::exists(g.config_path)) {
    std::cerr << "note: config file '" << g.config_path
              << "' not found; using shipped defaults\n";
  }
  if (g.mode) {
    if (*g.mode != "synth" && *g.mode != "binance") {
      throw ConfigError("--mode must be synth or binance");
    }
    cfg.mode = *g.mode;
  }
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

int cmd_fetch(const GlobalFlags& g) {
  AppConfig cfg = load_config(g);
  if (cfg.mode == "synth") {
    const auto bars = load_bars(cfg);
    BarCache cache(cfg.cache_dir);
    cache.store_klines(cfg.symbol, cfg.interval, bars.front().open_time_ms,
                       bars.back().open_time_ms, bars);
    std::cout << "synthetic fixture cached: " << bars.size() << " bars\n";
  } else {
    ClientConfig cc;
    cc.cache_dir = cfg.cache_dir;
    cc.gap_policy = cfg.gap_policy;
    MarketDataClient client(cc);
    const TimestampMs start = parse_date_ms(cfg.start_date);
    const TimestampMs end = parse_date_ms(cfg.end_date) - 1;
    const auto bars = client.fetch_klines(cfg.symbol, cfg.interval, start, end);
    const auto funding = client.fetch_funding(cfg.symbol, start, end);
    client.fetch_exchange_info(cfg.symbol);
    std::cout << "fetched " << bars.size() << " bars, " << funding.size()
              << " funding events\n";
  }
  BarCache cache(cfg.cache_dir);
  std::cout << "cache manifest (" << cfg.cache_dir << "):\n"
            << cache.manifest().dump(2) << "\n";
  return kExitOk;
}

int cmd_replay(const GlobalFlags& g, const std::optional<std::string>& variant,
               std::string out_dir) {
  AppConfig cfg = load_config(g);
  if (variant) cfg.variant = variant_from_string(*variant);
  const auto bars = load_bars(cfg);
  const RunResult run = run_replay(cfg.replay_config(), bars);
  const MetricsReport metrics =
      compute_metrics(run, to_string(cfg.variant), cfg.run_id());
  if (out_dir.empty()) {
    out_dir = (fs::path(cfg.output_dir) /
               (std::string(to_string(cfg.variant)) + "_" + cfg.run_id()))
                  .string();
  }
  write_run_dir(out_dir, run, metrics);
  if (run.tiers_fallback) {
    std::cerr << "note: no margin-tier table; conservative fallback in use\n";
  }
  std::cout << "run_id " << metrics.run_id << " -> " << out_dir << "\n"
            << main_results_table({RunSummary{out_dir, metrics, {}}});
  return kExitOk;
}

int cmd_attack_eval(const GlobalFlags& g, std::string out_dir) {
  AppConfig cfg = load_config(g);
  cfg.attacks_enabled = true;
  const auto bars = load_bars(cfg);
  if (out_dir.empty()) out_dir = (fs::path(cfg.output_dir) / "attack_eval").string();
  const Variant variants[] = {Variant::kNoSae, Variant::kStaticOms, Variant::kBudget,
                              Variant::kBudgetCooldown, Variant::kFull};
  std::vector<RunSummary> rows;
  for (Variant v : variants) {
    AppConfig vc = cfg;
    vc.variant = v;
    const RunResult run = run_replay(vc.replay_config(), bars);
    const MetricsReport m = compute_metrics(run, to_string(v), vc.run_id());
    const std::string dir = (fs::path(out_dir) / to_string(v)).string();
    write_run_dir(dir, run, m);
    rows.push_back(load_run_summary(dir));
  }
  const std::string table = main_results_table(rows);
  std::cout << table;
  {
    std::ofstream out(fs::path(out_dir) / "comparison.txt");
    out << table;
  }
  {
    ojson j = ojson::array();
    for (const auto& r : rows) j.push_back(metrics_to_json(r.metrics));
    std::ofstream out(fs::path(out_dir) / "comparison.json");
    out << j.dump(2) << '\n';
  }
  std::cout << "attack-eval artifacts in " << out_dir << "\n";
  return kExitOk;
}

int cmd_optimize(const GlobalFlags& g, const std::optional<int>& batch_trials,
                 const std::optional<int>& max_batches,
                 const std::optional<int>& patience,
                 const std::optional<double>& falseblock_max,
                 const std::optional<double>& attacksucc_max, bool resume,
                 const std::string& out_dir) {
  AppConfig cfg = load_config(g);
  if (batch_trials) cfg.autoopt.batch_trials = *batch_trials;
  if (max_batches) cfg.autoopt.max_batches = *max_batches;
  if (patience) cfg.autoopt.patience = *patience;
  if (falseblock_max) cfg.autoopt.constraints.falseblock_max = *falseblock_max;
  if (attacksucc_max) cfg.autoopt.constraints.attacksucc_max = *attacksucc_max;
  if (cfg.autoopt.patience > cfg.autoopt.max_batches) {
    std::cerr << "warning: patience (" << cfg.autoopt.patience
              << ") exceeds max_batches (" << cfg.autoopt.max_batches
              << "); early stopping can never trigger\n";
  }
  const auto bars = load_bars(cfg);

  OptimizeOptions opts;
  opts.out_dir = out_dir;
  opts.resume = resume;
  const WalkForwardReport rep = walk_forward(cfg, bars, opts);

  // Freeze the incumbent and persist full runs for both segments.
  AppConfig frozen = cfg;
  frozen.variant = cfg.autoopt.variant;
  apply_params(frozen, rep.best.params);
  const std::string final_dir =
      (fs::path(out_dir) / "final" / frozen.run_id()).string();
  const std::size_t split = static_cast<std::size_t>(
      cfg.autoopt.validation_frac * static_cast<double>(bars.size()));
  const std::vector<ReplayBar> validation(bars.begin(),
                                          bars.begin() + static_cast<std::ptrdiff_t>(split));
  const std::vector<ReplayBar> test(bars.begin() + static_cast<std::ptrdiff_t>(split),
                                    bars.end());
  for (const auto& [name, slice] : {std::pair<std::string, const std::vector<ReplayBar>*>{
                                        "validation", &validation},
                                    {"test", &test}}) {
    const RunResult run = run_replay(frozen.replay_config(), *slice);
    const MetricsReport m =
        compute_metrics(run, to_string(frozen.variant), frozen.run_id());
    write_run_dir((fs::path(final_dir) / name).string(), run, m);
  }

  std::cout << "best score " << rep.best.score << " at trial "
            << rep.best.trial_index << "\n"
            << "validation MDD " << rep.validation_metrics.mdd << ", test MDD "
            << rep.test_metrics.mdd << "\n"
            << "artifacts: " << out_dir << "/best.json, best_full_params.yaml, "
            << "walkforward.json, " << final_dir << "\n";
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& dirs,
               const std::vector<std::string>& pair, int block_len, int n_boot,
               std::uint64_t seed, const std::string& out_file) {
  if (dirs.empty()) throw ConfigError("report: need at least one run directory");
  std::vector<RunSummary> rows;
  for (const auto& d : dirs) rows.push_back(load_run_summary(d));
  std::ostringstream report;
  report << main_results_table(rows);
  ojson machine;
  machine["runs"] = ojson::array();
  for (const auto& r : rows) machine["runs"].push_back(metrics_to_json(r.metrics));
  if (!pair.empty()) {
    if (pair.size() != 2) throw ConfigError("--pair takes exactly two run dirs");
    const RunSummary a = load_run_summary(pair[0]);
    const RunSummary b = load_run_summary(pair[1]);
    const PairStats s = pair_statistics(a, b, block_len, n_boot, seed);
    report << '\n' << significance_table(a, b, s);
    machine["significance"] = significance_json(a, b, s);
  }
  std::cout << report.str();
  if (!out_file.empty()) {
    std::ofstream out(out_file);
    out << report.str();
    std::ofstream mj(out_file + ".json");
    mj << machine.dump(2) << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"survivability-aware execution middleware and replay harness"};
  app.require_subcommand(1);

  GlobalFlags g;
  app.add_option("--config", g.config_path, "run configuration file");
  std::string mode;
  app.add_option("--mode", mode, "data mode: synth | binance");
  std::uint64_t seed_flag = 0;
  auto* seed_opt = app.add_option("--seed", seed_flag, "override run seed");

  auto* fetch = app.add_subcommand("fetch", "populate the market-data cache");

  auto* replay = app.add_subcommand("replay", "run one gated replay");
  std::string variant;
  replay->add_option("--variant", variant,
                     "nosae | static-oms | budget | budget-cooldown | full");
  std::string replay_out;
  replay->add_option("--out", replay_out, "run directory");

  auto* attack_eval =
      app.add_subcommand("attack-eval", "run all variants under the attack suite");
  std::string attack_out;
  attack_eval->add_option("--out", attack_out, "output directory");

  auto* optimize =
      app.add_subcommand("optimize", "constrained best-so-far parameter search");
  int batch_trials = 0, max_batches = 0, patience = 0;
  double falseblock_max = 0.0, attacksucc_max = 0.0;
  auto* bt = optimize->add_option("--batch_trials", batch_trials);
  auto* mb = optimize->add_option("--max_batches", max_batches);
  auto* pt = optimize->add_option("--patience", patience);
  auto* fbm = optimize->add_option("--falseblock_max", falseblock_max);
  auto* asm_ = optimize->add_option("--attacksucc_max", attacksucc_max);
  bool resume = false;
  optimize->add_flag("--resume", resume, "continue from checkpoint");
  std::string opt_out = "outputs_auto";
  optimize->add_option("--out", opt_out, "artifact directory");

  auto* report = app.add_subcommand("report", "comparison tables and significance");
  std::vector<std::string> report_dirs;
  report->add_option("dirs", report_dirs, "run directories");
  std::vector<std::string> pair;
  report->add_option("--pair", pair, "two run dirs for significance stats")
      ->expected(2);
  int block_len = 24, n_boot = 1000;
  report->add_option("--block-len", block_len, "bootstrap block length");
  report->add_option("--n-boot", n_boot, "bootstrap replicates");
  std::uint64_t report_seed = 7;
  report->add_option("--stats-seed", report_seed, "bootstrap seed");
  std::string report_out;
  report->add_option("--out", report_out, "write report to file");

  CLI11_PARSE(app, argc, argv);
  if (!mode.empty()) g.mode = mode;
  if (seed_opt->count() > 0) g.seed = seed_flag;

  try {
    if (fetch->parsed()) return cmd_fetch(g);
    if (replay->parsed()) {
      return cmd_replay(
          g, variant.empty() ? std::nullopt : std::make_optional(variant),
          replay_out);
    }
    if (attack_eval->parsed()) return cmd_attack_eval(g, attack_out);
    if (optimize->parsed()) {
      return cmd_optimize(
          g, bt->count() ? std::make_optional(batch_trials) : std::nullopt,
          mb->count() ? std::make_optional(max_batches) : std::nullopt,
          pt->count() ? std::make_optional(patience) : std::nullopt,
          fbm->count() ? std::make_optional(falseblock_max) : std::nullopt,
          asm_->count() ? std::make_optional(attacksucc_max) : std::nullopt, resume,
          opt_out);
    }
    if (report->parsed()) {
      return cmd_report(report_dirs, pair, block_len, n_boot, report_seed,
                        report_out);
    }
  } catch (const NoFeasibleCandidate& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
