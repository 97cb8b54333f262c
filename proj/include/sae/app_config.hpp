#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sae/attack_gen.hpp"
#include "sae/data_ingest.hpp"
#include "sae/simulator.hpp"

namespace sae {

inline constexpr const char* kVersionTag = "0.1.0";

struct AutooptWeights {
  double w_mdd{1.0};
  double w_cvar{10.0};
  double w_dg{1.0};
  double w_lat{0.01};
};

struct AutooptConstraints {
  double attacksucc_max{0.80};
  double falseblock_max{0.20};
  std::optional<double> latency_max;  // on the deterministic ops proxy
  std::int64_t max_liquidations{0};
};

struct ParamSpec {
  enum class Kind { kReal, kInt, kChoice };
  std::string name;
  Kind kind{Kind::kReal};
  double lo{0.0};
  double hi{1.0};
  std::vector<double> choices;
};

struct AutooptConfig {
  AutooptWeights weights;
  AutooptConstraints constraints;
  int batch_trials{20};
  int max_batches{15};
  int patience{5};
  double validation_frac{0.6};
  Variant variant{Variant::kFull};
  std::vector<ParamSpec> space;
};

// Everything a run needs, loadable from configs/default.yaml. CLI flags
// override file values override these shipped defaults.
struct AppConfig {
  std::string mode{"synth"};  // synth | binance
  std::string symbol{"SYNTH"};
  std::string venue{"binance-usdm"};
  std::string interval{"15m"};
  std::string start_date;  // binance mode, YYYY-MM-DD
  std::string end_date;
  int n_bars{5000};  // synth mode
  std::uint64_t seed{42};
  Variant variant{Variant::kFull};
  double initial_wallet{10000.0};
  std::string output_dir{"outputs"};
  std::string cache_dir{"cache"};
  std::string tiers_file;
  std::string policy_file;
  std::string config_text;  // raw file content, folded into the run id

  FeatureConfig features;
  FillModel fill;
  StrategyParams strategy;
  bool attacks_enabled{true};
  AttackConfig attacks;
  TrustState default_trust{0.9, 0.2, false, std::nullopt};
  TrustState attack_trust{0.3, 0.7, true, std::nullopt};
  IntendedPolicySpec spec;
  CalibratedModel trader_model;
  PolicyConfig policy;
  double stop_loss_frac{0.02};
  double step_loss_cap_frac{0.01};
  double staging_spacing_sec{60.0};
  GapPolicy gap_policy{GapPolicy::kFail};
  AutooptConfig autoopt;

  static AppConfig defaults();
  static AppConfig load_file(const std::string& path);

  ReplayConfig replay_config() const;
  std::string run_id() const;
};

// Shipped policy (Table-2 defaults plus the reduce-only and risk-threshold
// rules). configs/policy_default.yaml mirrors this; a test pins the two
// together.
PolicyConfig default_policy();
CalibratedModel default_trader_model();
IntendedPolicySpec default_intended_spec();

// Loads bars per config.mode: deterministic synthetic data or the cached
// exchange replay (fetching on a cache miss).
std::vector<ReplayBar> load_bars(const AppConfig& cfg);

TimestampMs parse_date_ms(const std::string& yyyy_mm_dd);

}  // namespace sae
