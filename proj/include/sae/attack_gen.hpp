#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "sae/common.hpp"
#include "sae/contract.hpp"
#include "sae/intended_policy.hpp"
#include "sae/market_state.hpp"

namespace sae {

// Seeded, replay-deterministic attack stream. Every generated attempt is
// out-of-scope by construction when executed, so a pass-through gate yields
// AttackSuccess of exactly 1. Temporal families (flooding, narrative flips)
// therefore carry a static cap breach in addition to their timing pattern.
struct AttackConfig {
  std::set<std::string> families{"param_escalation", "flooding", "tool_misuse",
                                 "state_violation", "narrative_flip"};
  int every_k_bars{10};
  int start_bar{64};
  std::uint64_t seed{0};  // mixed with the run seed
  Side side{Side::kLong};

  std::vector<double> escalation_factors{1.5, 2.0, 5.0, 10.0};
  int flood_burst{10};
  double flood_spacing_sec{1.0};
  double flood_slippage_factor{2.0};
  int flip_burst{6};
  double flip_spacing_sec{1.0};
  double flip_notional_factor{1.5};
  std::string misuse_venue{"shadow-venue"};
  std::string misuse_symbol{"XYZUSDT"};
  std::string misuse_account{"shadow"};
};

struct AttackAttempt {
  ExecutionRequest request;
  std::string family;
  int bar_index{0};
};

std::vector<AttackAttempt> gen_attacks(const AttackConfig& cfg,
                                       const IntendedPolicySpec& spec,
                                       const FeatureTable& features,
                                       std::uint64_t run_seed,
                                       const std::string& symbol,
                                       const std::string& venue);

}  // namespace sae
