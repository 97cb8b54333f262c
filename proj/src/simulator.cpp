#include "sae/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace sae {

void validate_bars(const std::vector<ReplayBar>& bars) {
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const auto& b = bars[i];
    if (!(b.open > 0.0 && b.high > 0.0 && b.low > 0.0 && b.close > 0.0)) {
      throw DataError("bar " + std::to_string(i) + ": non-positive price");
    }
    if (b.low > std::min(b.open, b.close) || b.high < std::max(b.open, b.close)) {
      throw DataError("bar " + std::to_string(i) + ": OHLC bounds violated");
    }
    if (i > 0 && b.open_time_ms <= bars[i - 1].open_time_ms) {
      throw DataError("bar " + std::to_string(i) + ": open times not increasing");
    }
  }
}

std::vector<MarginTier> fallback_tiers() {
  return {{0.0, 0.0, 0.01, 0.0}};
}

void validate_tiers(const std::vector<MarginTier>& tiers) {
  if (tiers.empty()) throw ConfigError("margin tiers: empty table");
  double prev_cap = 0.0;
  double prev_mmr = 0.0;
  for (std::size_t i = 0; i < tiers.size(); ++i) {
    const auto& t = tiers[i];
    if (t.mmr < 0.0 || t.maint_amount < 0.0) {
      throw ConfigError("margin tiers: negative mmr or maint_amount");
    }
    if (t.mmr < prev_mmr) throw ConfigError("margin tiers: mmr must be nondecreasing");
    if (i == 0) {
      if (t.notional_floor != 0.0) {
        throw ConfigError("margin tiers: first tier must start at 0");
      }
    } else if (t.notional_floor != prev_cap) {
      throw ConfigError("margin tiers: tiers must be contiguous");
    }
    const bool last = i + 1 == tiers.size();
    if (!last && !(t.notional_cap > t.notional_floor)) {
      throw ConfigError("margin tiers: caps must increase");
    }
    prev_cap = t.notional_cap;
    prev_mmr = t.mmr;
  }
}

double maintenance_margin(double notional, const std::vector<MarginTier>& tiers) {
  if (notional < 0.0) throw DataError("maintenance_margin: negative notional");
  validate_tiers(tiers);
  for (std::size_t i = 0; i < tiers.size(); ++i) {
    const auto& t = tiers[i];
    const bool last = i + 1 == tiers.size();
    const bool unbounded = t.notional_cap <= 0.0;
    if (notional >= t.notional_floor &&
        (last || unbounded || notional < t.notional_cap)) {
      return std::max(0.0, notional * t.mmr - t.maint_amount);
    }
  }
  throw DataError("maintenance_margin: no tier covers notional " +
                  std::to_string(notional));
}

std::vector<MarginTier> parse_tiers_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("tiers csv: empty file");
  // Header is mandatory: notional_floor,notional_cap,mmr,maint_amount
  std::vector<MarginTier> tiers;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    MarginTier t;
    double* fields[4] = {&t.notional_floor, &t.notional_cap, &t.mmr, &t.maint_amount};
    for (int i = 0; i < 4; ++i) {
      if (!std::getline(row, cell, ',')) throw DataError("tiers csv: short row");
      *fields[i] = std::stod(cell);
    }
    tiers.push_back(t);
  }
  validate_tiers(tiers);
  return tiers;
}

std::vector<MarginTier> load_tiers_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open tiers file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_tiers_csv(ss.str());
}

double SimAccount::unrealized(double price) const {
  if (!position) return 0.0;
  const double dir = position->side == Side::kLong ? 1.0 : -1.0;
  return dir * position->size_base * (price - position->entry_price);
}

double SimAccount::position_notional(double price) const {
  return position ? position->size_base * price : 0.0;
}

double margin_ratio_of(const SimAccount& acct, double price,
                       const std::vector<MarginTier>& tiers) {
  if (!acct.position) return kUnconstrainedMarginRatio;
  const double mm = maintenance_margin(acct.position_notional(price), tiers);
  if (mm <= 0.0) return kUnconstrainedMarginRatio;
  return std::max(0.0, acct.equity(price) / mm);
}

namespace {

double used_margin(const SimAccount& acct) {
  if (!acct.position) return 0.0;
  return acct.position->size_base * acct.position->entry_price /
         acct.position->leverage;
}

void close_position(SimAccount& acct, double fill_price, TimestampMs now_ms) {
  const auto& pos = *acct.position;
  const double dir = pos.side == Side::kLong ? 1.0 : -1.0;
  const double pnl = dir * pos.size_base * (fill_price - pos.entry_price);
  acct.wallet += pnl;
  acct.realized += pnl;
  acct.trades.push_back({now_ms, pnl, pos.open_req_leverage,
                         static_cast<double>(now_ms - pos.entry_time_ms) / 1000.0});
  acct.position.reset();
}

}  // namespace

FillOutcome execute_fill(SimAccount& acct, const ReplayBar& bar, Intent intent,
                         Side side, double notional_fraction, double leverage,
                         double slippage_cap_bps, double req_leverage,
                         const FillModel& fill, std::int64_t action_seq) {
  FillOutcome out;
  const double price = bar.close;
  const double equity = acct.equity(price);

  if (intent == Intent::kModify || intent == Intent::kCancel) {
    out.executed = true;  // nothing to modify in the close-fill model
    return out;
  }
  if (intent == Intent::kClose && !acct.position) {
    out.executed = true;
    return out;
  }
  if (intent == Intent::kOpen && notional_fraction <= 0.0) {
    out.executed = true;
    return out;
  }

  const double order_notional = intent == Intent::kOpen
                                    ? notional_fraction * std::max(equity, 0.0)
                                    : acct.position_notional(price);
  if (order_notional <= 0.0) {
    out.executed = true;
    return out;
  }

  const double bar_quote_volume = std::max(bar.volume * price, 1e-9);
  const double model_slip_bps =
      fill.base_slippage_bps + fill.impact_coeff_bps * (order_notional / bar_quote_volume);
  if (model_slip_bps > slippage_cap_bps) {
    out.reason = "slippage-cap";
    return out;
  }

  // Direction of the trade leg: opening a LONG (or closing a SHORT) buys.
  const Side trade_toward = intent == Intent::kOpen
                                ? side
                                : (acct.position->side == Side::kLong ? Side::kShort
                                                                      : Side::kLong);
  const bool buying = trade_toward == Side::kLong;
  out.fill_price = price * (1.0 + (buying ? 1.0 : -1.0) * model_slip_bps / 1e4);

  if (intent == Intent::kClose) {
    const double fee = order_notional * fill.taker_fee_bps / 1e4;
    acct.wallet -= fee;
    acct.fees += fee;
    out.fee = fee;
    close_position(acct, out.fill_price, bar.open_time_ms);
    out.executed = true;
    out.traded = true;
    return out;
  }

  // Open. An opposite-side open flips: close the standing position at the
  // same (adverse) price first, then open the new leg.
  double flip_fee = 0.0;
  const bool flips = acct.position && acct.position->side != side;
  const double margin_after_flip = flips ? 0.0 : used_margin(acct);
  const double required = order_notional / leverage;
  const double equity_now = acct.equity(price);
  if (required > equity_now - margin_after_flip + 1e-9) {
    out.reason = "insufficient-margin";
    return out;
  }
  if (flips) {
    const double closing_notional = acct.position_notional(price);
    flip_fee = closing_notional * fill.taker_fee_bps / 1e4;
    acct.wallet -= flip_fee;
    acct.fees += flip_fee;
    close_position(acct, out.fill_price, bar.open_time_ms);
  }

  const double fee = order_notional * fill.taker_fee_bps / 1e4;
  acct.wallet -= fee;
  acct.fees += fee;
  out.fee = fee + flip_fee;

  const double size = order_notional / out.fill_price;
  if (acct.position) {
    auto& pos = *acct.position;
    const double old_margin = pos.size_base * pos.entry_price / pos.leverage;
    const double new_margin = size * out.fill_price / leverage;
    const double total_size = pos.size_base + size;
    pos.entry_price =
        (pos.size_base * pos.entry_price + size * out.fill_price) / total_size;
    pos.size_base = total_size;
    pos.leverage = pos.size_base * pos.entry_price / (old_margin + new_margin);
    pos.open_req_leverage = req_leverage;
    pos.owner_action = action_seq;
  } else {
    acct.position = SimPosition{side, size, out.fill_price, leverage,
                                bar.open_time_ms, req_leverage, action_seq};
  }
  out.executed = true;
  out.traded = true;
  return out;
}

void apply_funding(SimAccount& acct, const ReplayBar& bar) {
  if (bar.funding_rate == 0.0 || !acct.position) return;
  const double dir = acct.position->side == Side::kLong ? 1.0 : -1.0;
  const double delta = -bar.funding_rate * acct.position_notional(bar.close) * dir;
  acct.wallet += delta;
  acct.funding += delta;
}

bool check_liquidation(SimAccount& acct, const ReplayBar& bar,
                       const std::vector<MarginTier>& tiers, const FillModel& fill) {
  if (!acct.position) return false;
  const double notional = acct.position_notional(bar.close);
  const double mm = maintenance_margin(notional, tiers);
  if (acct.equity(bar.close) > mm) return false;

  // Forced close at the bar close; the penalty is tracked separately so the
  // cash decomposition stays exact.
  close_position(acct, bar.close, bar.open_time_ms);
  const double penalty = notional * fill.liq_penalty_bps / 1e4;
  acct.wallet -= penalty;
  acct.penalties += penalty;
  ++acct.liquidations;
  return true;
}

namespace {

struct PendingRequest {
  ExecutionRequest request;
  bool is_attack{false};
  std::string family;
};

AccountState make_snapshot(const SimAccount& acct, double price,
                           const std::vector<MarginTier>& tiers,
                           const std::string& symbol) {
  AccountState s;
  s.equity = acct.equity(price);
  s.peak_equity = std::max(acct.peak_equity, s.equity);
  s.margin_ratio = margin_ratio_of(acct, price, tiers);
  if (acct.position) {
    Position p;
    p.symbol = symbol;
    p.side = acct.position->side;
    p.notional = acct.position_notional(price);  // marked at snapshot
    p.entry_price = acct.position->entry_price;
    p.leverage = acct.position->leverage;
    p.entry_time_ms = acct.position->entry_time_ms;
    s.positions.push_back(std::move(p));
  }
  const std::size_t n_orders = acct.order_times.size();
  const std::size_t order_tail = n_orders > 100 ? n_orders - 100 : 0;
  s.recent_order_times.assign(acct.order_times.begin() + order_tail,
                              acct.order_times.end());
  const std::size_t n_trades = acct.trades.size();
  const std::size_t pnl_tail = n_trades > 20 ? n_trades - 20 : 0;
  double holding_sum = 0.0;
  for (std::size_t i = pnl_tail; i < n_trades; ++i) {
    s.recent_pnl.push_back(acct.trades[i].pnl);
    holding_sum += acct.trades[i].holding_sec;
  }
  if (n_trades > pnl_tail) {
    s.avg_holding_time_sec = holding_sum / static_cast<double>(n_trades - pnl_tail);
  }
  return s;
}

class MomentumStrategy {
 public:
  explicit MomentumStrategy(const StrategyParams& p) : p_(p) {}

  std::vector<ExecutionRequest> step(std::size_t bar, const FeatureTable& f,
                                     const SimAccount& acct, const std::string& symbol,
                                     const std::string& venue) {
    std::vector<ExecutionRequest> out;
    if (bar < static_cast<std::size_t>(p_.lookback)) return out;
    const double mom =
        std::log(f.close[bar] / f.close[bar - static_cast<std::size_t>(p_.lookback)]);
    std::optional<Side> desired;
    if (std::fabs(mom) >= p_.entry_threshold) {
      desired = mom > 0.0 ? Side::kLong : Side::kShort;
    }
    ExecutionRequest r;
    r.symbol = symbol;
    r.venue = venue;
    r.timestamp_ms = f.open_time[bar] + 1000;
    r.order_type = OrderType::kMarket;
    r.strategy_id = "momentum";
    r.meta["source"] = "strategy";
    if (acct.position) {
      const bool keep = desired && *desired == acct.position->side;
      if (!keep) {
        r.intent = Intent::kClose;
        r.side = acct.position->side;
        r.requested_leverage = 1.0;
        r.requested_notional = 0.0;
        r.max_slippage_bps = p_.req_slippage_bps;
        out.push_back(std::move(r));
      }
    } else if (desired) {
      r.intent = Intent::kOpen;
      r.side = *desired;
      r.requested_leverage = p_.req_leverage;
      r.requested_notional = p_.req_notional;
      r.max_slippage_bps = p_.req_slippage_bps;
      out.push_back(std::move(r));
    }
    return out;
  }

 private:
  StrategyParams p_;
};

class ChurnStrategy {
 public:
  explicit ChurnStrategy(const StrategyParams& p) : p_(p) {}

  std::vector<ExecutionRequest> step(std::size_t bar, const FeatureTable& f,
                                     const SimAccount& acct, const std::string& symbol,
                                     const std::string& venue) {
    std::vector<ExecutionRequest> out;
    ExecutionRequest r;
    r.symbol = symbol;
    r.venue = venue;
    r.timestamp_ms = f.open_time[bar] + 1000;
    r.order_type = OrderType::kMarket;
    r.strategy_id = "churn";
    r.meta["source"] = "strategy";
    if (acct.position) {
      r.intent = Intent::kClose;
      r.side = acct.position->side;
      r.requested_leverage = 1.0;
      r.requested_notional = 0.0;
    } else {
      r.intent = Intent::kOpen;
      r.side = bar % 2 == 0 ? Side::kLong : Side::kShort;
      r.requested_leverage = p_.req_leverage;
      r.requested_notional = p_.req_notional;
    }
    r.max_slippage_bps = p_.req_slippage_bps;
    out.push_back(std::move(r));
    return out;
  }

 private:
  StrategyParams p_;
};

}  // namespace

RunResult run_replay(const ReplayConfig& cfg, const std::vector<ReplayBar>& bars) {
  if (bars.empty()) throw DataError("run_replay: no bars");
  validate_bars(bars);

  RunResult result;
  std::vector<MarginTier> tiers = cfg.tiers;
  if (tiers.empty()) {
    tiers = fallback_tiers();
    result.tiers_fallback = true;
    result.flags.push_back("tiers-fallback");
  } else {
    validate_tiers(tiers);
  }
  cfg.trader_model.validate();

  std::vector<TimestampMs> open_times(bars.size());
  std::vector<double> closes(bars.size()), volumes(bars.size());
  std::vector<std::pair<TimestampMs, double>> funding_events;
  for (std::size_t i = 0; i < bars.size(); ++i) {
    open_times[i] = bars[i].open_time_ms;
    closes[i] = bars[i].close;
    volumes[i] = bars[i].volume;
    if (bars[i].funding_rate != 0.0) {
      funding_events.emplace_back(bars[i].open_time_ms, bars[i].funding_rate);
    }
  }
  const FeatureTable features =
      build_features(open_times, closes, volumes, funding_events, cfg.features);

  GateConfig gate_cfg;
  gate_cfg.policy = cfg.policy;
  gate_cfg.spec = cfg.spec;
  gate_cfg.trader_model = cfg.trader_model;
  gate_cfg.switches = GateSwitches::for_variant(cfg.variant);
  gate_cfg.staging_spacing_sec = cfg.staging_spacing_sec;
  EnforcementGate gate(gate_cfg);

  std::vector<AttackAttempt> attacks;
  if (cfg.attacks_enabled) {
    attacks = gen_attacks(cfg.attacks, cfg.spec, features, cfg.seed, cfg.symbol,
                          cfg.venue);
  }
  std::size_t attack_cursor = 0;

  SimAccount acct;
  acct.wallet = cfg.initial_wallet;
  acct.peak_equity = cfg.initial_wallet;
  result.wallet_start = cfg.initial_wallet;

  // Measurement-side temporal trackers, independent of the gate internals.
  TimestampMs label_last_exec = -1;
  std::deque<TimestampMs> label_exec_times;
  const double step_loss_cap = cfg.step_loss_cap_frac * cfg.initial_wallet;

  double prev_equity = cfg.initial_wallet;
  bool warned_nonpositive = false;

  for (std::size_t bar_idx = 0; bar_idx < bars.size(); ++bar_idx) {
    const ReplayBar& bar = bars[bar_idx];
    const MarketState market = features.at(bar_idx);

    apply_funding(acct, bar);

    std::vector<PendingRequest> pending;
    if (cfg.variant == Variant::kStaticOms && acct.position) {
      const double unreal = acct.unrealized(bar.close);
      const double equity = acct.equity(bar.close);
      if (unreal < -cfg.stop_loss_frac * equity) {
        ExecutionRequest r;
        r.symbol = cfg.symbol;
        r.venue = cfg.venue;
        r.timestamp_ms = bar.open_time_ms;
        r.intent = Intent::kClose;
        r.side = acct.position->side;
        r.requested_leverage = 1.0;
        r.requested_notional = 0.0;
        r.max_slippage_bps = cfg.policy.defaults.slippage_cap_bps;
        r.strategy_id = "static-oms-stop-loss";
        r.meta["source"] = "executor";
        pending.push_back({std::move(r), false, ""});
      }
    }

    if (cfg.strategy.kind == "momentum") {
      MomentumStrategy strat(cfg.strategy);
      for (auto& r : strat.step(bar_idx, features, acct, cfg.symbol, cfg.venue)) {
        pending.push_back({std::move(r), false, ""});
      }
    } else if (cfg.strategy.kind == "churn") {
      ChurnStrategy strat(cfg.strategy);
      for (auto& r : strat.step(bar_idx, features, acct, cfg.symbol, cfg.venue)) {
        pending.push_back({std::move(r), false, ""});
      }
    } else if (cfg.strategy.kind != "none") {
      throw ConfigError("unknown strategy kind '" + cfg.strategy.kind + "'");
    }

    while (attack_cursor < attacks.size() &&
           attacks[attack_cursor].bar_index == static_cast<int>(bar_idx)) {
      pending.push_back({attacks[attack_cursor].request, true,
                         attacks[attack_cursor].family});
      ++attack_cursor;
    }
    std::stable_sort(pending.begin(), pending.end(),
                     [](const PendingRequest& a, const PendingRequest& b) {
                       return a.request.timestamp_ms < b.request.timestamp_ms;
                     });

    std::int64_t last_owner_this_bar = -1;
    std::int64_t last_closed_owner = -1;

    for (auto& pr : pending) {
      const double close = bar.close;
      AccountState snap = make_snapshot(acct, close, tiers, cfg.symbol);
      ExecutionContext ctx{snap, market,
                           pr.is_attack ? cfg.attack_trust : cfg.default_trust};

      double p_t = 0.0;
      if (gate_cfg.switches.rules) {
        const TraderFeatures tf =
            extract_features(acct.trades, snap, pr.request.timestamp_ms,
                             cfg.policy.rate_window_sec);
        p_t = risk_score(tf, cfg.trader_model);
      }

      GateResult gr = gate.decide(pr.request, ctx, p_t);
      result.gate_ops += gr.ops;
      result.wall_latency_ms_total += gr.audit.latency_ms;

      ActionRecord rec;
      rec.seq = static_cast<std::int64_t>(result.actions.size());
      rec.timestamp_ms = pr.request.timestamp_ms;
      rec.symbol = pr.request.symbol;
      rec.strategy_id = pr.request.strategy_id;
      rec.attack_family = pr.family;
      rec.is_attack = pr.is_attack;
      rec.intent = pr.request.intent;
      rec.side = pr.request.side;
      rec.requested_leverage = pr.request.requested_leverage;
      rec.requested_notional = gr.audit.requested_notional;
      rec.requested_slippage_bps = pr.request.max_slippage_bps;
      rec.decision = gr.decision.decision;
      rec.decision_reason = gr.decision.reason;
      rec.forwarded = gr.decision.decision != Decision::kBlock;
      rec.effective_leverage = gr.decision.effective_leverage;
      rec.effective_notional = gr.decision.effective_notional;
      rec.effective_slippage_bps = gr.decision.effective_slippage_bps;

      LabelInputs li;
      li.intent = pr.request.intent;
      li.symbol = pr.request.symbol;
      li.venue = pr.request.venue;
      auto acct_meta = pr.request.meta.find("account");
      li.account = acct_meta == pr.request.meta.end() ? "primary" : acct_meta->second;
      li.leverage = pr.request.requested_leverage;
      const double exposure_frac =
          snap.equity > 0.0 ? acct.position_notional(close) / snap.equity : 0.0;
      li.resulting_exposure_fraction =
          pr.request.intent == Intent::kOpen
              ? exposure_frac + gr.audit.requested_notional
              : 0.0;
      li.slippage_bps = pr.request.max_slippage_bps;
      li.timestamp_ms = pr.request.timestamp_ms;
      li.last_executed_ms = label_last_exec;
      {
        const auto window_start =
            pr.request.timestamp_ms -
            static_cast<TimestampMs>(cfg.spec.caps.rate_window_sec * 1000.0);
        int count = 0;
        for (auto it = label_exec_times.rbegin(); it != label_exec_times.rend(); ++it) {
          if (*it > pr.request.timestamp_ms) continue;
          if (*it <= window_start) break;
          ++count;
        }
        li.executed_in_rate_window = count;
      }
      li.regime = market.regime;
      li.funding = market.funding;
      li.margin_ratio = snap.margin_ratio;
      li.drawdown = snap.drawdown();
      li.position_age_sec =
          acct.position
              ? static_cast<double>(pr.request.timestamp_ms -
                                    acct.position->entry_time_ms) /
                    1000.0
              : 0.0;
      rec.requested_label = out_of_scope(li, cfg.spec);
      rec.effective_label = rec.requested_label;

      if (rec.forwarded) {
        LabelInputs le = li;
        le.leverage = gr.decision.effective_leverage;
        le.resulting_exposure_fraction =
            pr.request.intent == Intent::kOpen
                ? exposure_frac + gr.decision.effective_notional
                : 0.0;
        le.slippage_bps = gr.decision.effective_slippage_bps;
        rec.effective_label = out_of_scope(le, cfg.spec);
        const auto& b = gr.audit.budgets;
        rec.exceeds_own_decision =
            gr.decision.effective_leverage > b.leverage_cap + 1e-12 ||
            gr.decision.effective_slippage_bps > b.slippage_cap_bps + 1e-12;

        FillOutcome fo = execute_fill(
            acct, bar, pr.request.intent, pr.request.side,
            gr.decision.effective_notional, gr.decision.effective_leverage,
            gr.decision.effective_slippage_bps, pr.request.requested_leverage,
            cfg.fill, rec.seq);
        rec.executed = fo.executed;
        if (!fo.executed) {
          rec.decision_reason += "; fill: " + fo.reason;
        }
        if (fo.traded) {
          gate.note_execution(pr.request.symbol, pr.request.timestamp_ms);
          acct.order_times.push_back(pr.request.timestamp_ms);
          label_last_exec = pr.request.timestamp_ms;
          label_exec_times.push_back(pr.request.timestamp_ms);
          while (!label_exec_times.empty() &&
                 label_exec_times.front() < pr.request.timestamp_ms - 3'600'000) {
            label_exec_times.pop_front();
          }
          last_owner_this_bar = rec.seq;
          if (!acct.position) last_closed_owner = rec.seq;
        }
      }

      result.audits.push_back(std::move(gr.audit));
      result.actions.push_back(std::move(rec));
      ++result.requests;
    }

    const std::int64_t owner_before_liq =
        acct.position ? acct.position->owner_action
        : last_closed_owner >= 0 ? last_closed_owner
                                 : last_owner_this_bar;
    const bool liquidated = check_liquidation(acct, bar, tiers, cfg.fill);
    if (liquidated && owner_before_liq >= 0) {
      result.actions[static_cast<std::size_t>(owner_before_liq)].loss_contrib +=
          10.0 * step_loss_cap;
    }

    const double equity_now = acct.equity(bar.close);
    acct.peak_equity = std::max(acct.peak_equity, equity_now);
    const double delta = equity_now - prev_equity;
    if (delta < 0.0) {
      const std::int64_t owner = acct.position ? acct.position->owner_action
                                 : liquidated ? owner_before_liq
                                 : last_closed_owner >= 0 ? last_closed_owner
                                                          : last_owner_this_bar;
      if (owner >= 0) {
        result.actions[static_cast<std::size_t>(owner)].loss_contrib += -delta;
      }
    }
    if (equity_now <= 0.0 && !warned_nonpositive) {
      warned_nonpositive = true;
      result.flags.push_back("nonpositive-equity");
    }
    result.times.push_back(bar.open_time_ms);
    result.equity.push_back(equity_now);
    if (bar_idx > 0) {
      result.returns.push_back(prev_equity > 0.0 ? equity_now / prev_equity - 1.0
                                                 : 0.0);
    }
    prev_equity = equity_now;
  }

  result.liquidations = acct.liquidations;
  result.wallet_end = acct.wallet;
  result.fees = acct.fees;
  result.funding = acct.funding;
  result.realized = acct.realized;
  result.penalties = acct.penalties;
  return result;
}

}  // namespace sae
