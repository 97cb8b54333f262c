#include "sae/run_io.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sae/metrics_stats.hpp"

namespace fs = std::filesystem;

namespace sae {

MetricsReport compute_metrics(const RunResult& run, const std::string& variant,
                              const std::string& run_id) {
  MetricsReport m;
  m.variant = variant;
  m.run_id = run_id;
  m.n_bars = static_cast<std::int64_t>(run.equity.size());
  m.requests = run.requests;
  m.liquidations = run.liquidations;
  m.flags = run.flags;

  std::vector<double> equity = run.equity;
  bool clamped = false;
  for (double& e : equity) {
    if (!(e > 0.0)) {
      e = 1e-9 * std::max(run.wallet_start, 1.0);
      clamped = true;
    }
  }
  if (clamped) m.flags.push_back("equity-clamped-for-mdd");
  m.mdd = equity.empty() ? 0.0 : stats::max_drawdown(equity);

  if (!run.returns.empty()) {
    m.cvar_95 = stats::cvar(run.returns, 0.95);
    m.cvar_99 = stats::cvar(run.returns, 0.99);
    double sum = 0.0;
    for (double r : run.returns) sum += r;
    m.mean_return = sum / static_cast<double>(run.returns.size());
  } else {
    m.flags.push_back("no-returns");
  }

  bool any_executed = false;
  for (const auto& a : run.actions) {
    if (a.executed) {
      any_executed = true;
      break;
    }
  }
  if (any_executed) {
    m.dg_rate = dg_rate(run.actions);
    m.dg_loss = dg_loss(run.actions);
  } else {
    m.flags.push_back("no-executed-actions");
  }

  m.as_counts = attack_counts(run.actions);
  if (m.as_counts.attempts > 0) {
    m.attack_success = static_cast<double>(m.as_counts.successes) /
                       static_cast<double>(m.as_counts.attempts);
  } else {
    m.flags.push_back("no-attacks");
  }
  m.fb_counts = false_block_counts(run.actions);
  if (m.fb_counts.legitimate_in_scope > 0) {
    m.false_block = static_cast<double>(m.fb_counts.blocked) /
                    static_cast<double>(m.fb_counts.legitimate_in_scope);
  } else {
    m.flags.push_back("no-legitimate-actions");
  }

  m.gate_ops_per_request =
      run.requests > 0
          ? static_cast<double>(run.gate_ops) / static_cast<double>(run.requests)
          : 0.0;
  m.wallet_start = run.wallet_start;
  m.wallet_end = run.wallet_end;
  m.fees = run.fees;
  m.funding = run.funding;
  m.realized = run.realized;
  m.penalties = run.penalties;
  return m;
}

ojson metrics_to_json(const MetricsReport& m) {
  ojson j;
  j["variant"] = m.variant;
  j["run_id"] = m.run_id;
  j["n_bars"] = m.n_bars;
  j["requests"] = m.requests;
  j["mdd"] = m.mdd;
  j["cvar_95"] = m.cvar_95;
  j["cvar_99"] = m.cvar_99;
  j["mean_return"] = m.mean_return;
  j["liquidations"] = m.liquidations;
  if (m.attack_success) j["attack_success"] = *m.attack_success;
  else j["attack_success"] = nullptr;
  j["as_successes"] = m.as_counts.successes;
  j["as_attempts"] = m.as_counts.attempts;
  if (m.false_block) j["false_block"] = *m.false_block;
  else j["false_block"] = nullptr;
  j["fb_blocked"] = m.fb_counts.blocked;
  j["fb_legitimate"] = m.fb_counts.legitimate_in_scope;
  j["dg_rate"] = m.dg_rate;
  j["dg_loss"] = m.dg_loss;
  j["gate_ops_per_request"] = m.gate_ops_per_request;
  j["wallet_start"] = m.wallet_start;
  j["wallet_end"] = m.wallet_end;
  j["fees"] = m.fees;
  j["funding"] = m.funding;
  j["realized"] = m.realized;
  j["penalties"] = m.penalties;
  j["flags"] = m.flags;
  return j;
}

MetricsReport metrics_from_json(const ojson& j) {
  MetricsReport m;
  m.variant = j.at("variant").get<std::string>();
  m.run_id = j.at("run_id").get<std::string>();
  m.n_bars = j.at("n_bars").get<std::int64_t>();
  m.requests = j.at("requests").get<std::int64_t>();
  m.mdd = j.at("mdd").get<double>();
  m.cvar_95 = j.at("cvar_95").get<double>();
  m.cvar_99 = j.at("cvar_99").get<double>();
  m.mean_return = j.at("mean_return").get<double>();
  m.liquidations = j.at("liquidations").get<std::int64_t>();
  if (!j.at("attack_success").is_null()) {
    m.attack_success = j.at("attack_success").get<double>();
  }
  m.as_counts.successes = j.at("as_successes").get<std::int64_t>();
  m.as_counts.attempts = j.at("as_attempts").get<std::int64_t>();
  if (!j.at("false_block").is_null()) {
    m.false_block = j.at("false_block").get<double>();
  }
  m.fb_counts.blocked = j.at("fb_blocked").get<std::int64_t>();
  m.fb_counts.legitimate_in_scope = j.at("fb_legitimate").get<std::int64_t>();
  m.dg_rate = j.at("dg_rate").get<double>();
  m.dg_loss = j.at("dg_loss").get<double>();
  m.gate_ops_per_request = j.at("gate_ops_per_request").get<double>();
  m.wallet_start = j.at("wallet_start").get<double>();
  m.wallet_end = j.at("wallet_end").get<double>();
  m.fees = j.at("fees").get<double>();
  m.funding = j.at("funding").get<double>();
  m.realized = j.at("realized").get<double>();
  m.penalties = j.at("penalties").get<double>();
  m.flags = j.at("flags").get<std::vector<std::string>>();
  return m;
}

void write_run_dir(const std::string& dir, const RunResult& run,
                   const MetricsReport& metrics) {
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "equity.csv", std::ios::binary);
    out.precision(17);
    out << "open_time_ms,equity\n";
    for (std::size_t i = 0; i < run.equity.size(); ++i) {
      out << run.times[i] << ',' << run.equity[i] << '\n';
    }
  }
  {
    std::ofstream out(fs::path(dir) / "actions.jsonl", std::ios::binary);
    for (const auto& a : run.actions) out << to_json(a).dump() << '\n';
  }
  {
    std::ofstream out(fs::path(dir) / "audit.jsonl", std::ios::binary);
    for (const auto& rec : run.audits) out << audit_line(rec) << '\n';
  }
  {
    std::ofstream out(fs::path(dir) / "metrics.json", std::ios::binary);
    out << metrics_to_json(metrics).dump(2) << '\n';
  }
  {
    std::vector<double> lat;
    lat.reserve(run.audits.size());
    for (const auto& rec : run.audits) lat.push_back(rec.latency_ms);
    const auto summary = stats::latency_overhead(lat);
    ojson t;
    t["mean_decision_latency_ms"] = summary.mean_ms;
    t["total_decision_latency_ms"] = run.wall_latency_ms_total;
    t["decisions"] = static_cast<std::int64_t>(run.audits.size());
    t["note"] = "wall-clock timing; excluded from determinism checks";
    std::ofstream out(fs::path(dir) / "timing.json", std::ios::binary);
    out << t.dump(2) << '\n';
  }
}

std::vector<double> load_equity_csv(const std::string& path,
                                    std::vector<TimestampMs>* times) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<double> equity;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError("bad equity.csv row");
    if (times) times->push_back(std::stoll(line.substr(0, comma)));
    equity.push_back(std::stod(line.substr(comma + 1)));
  }
  return equity;
}

MetricsReport load_metrics(const std::string& run_dir) {
  std::ifstream in(fs::path(run_dir) / "metrics.json");
  if (!in) throw DataError("missing metrics.json in " + run_dir);
  std::ostringstream ss;
  ss << in.rdbuf();
  return metrics_from_json(ojson::parse(ss.str()));
}

std::vector<ActionRecord> load_actions(const std::string& run_dir) {
  std::ifstream in(fs::path(run_dir) / "actions.jsonl");
  if (!in) throw DataError("missing actions.jsonl in " + run_dir);
  std::vector<ActionRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(action_record_from_json(ojson::parse(line)));
  }
  return out;
}

}  // namespace sae
