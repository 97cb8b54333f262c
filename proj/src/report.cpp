#include "sae/report.hpp"

#include <filesystem>
#include <iomanip>
#include <sstream>

namespace fs = std::filesystem;

namespace sae {

RunSummary load_run_summary(const std::string& run_dir) {
  RunSummary s;
  s.dir = run_dir;
  s.metrics = load_metrics(run_dir);
  const auto equity = load_equity_csv((fs::path(run_dir) / "equity.csv").string());
  for (std::size_t i = 1; i < equity.size(); ++i) {
    s.returns.push_back(equity[i - 1] > 0.0 ? equity[i] / equity[i - 1] - 1.0 : 0.0);
  }
  return s;
}

namespace {

std::string fmt(double v, int prec = 5) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

std::string opt_fmt(const std::optional<double>& v) {
  return v ? fmt(*v, 4) : std::string("n/a");
}

}  // namespace

std::string main_results_table(const std::vector<RunSummary>& runs) {
  std::ostringstream os;
  os << std::left << std::setw(16) << "variant" << std::right << std::setw(10)
     << "MDD" << std::setw(13) << "CVaR95" << std::setw(13) << "CVaR99"
     << std::setw(6) << "Liq" << std::setw(9) << "AS" << std::setw(9) << "FB"
     << std::setw(10) << "GateOps" << std::setw(10) << "DGr" << std::setw(10)
     << "DGl" << '\n';
  for (const auto& r : runs) {
    const auto& m = r.metrics;
    os << std::left << std::setw(16) << m.variant << std::right << std::setw(10)
       << fmt(m.mdd, 4) << std::setw(13) << fmt(m.cvar_95, 4) << std::setw(13)
       << fmt(m.cvar_99, 4) << std::setw(6) << m.liquidations << std::setw(9)
       << opt_fmt(m.attack_success) << std::setw(9) << opt_fmt(m.false_block)
       << std::setw(10) << fmt(m.gate_ops_per_request, 4) << std::setw(10)
       << fmt(m.dg_rate, 4) << std::setw(10) << fmt(m.dg_loss, 4) << '\n';
  }
  return os.str();
}

PairStats pair_statistics(const RunSummary& a, const RunSummary& b, int block_len,
                          int n_boot, std::uint64_t seed) {
  PairStats s;
  s.ci_a = stats::block_bootstrap_ci(a.returns, block_len, n_boot, seed);
  s.ci_b = stats::block_bootstrap_ci(b.returns, block_len, n_boot, seed);
  s.wilcoxon = stats::wilcoxon_signed_rank(a.returns, b.returns);
  if (a.metrics.as_counts.attempts > 0 && b.metrics.as_counts.attempts > 0) {
    s.as_available = true;
    s.attack_success_test = stats::two_proportion_test(
        a.metrics.as_counts.successes, a.metrics.as_counts.attempts,
        b.metrics.as_counts.successes, b.metrics.as_counts.attempts);
  }
  return s;
}

std::string significance_table(const RunSummary& a, const RunSummary& b,
                               const PairStats& s) {
  std::ostringstream os;
  os << "significance summary (" << a.metrics.variant << " vs "
     << b.metrics.variant << ")\n";
  os << "  mean-return 95% block-bootstrap CI " << a.metrics.variant << ": ["
     << fmt(s.ci_a.lo, 6) << ", " << fmt(s.ci_a.hi, 6) << "]\n";
  os << "  mean-return 95% block-bootstrap CI " << b.metrics.variant << ": ["
     << fmt(s.ci_b.lo, 6) << ", " << fmt(s.ci_b.hi, 6) << "]\n";
  os << "  Wilcoxon signed-rank p: " << fmt(s.wilcoxon.p, 6)
     << (s.wilcoxon.exact ? " (exact)" : " (normal approx)")
     << (s.wilcoxon.degenerate ? " [degenerate: all differences zero]" : "")
     << '\n';
  if (s.as_available) {
    os << "  two-proportion test on AttackSuccess p: "
       << fmt(s.attack_success_test.p, 6)
       << (s.attack_success_test.degenerate ? " [degenerate]" : "") << '\n';
  } else {
    os << "  two-proportion test on AttackSuccess: n/a (no attacks)\n";
  }
  return os.str();
}

ojson significance_json(const RunSummary& a, const RunSummary& b,
                        const PairStats& s) {
  ojson j;
  j["pair"] = ojson{{"a", a.metrics.variant}, {"b", b.metrics.variant}};
  j["bootstrap_ci_a"] = ojson{{"lo", s.ci_a.lo}, {"hi", s.ci_a.hi}};
  j["bootstrap_ci_b"] = ojson{{"lo", s.ci_b.lo}, {"hi", s.ci_b.hi}};
  j["wilcoxon_p"] = s.wilcoxon.p;
  j["wilcoxon_exact"] = s.wilcoxon.exact;
  j["wilcoxon_degenerate"] = s.wilcoxon.degenerate;
  if (s.as_available) {
    j["two_proportion_p"] = s.attack_success_test.p;
    j["two_proportion_z"] = s.attack_success_test.z;
  } else {
    j["two_proportion_p"] = nullptr;
  }
  return j;
}

}  // namespace sae
