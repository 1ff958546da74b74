// Acceptance suite: one PASS/FAIL line per criterion; exit status 0 iff all
// pass.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "pcsense/bivariate.hpp"
#include "pcsense/montecarlo.hpp"
#include "pcsense/verify.hpp"

namespace fs = std::filesystem;
using namespace pcsense;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

int g_failures = 0;

void criterion(const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (!o.pass) ++g_failures;
  std::printf("[%s] %s: %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", name.c_str(),
              o.detail.c_str(), secs);
  std::fflush(stdout);
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

Outcome verdict_agreement() {
  const auto t0 = Clock::now();
  long checked = 0, boundary = 0, mismatches = 0;
  std::string first;
  for (const auto& s : verify::proposition_grid(verify::default_grid())) {
    checked += s.checked;
    boundary += s.boundary;
    mismatches += static_cast<long>(s.mismatches.size());
    if (first.empty() && !s.mismatches.empty()) first = s.mismatches.front();
  }
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << checked << " grid points, " << boundary << " on boundaries, " << mismatches
     << " mismatches, " << secs << " s (limit 10 s)" << (first.empty() ? "" : "; " + first);
  return {mismatches == 0 && checked > 0 && secs < 10.0, os.str()};
}

Outcome equal_variance_equality() {
  std::mt19937_64 eng(2);
  std::uniform_real_distribution<double> rho_d(-0.99, 0.99), a_d(0.05, 5.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    double rho = rho_d(eng);
    while (std::abs(rho) < 1e-3) rho = rho_d(eng);
    double a = a_d(eng);
    if (a == 1.0) a = 1.5;
    const BivariateScenario s{rho, 0, 0, a, 1, a};
    const auto p = sensitivity_profile(pre_change_matrix(s), post_change(s));
    worst = std::max(worst, std::abs(p.h(0) - p.h(1)));
  }
  std::ostringstream os;
  os << "max |H1 - H2| = " << worst << " over 1000 pairs (limit 1e-12)";
  return {worst < 1e-12, os.str()};
}

Outcome one_variance_boundary() {
  double worst = 0.0;
  for (double rho : {0.88, 0.90, 0.95}) {
    const double a = std::sqrt(4 * rho * rho - 3);
    const BivariateScenario s{rho, 0, 0, 1, 1, a};
    const auto p = sensitivity_profile(pre_change_matrix(s), post_change(s));
    worst = std::max(worst, std::abs(p.h(0) - p.h(1)));
  }
  std::ostringstream os;
  os << "max |H1 - H2| = " << worst << " at a = sqrt(4 rho^2 - 3) (limit 1e-9)";
  return {worst < 1e-9, os.str()};
}

Outcome lemma_equivalence() {
  const auto r = verify::lemma_equivalence(10000, 20190101);
  std::ostringstream os;
  os << r.checked << " checked, " << r.boundary << " within eps_b, " << r.mismatches.size()
     << " exceptions";
  if (!r.passed()) os << "; " << r.mismatches.front();
  return {r.passed() && r.checked + r.boundary == 10000, os.str()};
}

Outcome hellinger_oracle() {
  std::mt19937_64 eng(4);
  std::uniform_real_distribution<double> mean(-5, 5), var(0.05, 20);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const UnivariateNormal<double> p{mean(eng), var(eng)}, q{mean(eng), var(eng)};
    const double quad = oracle::hellinger_quadrature(p.mean, p.variance, q.mean, q.variance);
    worst = std::max(worst, std::abs(hellinger_normal(p, q) - quad));
  }
  std::ostringstream os;
  os << "max |closed form - quadrature| = " << worst << " over 1000 pairs (limit 1e-6)";
  return {worst < 1e-6, os.str()};
}

Outcome sampler_distribution() {
  constexpr int kDraws = 100000;
  std::ostringstream os;
  bool ok = true;
  std::vector<double> r12_d3;
  for (int d : {2, 3, 5}) {
    auto rng = Substream::keyed(606, static_cast<std::uint64_t>(d), 0);
    std::vector<std::vector<double>> pairs(static_cast<std::size_t>(d * (d - 1) / 2));
    for (int n = 0; n < kDraws; ++n) {
      const auto c = sample_correlation_uniform(d, rng);
      std::size_t k = 0;
      for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) pairs[k++].push_back(c(i, j));
    }
    const double target = 1.0 / (d + 1);
    double worst = 0.0;
    for (const auto& v : pairs)
      worst = std::max(worst, std::abs(oracle::sample_variance(v) / target - 1.0));
    ok = ok && worst < 0.05;
    os << "D=" << d << " max rel. dev. of Var(r_ij) " << worst << "; ";
    if (d == 3) r12_d3 = pairs[0];
  }
  std::mt19937_64 eng(707);
  std::vector<double> ref;
  ref.reserve(kDraws);
  for (int n = 0; n < kDraws; ++n) ref.push_back(oracle::rejection_correlation3(eng)[0]);
  const double ks = oracle::ks_statistic(r12_d3, ref);
  ok = ok && ks < 0.01;
  os << "D=3 KS vs rejection sampler " << ks << " (limits 5%, 0.01)";
  return {ok, os.str()};
}

Outcome figure_trend(int dim, int n_sigma, int n_changes, double time_limit) {
  const auto t0 = Clock::now();
  SimulationConfig cfg;
  cfg.dim = dim;
  cfg.n_sigma = n_sigma;
  cfg.n_changes = n_changes;
  cfg.master_seed = 20190422;
  cfg.workers = workers();
  Aggregator agg;
  const auto stats = run_protocol(cfg, [&](const SimulationRecord& r) { agg.add(r); });

  bool ok = true;
  std::ostringstream os;
  int failing = 0;
  int groups = 0;
  for (auto by : {GroupBy::kChangeType, GroupBy::kSparsity}) {
    for (const auto& s : agg.summarize(by)) {
      ++groups;
      const auto c = compare_halves(s);
      if (by == GroupBy::kChangeType) {
        os << s.group_value << ": halves " << c.principal_half << " < " << c.minor_half
           << ", E[H_1]=" << c.first << " E[H_D]=" << c.last << "; ";
      }
      if (!c.minor_dominates()) {
        ok = false;
        ++failing;
        os << "FAILS " << to_string(by) << "=" << s.group_value << "; ";
      }
    }
  }
  const double secs = seconds_since(t0);
  os << groups << " groups, " << failing << " failing; repaired " << stats.repaired << "/"
     << stats.correlation_changes << " correlation changes; " << secs << " s (limit "
     << time_limit << " s)";
  ok = ok && stats.repaired < stats.correlation_changes && secs < time_limit;
  return {ok, os.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "pcsense_acceptance_determinism";
  fs::remove_all(dir);
  const std::string base = std::string(PCSENSE_CLI) +
                           " simulate --dim 12 --n-sigma 20 --n-changes 30 --seed 31337";
  const auto run = [&](int w, const std::string& sub) {
    const std::string cmd = base + " --workers " + std::to_string(w) + " --out-dir " +
                            (dir / sub).string() + " > " + (dir / (sub + ".out")).string() +
                            " 2>/dev/null";
    fs::create_directories(dir);
    return WEXITSTATUS(std::system(cmd.c_str()));
  };
  const int c1 = run(1, "w1");
  const int c4 = run(4, "w4");
  const bool same_records = slurp(dir / "w1" / "records.csv") == slurp(dir / "w4" / "records.csv");
  const bool same_summary = slurp(dir / "w1" / "summary.csv") == slurp(dir / "w4" / "summary.csv");
  const bool nonempty = fs::file_size(dir / "w1" / "records.csv") > 1000;
  fs::remove_all(dir);
  std::ostringstream os;
  os << "exit codes " << c1 << "/" << c4 << ", records identical: " << same_records
     << ", summary identical: " << same_summary << " (--workers 1 vs 4)";
  return {c1 == 0 && c4 == 0 && same_records && same_summary && nonempty, os.str()};
}

Outcome eigensolver() {
  std::mt19937_64 eng(8);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> dim(1, 30);
  double rec = 0.0, orth = 0.0, norm = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int n = dim(eng);
    MatrixXd a(n, n);
    for (int i = 0; i < a.size(); ++i) a.data()[i] = g(eng);
    a = ((a + a.transpose()) / 2.0).eval();
    const auto es = eigh(a);
    const MatrixXd& v = es.eigenvectors;
    rec = std::max(rec, (v * es.eigenvalues.asDiagonal() * v.transpose() - a).cwiseAbs().maxCoeff());
    MatrixXd gram = v.transpose() * v;
    norm = std::max(norm, (gram.diagonal().array() - 1.0).abs().maxCoeff());
    gram.diagonal().setZero();
    orth = std::max(orth, gram.cwiseAbs().maxCoeff());
  }
  std::uniform_real_distribution<double> u(-1, 1);
  double idem = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int n = 3 + t % 10;
    MatrixXd m = MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) m(i, j) = m(j, i) = u(eng);
    const auto once = nearest_correlation(m);
    idem = std::max(idem, (nearest_correlation(once.matrix()).matrix() - once.matrix())
                              .cwiseAbs()
                              .maxCoeff());
  }
  std::ostringstream os;
  os << "reconstruction " << rec << " (1e-10), |norm-1| " << norm << " (1e-12), v_i.v_j "
     << orth << " (1e-10), nearest_correlation idempotence " << idem << " (1e-10)";
  return {rec < 1e-10 && norm < 1e-12 && orth < 1e-10 && idem < 1e-10, os.str()};
}

}  // namespace

int main() {
  criterion("closed-form verdicts agree on grid", verdict_agreement);
  criterion("equal variance change gives H1 = H2", equal_variance_equality);
  criterion("one variance change boundary a = sqrt(4 rho^2 - 3)", one_variance_boundary);
  criterion("log variance ratio equivalence", lemma_equivalence);
  criterion("Hellinger closed form vs quadrature", hellinger_oracle);
  criterion("correlation sampler distribution", sampler_distribution);
  criterion("minor projections most sensitive, D=20, 200x200",
            [] { return figure_trend(20, 200, 200, 300.0); });
  criterion("minor projections most sensitive, D=100, 50x50 smoke",
            [] { return figure_trend(100, 50, 50, 300.0); });
  criterion("simulate output independent of worker count", determinism);
  criterion("eigensolver and nearest correlation", eigensolver);
  std::printf("%d criterion(s) failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
