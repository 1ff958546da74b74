// pcsense: which PCA projections are most sensitive to a distributional
// change. All outputs are CSV.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "pcsense/bivariate.hpp"
#include "pcsense/io.hpp"
#include "pcsense/montecarlo.hpp"
#include "pcsense/verify.hpp"

namespace fs = std::filesystem;
using namespace pcsense;

namespace {

constexpr int kExitVerifyFailed = 1;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitInterrupted = 130;

std::atomic<bool> g_interrupted{false};

extern "C" void on_sigint(int) { g_interrupted.store(true); }

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("pcsense");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* lvl = std::getenv("PC_SENSE_LOG")) {
    spdlog::set_level(spdlog::level::from_str(lvl));
  }
}

/// Output stream: the named file, or stdout for "" and "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw InputError("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

// "lo:hi:n" (inclusive linear grid) or "n" over the default range. Values are
// snapped to 12 decimals so that grid points such as 0 come out exact.
std::vector<double> parse_grid(const std::string& spec, double lo, double hi) {
  int n = 0;
  try {
    const auto c1 = spec.find(':');
    if (c1 == std::string::npos) {
      n = std::stoi(spec);
    } else {
      const auto c2 = spec.find(':', c1 + 1);
      if (c2 == std::string::npos) throw InputError("");
      lo = std::stod(spec.substr(0, c1));
      hi = std::stod(spec.substr(c1 + 1, c2 - c1 - 1));
      n = std::stoi(spec.substr(c2 + 1));
    }
  } catch (const std::exception&) {
    throw InputError("grid '" + spec + "': expected lo:hi:n or n");
  }
  if (n == 1 && lo == hi) return {lo};
  if (n < 2) throw InputError("grid '" + spec + "': resolution must be at least 2");
  std::vector<double> out;
  for (int i = 0; i < n; ++i) {
    const double v = lo + (hi - lo) * i / (n - 1);
    out.push_back(std::round(v * 1e12) / 1e12);
  }
  return out;
}

struct MapOptions {
  std::string family = "one-variance";
  std::string grid_rho = "-0.95:0.95:39";
  std::optional<std::string> grid_a;
  std::string grid_mu = "-3:3:7";
  std::string out;
};

int cmd_sensitivity(const std::string& sigma0_path, const std::string& change_path,
                    const std::string& out_path) {
  const auto sigma0 = io::parse_correlation_json(io::read_file(sigma0_path));
  const auto change = io::parse_change_json(io::read_file(change_path));
  const auto profile = sensitivity_profile(sigma0, change);
  Output out(out_path);
  io::write_profile(out.stream(), profile);
  return 0;
}

int cmd_bivariate_map(const MapOptions& opt) {
  const std::string& fam = opt.family;
  if (fam != "mean" && fam != "one-variance" && fam != "equal-variance" &&
      fam != "correlation") {
    throw InputError("unknown family '" + fam +
                     "' (mean, one-variance, equal-variance, correlation)");
  }
  std::vector<double> rhos;
  int clipped_rho = 0;
  for (double r : parse_grid(opt.grid_rho, -1.0, 1.0)) {
    if (r == 0.0 || std::abs(r) >= 1.0) {
      ++clipped_rho;
      continue;
    }
    rhos.push_back(r);
  }
  if (clipped_rho > 0)
    spdlog::warn("dropped {} rho grid point(s) at 0 or |rho| >= 1", clipped_rho);

  const std::string a_default = fam == "correlation" ? "-3:3:61" : "0.05:3:60";
  const auto a_grid = parse_grid(opt.grid_a.value_or(a_default), 0.0, 3.0);

  Output out(opt.out);
  std::ostream& os = out.stream();
  os << "rho,param1,param2,verdict,h1,h2\n";
  int skipped = 0;
  auto row = [&](const BivariateScenario& s, double p1, double p2, Verdict v) {
    const auto profile = sensitivity_profile(pre_change_matrix(s), post_change(s));
    os << io::format_double(s.rho) << ',' << io::format_double(p1) << ','
       << io::format_double(p2) << ',' << to_string(v) << ','
       << io::format_double(profile.h(0)) << ',' << io::format_double(profile.h(1)) << '\n';
  };

  for (double rho : rhos) {
    if (fam == "mean") {
      for (double m1 : parse_grid(opt.grid_mu, -3.0, 3.0)) {
        for (double m2 : parse_grid(opt.grid_mu, -3.0, 3.0)) {
          if (m1 == 0.0 && m2 == 0.0) continue;
          row(BivariateScenario{rho, m1, m2}, m1, m2, classify_mean_change(rho, m1, m2));
        }
      }
      continue;
    }
    for (double a : a_grid) {
      if (a == 1.0) {
        ++skipped;
        continue;
      }
      if (fam == "correlation") {
        if (!(std::abs(a * rho) < 1.0)) {
          ++skipped;
          continue;
        }
        row(BivariateScenario{rho, 0, 0, 1, a, 1}, a, a * rho,
            classify_correlation_change(rho, a));
      } else if (!(a > 0.0)) {
        ++skipped;
      } else if (fam == "one-variance") {
        row(BivariateScenario{rho, 0, 0, 1, 1, a}, a, 2, classify_one_variance_change(rho, a));
      } else {
        row(BivariateScenario{rho, 0, 0, a, 1, a}, a, a,
            classify_equal_variance_change(rho, a));
      }
    }
  }
  if (skipped > 0) spdlog::warn("skipped {} grid point(s) outside the family's domain", skipped);
  return 0;
}

int cmd_simulate(SimulationConfig cfg, bool full_scale, const std::string& out_dir) {
  if (full_scale) {
    cfg.n_sigma = 1000;
    cfg.n_changes = 1000;
  }
  cfg.validate();
  if (cfg.min_sparsity < 2)
    spdlog::warn("min sparsity {} extends the protocol beyond K >= 2", cfg.min_sparsity);

  fs::create_directories(out_dir);
  const fs::path records_path = fs::path(out_dir) / "records.csv";
  const fs::path summary_path = fs::path(out_dir) / "summary.csv";
  const fs::path marker = fs::path(out_dir) / ".incomplete";
  std::ofstream(marker) << "simulation in progress\n";

  std::ofstream records(records_path, std::ios::binary);
  if (!records) throw InputError("cannot write " + records_path.string());
  io::write_record_header(records);

  std::signal(SIGINT, on_sigint);
  std::stop_source stop;
  std::jthread watcher([&stop](std::stop_token self) {
    while (!self.stop_requested()) {
      if (g_interrupted.load()) {
        stop.request_stop();
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  });

  spdlog::info("simulate: D={} n_sigma={} n_changes={} seed={} workers={}", cfg.dim,
               cfg.n_sigma, cfg.n_changes, cfg.master_seed, cfg.workers);
  Aggregator agg;
  const auto stats = run_protocol(
      cfg,
      [&](const SimulationRecord& r) {
        io::write_record(records, r);
        agg.add(r);
      },
      [](int done, int total) {
        if (done % 10 == 0 || done == total) spdlog::debug("sigma {}/{}", done, total);
      },
      stop.get_token());
  watcher.request_stop();
  records.flush();

  if (stats.interrupted) {
    spdlog::warn("interrupted after {} of {} pre-change matrices; {} left in place",
                 stats.sigmas_completed, cfg.n_sigma, marker.string());
    return kExitInterrupted;
  }

  if (stats.correlation_changes > 0) {
    spdlog::info("nearest-correlation repair applied to {} of {} correlation changes ({:.2f}%)",
                 stats.repaired, stats.correlation_changes,
                 100.0 * static_cast<double>(stats.repaired) /
                     static_cast<double>(stats.correlation_changes));
  }

  std::ofstream summary(summary_path, std::ios::binary);
  if (!summary) throw InputError("cannot write " + summary_path.string());
  io::write_summary_header(summary);
  for (auto by : {GroupBy::kChangeType, GroupBy::kSparsity, GroupBy::kAll})
    io::write_summary(summary, agg.summarize(by));
  summary.close();
  records.close();
  fs::remove(marker);

  std::cout << "change_type,principal_half_mean,minor_half_mean,E[H_1],E[H_D],minor_more_sensitive\n";
  for (const auto& s : agg.summarize(GroupBy::kChangeType)) {
    const auto c = compare_halves(s);
    std::cout << s.group_value << ',' << io::format_double(c.principal_half) << ','
              << io::format_double(c.minor_half) << ',' << io::format_double(c.first) << ','
              << io::format_double(c.last) << ',' << (c.minor_dominates() ? "yes" : "no")
              << '\n';
  }
  return 0;
}

int cmd_verify(long lemma_samples, std::uint64_t seed, bool inject) {
  auto grid = verify::default_grid();
  grid.flip_classifier = inject;
  auto suites = verify::proposition_grid(grid);
  suites.push_back(verify::lemma_equivalence(lemma_samples, seed, inject));
  bool ok = true;
  for (const auto& s : suites) {
    std::cout << (s.passed() ? "PASS" : "FAIL") << "  " << s.name << ": checked "
              << s.checked << ", boundary " << s.boundary << ", mismatches "
              << s.mismatches.size() << '\n';
    for (const auto& m : s.mismatches) std::cout << "    " << m << '\n';
    ok = ok && s.passed();
  }
  return ok ? 0 : kExitVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Sensitivity of PCA projections to distributional changes"};
  app.require_subcommand(1);

  auto* sens = app.add_subcommand("sensitivity", "Per-projection Hellinger sensitivities");
  std::string sigma0_path, change_path, sens_out;
  sens->add_option("--sigma0", sigma0_path, "Pre-change correlation matrix (JSON)")->required();
  sens->add_option("--change", change_path, "Change with post_mean and post_cov (JSON)")
      ->required();
  sens->add_option("--out", sens_out, "Output CSV (default stdout)");

  auto* map = app.add_subcommand("bivariate-map", "Verdict regions over a parameter grid");
  MapOptions map_opt;
  map->add_option("--family", map_opt.family,
                  "mean | one-variance | equal-variance | correlation")
      ->capture_default_str();
  map->add_option("--grid-rho", map_opt.grid_rho, "lo:hi:n or n")->capture_default_str();
  map->add_option("--grid-a", map_opt.grid_a, "Change factor grid, lo:hi:n or n");
  map->add_option("--grid-mu", map_opt.grid_mu, "Mean grid for the mean family")
      ->capture_default_str();
  map->add_option("--out", map_opt.out, "Output CSV (default stdout)");

  auto* sim = app.add_subcommand("simulate", "Run the Monte Carlo protocol");
  SimulationConfig cfg;
  cfg.workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  bool full_scale = false;
  std::string out_dir = ".";
  sim->add_option("--dim", cfg.dim, "Dimension D")->capture_default_str();
  sim->add_option("--n-sigma", cfg.n_sigma, "Pre-change matrices")->capture_default_str();
  sim->add_option("--n-changes", cfg.n_changes, "Changes per matrix")->capture_default_str();
  sim->add_option("--seed", cfg.master_seed, "Master seed")->required();
  sim->add_option("--workers", cfg.workers, "Worker threads")->capture_default_str();
  sim->add_option("--min-sparsity", cfg.min_sparsity, "Smallest K drawn")
      ->capture_default_str();
  sim->add_option("--out-dir", out_dir, "Directory for records.csv and summary.csv")
      ->capture_default_str();
  sim->add_flag("--full-scale", full_scale, "1000 x 1000 replications");

  auto* ver = app.add_subcommand("verify", "Check closed-form verdicts against numerics");
  long lemma_samples = 10000;
  std::uint64_t verify_seed = 20190101;
  bool inject = false;
  ver->add_option("--lemma-samples", lemma_samples)->capture_default_str();
  ver->add_option("--seed", verify_seed)->capture_default_str();
  ver->add_flag("--inject-sign-flip", inject, "Fault injection: flip classifier verdicts")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*sens) return cmd_sensitivity(sigma0_path, change_path, sens_out);
    if (*map) return cmd_bivariate_map(map_opt);
    if (*sim) return cmd_simulate(cfg, full_scale, out_dir);
    if (*ver) return cmd_verify(lemma_samples, verify_seed, inject);
  } catch (const InputError& e) {
    spdlog::error("{}", e.what());
    return kExitInput;
  } catch (const NumericalError& e) {
    spdlog::error("{}", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitInput;
  }
  return kExitInput;
}
