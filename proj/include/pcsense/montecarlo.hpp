#pragma once

// Monte Carlo exploration of projection sensitivities in D dimensions:
// uniform pre-change correlation matrices, sparse random changes of the
// mean, standard deviations or correlations, and aggregation of the
// resulting H_j values.

#include <cstdint>
#include <functional>
#include <span>
#include <stop_token>
#include <string>
#include <utility>
#include <vector>

#include "pcsense/gaussian.hpp"
#include "pcsense/linalg.hpp"
#include "pcsense/rng.hpp"

namespace pcsense {

/// Draws a correlation matrix uniformly from the elliptope using the
/// C-vine partial-correlation construction: the partial correlations on
/// tree level k = 1..D-1 are 2 * Beta(b_k, b_k) - 1 with
/// b_k = 1 + (D - 1 - k) / 2, which makes the joint law uniform.
/// Draws falling below the positive-definiteness floor are redrawn.
CorrelationMatrix<double> sample_correlation_uniform(int dim, Substream& rng);

/// Zero-based, strictly increasing index set.
using IndexSet = std::vector<int>;

/// Random subset of {0, ..., dim - 1} of size k, sorted.
IndexSet sample_subset(int dim, int k, Substream& rng);

/// mu1 = mu on `dims`, 0 elsewhere; Sigma1 = Sigma0.
ChangeSpec<double> gen_mean_change(const CorrelationMatrix<double>& sigma0,
                                   const IndexSet& dims, double mu);

/// Standard deviations on `dims` scaled by `factor`; correlations unchanged.
ChangeSpec<double> gen_variance_change(const CorrelationMatrix<double>& sigma0,
                                       const IndexSet& dims, double factor);

/// Every correlation (i, d) with i or d in `dims` is multiplied by `a`
/// (once, also when both indices are in `dims`). An indefinite result is
/// replaced by its nearest correlation matrix and meta().repaired is set.
ChangeSpec<double> gen_correlation_change(const CorrelationMatrix<double>& sigma0,
                                          const IndexSet& dims, double a);

struct SimulationConfig {
  int dim = 20;
  int n_sigma = 200;
  int n_changes = 200;
  std::uint64_t master_seed = 0;
  std::pair<double, double> mean_range{-3.0, 3.0};
  std::pair<double, double> sd_low{1.0 / 3.0, 1.0};
  std::pair<double, double> sd_high{1.0, 3.0};
  std::pair<double, double> corr_factor_range{0.0, 1.0};
  int min_sparsity = 2;
  int workers = 1;

  void validate() const;
};

struct SimulationRecord {
  int sigma_id = 0;
  int rep_id = 0;
  ChangeType change_type = ChangeType::kMean;
  int sparsity = 0;
  int j = 0;          // one-based projection index
  double h = 0.0;
  bool repaired = false;

  bool operator==(const SimulationRecord&) const = default;
};

struct ProtocolStats {
  long records = 0;
  long correlation_changes = 0;
  long repaired = 0;
  int sigmas_completed = 0;
  bool interrupted = false;
};

using RecordSink = std::function<void(const SimulationRecord&)>;
using ProgressSink = std::function<void(int sigmas_done, int sigmas_total)>;

/// Runs the full protocol: for each of n_sigma pre-change matrices and each
/// of n_changes replications, draw K ~ Unif{min_sparsity..D}, a subset of
/// size K, and one mean, one sd and one correlation change; emit D records
/// per change type.
///
/// Records reach `sink` on the calling thread ordered by sigma_id, then
/// rep_id, then change type, then j, whatever `cfg.workers` is. All draws for
/// (sigma_id, rep_id) come from their own substream, so output depends only
/// on the configuration. A stop request ends the run after the pre-change
/// matrices already emitted; stats.interrupted is then set.
ProtocolStats run_protocol(const SimulationConfig& cfg, const RecordSink& sink,
                           const ProgressSink& progress = {},
                           std::stop_token stop = {});

enum class GroupBy { kChangeType, kSparsity, kAll };

std::string_view to_string(GroupBy g);

struct AggregateSummary {
  GroupBy kind = GroupBy::kAll;
  std::string group_value;
  std::vector<double> mean;  // indexed by j - 1
  std::vector<double> q05;
  std::vector<double> q25;
  std::vector<double> q75;
  std::vector<double> q95;
  std::vector<long> count;

  int dim() const { return static_cast<int>(mean.size()); }
};

/// Nearest-rank percentile: the ceil(p * n)-th smallest value.
double nearest_rank(std::span<const double> sorted, double p);

/// Collects h values by group and projection. Means are summed over sorted
/// values, so the result does not depend on the order of add() calls.
class Aggregator {
 public:
  void add(const SimulationRecord& r);
  bool empty() const { return n_ == 0; }
  long size() const { return n_; }

  std::vector<AggregateSummary> summarize(GroupBy by) const;

 private:
  struct Bucket {
    std::string key;
    int order = 0;
    std::vector<std::vector<double>> values;  // by j - 1
  };
  static void push(std::vector<Bucket>& buckets, std::string key, int order,
                   const SimulationRecord& r);
  static AggregateSummary reduce(GroupBy by, const Bucket& b);

  std::vector<Bucket> by_type_;
  std::vector<Bucket> by_sparsity_;
  std::vector<Bucket> all_;
  long n_ = 0;
};

std::vector<AggregateSummary> aggregate(std::span<const SimulationRecord> records,
                                        GroupBy by);

/// Mean sensitivity of the principal half (j <= D/2) and minor half
/// (j > D/2) of the projections, plus E[H_1] and E[H_D].
struct HalfComparison {
  double principal_half = 0.0;
  double minor_half = 0.0;
  double first = 0.0;
  double last = 0.0;

  bool minor_dominates() const { return minor_half > principal_half && last > first; }
};

HalfComparison compare_halves(const AggregateSummary& s);

}  // namespace pcsense
