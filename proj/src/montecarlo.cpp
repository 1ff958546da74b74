#include "pcsense/montecarlo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace pcsense {
namespace {

double symmetric_beta(double shape, Substream& rng) {
  std::gamma_distribution<double> gamma(shape, 1.0);
  const double x = gamma(rng);
  const double y = gamma(rng);
  return x / (x + y);
}

std::vector<bool> membership(int dim, const IndexSet& dims, const char* who) {
  if (dims.empty()) throw InputError(std::string(who) + ": empty index set");
  std::vector<bool> in(static_cast<std::size_t>(dim), false);
  for (int d : dims) {
    if (d < 0 || d >= dim) {
      throw InputError(std::string(who) + ": index " + std::to_string(d) +
                       " outside [0, " + std::to_string(dim) + ")");
    }
    if (in[static_cast<std::size_t>(d)])
      throw InputError(std::string(who) + ": duplicate index " + std::to_string(d));
    in[static_cast<std::size_t>(d)] = true;
  }
  return in;
}

ChangeMeta make_meta(ChangeType type, const IndexSet& dims, double draw) {
  ChangeMeta meta;
  meta.type = type;
  meta.sparsity = static_cast<int>(dims.size());
  meta.dims = dims;
  meta.draw = draw;
  return meta;
}

struct SigmaBlock {
  std::vector<SimulationRecord> records;
  long correlation_changes = 0;
  long repaired = 0;
};

SigmaBlock run_sigma(const SimulationConfig& cfg, int sigma_id) {
  const int dim = cfg.dim;
  auto base = Substream::keyed(cfg.master_seed, static_cast<std::uint64_t>(sigma_id), 0);
  const auto sigma0 = sample_correlation_uniform(dim, base);
  const auto eigen = eigh(sigma0.matrix());

  SigmaBlock block;
  block.records.reserve(static_cast<std::size_t>(cfg.n_changes) * 3 *
                        static_cast<std::size_t>(dim));
  for (int rep = 0; rep < cfg.n_changes; ++rep) {
    try {
      auto rng = Substream::keyed(cfg.master_seed, static_cast<std::uint64_t>(sigma_id),
                                  static_cast<std::uint64_t>(rep) + 1);
      const int k = static_cast<int>(rng.uniform_int(cfg.min_sparsity, dim));
      const IndexSet dims = sample_subset(dim, k, rng);
      const double mu = rng.uniform(cfg.mean_range.first, cfg.mean_range.second);
      const bool decrease = rng.uniform01() < 0.5;
      const auto& sd_range = decrease ? cfg.sd_low : cfg.sd_high;
      const double sd = rng.uniform(sd_range.first, sd_range.second);
      const double a = rng.uniform(cfg.corr_factor_range.first, cfg.corr_factor_range.second);

      const ChangeSpec<double> changes[] = {
          gen_mean_change(sigma0, dims, mu),
          gen_variance_change(sigma0, dims, sd),
          gen_correlation_change(sigma0, dims, a),
      };
      for (const auto& change : changes) {
        const auto& meta = *change.meta();
        if (meta.type == ChangeType::kCorrelation) {
          ++block.correlation_changes;
          if (meta.repaired) ++block.repaired;
        }
        const auto profile = sensitivity_profile(eigen, change);
        for (int j = 0; j < dim; ++j) {
          block.records.push_back(SimulationRecord{sigma_id, rep, meta.type, k, j + 1,
                                                   profile.h(j), meta.repaired});
        }
      }
    } catch (const NumericalError& e) {
      std::ostringstream os;
      os << e.what() << " (sigma_id=" << sigma_id << ", rep_id=" << rep << ")";
      throw NumericalError(os.str(), e.iterations());
    }
  }
  return block;
}

}  // namespace

CorrelationMatrix<double> sample_correlation_uniform(int dim, Substream& rng) {
  if (dim < 2) throw InputError("sample_correlation_uniform: need dim >= 2");
  const Eigen::Index n = dim;
  for (;;) {
    MatrixXd partial = MatrixXd::Zero(n, n);
    MatrixXd corr = MatrixXd::Identity(n, n);
    double shape = 1.0 + (n - 1) / 2.0;
    for (Eigen::Index k = 0; k < n - 1; ++k) {
      shape -= 0.5;
      for (Eigen::Index i = k + 1; i < n; ++i) {
        partial(k, i) = 2.0 * symmetric_beta(shape, rng) - 1.0;
        // Partial correlation given 0..k-1 back to the plain correlation.
        double r = partial(k, i);
        for (Eigen::Index l = k - 1; l >= 0; --l) {
          r = r * std::sqrt((1.0 - partial(l, i) * partial(l, i)) *
                            (1.0 - partial(l, k) * partial(l, k))) +
              partial(l, i) * partial(l, k);
        }
        r = std::clamp(r, -1.0, 1.0);
        corr(k, i) = r;
        corr(i, k) = r;
      }
    }
    if (is_correlation(corr)) return CorrelationMatrix<double>(corr);
  }
}

IndexSet sample_subset(int dim, int k, Substream& rng) {
  if (k < 1 || k > dim) {
    throw InputError("sample_subset: need 1 <= k <= dim, got k = " + std::to_string(k));
  }
  IndexSet pool(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i) pool[static_cast<std::size_t>(i)] = i;
  // Partial Fisher-Yates.
  for (int i = 0; i < k; ++i) {
    const auto pick = static_cast<std::size_t>(rng.uniform_int(i, dim - 1));
    std::swap(pool[static_cast<std::size_t>(i)], pool[pick]);
  }
  pool.resize(static_cast<std::size_t>(k));
  std::sort(pool.begin(), pool.end());
  return pool;
}

ChangeSpec<double> gen_mean_change(const CorrelationMatrix<double>& sigma0,
                                   const IndexSet& dims, double mu) {
  membership(static_cast<int>(sigma0.dim()), dims, "gen_mean_change");
  VectorXd mean = VectorXd::Zero(sigma0.dim());
  for (int d : dims) mean(d) = mu;
  return ChangeSpec<double>(std::move(mean), sigma0.matrix(),
                            make_meta(ChangeType::kMean, dims, mu));
}

ChangeSpec<double> gen_variance_change(const CorrelationMatrix<double>& sigma0,
                                       const IndexSet& dims, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor))
    throw InputError("gen_variance_change: factor must be positive");
  membership(static_cast<int>(sigma0.dim()), dims, "gen_variance_change");
  VectorXd f = VectorXd::Ones(sigma0.dim());
  for (int d : dims) f(d) = factor;
  MatrixXd cov = f.asDiagonal() * sigma0.matrix() * f.asDiagonal();
  return ChangeSpec<double>(VectorXd::Zero(sigma0.dim()), std::move(cov),
                            make_meta(ChangeType::kVariance, dims, factor));
}

ChangeSpec<double> gen_correlation_change(const CorrelationMatrix<double>& sigma0,
                                          const IndexSet& dims, double a) {
  if (!(a >= 0.0 && a <= 1.0))
    throw InputError("gen_correlation_change: factor must lie in [0, 1]");
  const Eigen::Index n = sigma0.dim();
  const auto in = membership(static_cast<int>(n), dims, "gen_correlation_change");
  MatrixXd cov = sigma0.matrix();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (in[static_cast<std::size_t>(i)] || in[static_cast<std::size_t>(j)]) {
        cov(i, j) *= a;
        cov(j, i) = cov(i, j);
      }
    }
  }
  auto meta = make_meta(ChangeType::kCorrelation, dims, a);
  if (!is_correlation(cov)) {
    cov = nearest_correlation(cov).matrix();
    meta.repaired = true;
  }
  return ChangeSpec<double>(VectorXd::Zero(n), std::move(cov), std::move(meta));
}

void SimulationConfig::validate() const {
  if (dim < 2) throw InputError("SimulationConfig: dim must be at least 2");
  if (n_sigma < 1 || n_changes < 1)
    throw InputError("SimulationConfig: replication counts must be at least 1");
  if (min_sparsity < 1 || min_sparsity > dim)
    throw InputError("SimulationConfig: min_sparsity must lie in [1, dim]");
  if (workers < 1) throw InputError("SimulationConfig: workers must be at least 1");
  auto ordered = [](const std::pair<double, double>& r) {
    return std::isfinite(r.first) && std::isfinite(r.second) && r.first <= r.second;
  };
  if (!ordered(mean_range) || !ordered(sd_low) || !ordered(sd_high) ||
      !ordered(corr_factor_range)) {
    throw InputError("SimulationConfig: ranges must be finite with lo <= hi");
  }
  if (!(sd_low.first > 0.0)) throw InputError("SimulationConfig: sd factors must be positive");
  if (corr_factor_range.first < 0.0 || corr_factor_range.second > 1.0)
    throw InputError("SimulationConfig: correlation factors must lie in [0, 1]");
}

ProtocolStats run_protocol(const SimulationConfig& cfg, const RecordSink& sink,
                           const ProgressSink& progress, std::stop_token stop) {
  cfg.validate();
  ProtocolStats stats;

  auto emit = [&](int sigma_id, SigmaBlock&& block) {
    for (const auto& r : block.records) sink(r);
    stats.records += static_cast<long>(block.records.size());
    stats.correlation_changes += block.correlation_changes;
    stats.repaired += block.repaired;
    stats.sigmas_completed = sigma_id + 1;
    if (progress) progress(stats.sigmas_completed, cfg.n_sigma);
  };

  if (cfg.workers == 1) {
    for (int s = 0; s < cfg.n_sigma; ++s) {
      if (stop.stop_requested()) {
        stats.interrupted = true;
        break;
      }
      emit(s, run_sigma(cfg, s));
    }
    return stats;
  }

  // Workers claim sigma ids in order; the calling thread emits finished
  // blocks in id order. Claims run at most `window` ids ahead of emission.
  const int window = 2 * cfg.workers;
  std::mutex mu;
  std::condition_variable cv;
  std::map<int, SigmaBlock> done;
  std::exception_ptr failure;
  int next_claim = 0;
  int next_emit = 0;
  bool halt = false;

  auto worker = [&] {
    for (;;) {
      int id;
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] {
          return halt || next_claim >= cfg.n_sigma || next_claim < next_emit + window;
        });
        if (halt || next_claim >= cfg.n_sigma) return;
        id = next_claim++;
      }
      try {
        SigmaBlock block = run_sigma(cfg, id);
        std::lock_guard lock(mu);
        done.emplace(id, std::move(block));
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        halt = true;
      }
      cv.notify_all();
    }
  };

  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(cfg.workers));
  for (int w = 0; w < cfg.workers; ++w) pool.emplace_back(worker);

  while (next_emit < cfg.n_sigma) {
    SigmaBlock block;
    {
      std::unique_lock lock(mu);
      cv.wait_for(lock, std::chrono::milliseconds(50), [&] {
        return failure || done.count(next_emit) > 0;
      });
      if (failure) break;
      if (stop.stop_requested()) {
        stats.interrupted = true;
        break;
      }
      auto it = done.find(next_emit);
      if (it == done.end()) continue;
      block = std::move(it->second);
      done.erase(it);
    }
    emit(next_emit, std::move(block));
    {
      std::lock_guard lock(mu);
      ++next_emit;
    }
    cv.notify_all();
  }
  {
    std::lock_guard lock(mu);
    halt = true;
  }
  cv.notify_all();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
  return stats;
}

std::string_view to_string(GroupBy g) {
  switch (g) {
    case GroupBy::kChangeType: return "change_type";
    case GroupBy::kSparsity: return "sparsity";
    case GroupBy::kAll: return "all";
  }
  return "?";
}

double nearest_rank(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw InputError("nearest_rank: empty sample");
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(p * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

void Aggregator::push(std::vector<Bucket>& buckets, std::string key, int order,
                      const SimulationRecord& r) {
  auto it = std::find_if(buckets.begin(), buckets.end(),
                         [&](const Bucket& b) { return b.key == key; });
  if (it == buckets.end()) {
    buckets.push_back(Bucket{std::move(key), order, {}});
    it = std::prev(buckets.end());
  }
  const auto j = static_cast<std::size_t>(r.j - 1);
  if (it->values.size() <= j) it->values.resize(j + 1);
  it->values[j].push_back(r.h);
}

void Aggregator::add(const SimulationRecord& r) {
  if (r.j < 1) throw InputError("Aggregator: projection index must be >= 1");
  push(by_type_, std::string(to_string(r.change_type)), static_cast<int>(r.change_type), r);
  push(by_sparsity_, std::to_string(r.sparsity), r.sparsity, r);
  push(all_, "all", 0, r);
  ++n_;
}

AggregateSummary Aggregator::reduce(GroupBy by, const Bucket& b) {
  AggregateSummary s;
  s.kind = by;
  s.group_value = b.key;
  const std::size_t dim = b.values.size();
  for (auto* v : {&s.mean, &s.q05, &s.q25, &s.q75, &s.q95})
    v->assign(dim, std::numeric_limits<double>::quiet_NaN());
  s.count.assign(dim, 0);
  std::vector<double> sorted;
  for (std::size_t j = 0; j < dim; ++j) {
    sorted = b.values[j];
    if (sorted.empty()) continue;
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (double h : sorted) sum += h;
    s.mean[j] = sum / static_cast<double>(sorted.size());
    s.q05[j] = nearest_rank(sorted, 0.05);
    s.q25[j] = nearest_rank(sorted, 0.25);
    s.q75[j] = nearest_rank(sorted, 0.75);
    s.q95[j] = nearest_rank(sorted, 0.95);
    s.count[j] = static_cast<long>(sorted.size());
  }
  return s;
}

std::vector<AggregateSummary> Aggregator::summarize(GroupBy by) const {
  if (n_ == 0) throw InputError("aggregate: no records");
  std::vector<const Bucket*> buckets;
  const auto& src = by == GroupBy::kChangeType ? by_type_
                    : by == GroupBy::kSparsity ? by_sparsity_
                                               : all_;
  for (const auto& b : src) buckets.push_back(&b);
  std::sort(buckets.begin(), buckets.end(),
            [](const Bucket* x, const Bucket* y) { return x->order < y->order; });
  std::vector<AggregateSummary> out;
  out.reserve(buckets.size());
  for (const auto* b : buckets) out.push_back(reduce(by, *b));
  return out;
}

std::vector<AggregateSummary> aggregate(std::span<const SimulationRecord> records,
                                        GroupBy by) {
  Aggregator agg;
  for (const auto& r : records) agg.add(r);
  return agg.summarize(by);
}

HalfComparison compare_halves(const AggregateSummary& s) {
  const int dim = s.dim();
  if (dim < 2) throw InputError("compare_halves: need at least two projections");
  const int half = dim / 2;
  HalfComparison c;
  for (int j = 0; j < half; ++j) c.principal_half += s.mean[static_cast<std::size_t>(j)];
  for (int j = dim - half; j < dim; ++j) c.minor_half += s.mean[static_cast<std::size_t>(j)];
  c.principal_half /= half;
  c.minor_half /= half;
  c.first = s.mean.front();
  c.last = s.mean.back();
  return c;
}

}  // namespace pcsense
