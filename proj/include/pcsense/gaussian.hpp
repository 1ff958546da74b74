#pragma once

// Hellinger distance between univariate normals and per-projection
// sensitivities of PCA projections to a change in mean and covariance.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pcsense/errors.hpp"
#include "pcsense/linalg.hpp"

namespace pcsense {

template <typename Scalar = double>
struct UnivariateNormal {
  Scalar mean;
  Scalar variance;
};

/// Hellinger distance H(p, q) in [0, 1] between two normal distributions.
///
/// Evaluated as H^2 = -expm1(log BC), with the log Bhattacharyya coefficient
/// written through log1p so that nearly identical distributions keep full
/// relative precision.
template <typename Scalar>
Scalar hellinger_normal(const UnivariateNormal<Scalar>& p,
                        const UnivariateNormal<Scalar>& q) {
  if (!(p.variance > Scalar(0)) || !(q.variance > Scalar(0)) ||
      !std::isfinite(p.variance) || !std::isfinite(q.variance)) {
    throw InputError("hellinger_normal: variances must be positive and finite");
  }
  if (!std::isfinite(p.mean) || !std::isfinite(q.mean))
    throw InputError("hellinger_normal: means must be finite");

  const Scalar sp = std::sqrt(p.variance);
  const Scalar sq = std::sqrt(q.variance);
  const Scalar dm = p.mean - q.mean;
  const Scalar ds = sp - sq;
  const Scalar log_bc = -Scalar(0.5) * std::log1p(ds * ds / (Scalar(2) * sp * sq)) -
                        Scalar(0.25) * dm * dm / (p.variance + q.variance);
  const Scalar h2 = -std::expm1(log_bc);
  return std::sqrt(std::clamp(h2, Scalar(0), Scalar(1)));
}

enum class ChangeType { kMean, kVariance, kCorrelation };

inline std::string_view to_string(ChangeType t) {
  switch (t) {
    case ChangeType::kMean: return "mean";
    case ChangeType::kVariance: return "variance";
    case ChangeType::kCorrelation: return "correlation";
  }
  return "?";
}

inline std::optional<ChangeType> parse_change_type(std::string_view s) {
  if (s == "mean") return ChangeType::kMean;
  if (s == "variance") return ChangeType::kVariance;
  if (s == "correlation") return ChangeType::kCorrelation;
  return std::nullopt;
}

/// How a change was generated. Indices are zero-based.
struct ChangeMeta {
  ChangeType type;
  int sparsity = 0;
  std::vector<int> dims;
  double draw = 0.0;       // mu, sd factor or correlation factor
  bool repaired = false;   // nearest-correlation repair was applied
};

/// Post-change mean and covariance. The covariance must be positive
/// definite (smallest eigenvalue above kPdFloor).
template <typename Scalar = double>
class ChangeSpec {
 public:
  ChangeSpec(Vector<Scalar> post_mean, Matrix<Scalar> post_cov,
             std::optional<ChangeMeta> meta = std::nullopt)
      : mean_(std::move(post_mean)), cov_(std::move(post_cov)), meta_(std::move(meta)) {
    if (cov_.rows() != cov_.cols() || cov_.rows() != mean_.size()) {
      throw InputError("ChangeSpec: post_mean has length " +
                       std::to_string(mean_.size()) + " but post_cov is " +
                       std::to_string(cov_.rows()) + "x" + std::to_string(cov_.cols()));
    }
    if (!mean_.allFinite()) throw InputError("ChangeSpec: non-finite post_mean");
    if (!is_positive_definite(cov_))
      throw InputError("ChangeSpec: post_cov is not positive definite");
  }

  /// No change at all: zero mean, covariance equal to `sigma0`.
  static ChangeSpec none(const CorrelationMatrix<Scalar>& sigma0) {
    return ChangeSpec(Vector<Scalar>::Zero(sigma0.dim()), sigma0.matrix());
  }

  const Vector<Scalar>& post_mean() const { return mean_; }
  const Matrix<Scalar>& post_cov() const { return cov_; }
  const std::optional<ChangeMeta>& meta() const { return meta_; }
  Eigen::Index dim() const { return mean_.size(); }

 private:
  Vector<Scalar> mean_;
  Matrix<Scalar> cov_;
  std::optional<ChangeMeta> meta_;
};

template <typename Scalar = double>
struct SensitivityProfile {
  Vector<Scalar> h;                                     // H_j, j = 0..D-1
  EigenSystem<Scalar> eigen;                            // of the pre-change matrix
  std::vector<UnivariateNormal<Scalar>> post;           // q_j
};

/// Sensitivities with a precomputed eigensystem of the pre-change
/// correlation matrix. Projection j has pre-change law N(0, lambda_j) and
/// post-change law N(v_j' mu1, v_j' Sigma1 v_j).
template <typename Scalar>
SensitivityProfile<Scalar> sensitivity_profile(const EigenSystem<Scalar>& eigen,
                                               const ChangeSpec<Scalar>& change) {
  const Eigen::Index d = eigen.dim();
  if (change.dim() != d) {
    throw InputError("sensitivity_profile: change has dimension " +
                     std::to_string(change.dim()) + ", expected " + std::to_string(d));
  }
  const Matrix<Scalar>& v = eigen.eigenvectors;
  const Vector<Scalar> means = v.transpose() * change.post_mean();
  const Vector<Scalar> vars = (v.transpose() * change.post_cov() * v).diagonal();

  SensitivityProfile<Scalar> out;
  out.h.resize(d);
  out.post.reserve(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(vars(j) > Scalar(0))) {
      throw NumericalError("sensitivity_profile: nonpositive projected variance at j=" +
                           std::to_string(j + 1));
    }
    const UnivariateNormal<Scalar> p{Scalar(0), eigen.eigenvalues(j)};
    const UnivariateNormal<Scalar> q{means(j), vars(j)};
    out.h(j) = hellinger_normal(p, q);
    out.post.push_back(q);
  }
  out.eigen = eigen;
  return out;
}

template <typename Scalar>
SensitivityProfile<Scalar> sensitivity_profile(const CorrelationMatrix<Scalar>& sigma0,
                                               const ChangeSpec<Scalar>& change) {
  if (change.dim() != sigma0.dim()) {
    throw InputError("sensitivity_profile: dimension mismatch between sigma0 (" +
                     std::to_string(sigma0.dim()) + ") and change (" +
                     std::to_string(change.dim()) + ")");
  }
  return sensitivity_profile(eigh(sigma0.matrix()), change);
}

}  // namespace pcsense
