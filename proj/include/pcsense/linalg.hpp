#pragma once

// Dense symmetric eigendecomposition (cyclic Jacobi) and nearest
// correlation matrix repair (alternating projections with Dykstra's
// correction). Everything here is templated on the scalar type.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Jacobi>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "pcsense/errors.hpp"

namespace pcsense {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

/// Smallest eigenvalue a matrix must have to count as positive definite.
inline constexpr double kPdFloor = 1e-8;

/// Eigenvalues sorted descending; column j of `eigenvectors` pairs with
/// eigenvalue j. Ties keep the order in which the solver produced them.
template <typename Scalar>
struct EigenSystem {
  Vector<Scalar> eigenvalues;
  Matrix<Scalar> eigenvectors;

  Eigen::Index dim() const { return eigenvalues.size(); }
  auto eigenvector(Eigen::Index j) const { return eigenvectors.col(j); }
};

namespace detail {

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.array().isFinite().all();
}

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& m, const char* who) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    std::ostringstream os;
    os << who << ": expected a nonempty square matrix, got " << m.rows() << "x"
       << m.cols();
    throw InputError(os.str());
  }
}

// Accepts rounding-level asymmetry (e.g. from V * D * V^T) but nothing more.
template <typename Derived>
Matrix<typename Derived::Scalar> symmetrized(const Eigen::MatrixBase<Derived>& m,
                                             const char* who) {
  using Scalar = typename Derived::Scalar;
  require_square(m, who);
  if (!all_finite(m)) throw InputError(std::string(who) + ": non-finite entries");
  const Scalar scale = std::max<Scalar>(Scalar(1), m.cwiseAbs().maxCoeff());
  const Scalar asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > Scalar(1e-10) * scale)
    throw InputError(std::string(who) + ": matrix is not symmetric");
  return (m + m.transpose()) / Scalar(2);
}

}  // namespace detail

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// An off-diagonal pair is rotated away unless it is negligible relative to
/// the geometric mean of its diagonal entries, which gives small eigenvalues
/// high relative accuracy. Each eigenvector is signed so that its first
/// component of magnitude above 1e-12 is positive.
template <typename Derived>
EigenSystem<typename Derived::Scalar> eigh(const Eigen::MatrixBase<Derived>& m,
                                           int max_sweeps = 100) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> a = detail::symmetrized(m, "eigh");
  const Eigen::Index n = a.rows();
  Matrix<Scalar> v = Matrix<Scalar>::Identity(n, n);

  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar tiny = std::numeric_limits<Scalar>::min();

  bool converged = false;
  int sweep = 0;
  for (; sweep < max_sweeps && !converged; ++sweep) {
    converged = true;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Scalar apq = std::abs(a(p, q));
        const Scalar diag = std::sqrt(std::abs(a(p, p)) * std::abs(a(q, q)));
        if (apq <= eps * diag || apq <= tiny) continue;
        converged = false;
        Eigen::JacobiRotation<Scalar> rot;
        rot.makeJacobi(a, p, q);
        a.applyOnTheLeft(p, q, rot.adjoint());
        a.applyOnTheRight(p, q, rot);
        v.applyOnTheRight(p, q, rot);
        a(p, q) = a(q, p) = Scalar(0);
      }
    }
  }
  if (!converged) {
    throw NumericalError("eigh: Jacobi sweeps did not converge after " +
                             std::to_string(sweep) + " sweeps",
                         sweep);
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
    return a(i, i) > a(j, j);
  });

  EigenSystem<Scalar> out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.eigenvalues(k) = a(src, src);
    auto col = out.eigenvectors.col(k);
    col = v.col(src);
    col.normalize();
    for (Eigen::Index r = 0; r < n; ++r) {
      if (std::abs(col(r)) > Scalar(1e-12)) {
        if (col(r) < Scalar(0)) col = -col;
        break;
      }
    }
  }
  return out;
}

/// True when `m` is exactly symmetric with unit diagonal, off-diagonals in
/// [-1, 1] and `m - floor * I` positive definite.
template <typename Derived>
bool is_correlation(const Eigen::MatrixBase<Derived>& m,
                    double floor = kPdFloor) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() != m.cols() || m.rows() == 0 || !detail::all_finite(m)) return false;
  if (m != m.transpose()) return false;
  if ((m.diagonal().array() != Scalar(1)).any()) return false;
  if ((m.array().abs() > Scalar(1)).any()) return false;
  Matrix<Scalar> shifted = m;
  shifted.diagonal().array() -= Scalar(floor);
  Eigen::LLT<Matrix<Scalar>> llt(shifted);
  return llt.info() == Eigen::Success;
}

/// True when `m` is symmetric (to rounding) with smallest eigenvalue above
/// `floor`. Used for post-change covariance matrices.
template <typename Derived>
bool is_positive_definite(const Eigen::MatrixBase<Derived>& m,
                          double floor = kPdFloor) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() != m.cols() || m.rows() == 0 || !detail::all_finite(m)) return false;
  Matrix<Scalar> shifted = (m + m.transpose()) / Scalar(2);
  shifted.diagonal().array() -= Scalar(floor);
  Eigen::LLT<Matrix<Scalar>> llt(shifted);
  return llt.info() == Eigen::Success;
}

/// A validated correlation matrix (see is_correlation).
template <typename Scalar = double>
class CorrelationMatrix {
 public:
  template <typename Derived>
  explicit CorrelationMatrix(const Eigen::MatrixBase<Derived>& m) : m_(m) {
    if (!is_correlation(m_)) {
      throw InputError(
          "CorrelationMatrix: need a symmetric unit-diagonal positive definite "
          "matrix");
    }
  }

  static CorrelationMatrix identity(Eigen::Index dim) {
    return CorrelationMatrix(Matrix<Scalar>::Identity(dim, dim));
  }

  const Matrix<Scalar>& matrix() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }
  Scalar operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

 private:
  Matrix<Scalar> m_;
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> clip_spectrum(const Matrix<Scalar>& m, Scalar floor) {
  auto es = eigh(m);
  Vector<Scalar> clipped = es.eigenvalues.cwiseMax(floor);
  Matrix<Scalar> out =
      es.eigenvectors * clipped.asDiagonal() * es.eigenvectors.transpose();
  return (out + out.transpose()) / Scalar(2);
}

}  // namespace detail

/// Nearest correlation matrix in Frobenius norm, by alternating projections
/// onto the PSD cone (eigenvalues clipped at kPdFloor) and the unit-diagonal
/// affine set, with Dykstra's correction on the cone step.
///
/// Returns `m` unchanged when it already is a correlation matrix. Otherwise
/// the converged iterate is clipped and rescaled to unit diagonal; the clip
/// floor is raised until the result passes is_correlation.
template <typename Derived>
CorrelationMatrix<typename Derived::Scalar> nearest_correlation(
    const Eigen::MatrixBase<Derived>& m, double tol = 1e-12, int max_iter = 2000) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> y = detail::symmetrized(m, "nearest_correlation");
  if (is_correlation(m)) return CorrelationMatrix<Scalar>(m);

  const Eigen::Index n = y.rows();
  const Scalar floor = Scalar(kPdFloor);
  Matrix<Scalar> correction = Matrix<Scalar>::Zero(n, n);
  y.diagonal().setOnes();

  int iter = 0;
  for (;; ++iter) {
    if (iter >= max_iter) {
      throw NumericalError("nearest_correlation: no convergence after " +
                               std::to_string(iter) + " iterations",
                           iter);
    }
    const Matrix<Scalar> r = y - correction;
    const Matrix<Scalar> x = detail::clip_spectrum(r, floor);
    correction = x - r;
    Matrix<Scalar> next = x;
    next.diagonal().setOnes();
    const Scalar change = (next - y).norm() / std::max<Scalar>(y.norm(), Scalar(1));
    y = std::move(next);
    if (change <= Scalar(tol)) break;
  }

  for (Scalar clip = floor; clip < Scalar(1); clip *= Scalar(2)) {
    Matrix<Scalar> x = detail::clip_spectrum(y, clip);
    const Vector<Scalar> scale = x.diagonal().cwiseSqrt().cwiseInverse();
    x = scale.asDiagonal() * x * scale.asDiagonal();
    x = ((x + x.transpose()) / Scalar(2)).eval().cwiseMax(Scalar(-1)).cwiseMin(Scalar(1));
    x.diagonal().setOnes();
    if (is_correlation(x)) return CorrelationMatrix<Scalar>(x);
  }
  throw NumericalError("nearest_correlation: could not enforce positive definiteness",
                       iter);
}

}  // namespace pcsense
