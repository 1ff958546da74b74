#pragma once

// Closed-form two-dimensional results: projection moments of the 2x2
// equicorrelation model and exact classifiers for which projection is more
// sensitive under each single-parameter family of changes.
//
// "Principal" is always projection 1 (larger eigenvalue 1 + |rho|) and
// "minor" projection 2 (eigenvalue 1 - |rho|), whatever the sign of rho.

#include <string_view>
#include <optional>

#include "pcsense/gaussian.hpp"
#include "pcsense/linalg.hpp"

namespace pcsense {

enum class Verdict {
  kMinorMoreSensitive,      // H2 > H1
  kPrincipalMoreSensitive,  // H2 < H1
  kEqual,                   // H2 == H1 identically
  kBoundary,                // within tolerance of an analytic boundary
};

std::string_view to_string(Verdict v);
std::optional<Verdict> parse_verdict(std::string_view s);

/// Tolerance on classifier discriminants below which a point is reported
/// as kBoundary rather than forced to one side.
inline constexpr double kBoundaryTolerance = 1e-9;

/// The full bivariate model: pre-change correlation rho, post-change means
/// and multiplicative change factors for the standard deviations (a11, a22)
/// and for the correlation (a12).
struct BivariateScenario {
  double rho = 0.5;
  double mu1 = 0.0;
  double mu2 = 0.0;
  double a11 = 1.0;
  double a12 = 1.0;
  double a22 = 1.0;

  /// Throws DomainError unless 0 < |rho| < 1, a11 > 0, a22 > 0 and
  /// |a12 * rho| < 1.
  void validate() const;
};

struct ProjectionMoments {
  double o1_sq;  // pre-change variance, principal projection
  double o2_sq;  // pre-change variance, minor projection
  double c1_sq;  // post-change variance, principal projection
  double c2_sq;  // post-change variance, minor projection
  double m1;     // post-change mean, principal projection
  double m2;     // post-change mean, minor projection
};

/// Projection means carry the signs produced by eigh's eigenvector sign
/// convention: principal axis (1, s)/sqrt2 and minor axis (1, -s)/sqrt2 with
/// s = sign(rho).
ProjectionMoments projection_moments(const BivariateScenario& s);

/// Hellinger sensitivities (H1, H2) straight from projection_moments.
std::pair<double, double> closed_form_sensitivities(const BivariateScenario& s);

CorrelationMatrix<double> pre_change_matrix(const BivariateScenario& s);
ChangeSpec<double> post_change(const BivariateScenario& s);

/// Only the means change. H2 > H1 iff
///   (mu1 - s mu2)^2 > s mu1 mu2 (2/|rho| - 2),   s = sign(rho),
/// which is (1 + |rho|)(mu1 - s mu2)^2 > (1 - |rho|)(mu1 + s mu2)^2 expanded.
/// For rho < 0 the eigenvectors swap roles, which amounts to reflecting mu2.
Verdict classify_mean_change(double rho, double mu1, double mu2);

/// Signed discriminant of classify_mean_change (positive: minor wins).
double mean_change_discriminant(double rho, double mu1, double mu2);

/// Both standard deviations scaled by a. Always kEqual.
Verdict classify_equal_variance_change(double rho, double a);

/// One standard deviation scaled by a.
Verdict classify_one_variance_change(double rho, double a);

/// Distance from a to the nearest analytic boundary of the one-variance
/// family: a = 1 and, when |rho| > sqrt(3)/2, a = sqrt(4 rho^2 - 3).
double one_variance_boundary_distance(double rho, double a);

/// Correlation scaled by a (requires |a rho| < 1).
Verdict classify_correlation_change(double rho, double a);

/// |log(post / pre)|.
double log_variance_ratio(double pre_var, double post_var);

/// Sign of h2 - h1 as a verdict; differences within `tol` are kEqual.
Verdict numeric_verdict(double h1, double h2, double tol = 1e-12);

}  // namespace pcsense
