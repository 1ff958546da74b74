#include "pcsense/bivariate.hpp"

#include <cmath>
#include <sstream>

namespace pcsense {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

void require_rho(double rho, const char* who) {
  if (!(std::abs(rho) > 0.0 && std::abs(rho) < 1.0)) {
    std::ostringstream os;
    os << who << ": need 0 < |rho| < 1, got rho = " << rho;
    throw DomainError(os.str());
  }
}

void require_factor(double a, const char* who) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    std::ostringstream os;
    os << who << ": need a > 0, got a = " << a;
    throw DomainError(os.str());
  }
  if (a == 1.0) throw DomainError(std::string(who) + ": a = 1 is no change");
}

double sign(double x) { return x < 0.0 ? -1.0 : 1.0; }

}  // namespace

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kMinorMoreSensitive: return "minor";
    case Verdict::kPrincipalMoreSensitive: return "principal";
    case Verdict::kEqual: return "equal";
    case Verdict::kBoundary: return "boundary";
  }
  return "?";
}

std::optional<Verdict> parse_verdict(std::string_view s) {
  for (auto v : {Verdict::kMinorMoreSensitive, Verdict::kPrincipalMoreSensitive,
                 Verdict::kEqual, Verdict::kBoundary}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

void BivariateScenario::validate() const {
  require_rho(rho, "BivariateScenario");
  if (!std::isfinite(mu1) || !std::isfinite(mu2))
    throw DomainError("BivariateScenario: means must be finite");
  if (!(a11 > 0.0) || !(a22 > 0.0) || !std::isfinite(a11) || !std::isfinite(a22))
    throw DomainError("BivariateScenario: standard deviation factors must be positive");
  if (!(std::abs(a12 * rho) < 1.0)) {
    std::ostringstream os;
    os << "BivariateScenario: need |a12 * rho| < 1, got " << a12 * rho;
    throw DomainError(os.str());
  }
}

ProjectionMoments projection_moments(const BivariateScenario& s) {
  s.validate();
  const double r = std::abs(s.rho);
  const double sd = 0.5 * s.a11 * s.a11 + 0.5 * s.a22 * s.a22;
  const double cross = s.a11 * s.a22 * s.a12 * r;
  ProjectionMoments m{};
  m.o1_sq = 1.0 + r;
  m.o2_sq = 1.0 - r;
  m.c1_sq = sd + cross;
  m.c2_sq = sd - cross;
  m.m1 = kInvSqrt2 * (s.mu1 + sign(s.rho) * s.mu2);
  m.m2 = kInvSqrt2 * (s.mu1 - sign(s.rho) * s.mu2);
  return m;
}

std::pair<double, double> closed_form_sensitivities(const BivariateScenario& s) {
  const auto m = projection_moments(s);
  const double h1 = hellinger_normal(UnivariateNormal<double>{0.0, m.o1_sq},
                                     UnivariateNormal<double>{m.m1, m.c1_sq});
  const double h2 = hellinger_normal(UnivariateNormal<double>{0.0, m.o2_sq},
                                     UnivariateNormal<double>{m.m2, m.c2_sq});
  return {h1, h2};
}

CorrelationMatrix<double> pre_change_matrix(const BivariateScenario& s) {
  s.validate();
  MatrixXd m(2, 2);
  m << 1.0, s.rho, s.rho, 1.0;
  return CorrelationMatrix<double>(m);
}

ChangeSpec<double> post_change(const BivariateScenario& s) {
  s.validate();
  VectorXd mean(2);
  mean << s.mu1, s.mu2;
  const double off = s.a11 * s.a22 * s.a12 * s.rho;
  MatrixXd cov(2, 2);
  cov << s.a11 * s.a11, off, off, s.a22 * s.a22;
  return ChangeSpec<double>(std::move(mean), std::move(cov));
}

double mean_change_discriminant(double rho, double mu1, double mu2) {
  require_rho(rho, "mean_change_discriminant");
  const double s = sign(rho);
  const double diff = mu1 - s * mu2;
  return diff * diff - s * mu1 * mu2 * (2.0 / std::abs(rho) - 2.0);
}

Verdict classify_mean_change(double rho, double mu1, double mu2) {
  require_rho(rho, "classify_mean_change");
  if (mu1 == 0.0 && mu2 == 0.0)
    throw InputError("classify_mean_change: at least one mean must change");
  const double g = mean_change_discriminant(rho, mu1, mu2);
  if (std::abs(g) < kBoundaryTolerance) return Verdict::kBoundary;
  return g > 0.0 ? Verdict::kMinorMoreSensitive : Verdict::kPrincipalMoreSensitive;
}

Verdict classify_equal_variance_change(double rho, double a) {
  require_rho(rho, "classify_equal_variance_change");
  require_factor(a, "classify_equal_variance_change");
  return Verdict::kEqual;
}

double one_variance_boundary_distance(double rho, double a) {
  require_rho(rho, "one_variance_boundary_distance");
  double dist = std::abs(a - 1.0);
  const double disc = 4.0 * rho * rho - 3.0;
  if (disc > 0.0) dist = std::min(dist, std::abs(a - std::sqrt(disc)));
  return dist;
}

Verdict classify_one_variance_change(double rho, double a) {
  require_rho(rho, "classify_one_variance_change");
  require_factor(a, "classify_one_variance_change");
  if (one_variance_boundary_distance(rho, a) < kBoundaryTolerance) return Verdict::kBoundary;
  if (a > 1.0) return Verdict::kMinorMoreSensitive;
  // Decrease: the principal projection wins except for strong correlation
  // and a large decrease, below the root sqrt(4 rho^2 - 3).
  const double disc = 4.0 * rho * rho - 3.0;
  if (disc > 0.0 && a < std::sqrt(disc)) return Verdict::kMinorMoreSensitive;
  return Verdict::kPrincipalMoreSensitive;
}

Verdict classify_correlation_change(double rho, double a) {
  require_rho(rho, "classify_correlation_change");
  if (!std::isfinite(a) || a == 1.0)
    throw DomainError("classify_correlation_change: need finite a != 1");
  if (!(std::abs(a * rho) < 1.0)) {
    std::ostringstream os;
    os << "classify_correlation_change: need |a * rho| < 1, got " << a * rho;
    throw DomainError(os.str());
  }
  if (std::abs(a + 1.0) < kBoundaryTolerance) return Verdict::kBoundary;
  return a > -1.0 ? Verdict::kMinorMoreSensitive : Verdict::kPrincipalMoreSensitive;
}

double log_variance_ratio(double pre_var, double post_var) {
  if (!(pre_var > 0.0) || !(post_var > 0.0) || !std::isfinite(pre_var) ||
      !std::isfinite(post_var)) {
    throw InputError("log_variance_ratio: variances must be positive and finite");
  }
  return std::abs(std::log(post_var / pre_var));
}

Verdict numeric_verdict(double h1, double h2, double tol) {
  if (std::abs(h2 - h1) <= tol) return Verdict::kEqual;
  return h2 > h1 ? Verdict::kMinorMoreSensitive : Verdict::kPrincipalMoreSensitive;
}

}  // namespace pcsense
