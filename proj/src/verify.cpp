#include "pcsense/verify.hpp"

#include <cmath>
#include <sstream>

#include "pcsense/rng.hpp"

namespace pcsense::verify {
namespace {

Verdict flipped(Verdict v, bool flip) {
  if (!flip) return v;
  if (v == Verdict::kMinorMoreSensitive) return Verdict::kPrincipalMoreSensitive;
  if (v == Verdict::kPrincipalMoreSensitive) return Verdict::kMinorMoreSensitive;
  return v;
}

std::pair<double, double> numeric_pair(const BivariateScenario& s) {
  const auto profile = sensitivity_profile(pre_change_matrix(s), post_change(s));
  return {profile.h(0), profile.h(1)};
}

void check(SuiteResult& out, const BivariateScenario& s, Verdict expected, double margin,
           double margin_limit) {
  if (expected == Verdict::kBoundary || std::abs(margin) <= margin_limit) {
    ++out.boundary;
    return;
  }
  ++out.checked;
  const auto [h1, h2] = numeric_pair(s);
  const Verdict got = numeric_verdict(h1, h2);
  if (got != expected) {
    std::ostringstream os;
    os << out.name << ": " << describe(s) << " classifier=" << to_string(expected)
       << " numeric=" << to_string(got) << " H1=" << h1 << " H2=" << h2;
    out.mismatches.push_back(os.str());
  }
}

}  // namespace

std::string describe(const BivariateScenario& s) {
  std::ostringstream os;
  os.precision(17);
  os << "rho=" << s.rho << " mu1=" << s.mu1 << " mu2=" << s.mu2 << " a11=" << s.a11
     << " a12=" << s.a12 << " a22=" << s.a22;
  return os.str();
}

GridOptions default_grid() {
  GridOptions g;
  for (int i = 1; i <= 19; ++i) {
    g.rho.push_back(0.05 * i);
    g.rho.push_back(-0.05 * i);
  }
  for (int m = -3; m <= 3; ++m) g.mu.push_back(m);
  for (int i = 1; i <= 30; ++i) {
    if (i != 10) g.a.push_back(0.1 * i);
  }
  return g;
}

std::vector<SuiteResult> proposition_grid(const GridOptions& opt) {
  SuiteResult mean{"mean change", 0, 0, {}};
  SuiteResult equal{"equal variance change", 0, 0, {}};
  SuiteResult one{"one variance change", 0, 0, {}};
  SuiteResult corr{"correlation change", 0, 0, {}};
  const bool flip = opt.flip_classifier;

  for (double rho : opt.rho) {
    for (double mu1 : opt.mu) {
      for (double mu2 : opt.mu) {
        if (mu1 == 0.0 && mu2 == 0.0) continue;
        BivariateScenario s{rho, mu1, mu2};
        check(mean, s, flipped(classify_mean_change(rho, mu1, mu2), flip),
              mean_change_discriminant(rho, mu1, mu2), opt.boundary_margin);
      }
    }
    for (double a : opt.a) {
      if (a == 1.0) continue;
      check(equal, BivariateScenario{rho, 0.0, 0.0, a, 1.0, a},
            flipped(classify_equal_variance_change(rho, a), flip), 1.0, 0.0);

      const Verdict v1 = flipped(classify_one_variance_change(rho, a), flip);
      const double d1 = one_variance_boundary_distance(rho, a);
      check(one, BivariateScenario{rho, 0.0, 0.0, 1.0, 1.0, a}, v1, d1, opt.boundary_margin);
      check(one, BivariateScenario{rho, 0.0, 0.0, a, 1.0, 1.0}, v1, d1, opt.boundary_margin);

      for (double factor : {a, -a}) {
        if (!(std::abs(factor * rho) < 1.0)) continue;
        check(corr, BivariateScenario{rho, 0.0, 0.0, 1.0, factor, 1.0},
              flipped(classify_correlation_change(rho, factor), flip), factor + 1.0,
              opt.boundary_margin);
      }
    }
  }
  return {mean, equal, one, corr};
}

SuiteResult lemma_equivalence(long n, std::uint64_t seed, bool flip) {
  SuiteResult out{"log variance ratio equivalence", 0, 0, {}};
  auto rng = Substream::keyed(seed, 0x4c656d6d61ULL, 0);
  for (long i = 0; i < n; ++i) {
    BivariateScenario s;
    do {
      s.rho = rng.uniform(-0.99, 0.99);
    } while (std::abs(s.rho) < 1e-3);
    s.a11 = rng.uniform(0.1, 3.0);
    s.a22 = rng.uniform(0.1, 3.0);
    do {
      s.a12 = rng.uniform(-3.0, 3.0);
    } while (!(std::abs(s.a12 * s.rho) < 0.999));

    const auto m = projection_moments(s);
    const double lr1 = log_variance_ratio(m.o1_sq, m.c1_sq);
    const double lr2 = log_variance_ratio(m.o2_sq, m.c2_sq);
    if (std::abs(lr2 - lr1) < kBoundaryTolerance) {
      ++out.boundary;
      continue;
    }
    ++out.checked;
    Verdict expected =
        lr2 > lr1 ? Verdict::kMinorMoreSensitive : Verdict::kPrincipalMoreSensitive;
    expected = flipped(expected, flip);
    const auto [h1, h2] = numeric_pair(s);
    const Verdict got = numeric_verdict(h1, h2, 0.0);
    if (got != expected) {
      std::ostringstream os;
      os << out.name << ": " << describe(s) << " log r1=" << lr1 << " log r2=" << lr2
         << " H1=" << h1 << " H2=" << h2;
      out.mismatches.push_back(os.str());
    }
  }
  return out;
}

}  // namespace pcsense::verify
