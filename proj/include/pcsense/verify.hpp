#pragma once

// Cross-checks of the closed-form bivariate classifiers against the generic
// numeric sensitivity path. Shared by `pcsense verify` and the acceptance
// suite.

#include <cstdint>
#include <string>
#include <vector>

#include "pcsense/bivariate.hpp"

namespace pcsense::verify {

struct SuiteResult {
  std::string name;
  long checked = 0;
  long boundary = 0;                  // excluded: on or near an analytic boundary
  std::vector<std::string> mismatches;

  bool passed() const { return mismatches.empty(); }
};

struct GridOptions {
  std::vector<double> rho;            // default: +-{0.05, ..., 0.95}
  std::vector<double> mu;             // default: {-3, ..., 3}
  std::vector<double> a;              // default: {0.1, ..., 3.0} without 1
  double boundary_margin = 1e-6;
  bool flip_classifier = false;       // fault injection: swap minor/principal
};

GridOptions default_grid();

/// Every single-parameter family over the grid: classifier verdict versus
/// the sign of H2 - H1 from sensitivity_profile on the 2x2 matrices. The
/// correlation family also sweeps negative factors so that both verdicts
/// occur.
std::vector<SuiteResult> proposition_grid(const GridOptions& opt);

/// Random zero-mean scenarios: sign(H2 - H1) from the generic path versus
/// sign(log r2 - log r1) from the projection variances.
SuiteResult lemma_equivalence(long n, std::uint64_t seed, bool flip = false);

std::string describe(const BivariateScenario& s);

}  // namespace pcsense::verify
