#pragma once

#include "dichlab/cocycle.hpp"
#include "dichlab/family.hpp"
#include "dichlab/rates.hpp"
#include "dichlab/system.hpp"

#include <vector>

namespace dichlab {

struct VerifyOptions {
  double slack_tolerance = 1e-8;       // log domain
  double structural_tolerance = 1e-10;  // unit-normalised residuals
  bool keep_grid = false;               // retain every (m, n) slack
};

struct SlackRecord {
  int m = 0;
  int n = 0;
  Branch branch = Branch::stable;
  double slack = 0.0;
};

/// Everything verify_dichotomy measured. Failures are data, not exceptions.
struct DichotomyLedger {
  double D = 0.0;
  double lambda = 0.0;
  std::vector<int> indices;                    // n in [first, last - 1]
  std::vector<double> commuting_residual;      // |A_n P_n - P_{n+1} A_n| on unit-normalised A_n
  std::vector<double> kernel_min_singular;     // sigma_min of A_n|Ker P_n over |A_n|
  std::vector<double> idempotence_residual;    // per window index
  double max_commuting_residual = 0.0;
  double max_idempotence_residual = 0.0;
  double min_kernel_singular = 1.0;
  SlackRecord worst_stable{};
  SlackRecord worst_unstable{};
  double max_slack = 0.0;                      // max over both branches; -inf if nothing measured
  std::vector<SlackRecord> grid;               // filled when keep_grid
  bool structural_ok = false;
  bool inequalities_ok = false;
  bool pass = false;
};

/// Check axioms (1)-(3) of a (mu, nu)-dichotomy for the given projections.
///
/// Slack of a pair is log|A(m,n)P_n| - [log D + log nu_n - lambda (log mu_m - log mu_n)]
/// for m >= n, and the analogous quantity for the unstable inverse for m <= n.
DichotomyLedger verify_dichotomy(const LinearSystem& sys, const ProjectionFamily& proj, const GrowthRate& rate,
                                 const NuSequence& nu, double D, double lambda, const VerifyOptions& options = {});

/// Fit (D, lambda, epsilon) from the measured cocycle norms.
///
/// Each branch gets a least-squares line of log|.| - log nu_n against the
/// log-mu separation; lambda is the smaller of the two decay slopes and D
/// the exponential of the largest residual, so the returned constants pass
/// verify_dichotomy. Throws AnalysisError when lambda <= 0.
DichotomyCertificate fit_certificate(const LinearSystem& sys, const ProjectionFamily& proj, const GrowthRate& rate,
                                     const NuSequence& nu);

struct MunuCheck {
  bool finite = true;
  double sup_value = 0.0;   // max of both tails (right tail only for one-sided)
  double right_sup = 0.0;   // sup_{n >= 0} mu_n^{-eps} nu_n
  double left_sup = 0.0;    // sup_{n <= 0} mu_n^{eps} nu_n (two-sided)
};

MunuCheck check_munu(const GrowthRate& rate, const NuSequence& nu, double epsilon);

struct OpenInterval {
  double lo = 0.0;
  double hi = 0.0;
  [[nodiscard]] bool contains(double x) const { return x > lo && x < hi; }
};

/// (-(lambda - eps), lambda) one-sided; (-(lambda - eps), lambda - eps) two-sided.
OpenInterval beta_range(const DichotomyCertificate& cert, Domain domain);

}  // namespace dichlab
