#include "dichlab/dichotomy.hpp"

#include "dichlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dichlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// A measured pair with the rate separation kept exact so that telescoped
// logs compare exactly.
struct PairSample {
  int m;
  int n;
  Branch branch;
  ExtLog scale_minus_lognu;  // log scale of the product minus log nu_n
  ExtLog separation;         // |log mu_m - log mu_n|
  double mantissa_log;
};

template <typename Fn>
void for_each_pair(const SplitCocycle& cocycle, const GrowthRate& rate, const NuSequence& nu, Fn&& fn) {
  for_each_block_norm(cocycle, [&](const BlockNorm& b) {
    const ExtLog sep = b.branch == Branch::stable ? ExtLog::exact_diff(rate.log_mu(b.m), rate.log_mu(b.n))
                                                  : ExtLog::exact_diff(rate.log_mu(b.n), rate.log_mu(b.m));
    fn(PairSample{b.m, b.n, b.branch, b.log_scale - ExtLog(nu.log_nu(b.n)), sep, b.mantissa_log});
  });
}

void check_coverage(const LinearSystem& sys, const ProjectionFamily& proj, const GrowthRate& rate,
                    const NuSequence& nu) {
  const Window w = sys.window();
  if (!proj.window().contains(w)) throw std::invalid_argument("projections do not cover the system window");
  if (!rate.window().contains(w)) throw std::invalid_argument("growth rate does not cover the system window");
  if (!nu.window().contains(w)) throw std::invalid_argument("nu does not cover the system window");
}

struct LineFit {
  double slope = kNan;
  int count = 0;
};

// Ordinary least squares with intercept, in two passes for stability.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  LineFit out;
  out.count = static_cast<int>(x.size());
  if (x.size() < 2) return out;
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) return out;
  out.slope = sxy / sxx;
  return out;
}

}  // namespace

DichotomyLedger verify_dichotomy(const LinearSystem& sys, const ProjectionFamily& proj, const GrowthRate& rate,
                                 const NuSequence& nu, double D, double lambda, const VerifyOptions& options) {
  if (!(D > 0.0)) throw std::invalid_argument("dichotomy constant D must be positive");
  check_coverage(sys, proj, rate, nu);
  const SplitCocycle cocycle(sys, proj);
  const Window w = sys.window();

  DichotomyLedger ledger;
  ledger.D = D;
  ledger.lambda = lambda;

  for (int n = w.first; n <= w.last; ++n) {
    const Matrix& p = proj.at(n);
    const double scale = std::max(1.0, spectral_norm(p));
    const double r = spectral_norm(p * p - p) / (scale * scale);
    ledger.idempotence_residual.push_back(r);
    ledger.max_idempotence_residual = std::max(ledger.max_idempotence_residual, r);
  }
  for (int n = w.first; n < w.last; ++n) {
    const Matrix& a = sys.step(n).mantissa;
    const double an = spectral_norm(a);
    const Matrix& p0 = proj.at(n);
    const Matrix& p1 = proj.at(n + 1);
    const double scale = std::max({1.0, spectral_norm(p0), spectral_norm(p1)});
    const double r = an > 0.0 ? spectral_norm(a * p0 - p1 * a) / (an * scale) : 0.0;
    ledger.indices.push_back(n);
    ledger.commuting_residual.push_back(r);
    ledger.max_commuting_residual = std::max(ledger.max_commuting_residual, r);
    const double k = cocycle.kernel_restriction_condition(n);
    ledger.kernel_min_singular.push_back(k);
    ledger.min_kernel_singular = std::min(ledger.min_kernel_singular, k);
  }
  ledger.structural_ok = ledger.max_idempotence_residual <= options.structural_tolerance &&
                         ledger.max_commuting_residual <= options.structural_tolerance &&
                         cocycle.kernel_restrictions_invertible();

  const ExtLog log_d(std::log(D));
  ledger.max_slack = -kInf;
  ledger.worst_stable.slack = -kInf;
  ledger.worst_unstable.slack = -kInf;
  for_each_pair(cocycle, rate, nu, [&](const PairSample& s) {
    const double slack = (s.scale_minus_lognu - log_d + s.separation * lambda).value() + s.mantissa_log;
    const SlackRecord rec{s.m, s.n, s.branch, slack};
    SlackRecord& worst = s.branch == Branch::stable ? ledger.worst_stable : ledger.worst_unstable;
    if (slack > worst.slack) worst = rec;
    ledger.max_slack = std::max(ledger.max_slack, slack);
    if (options.keep_grid) ledger.grid.push_back(rec);
  });
  ledger.inequalities_ok = ledger.max_slack <= options.slack_tolerance;
  ledger.pass = ledger.structural_ok && ledger.inequalities_ok;
  return ledger;
}

DichotomyCertificate fit_certificate(const LinearSystem& sys, const ProjectionFamily& proj, const GrowthRate& rate,
                                     const NuSequence& nu) {
  check_coverage(sys, proj, rate, nu);
  const SplitCocycle cocycle(sys, proj);
  if (!cocycle.kernel_restrictions_invertible()) {
    throw AnalysisError("fit_certificate", "kernel restriction is singular; axiom (2) fails");
  }

  std::vector<PairSample> samples;
  std::vector<double> xs[2], ys[2];
  for_each_pair(cocycle, rate, nu, [&](const PairSample& s) {
    const int b = s.branch == Branch::stable ? 0 : 1;
    xs[b].push_back(s.separation.value());
    ys[b].push_back(s.scale_minus_lognu.value() + s.mantissa_log);
    samples.push_back(s);
  });

  DichotomyCertificate cert;
  const LineFit stable = fit_line(xs[0], ys[0]);
  const LineFit unstable = fit_line(xs[1], ys[1]);
  cert.stable_exponent = -stable.slope;
  cert.unstable_exponent = -unstable.slope;
  double lambda = kInf;
  for (double e : {cert.stable_exponent, cert.unstable_exponent}) {
    if (!std::isnan(e)) lambda = std::min(lambda, e);
  }
  if (!std::isfinite(lambda)) {
    throw AnalysisError("fit_certificate", "not enough (m, n) pairs with distinct rate separation to fit an exponent");
  }
  if (!(lambda > 0.0)) {
    std::ostringstream msg;
    msg << "fitted exponent is not positive (stable " << cert.stable_exponent << ", unstable "
        << cert.unstable_exponent << "); the system is not dichotomic with respect to these projections";
    throw AnalysisError("fit_certificate", msg.str());
  }
  cert.lambda = lambda;

  double log_d = -kInf;
  for (const auto& s : samples) {
    log_d = std::max(log_d, (s.scale_minus_lognu + s.separation * lambda).value() + s.mantissa_log);
  }
  cert.D = std::exp(log_d);
  cert.epsilon = 0.0;
  {
    const Window w = sys.window();
    std::vector<double> lm, ln;
    for (int n = w.first; n <= w.last; ++n) {
      lm.push_back(rate.log_mu(n));
      ln.push_back(nu.log_nu(n));
    }
    const LineFit nu_fit = fit_line(lm, ln);
    if (!std::isnan(nu_fit.slope)) cert.epsilon = std::max(0.0, nu_fit.slope);
  }
  return cert;
}

MunuCheck check_munu(const GrowthRate& rate, const NuSequence& nu, double epsilon) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be >= 0");
  const Window w = rate.window();
  double right = -kInf;
  double left = -kInf;
  for (int n = w.first; n <= w.last; ++n) {
    if (!nu.window().contains(n)) continue;
    const double lm = rate.log_mu(n);
    const double lnu = nu.log_nu(n);
    if (n >= 0) right = std::max(right, lnu - epsilon * lm);
    if (rate.domain() == Domain::two_sided && n <= 0) left = std::max(left, lnu + epsilon * lm);
  }
  MunuCheck out;
  out.right_sup = std::exp(right);
  out.left_sup = rate.domain() == Domain::two_sided ? std::exp(left) : 0.0;
  out.sup_value = std::max(out.right_sup, out.left_sup);
  out.finite = std::isfinite(out.sup_value);
  return out;
}

OpenInterval beta_range(const DichotomyCertificate& cert, Domain domain) {
  if (!(cert.epsilon < cert.lambda)) throw std::invalid_argument("empty beta range: epsilon >= lambda");
  const double gap = cert.lambda - cert.epsilon;
  return domain == Domain::one_sided ? OpenInterval{-gap, cert.lambda} : OpenInterval{-gap, gap};
}

}  // namespace dichlab
