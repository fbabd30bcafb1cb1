#include "dichlab/robustness.hpp"

#include "dichlab/errors.hpp"
#include "dichlab/random.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

namespace dichlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

WeightedNormSpec out_spec(double beta, NormVariant variant, const GrowthRate& rate) {
  return variant == NormVariant::abs ? WeightedNormSpec::abs(beta, NormKind::infinity, rate)
                                     : WeightedNormSpec::plain(beta, NormKind::infinity);
}

WeightedNormSpec in_spec(double beta, NormVariant variant, const GrowthRate& rate) {
  return variant == NormVariant::abs ? WeightedNormSpec::abs(beta, NormKind::one, rate)
                                     : WeightedNormSpec::plain(beta, NormKind::one);
}

}  // namespace

double PerturbationSpec::gamma_at(int n) const {
  const int i = n - gamma_first;
  if (i < 0 || i >= static_cast<int>(gamma.size())) throw std::out_of_range("gamma index outside its range");
  return gamma[static_cast<size_t>(i)];
}

double PerturbationSpec::gamma_sum() const {
  double s = 0.0;
  for (double g : gamma) s += g;
  return s;
}

std::vector<double> geometric_gamma(Window window, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("gamma ratio must lie in (0, 1)");
  std::vector<double> g;
  for (int n = window.first; n < window.last; ++n) g.push_back(std::pow(ratio, std::abs(n)));
  return g;
}

PerturbationSpec make_perturbation_spec(Window window, double c, std::uint64_t seed, double beta, double ratio) {
  PerturbationSpec s;
  s.gamma_first = window.first;
  s.gamma = geometric_gamma(window, ratio);
  s.c = c;
  s.seed = seed;
  s.beta = beta;
  return s;
}

Perturbation make_perturbation(const LinearSystem& sys, const GrowthRate& rate, const NuSequence& nu,
                               const PerturbationSpec& spec) {
  if (!(spec.c >= 0.0) || !std::isfinite(spec.c)) throw std::invalid_argument("c must be finite and >= 0");
  if (!std::isfinite(spec.beta)) throw std::invalid_argument("beta must be finite");
  const Window w = sys.window();
  if (!rate.window().contains(w) || !nu.window().contains(w)) {
    throw std::invalid_argument("rate and nu must cover the system window");
  }
  for (double g : spec.gamma) {
    if (!(g > 0.0) || !std::isfinite(g)) throw std::invalid_argument("gamma must be positive and finite");
  }
  const int d = sys.dim();
  Perturbation out;
  out.first = w.first;
  out.spec = spec;
  Rng rng(spec.seed);
  for (int n = w.first; n < w.last; ++n) {
    const double log_rho = std::log(spec.c) + std::log(spec.gamma_at(n)) + spec.beta * rate.log_mu(n) -
                           nu.log_nu(n + 1) - spec.beta * rate.log_mu(n + 1);
    // Draw even when c = 0 so that the stream does not depend on c.
    Matrix r = random_unit_spectral(rng, d);
    r /= spectral_norm(r);
    out.log_rho.push_back(log_rho);
    out.steps.push_back(spec.c == 0.0 ? Matrix::Zero(d, d) : Matrix(std::exp(log_rho) * r));
  }
  return out;
}

LinearSystem perturbed_system(const LinearSystem& sys, const Perturbation& b) {
  const Window w = sys.window();
  if (b.first != w.first || static_cast<int>(b.steps.size()) != w.size() - 1) {
    throw std::invalid_argument("perturbation does not match the system window");
  }
  std::vector<ScaledMatrix> steps;
  for (int n = w.first; n < w.last; ++n) steps.push_back(sys.step(n) + ScaledMatrix::from_dense(b.at(n)));
  return LinearSystem(sys.domain(), w, std::move(steps));
}

VectorSequence apply_graph_operator(const GraphNormOperator& op, const VectorSequence& x) {
  if (!op.sys) throw std::invalid_argument("graph operator without a system");
  const Window w = op.sys->window();
  if (!(x.window() == w)) throw std::invalid_argument("sequence does not cover the system window");
  VectorSequence out(w, op.sys->dim());
  for (int n = w.first + 1; n <= w.last; ++n) {
    const Vector& prev = x.at(n - 1);
    if (op.mode == GraphMode::A_beta) {
      const ScaledMatrix& a = op.sys->step(n - 1);
      Vector ax = a.is_zero() ? Vector::Zero(prev.size()) : Vector(std::exp(a.log_scale.value()) * (a.mantissa * prev));
      out.at(n) = x.at(n) - ax;
    } else {
      if (!op.perturbation) throw std::invalid_argument("B mode needs a perturbation");
      out.at(n) = op.perturbation->at(n - 1) * prev;
    }
  }
  return out;
}

double graph_norm(const VectorSequence& x, const LinearSystem& sys, const GrowthRate& rate, const NuSequence& nu,
                  double beta, NormVariant variant) {
  const VectorSequence ax = apply_graph_operator({&sys, nullptr, GraphMode::A_beta}, x);
  return norm(x, out_spec(beta, variant, rate), rate) + norm(ax, in_spec(beta, variant, rate), rate, &nu);
}

double margin_value(double c, double gamma_sum, double operator_norm) {
  const double cs = c * gamma_sum;
  return cs * operator_norm * (1.0 + cs);
}

double critical_c(double gamma_sum, double operator_norm) {
  if (!(gamma_sum > 0.0) || !(operator_norm > 0.0)) return kInf;
  // u^2 + u - 1/t = 0 with u = c S; written to avoid cancellation.
  const double q = 1.0 / operator_norm;
  const double u = 2.0 * q / (1.0 + std::sqrt(1.0 + 4.0 * q));
  return u / gamma_sum;
}

MarginReport smallness_margin(const LinearSystem& sys, const ProjectionFamily& proj, const GrowthRate& rate,
                              const NuSequence& nu, const PerturbationSpec& spec, NormVariant variant) {
  MarginReport m;
  m.c = spec.c;
  m.gamma_sum = spec.gamma_sum();
  OperatorNormOptions oo;
  oo.samples = 0;
  oo.variant = variant;
  m.operator_norm = operator_norm_T(sys, proj, rate, nu, spec.beta, oo).exact_sup;
  m.margin = spec.c == 0.0 ? 0.0 : margin_value(spec.c, m.gamma_sum, m.operator_norm);
  m.critical_c = critical_c(m.gamma_sum, m.operator_norm);
  return m;
}

NeumannCheck neumann_cross_check(const LinearSystem& sys, const ProjectionFamily& proj, const Perturbation& b,
                                 const GrowthRate& rate, const NuSequence& nu, const VectorSequence& y,
                                 NormVariant variant, int max_terms) {
  const Window w = sys.window();
  const int d = sys.dim();
  const int count = w.size();
  if (count > 50) throw std::invalid_argument("dense cross-check is limited to 50 d unknowns");
  const double beta = b.spec.beta;
  const WeightedNormSpec os = out_spec(beta, variant, rate);
  auto wt = [&](int n) { return log_weight(os, rate, n); };

  const GreenKernel kernel(sys, proj);
  NeumannCheck out;
  out.unknowns = count * d;
  Matrix m = Matrix::Zero(out.unknowns, out.unknowns);
  for (int i = 0; i < count; ++i) {
    const int row = w.first + i;
    double row_sum = 0.0;
    for (int j = w.first; j < w.last; ++j) {
      const ScaledMatrix g = kernel.at(row, j + 1);
      if (g.is_zero()) continue;
      const Matrix block = std::exp(g.log_scale.value() + wt(row) - wt(j)) * (g.mantissa * b.at(j));
      m.block(i * d, (j - w.first) * d, d, d) = block;
      row_sum += spectral_norm(block);
    }
    out.block_norm = std::max(out.block_norm, row_sum);
  }
  OperatorNormOptions oo;
  oo.samples = 0;
  oo.variant = variant;
  const double t = operator_norm_T(sys, proj, rate, nu, beta, oo).exact_sup;
  out.envelope = b.spec.c * b.spec.gamma_sum() * t;

  const SolveReport base = solve_admissibility(sys, proj, y, beta, rate, nu,
                                               BoundaryCondition::from_projections(proj, sys.domain()),
                                               SolveOptions{variant, kInf});
  Vector z0(out.unknowns);
  for (int i = 0; i < count; ++i) z0.segment(i * d, d) = std::exp(wt(w.first + i)) * base.solution.at(w.first + i);

  const Vector direct = Eigen::PartialPivLU<Matrix>(Matrix::Identity(out.unknowns, out.unknowns) - m).solve(z0);
  Vector term = z0;
  Vector sum = z0;
  const double scale = std::max(direct.lpNorm<Eigen::Infinity>(), std::numeric_limits<double>::min());
  for (out.terms = 1; out.terms < max_terms; ++out.terms) {
    term = m * term;
    sum += term;
    if (term.lpNorm<Eigen::Infinity>() <= 1e-17 * scale) {
      out.converged = true;
      break;
    }
  }
  auto block_sup = [&](const Vector& v) {
    double s = 0.0;
    for (int i = 0; i < count; ++i) s = std::max(s, v.segment(i * d, d).norm());
    return s;
  };
  const double denom = block_sup(direct);
  out.difference = denom > 0.0 ? block_sup(sum - direct) / denom : block_sup(sum);

  // Back to unweighted variables: x_{n+1} - (A_n + B_n) x_n = y_{n+1}.
  VectorSequence x(w, d);
  for (int i = 0; i < count; ++i) x.at(w.first + i) = std::exp(-wt(w.first + i)) * direct.segment(i * d, d);
  const LinearSystem pert = perturbed_system(sys, b);
  for (int n = w.first; n < w.last; ++n) {
    const Matrix a = pert.dense_step(n);
    const Vector r = x.at(n + 1) - a * x.at(n) - y.at(n + 1);
    const double s = x.at(n + 1).norm() + spectral_norm(a) * x.at(n).norm() + y.at(n + 1).norm();
    if (s > 0.0) out.residual = std::max(out.residual, r.norm() / s);
  }
  return out;
}

namespace {

PersistenceReport compare(const LinearSystem& sys, const CharacterizeResult& reference, const Perturbation& b,
                          const GrowthRate& rate, const NuSequence& nu, const PersistenceOptions& options) {
  PersistenceReport rep(reference);
  const LinearSystem core_sys = sys.restricted(reference.core);
  rep.margin = smallness_margin(core_sys, reference.projections, rate, nu, b.spec, options.variant);
  try {
    const OpenInterval r = beta_range(reference.certificate, sys.domain());
    rep.beta_in_range = b.spec.beta > r.lo && b.spec.beta < r.hi;
  } catch (const std::invalid_argument&) {
    rep.beta_in_range = false;
  }
  for (const auto& m : b.steps) rep.max_perturbation = std::max(rep.max_perturbation, spectral_norm(m));

  try {
    rep.perturbed = characterize(perturbed_system(sys, b), rate, nu, options.z_hint, options.characterize);
  } catch (const AnalysisError& e) {
    rep.failure_stage = e.stage();
    rep.failure_message = e.what();
    rep.persisted = false;
    rep.max_drift = kNan;
    return rep;
  }
  const CharacterizeResult& p = *rep.perturbed;
  const int lo = std::max(reference.core.first, p.core.first);
  const int hi = std::min(reference.core.last, p.core.last);
  for (int n = lo; n <= hi; ++n) {
    DriftRow row{n, max_principal_angle(reference.projections.range_basis(n), p.projections.range_basis(n)),
                 max_principal_angle(reference.projections.kernel_basis(n), p.projections.kernel_basis(n))};
    rep.max_drift = std::max({rep.max_drift, row.range_angle, row.kernel_angle});
    rep.drift.push_back(row);
  }
  rep.persisted = p.pass;
  if (!p.pass) {
    rep.failure_stage = "characterize";
    rep.failure_message = "perturbed characterization did not pass its checks";
  }
  return rep;
}

}  // namespace

PersistenceReport verify_persistence(const LinearSystem& sys, const Perturbation& b, const GrowthRate& rate,
                                     const NuSequence& nu, const PersistenceOptions& options) {
  const CharacterizeResult reference = characterize(sys, rate, nu, options.z_hint, options.characterize);
  return compare(sys, reference, b, rate, nu, options);
}

bool bounded_ratio_lower_bound_holds(const Perturbation& b, const GrowthRate& rate, const NuSequence& nu, double K,
                                     double rel_tol) {
  const double beta = b.spec.beta;
  if (!(K >= 1.0) || !(beta >= 0.0)) throw std::invalid_argument("need K >= 1 and beta >= 0");
  if (b.spec.c == 0.0) return true;
  for (int n = b.first; n < b.first + static_cast<int>(b.steps.size()); ++n) {
    if (rate.log_mu(n + 1) - rate.log_mu(n) > std::log(K)) continue;
    const double lhs = std::log(spectral_norm(b.at(n)));
    const double rhs = std::log(b.spec.c) + std::log(b.spec.gamma_at(n)) - beta * std::log(K) - nu.log_nu(n + 1);
    if (lhs < rhs + std::log1p(-rel_tol)) return false;
  }
  return true;
}

std::vector<SweepRow> persistence_sweep(const LinearSystem& sys, const GrowthRate& rate, const NuSequence& nu,
                                        const std::vector<SweepPoint>& points, double beta, std::uint64_t master_seed,
                                        int threads, const PersistenceOptions& options) {
  const CharacterizeResult reference = characterize(sys, rate, nu, options.z_hint, options.characterize);
  std::vector<SweepRow> rows(points.size());
  std::atomic<size_t> next{0};
  auto work = [&] {
    for (size_t i = next++; i < points.size(); i = next++) {
      const SweepPoint& pt = points[i];
      SweepRow& row = rows[i];
      row.c = pt.c;
      row.seed = pt.seed;
      row.lambda = kNan;
      row.max_drift = kNan;
      row.margin = kNan;
      try {
        const PerturbationSpec spec =
            make_perturbation_spec(sys.window(), pt.c, derive_seed(master_seed, pt.seed), beta);
        const Perturbation b = make_perturbation(sys, rate, nu, spec);
        const PersistenceReport rep = compare(sys, reference, b, rate, nu, options);
        row.margin = rep.margin.margin;
        row.verdict = rep.verdict();
        row.max_drift = rep.max_drift;
        if (rep.perturbed) row.lambda = rep.perturbed->certificate.lambda;
        row.error = rep.failure_message;
      } catch (const std::exception& e) {
        row.verdict = "error";
        row.error = e.what();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(points.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  return rows;
}

}  // namespace dichlab
