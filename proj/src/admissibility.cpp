#include "dichlab/admissibility.hpp"

#include "dichlab/errors.hpp"
#include "dichlab/random.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dichlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// exp(scale) * M v without forming exp(scale) on its own.
Vector apply_scaled(const ScaledMatrix& a, const Vector& v) {
  if (a.is_zero()) return Vector::Zero(a.rows());
  const Vector w = a.mantissa * v;
  const double len = w.norm();
  if (len == 0.0) return w;
  return (w / len) * std::exp(a.log_scale.value() + std::log(len));
}

// exp(shift) * v, safe for large |shift| when the result is representable.
Vector shifted(const Vector& v, double shift) {
  const double len = v.norm();
  if (len == 0.0) return v;
  return (v / len) * std::exp(shift + std::log(len));
}

void check_input(const LinearSystem& sys, const ProjectionFamily& proj, const VectorSequence& y) {
  if (!(y.window() == sys.window())) throw std::invalid_argument("input sequence must cover exactly the system window");
  if (y.dim() != sys.dim()) throw std::invalid_argument("input dimension differs from system dimension");
  if (!proj.window().contains(sys.window())) throw std::invalid_argument("projections do not cover the system window");
}

void check_boundary(const LinearSystem& sys, const ProjectionFamily& proj, const VectorSequence& y,
                    const BoundaryCondition& boundary) {
  if (boundary.kind != sys.domain()) throw std::invalid_argument("boundary condition does not match the system domain");
  if (boundary.kind != Domain::one_sided) return;
  const int first = sys.window().first;
  if (y.at(first).norm() != 0.0) throw std::invalid_argument("one-sided input needs y_0 = 0");
  if (boundary.z_basis.size() > 0 || proj.unstable_rank() > 0) {
    const Matrix ker = proj.kernel_basis(first);
    if (boundary.z_basis.cols() != ker.cols() || max_principal_angle(boundary.z_basis, ker) > 1e-8) {
      throw std::invalid_argument("boundary subspace Z must equal Ker P_0");
    }
  }
}

struct Specs {
  WeightedNormSpec in;
  WeightedNormSpec out;
};

Specs specs_for(double beta, NormVariant variant, const GrowthRate& rate) {
  if (variant == NormVariant::abs) {
    return {WeightedNormSpec::abs(beta, NormKind::one, rate), WeightedNormSpec::abs(beta, NormKind::infinity, rate)};
  }
  return {WeightedNormSpec::plain(beta, NormKind::one), WeightedNormSpec::plain(beta, NormKind::infinity)};
}

double log_expm1(double d) { return d > 30.0 ? d + std::log1p(-std::exp(-d)) : std::log(std::expm1(d)); }

}  // namespace

GreenKernel::GreenKernel(const LinearSystem& sys, const ProjectionFamily& proj)
    : cocycle_(std::make_shared<const SplitCocycle>(sys, proj)) {}

ScaledMatrix GreenKernel::at(int m, int n) const {
  const Window w = window();
  if (!w.contains(m) || !w.contains(n)) throw std::out_of_range("green kernel index outside window");
  {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto it = cache_.find({m, n});
    if (it != cache_.end()) return it->second;
  }
  ScaledMatrix g = cocycle_->green(m, n);
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.emplace(std::make_pair(m, n), std::move(g)).first->second;
}

size_t GreenKernel::cached() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.size();
}

ScaledMatrix green(const GreenKernel& kernel, int m, int n) { return kernel.at(m, n); }

BoundaryCondition BoundaryCondition::from_projections(const ProjectionFamily& proj, Domain kind) {
  if (kind == Domain::two_sided) return two_sided();
  return {Domain::one_sided, proj.kernel_basis(proj.window().first)};
}

SolveReport solve_admissibility(const LinearSystem& sys, const ProjectionFamily& proj, const VectorSequence& y,
                                double beta, const GrowthRate& rate, const NuSequence& nu,
                                const BoundaryCondition& boundary, const SolveOptions& options) {
  check_input(sys, proj, y);
  check_boundary(sys, proj, y, boundary);
  const SplitCocycle c(sys, proj);
  const Window w = sys.window();
  const int d = sys.dim();
  const int ds = c.stable_rank();
  const int du = c.unstable_rank();
  if (du > 0 && !c.kernel_restrictions_invertible()) {
    throw AnalysisError("solve", "kernel restriction is singular; the Green kernel is undefined");
  }

  // Stable coordinates sigma_n = sum_{k <= n} B(n,k) S_k^T P_k y_k, forward.
  std::vector<Vector> sigma(static_cast<size_t>(w.size()), Vector::Zero(ds));
  for (int n = w.first; n <= w.last; ++n) {
    const auto i = static_cast<size_t>(n - w.first);
    Vector s = c.stable_coords(n) * y.at(n);
    if (n > w.first) s += apply_scaled(c.stable_step(n - 1), sigma[i - 1]);
    sigma[i] = s;
  }
  // Unstable coordinates tau_n = sum_{k > n} B(n,k) K_k^T (Id - P_k) y_k, backward.
  std::vector<Vector> tau(static_cast<size_t>(w.size()), Vector::Zero(du));
  for (int n = w.last - 1; n >= w.first; --n) {
    const auto i = static_cast<size_t>(n - w.first);
    const Vector t = tau[i + 1] + c.unstable_coords(n + 1) * y.at(n + 1);
    tau[i] = du > 0 ? apply_scaled(c.unstable_step_inverse(n), t) : t;
  }

  SolveReport rep;
  rep.solution = VectorSequence(w, d);
  for (int n = w.first; n <= w.last; ++n) {
    const auto i = static_cast<size_t>(n - w.first);
    rep.solution.at(n) = c.range_basis(n) * sigma[i] - c.kernel_basis(n) * tau[i];
  }

  for (int n = w.first; n < w.last; ++n) {
    const Vector& x0 = rep.solution.at(n);
    const Vector& x1 = rep.solution.at(n + 1);
    const Vector ax = apply_scaled(sys.step(n), x0);
    const double scale = x1.norm() + std::exp(sys.step(n).log_norm() + std::log(x0.norm())) + y.at(n + 1).norm();
    const double r = (x1 - ax - y.at(n + 1)).norm();
    if (scale > 0.0) rep.max_residual = std::max(rep.max_residual, r / scale);
  }
  if (boundary.kind == Domain::one_sided) {
    double top = 1.0;
    for (const auto& v : rep.solution.values) top = std::max(top, v.norm());
    rep.boundary_residual = (proj.at(w.first) * rep.solution.at(w.first)).norm() / top;
  }

  const Specs sp = specs_for(beta, options.variant, rate);
  rep.log_input_norm = log_norm(y, sp.in, rate, &nu);
  rep.log_solution_norm = log_norm(rep.solution, sp.out, rate);
  rep.input_norm = std::exp(rep.log_input_norm);
  rep.solution_norm = std::exp(rep.log_solution_norm);
  rep.bound_constant =
      std::isfinite(rep.log_input_norm) ? std::exp(rep.log_solution_norm - rep.log_input_norm) : 0.0;
  rep.ok = rep.max_residual <= options.residual_tolerance;
  return rep;
}

VectorSequence oracle_solve(const LinearSystem& sys, const ProjectionFamily& proj, const VectorSequence& y,
                            const BoundaryCondition& boundary, const OracleWeights& weights) {
  check_input(sys, proj, y);
  check_boundary(sys, proj, y, boundary);
  const Window w = sys.window();
  const int d = sys.dim();
  const int size = w.size() * d;
  auto weight = [&](int n) { return weights.rate ? log_weight(weights.spec, *weights.rate, n) : 0.0; };

  std::vector<Eigen::Triplet<double>> entries;
  Vector rhs = Vector::Zero(size);
  int row = 0;
  auto put_block = [&](int r0, int n, const Matrix& block) {
    const int c0 = (n - w.first) * d;
    for (int i = 0; i < block.rows(); ++i) {
      for (int j = 0; j < block.cols(); ++j) {
        if (block(i, j) != 0.0) entries.emplace_back(r0 + i, c0 + j, block(i, j));
      }
    }
  };

  // Left boundary: S^T P (z_first - w y_first) = 0.
  const Matrix left = proj.range_basis(w.first).transpose() * proj.at(w.first);
  put_block(row, w.first, left);
  rhs.segment(row, left.rows()) = left * shifted(y.at(w.first), weight(w.first));
  row += static_cast<int>(left.rows());

  // z_{n+1} - exp(g) M_n z_n = exp(w_{n+1}) y_{n+1}, divided by max(1, exp(g)).
  for (int n = w.first; n < w.last; ++n) {
    const ScaledMatrix& a = sys.step(n);
    const double g = a.is_zero() ? -kInf : (a.log_scale + ExtLog(weight(n + 1) - weight(n))).value();
    const double down = std::max(0.0, g);
    put_block(row, n + 1, Matrix::Identity(d, d) * std::exp(-down));
    if (std::isfinite(g)) put_block(row, n, -a.mantissa * std::exp(g - down));
    rhs.segment(row, d) = shifted(y.at(n + 1), weight(n + 1) - down);
    row += d;
  }

  // Right boundary: K^T (Id - P) z_last = 0.
  const Matrix right = proj.kernel_basis(w.last).transpose() * proj.complement(w.last);
  put_block(row, w.last, right);
  row += static_cast<int>(right.rows());
  if (row != size) throw std::logic_error("oracle system is not square");

  Eigen::SparseMatrix<double> mat(size, size);
  mat.setFromTriplets(entries.begin(), entries.end());
  mat.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(mat);
  if (lu.info() != Eigen::Success) {
    throw AnalysisError("oracle", "boundary value system is singular; the splitting is degenerate");
  }
  const Vector z = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !z.allFinite()) {
    throw AnalysisError("oracle", "boundary value solve failed");
  }

  VectorSequence x(w, d);
  for (int n = w.first; n <= w.last; ++n) x.at(n) = shifted(z.segment((n - w.first) * d, d), -weight(n));
  return x;
}

double relative_difference(const VectorSequence& a, const VectorSequence& b, const WeightedNormSpec& spec,
                           const GrowthRate& rate) {
  if (!(a.window() == b.window())) throw std::invalid_argument("sequences cover different windows");
  VectorSequence diff = a;
  for (size_t i = 0; i < diff.values.size(); ++i) diff.values[i] -= b.values[i];
  const double num = log_norm(diff, spec, rate);
  const double den = log_norm(b, spec, rate);
  if (!std::isfinite(num) && num < 0) return 0.0;
  if (!std::isfinite(den)) return kInf;
  return std::exp(num - den);
}

OperatorNormReport operator_norm_T(const LinearSystem& sys, const ProjectionFamily& proj, const GrowthRate& rate,
                                   const NuSequence& nu, double beta, const OperatorNormOptions& options) {
  const SplitCocycle c(sys, proj);
  const Window w = sys.window();
  const bool one_sided = sys.domain() == Domain::one_sided;
  const int k_min = one_sided ? w.first + 1 : w.first;
  const Specs sp = specs_for(beta, options.variant, rate);
  auto wt = [&](int n) { return log_weight(sp.out, rate, n); };

  OperatorNormReport rep;
  rep.log_exact_sup = -kInf;
  for_each_block_norm(c, [&](const BlockNorm& b) {
    if (b.n < k_min) return;
    if (b.branch == Branch::unstable && b.m == b.n) return;  // diagonal belongs to the stable branch
    const double v = wt(b.m) + b.log_norm() - wt(b.n) - nu.log_nu(b.n);
    if (v > rep.log_exact_sup) {
      rep.log_exact_sup = v;
      rep.argmax_m = b.m;
      rep.argmax_k = b.n;
    }
  });
  rep.exact_sup = std::exp(rep.log_exact_sup);

  const BoundaryCondition boundary = BoundaryCondition::from_projections(proj, sys.domain());
  const SolveOptions so{options.variant, kInf};
  if (std::isfinite(rep.log_exact_sup)) {
    const ScaledMatrix g = c.green(rep.argmax_m, rep.argmax_k);
    Eigen::JacobiSVD<Matrix> svd(g.mantissa, Eigen::ComputeFullV);
    VectorSequence y(w, sys.dim());
    y.at(rep.argmax_k) = svd.matrixV().col(0);
    rep.impulse_value = solve_admissibility(sys, proj, y, beta, rate, nu, boundary, so).bound_constant;
  }

  for (int s = 0; s < options.samples; ++s) {
    Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(s)));
    VectorSequence y(w, sys.dim());
    for (int n = k_min; n <= w.last; ++n) {
      y.at(n) = shifted(gaussian_vector(rng, sys.dim()), -log_weight(sp.in, rate, n) - nu.log_nu(n));
    }
    const SolveReport r = solve_admissibility(sys, proj, y, beta, rate, nu, boundary, so);
    rep.sampled_lb = std::max(rep.sampled_lb, r.bound_constant);
    ++rep.samples;
  }
  return rep;
}

std::string to_string(ProbeVerdict v) { return v == ProbeVerdict::plausible ? "plausible" : "inconclusive"; }

double default_uniqueness_margin(const DichotomyCertificate& cert, double beta) {
  return 0.5 * (cert.lambda - std::abs(beta) - cert.epsilon);
}

UniquenessReport uniqueness_probe(const LinearSystem& sys, const GrowthRate& rate, double beta, const Matrix& z_basis,
                                  double margin) {
  if (z_basis.size() > 0 && z_basis.rows() != sys.dim()) throw std::invalid_argument("Z basis has the wrong dimension");
  const Window w = sys.window();
  const double span = rate.log_mu(w.last) - rate.log_mu(w.first);
  UniquenessReport rep;
  rep.margin = margin;
  rep.min_slope = kInf;
  for (int j = 0; j < z_basis.cols(); ++j) {
    UniquenessTrace t;
    ScaledMatrix orbit = ScaledMatrix::from_dense(z_basis.col(j));
    t.trace.push_back(beta * rate.log_mu(w.first) + orbit.log_norm());
    for (int n = w.first; n < w.last; ++n) {
      orbit = sys.step(n) * orbit;
      t.trace.push_back(beta * rate.log_mu(n + 1) + orbit.log_norm());
    }
    t.slope = (t.trace.back() - t.trace.front()) / span;
    if (std::isnan(t.slope)) t.slope = -kInf;  // orbit died
    rep.min_slope = std::min(rep.min_slope, t.slope);
    rep.traces.push_back(std::move(t));
  }
  if (rep.traces.empty()) {
    rep.verdict = ProbeVerdict::plausible;  // Z = {0}
  } else {
    rep.verdict = (margin > 0.0 && rep.min_slope >= margin) ? ProbeVerdict::plausible : ProbeVerdict::inconclusive;
  }
  return rep;
}

std::vector<CounterexampleRow> run_counterexample(int n_max) {
  if (n_max < 1 || n_max > 40) throw std::invalid_argument("counterexample needs 1 <= n_max <= 40");
  auto L = [](int n) { return std::exp(static_cast<double>(n)); };  // log mu_n
  std::vector<CounterexampleRow> rows;
  for (int n = 1; n <= n_max; ++n) {
    // x_n = mu_n^{-1/2} sum_k (1/phi_k) mu_k^{1/2}, with 1/phi_k = mu_{k+1}/mu_k - 1.
    std::vector<double> terms;
    for (int k = 1; k <= n; ++k) terms.push_back(log_expm1(L(k + 1) - L(k)) - 0.5 * (L(n) - L(k)));
    CounterexampleRow r;
    r.n = n;
    r.log_x = log_sum_exp(terms);
    const double a = 0.5 * (L(n + 1) - L(n));
    const double b = 0.5 * (L(1) - L(n));
    r.log_bound = std::log(2.0) + a + std::log1p(-std::exp(b - a));
    r.holds = r.log_x >= r.log_bound - 1e-9;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace dichlab
