#pragma once

#include "dichlab/cocycle.hpp"
#include "dichlab/dichotomy.hpp"
#include "dichlab/rates.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace dichlab {

/// G(m,n) = A(m,n) P_n for m >= n and -A(m,n)(Id - P_n) for m < n.
///
/// Entries are computed on demand and memoised; the cache only grows and
/// is guarded so one kernel can be shared between threads.
class GreenKernel {
 public:
  GreenKernel(const LinearSystem& sys, const ProjectionFamily& proj);

  [[nodiscard]] const SplitCocycle& cocycle() const { return *cocycle_; }
  [[nodiscard]] Window window() const { return cocycle_->window(); }

  [[nodiscard]] ScaledMatrix at(int m, int n) const;
  [[nodiscard]] Matrix dense(int m, int n) const { return at(m, n).dense(); }
  [[nodiscard]] size_t cached() const;

 private:
  std::shared_ptr<const SplitCocycle> cocycle_;
  mutable std::mutex mutex_;
  mutable std::map<std::pair<int, int>, ScaledMatrix> cache_;
};

ScaledMatrix green(const GreenKernel& kernel, int m, int n);

/// One-sided problems pin x_0 to Z; two-sided problems have no boundary.
struct BoundaryCondition {
  Domain kind = Domain::two_sided;
  Matrix z_basis;  // d x k orthonormal, one-sided only

  /// Z := Ker P_{first}.
  static BoundaryCondition from_projections(const ProjectionFamily& proj, Domain kind);
  static BoundaryCondition two_sided() { return {}; }
};

struct SolveOptions {
  NormVariant variant = NormVariant::plain;  // abs selects the |.|-weighted spaces
  double residual_tolerance = 1e-10;
};

struct SolveReport {
  VectorSequence solution;
  /// max_n |x_{n+1} - A_n x_n - y_{n+1}| / (|x_{n+1}| + |A_n||x_n| + |y_{n+1}|)
  double max_residual = 0.0;
  double boundary_residual = 0.0;     // |P_0 x_0| / max(1, |x|_inf), one-sided
  double input_norm = 0.0;            // |y|_{1,beta} (nu-weighted)
  double solution_norm = 0.0;         // |x|_{inf,beta}
  double log_input_norm = 0.0;
  double log_solution_norm = 0.0;
  double bound_constant = 0.0;        // solution_norm / input_norm, 0 for y = 0
  bool ok = false;                    // max_residual within tolerance
};

/// Truncated Green sum x_n = sum_k G(n,k) y_k over the window, evaluated by
/// the equivalent two-term recursions (stable part forward, unstable part
/// backward) in the orthonormal coordinates of the cocycle.
SolveReport solve_admissibility(const LinearSystem& sys, const ProjectionFamily& proj, const VectorSequence& y,
                                double beta, const GrowthRate& rate, const NuSequence& nu,
                                const BoundaryCondition& boundary, const SolveOptions& options = {});

struct OracleWeights {
  const GrowthRate* rate = nullptr;  // unweighted when null
  WeightedNormSpec spec;             // weight of x_n is exp(log_weight(spec, rate, n))
};

/// Independent solve of the boundary value problem
///   x_{n+1} - A_n x_n = y_{n+1},  P_first (x_first - y_first) = 0,  (Id - P_last) x_last = 0
/// as one sparse linear system. With weights, the unknowns are w_n x_n so
/// that errors are relative in the weighted norm.
VectorSequence oracle_solve(const LinearSystem& sys, const ProjectionFamily& proj, const VectorSequence& y,
                            const BoundaryCondition& boundary, const OracleWeights& weights = {});

/// |a - b| / |b| in the given weighted sup norm (0 when both vanish).
double relative_difference(const VectorSequence& a, const VectorSequence& b, const WeightedNormSpec& spec,
                           const GrowthRate& rate);

struct OperatorNormReport {
  double exact_sup = 0.0;       // max of mu_m^beta |G(m,k)| mu_k^{-beta} / nu_k
  double log_exact_sup = 0.0;
  double sampled_lb = 0.0;      // max of |T y|_{inf,beta} over unit l^1 inputs
  int argmax_m = 0;
  int argmax_k = 0;
  double impulse_value = 0.0;   // |T y| for the impulse at argmax_k along the top singular vector
  int samples = 0;
};

struct OperatorNormOptions {
  int samples = 16;
  std::uint64_t seed = 0;
  NormVariant variant = NormVariant::plain;
};

/// Norm of T_beta: l^1_beta -> l^inf_beta. The exact value over the window
/// is the weighted kernel supremum since l^1 is the convex hull of impulses.
OperatorNormReport operator_norm_T(const LinearSystem& sys, const ProjectionFamily& proj, const GrowthRate& rate,
                                   const NuSequence& nu, double beta, const OperatorNormOptions& options = {});

enum class ProbeVerdict { plausible, inconclusive };
std::string to_string(ProbeVerdict v);

struct UniquenessTrace {
  std::vector<double> trace;  // beta log mu_n + log |A(n, first) v|
  double slope = 0.0;         // (t_last - t_first) / (log mu_last - log mu_first)
};

struct UniquenessReport {
  double margin = 0.0;
  std::vector<UniquenessTrace> traces;
  double min_slope = 0.0;
  ProbeVerdict verdict = ProbeVerdict::inconclusive;
};

/// Default margin per unit of log mu: (lambda - |beta| - epsilon) / 2.
double default_uniqueness_margin(const DichotomyCertificate& cert, double beta);

/// Homogeneous orbits from Z must leave every l^inf_beta ball: each trace
/// has to grow by at least `margin` per unit of log mu across the window.
UniquenessReport uniqueness_probe(const LinearSystem& sys, const GrowthRate& rate, double beta, const Matrix& z_basis,
                                  double margin);

struct CounterexampleRow {
  int n = 0;
  double log_x = 0.0;
  double log_bound = 0.0;
  bool holds = false;  // log_x >= log_bound - 1e-9
};

/// mu_n = e^{e^n}, A_n = (mu_{n+1}/mu_n)^{-1/2}, y_k = (1/phi_k) e_1 with
/// phi_k = mu_k / (mu_{k+1} - mu_k); x_n grows past every bound.
std::vector<CounterexampleRow> run_counterexample(int n_max);

}  // namespace dichlab
