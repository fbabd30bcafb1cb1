#pragma once

#include "dichlab/admissibility.hpp"
#include "dichlab/splitting.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dichlab {

/// Perturbation bound parameters: |B_n| <= c gamma_n mu_n^beta / (nu_{n+1} mu_{n+1}^beta).
struct PerturbationSpec {
  int gamma_first = 0;
  std::vector<double> gamma;  // gamma_n for n in [gamma_first, gamma_first + size)
  double c = 0.0;
  std::uint64_t seed = 0;
  double beta = 0.0;

  [[nodiscard]] double gamma_at(int n) const;
  [[nodiscard]] double gamma_sum() const;
};

/// gamma_n = ratio^|n| over the steps of the window.
std::vector<double> geometric_gamma(Window window, double ratio = 0.5);
/// Spec with geometric gamma covering the steps of `window`.
PerturbationSpec make_perturbation_spec(Window window, double c, std::uint64_t seed, double beta, double ratio = 0.5);

struct Perturbation {
  int first = 0;
  std::vector<Matrix> steps;   // B_n for n in [first, first + size)
  std::vector<double> log_rho;  // log of the prescribed norm, -inf when c = 0
  PerturbationSpec spec;

  [[nodiscard]] const Matrix& at(int n) const { return steps.at(static_cast<size_t>(n - first)); }
};

/// B_n = rho_n R_n with R_n seeded and rescaled to spectral norm one, so the
/// bound holds with equality.
Perturbation make_perturbation(const LinearSystem& sys, const GrowthRate& rate, const NuSequence& nu,
                               const PerturbationSpec& spec);

LinearSystem perturbed_system(const LinearSystem& sys, const Perturbation& b);

enum class GraphMode { A_beta, B_beta };

struct GraphNormOperator {
  const LinearSystem* sys = nullptr;
  const Perturbation* perturbation = nullptr;  // B_beta only
  GraphMode mode = GraphMode::A_beta;
};

/// (A x)_n = x_n - A_{n-1} x_{n-1}, (B x)_n = B_{n-1} x_{n-1}; zero at the first index.
VectorSequence apply_graph_operator(const GraphNormOperator& op, const VectorSequence& x);

/// |x|_{inf,beta} + |A x|_{1,beta}.
double graph_norm(const VectorSequence& x, const LinearSystem& sys, const GrowthRate& rate, const NuSequence& nu,
                  double beta, NormVariant variant = NormVariant::plain);

struct MarginReport {
  double c = 0.0;
  double gamma_sum = 0.0;
  double operator_norm = 0.0;  // |T_beta| on the window
  double margin = 0.0;         // c S t (1 + c S)
  double critical_c = 0.0;     // c where the margin reaches one
};

double margin_value(double c, double gamma_sum, double operator_norm);
/// Positive root of c S t (1 + c S) = 1.
double critical_c(double gamma_sum, double operator_norm);

MarginReport smallness_margin(const LinearSystem& sys, const ProjectionFamily& proj, const GrowthRate& rate,
                              const NuSequence& nu, const PerturbationSpec& spec,
                              NormVariant variant = NormVariant::plain);

struct NeumannCheck {
  int unknowns = 0;
  double block_norm = 0.0;   // weighted block-infinity norm of T B, at most c S t
  double envelope = 0.0;     // c S t
  int terms = 0;
  bool converged = false;
  double difference = 0.0;   // Neumann sum against the dense solve, relative weighted sup
  double residual = 0.0;     // perturbed equation residual of the dense solution
};

/// Assembles T B as a dense matrix in weighted coordinates (at most 50 d
/// unknowns) and compares the Neumann series for (I - T B)^{-1} T y with a
/// direct solve.
NeumannCheck neumann_cross_check(const LinearSystem& sys, const ProjectionFamily& proj, const Perturbation& b,
                                 const GrowthRate& rate, const NuSequence& nu, const VectorSequence& y,
                                 NormVariant variant = NormVariant::plain, int max_terms = 500);

struct DriftRow {
  int n = 0;
  double range_angle = 0.0;
  double kernel_angle = 0.0;
};

struct PersistenceOptions {
  CharacterizeOptions characterize;
  NormVariant variant = NormVariant::plain;
  std::optional<Matrix> z_hint;
};

struct PersistenceReport {
  explicit PersistenceReport(CharacterizeResult ref) : reference(std::move(ref)) {}

  CharacterizeResult reference;
  std::optional<CharacterizeResult> perturbed;
  MarginReport margin;
  bool beta_in_range = false;
  std::vector<DriftRow> drift;
  double max_drift = 0.0;
  double max_perturbation = 0.0;  // max_n |B_n|
  bool persisted = false;
  std::string failure_stage;
  std::string failure_message;

  [[nodiscard]] std::string verdict() const { return persisted ? "persisted" : "failed"; }
};

/// Characterizes A and A + B. Failures on the reference propagate; failures
/// on the perturbed system are recorded in the report.
PersistenceReport verify_persistence(const LinearSystem& sys, const Perturbation& b, const GrowthRate& rate,
                                     const NuSequence& nu, const PersistenceOptions& options = {});

/// |B_n| >= c gamma_n / (K^beta nu_{n+1}) wherever mu_{n+1} <= K mu_n (beta >= 0).
bool bounded_ratio_lower_bound_holds(const Perturbation& b, const GrowthRate& rate, const NuSequence& nu,
                                     double K, double rel_tol = 1e-12);

struct SweepPoint {
  double c = 0.0;
  std::uint64_t seed = 0;
};

struct SweepRow {
  double c = 0.0;
  std::uint64_t seed = 0;
  double margin = 0.0;
  std::string verdict;
  double max_drift = 0.0;
  double lambda = 0.0;  // perturbed fit, NaN on failure
  std::string error;
};

/// Runs verify_persistence for each point on a bounded pool against one
/// reference characterization. Each point draws its perturbation from
/// derive_seed(master, point.seed); rows keep the input order.
std::vector<SweepRow> persistence_sweep(const LinearSystem& sys, const GrowthRate& rate, const NuSequence& nu,
                                        const std::vector<SweepPoint>& points, double beta, std::uint64_t master_seed,
                                        int threads, const PersistenceOptions& options = {});

}  // namespace dichlab
