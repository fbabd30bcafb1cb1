#pragma once

#include "dichlab/dichotomy.hpp"
#include "dichlab/family.hpp"
#include "dichlab/rates.hpp"
#include "dichlab/system.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace dichlab {

enum class SubspaceRole { stable, unstable };
enum class CutoffRule { fixed, largest_gap };

std::string to_string(SubspaceRole r);
std::string to_string(CutoffRule r);
CutoffRule cutoff_rule_from_string(const std::string& s);

struct SubspaceBasis {
  int n = 0;
  SubspaceRole role = SubspaceRole::stable;
  Matrix basis;                          // d x k, orthonormal columns
  std::vector<double> growth_exponents;  // per direction, in log-mu units
};

struct ClassifyOptions {
  double gap_threshold = 0.2;
  CutoffRule rule = CutoffRule::fixed;
  double cutoff = 0.0;  // used by the fixed rule
  /// Minimum log-mu extent of the product used for classification; NaN
  /// selects a third of the window's log-mu span.
  double horizon = std::numeric_limits<double>::quiet_NaN();
};

/// Exponents of A(last, n): rho_i = log sigma_i / (log mu_last - log mu_n).
/// The sigma_i come from a QR sweep through the factors seeded with the
/// right singular vectors of the normalised product, so that small
/// singular values are not swamped by large ones.
struct Classification {
  int n = 0;
  int end = 0;
  std::vector<double> exponents;  // descending
  double cutoff = 0.0;
  double gap = 0.0;               // twice the distance from the cutoff to the nearest exponent
  int unstable_count = 0;         // exponents >= cutoff
  Matrix dominant_basis;          // top right singular subspace (exponents >= cutoff)
  Matrix stable_basis;            // its orthogonal complement
};

/// Horizon in log-mu units resolved against the rate's window.
double resolve_horizon(const ClassifyOptions& options, const GrowthRate& rate, Window window);

/// No gap checks; callers decide what a small gap means.
Classification classify(const LinearSystem& sys, int n, const GrowthRate& rate, const ClassifyOptions& options = {});

/// S(n): directions whose forward orbit does not grow. Throws AnalysisError
/// when the horizon is too short or the gap is below the threshold.
SubspaceBasis stable_subspace(const LinearSystem& sys, int n, const GrowthRate& rate,
                              const ClassifyOptions& options = {});

/// Orthogonal complement of S(first): a complement of the stable subspace
/// used as Z when none is given.
Matrix infer_z_candidate(const LinearSystem& sys, const GrowthRate& rate, const ClassifyOptions& options = {});

/// U(n) = A(n, first) Z for every window index, orthonormalised by a QR
/// sweep. Throws AnalysisError when the forward image loses rank.
std::vector<SubspaceBasis> unstable_subspaces(const LinearSystem& sys, const Matrix& z_basis, const GrowthRate& rate);

/// One-sided: U(n) = A(n, first) Z.
SubspaceBasis unstable_subspace(const LinearSystem& sys, int n, const Matrix& z_basis, const GrowthRate& rate);
/// Two-sided: the unstable cluster at the left end of the window mapped
/// forward. Requires a left extent of at least the horizon.
SubspaceBasis unstable_subspace_two_sided(const LinearSystem& sys, int n, const GrowthRate& rate,
                                          const ClassifyOptions& options = {});

/// P_n = [S_n U_n] diag(I, 0) [S_n U_n]^{-1}.
ProjectionFamily build_projections(int first, const std::vector<Matrix>& stable, const std::vector<Matrix>& unstable);

struct SZeroBetaCheck {
  double beta = 0.0;
  SubspaceBasis basis_s0;
  SubspaceBasis basis_sbeta;
  double gap_s0 = 0.0;
  double gap_sbeta = 0.0;
  double max_angle = 0.0;
  bool equal = false;
};

/// Compare S_0(0) (cutoff 0) and S_beta(0) (cutoff -beta) at the left end.
SZeroBetaCheck s_beta_zero_check(const LinearSystem& sys, const GrowthRate& rate, double beta,
                                 double gap_threshold = 0.2);

struct SplitRow {
  int n = 0;
  double gap = 0.0;
  double min_angle = 0.0;        // smallest principal angle between S(n) and U(n)
  double projection_norm = 0.0;  // |P_n|
};

struct SplittingReport {
  Window core;
  int stable_dim = 0;
  double horizon = 0.0;
  std::vector<SplitRow> rows;
  std::vector<std::vector<double>> stable_exponents;  // per core index
  double gap = 0.0;        // smallest classification gap over the core
  double min_angle = 0.0;
  double max_stable_invariance = 0.0;    // angle(A_n S(n), S(n+1))
  double max_unstable_invariance = 0.0;  // angle(A_n U(n), U(n+1))
  double max_angle_identity = 0.0;       // | |P_n| sin(theta_min) - 1 |
  bool pass = false;
};

struct GreenBoundReport {
  double beta = 0.0;
  double log_sup = 0.0;  // log C'' = sup log |G(m,n)| + beta |log mu_m - log mu_n| - log nu_n
  double sup = 0.0;
  int argmax_m = 0;
  int argmax_n = 0;
  bool finite = false;
};

/// The Green kernel bound in its nu-linear form, measured over the window.
GreenBoundReport green_bound(const LinearSystem& sys, const ProjectionFamily& proj, const GrowthRate& rate,
                             const NuSequence& nu, double beta);

struct CharacterizeOptions {
  ClassifyOptions classify;
  VerifyOptions verify;
  double green_beta = std::numeric_limits<double>::quiet_NaN();  // NaN: lambda_hat / 2
  double projection_tolerance = 1e-8;                            // relative slack on |P_n| <= D nu_n
};

struct CharacterizeResult {
  Window core;
  ProjectionFamily projections;
  DichotomyCertificate certificate;
  DichotomyLedger ledger;
  SplittingReport splitting;
  GreenBoundReport green;
  double max_projection_log_ratio = 0.0;  // max_n log |P_n| - log(D nu_n)
  bool projection_bound_ok = false;
  bool pass = false;
};

/// Subspaces on the core window, projections, fitted certificate and the
/// verification ledger. Failures raise AnalysisError tagged with the stage.
/// The core keeps indices with at least a horizon of log-mu to the right
/// (and, two-sided, to the left) so each classification has data.
CharacterizeResult characterize(const LinearSystem& sys, const GrowthRate& rate, const NuSequence& nu,
                                const std::optional<Matrix>& z_hint = std::nullopt,
                                const CharacterizeOptions& options = {});

}  // namespace dichlab
