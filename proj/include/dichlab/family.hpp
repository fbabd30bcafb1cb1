#pragma once

#include "dichlab/rates.hpp"

#include <vector>

namespace dichlab {

/// Projections P_n for n in the window, all of the same rank d_s.
class ProjectionFamily {
 public:
  /// Validates idempotence (1e-10 relative to max(1, |P|^2)) and constant rank.
  ProjectionFamily(int first, std::vector<Matrix> projections);

  [[nodiscard]] Window window() const { return {first_, first_ + static_cast<int>(projections_.size()) - 1}; }
  [[nodiscard]] int dim() const { return static_cast<int>(projections_.front().rows()); }
  [[nodiscard]] int stable_rank() const { return stable_rank_; }
  [[nodiscard]] int unstable_rank() const { return dim() - stable_rank_; }
  [[nodiscard]] const Matrix& at(int n) const;
  [[nodiscard]] Matrix complement(int n) const;  // Id - P_n
  [[nodiscard]] const std::vector<Matrix>& projections() const { return projections_; }

  /// Orthonormal bases of Im P_n (d x d_s) and Ker P_n (d x d_u).
  [[nodiscard]] Matrix range_basis(int n) const;
  [[nodiscard]] Matrix kernel_basis(int n) const;

  static ProjectionFamily constant(Window window, const Matrix& p);

 private:
  int first_;
  std::vector<Matrix> projections_;
  int stable_rank_;
};

/// Constants of a (mu, nu)-dichotomy together with the exponent of nu.
struct DichotomyCertificate {
  double D = 1.0;
  double lambda = 0.0;
  double epsilon = 0.0;
  // Per-branch exponents from the fit; NaN when a branch is empty.
  double stable_exponent = 0.0;
  double unstable_exponent = 0.0;
};

/// Numerical rank of a projection (count of singular values above 1/2;
/// the nonzero singular values of a projection are all >= 1).
int projection_rank(const Matrix& p);

/// Orthonormal basis of the column span of m, keeping singular values
/// above rel_tol * sigma_max (or exactly `rank` columns when rank >= 0).
Matrix orthonormal_span(const Matrix& m, int rank = -1, double rel_tol = 1e-10);

/// Principal angles (radians, ascending) between the spans of two
/// orthonormal bases.
std::vector<double> principal_angles(const Matrix& a, const Matrix& b);
/// Largest principal angle; pi/2 when dimensions differ; 0 when both empty.
double max_principal_angle(const Matrix& a, const Matrix& b);

}  // namespace dichlab
