#pragma once

#include "dichlab/extlog.hpp"
#include "dichlab/rates.hpp"

#include <vector>

namespace dichlab {

/// A matrix stored as exp(log_scale) * mantissa.
///
/// The mantissa is kept with max-abs entry in [0.5, 1) by exact power-of-two
/// rescaling, so renormalisation never rounds. Products of hundreds of steps
/// with entries like exp(-1e8) remain representable.
struct ScaledMatrix {
  Matrix mantissa;
  ExtLog log_scale;

  ScaledMatrix() = default;
  ScaledMatrix(Matrix m, ExtLog scale);

  static ScaledMatrix identity(int d) { return ScaledMatrix(Matrix::Identity(d, d), ExtLog(0.0)); }
  static ScaledMatrix from_dense(const Matrix& m) { return ScaledMatrix(m, ExtLog(0.0)); }

  [[nodiscard]] int rows() const { return static_cast<int>(mantissa.rows()); }
  [[nodiscard]] int cols() const { return static_cast<int>(mantissa.cols()); }
  [[nodiscard]] bool is_zero() const { return !log_scale.is_finite(); }

  /// exp(log_scale) * mantissa; may underflow to zero or overflow to inf.
  [[nodiscard]] Matrix dense() const;
  /// log of the spectral norm, -inf for the zero matrix.
  [[nodiscard]] double log_norm() const;
  /// Inverse of a square matrix; throws AnalysisError when singular.
  [[nodiscard]] ScaledMatrix inverse(const char* stage) const;

  friend ScaledMatrix operator*(const ScaledMatrix& a, const ScaledMatrix& b);
  friend ScaledMatrix operator+(const ScaledMatrix& a, const ScaledMatrix& b);
};

/// Spectral norm (largest singular value).
double spectral_norm(const Matrix& m);
/// Smallest singular value divided by the largest; 0 for a zero matrix.
double inverse_condition(const Matrix& m);

/// x_{n+1} = A_n x_n on a finite window; A_n is stored for
/// n in [first, last - 1].
class LinearSystem {
 public:
  LinearSystem(Domain domain, Window window, std::vector<ScaledMatrix> steps);
  static LinearSystem from_dense(Domain domain, Window window, const std::vector<Matrix>& steps);

  [[nodiscard]] Domain domain() const { return domain_; }
  [[nodiscard]] Window window() const { return window_; }
  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] const ScaledMatrix& step(int n) const;
  [[nodiscard]] Matrix dense_step(int n) const { return step(n).dense(); }
  [[nodiscard]] const std::vector<ScaledMatrix>& steps() const { return steps_; }

  /// The system restricted to a sub-window.
  [[nodiscard]] LinearSystem restricted(Window sub) const;

 private:
  Domain domain_;
  Window window_;
  int dim_;
  std::vector<ScaledMatrix> steps_;
};

/// Evolution operator A_{m-1} ... A_n for m >= n (identity when m == n).
ScaledMatrix evolution(const LinearSystem& sys, int m, int n);

/// Constant system with the same matrix at every step.
LinearSystem constant_system(Domain domain, Window window, const Matrix& a);

}  // namespace dichlab
