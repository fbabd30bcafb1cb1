#include "dichlab/system.hpp"

#include "dichlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dichlab {

namespace {

// Rescale m by an exact power of two so max |m_ij| lies in [0.5, 1).
void normalise(Matrix& m, ExtLog& scale) {
  const double peak = m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
  if (peak == 0.0 || !scale.is_finite()) {
    m.setZero();
    scale = ExtLog::neg_inf();
    return;
  }
  if (!std::isfinite(peak)) throw std::invalid_argument("non-finite matrix entry");
  int exponent = 0;
  std::frexp(peak, &exponent);
  if (exponent != 0) {
    m *= std::ldexp(1.0, -exponent);
    scale += ln2_ext() * static_cast<double>(exponent);
  }
}

}  // namespace

ScaledMatrix::ScaledMatrix(Matrix m, ExtLog scale) : mantissa(std::move(m)), log_scale(scale) {
  normalise(mantissa, log_scale);
}

Matrix ScaledMatrix::dense() const {
  if (is_zero()) return Matrix::Zero(mantissa.rows(), mantissa.cols());
  return mantissa * std::exp(log_scale.value());
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 || m.cols() == 1) return m.norm();
  // Largest eigenvalue of the smaller Gram matrix; relative accuracy of
  // sigma_max is unaffected by squaring.
  const Matrix gram = m.rows() <= m.cols() ? Matrix(m * m.transpose()) : Matrix(m.transpose() * m);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, eig.eigenvalues()(eig.eigenvalues().size() - 1)));
}

double inverse_condition(const Matrix& m) {
  if (m.size() == 0) return 1.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s(0) == 0.0) return 0.0;
  return s(s.size() - 1) / s(0);
}

double ScaledMatrix::log_norm() const {
  if (is_zero()) return -std::numeric_limits<double>::infinity();
  const double n = spectral_norm(mantissa);
  if (n == 0.0) return -std::numeric_limits<double>::infinity();
  return (log_scale + ExtLog(std::log(n))).value();
}

ScaledMatrix ScaledMatrix::inverse(const char* stage) const {
  if (rows() != cols()) throw std::invalid_argument("inverse of a non-square matrix");
  if (rows() == 0) return *this;
  if (is_zero() || inverse_condition(mantissa) < 1e-14) {
    throw AnalysisError(stage, "matrix is numerically singular");
  }
  return ScaledMatrix(mantissa.inverse(), -log_scale);
}

ScaledMatrix operator*(const ScaledMatrix& a, const ScaledMatrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("scaled matrix product dimension mismatch");
  return ScaledMatrix(a.mantissa * b.mantissa, a.log_scale + b.log_scale);
}

ScaledMatrix operator+(const ScaledMatrix& a, const ScaledMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("scaled matrix sum dimension mismatch");
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  const bool a_big = a.log_scale.value() >= b.log_scale.value();
  const ScaledMatrix& big = a_big ? a : b;
  const ScaledMatrix& small = a_big ? b : a;
  const double ratio = std::exp((small.log_scale - big.log_scale).value());
  return ScaledMatrix(big.mantissa + ratio * small.mantissa, big.log_scale);
}

LinearSystem::LinearSystem(Domain domain, Window window, std::vector<ScaledMatrix> steps)
    : domain_(domain), window_(window), dim_(0), steps_(std::move(steps)) {
  if (window_.size() < 1) throw std::invalid_argument("system window is empty");
  if (domain_ == Domain::one_sided && window_.first != 0) throw std::invalid_argument("one-sided systems start at n = 0");
  if (static_cast<int>(steps_.size()) != window_.size() - 1) {
    throw std::invalid_argument("system needs one matrix per step of the window");
  }
  if (steps_.empty()) throw std::invalid_argument("system window needs at least two indices");
  dim_ = steps_.front().rows();
  if (dim_ < 1) throw std::invalid_argument("system dimension must be positive");
  for (const auto& s : steps_) {
    if (s.rows() != dim_ || s.cols() != dim_) throw std::invalid_argument("all system matrices must be d x d");
    if (!s.mantissa.allFinite()) throw std::invalid_argument("system matrix has a non-finite entry");
  }
}

LinearSystem LinearSystem::from_dense(Domain domain, Window window, const std::vector<Matrix>& steps) {
  std::vector<ScaledMatrix> scaled;
  scaled.reserve(steps.size());
  for (const auto& m : steps) scaled.push_back(ScaledMatrix::from_dense(m));
  return LinearSystem(domain, window, std::move(scaled));
}

const ScaledMatrix& LinearSystem::step(int n) const {
  if (n < window_.first || n >= window_.last) throw std::out_of_range("system step index outside window");
  return steps_[static_cast<size_t>(n - window_.first)];
}

LinearSystem LinearSystem::restricted(Window sub) const {
  if (!window_.contains(sub) || sub.size() < 2) throw std::invalid_argument("invalid sub-window");
  std::vector<ScaledMatrix> s(steps_.begin() + (sub.first - window_.first), steps_.begin() + (sub.last - window_.first));
  // A one-sided system restricted away from 0 is re-indexed as two-sided data.
  const Domain d = (domain_ == Domain::one_sided && sub.first != 0) ? Domain::two_sided : domain_;
  return LinearSystem(d, sub, std::move(s));
}

ScaledMatrix evolution(const LinearSystem& sys, int m, int n) {
  const Window w = sys.window();
  if (m < n) throw std::invalid_argument("evolution(m, n) needs m >= n; use evolution_on_unstable");
  if (!w.contains(m) || !w.contains(n)) throw std::out_of_range("evolution index outside window");
  ScaledMatrix acc = ScaledMatrix::identity(sys.dim());
  for (int k = n; k < m; ++k) acc = sys.step(k) * acc;
  return acc;
}

LinearSystem constant_system(Domain domain, Window window, const Matrix& a) {
  return LinearSystem::from_dense(domain, window, std::vector<Matrix>(static_cast<size_t>(window.size() - 1), a));
}

}  // namespace dichlab
