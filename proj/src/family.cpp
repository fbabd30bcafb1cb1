#include "dichlab/family.hpp"

#include "dichlab/system.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dichlab {

int projection_rank(const Matrix& p) {
  if (p.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(p);
  const auto& s = svd.singularValues();
  return static_cast<int>((s.array() > 0.5).count());
}

Matrix orthonormal_span(const Matrix& m, int rank, double rel_tol) {
  if (m.cols() == 0 || m.rows() == 0) return Matrix(m.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU);
  const auto& s = svd.singularValues();
  int k = rank;
  if (k < 0) {
    k = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (s(i) > rel_tol * s(0) && s(0) > 0.0) ++k;
    }
  }
  return svd.matrixU().leftCols(k);
}

std::vector<double> principal_angles(const Matrix& a, const Matrix& b) {
  if (a.cols() == 0 || b.cols() == 0) return {};
  Eigen::JacobiSVD<Matrix> cos_svd(a.transpose() * b);
  const auto& c = cos_svd.singularValues();  // descending cosines
  std::vector<double> out;
  for (Eigen::Index i = 0; i < c.size(); ++i) out.push_back(std::acos(std::clamp(c(i), 0.0, 1.0)));
  if (a.cols() == b.cols()) {
    // acos is ill-conditioned near 0; take small angles from the sines of
    // the component of a orthogonal to span(b).
    const Matrix resid = a - b * (b.transpose() * a);
    Eigen::JacobiSVD<Matrix> sin_svd(resid);
    const auto& s = sin_svd.singularValues();  // descending sines
    const auto k = static_cast<Eigen::Index>(out.size());
    for (Eigen::Index i = 0; i < k; ++i) {
      const double from_sine = std::asin(std::clamp(s(k - 1 - i), 0.0, 1.0));
      if (from_sine < std::numbers::pi / 4) out[static_cast<size_t>(i)] = from_sine;
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

double max_principal_angle(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) return std::numbers::pi / 2;
  if (a.cols() == 0) return 0.0;
  const auto angles = principal_angles(a, b);
  return angles.back();
}

ProjectionFamily::ProjectionFamily(int first, std::vector<Matrix> projections)
    : first_(first), projections_(std::move(projections)), stable_rank_(0) {
  if (projections_.empty()) throw std::invalid_argument("projection family is empty");
  const auto d = projections_.front().rows();
  stable_rank_ = projection_rank(projections_.front());
  for (size_t i = 0; i < projections_.size(); ++i) {
    const Matrix& p = projections_[i];
    if (p.rows() != d || p.cols() != d) throw std::invalid_argument("projections must all be d x d");
    if (!p.allFinite()) throw std::invalid_argument("projection has a non-finite entry");
    const double scale = std::max(1.0, spectral_norm(p));
    if (spectral_norm(p * p - p) > 1e-10 * scale * scale) {
      throw std::invalid_argument("P_" + std::to_string(first_ + static_cast<int>(i)) + " is not idempotent");
    }
    if (projection_rank(p) != stable_rank_) {
      throw std::invalid_argument("projection rank changes at n = " + std::to_string(first_ + static_cast<int>(i)));
    }
  }
}

const Matrix& ProjectionFamily::at(int n) const {
  if (!window().contains(n)) throw std::out_of_range("projection index outside window");
  return projections_[static_cast<size_t>(n - first_)];
}

Matrix ProjectionFamily::complement(int n) const { return Matrix::Identity(dim(), dim()) - at(n); }

Matrix ProjectionFamily::range_basis(int n) const { return orthonormal_span(at(n), stable_rank_); }

Matrix ProjectionFamily::kernel_basis(int n) const { return orthonormal_span(complement(n), unstable_rank()); }

ProjectionFamily ProjectionFamily::constant(Window window, const Matrix& p) {
  return ProjectionFamily(window.first, std::vector<Matrix>(static_cast<size_t>(window.size()), p));
}

}  // namespace dichlab
