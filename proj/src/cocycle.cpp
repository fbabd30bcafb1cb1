#include "dichlab/cocycle.hpp"

#include "dichlab/errors.hpp"

#include <stdexcept>

namespace dichlab {

SplitCocycle::SplitCocycle(const LinearSystem& sys, const ProjectionFamily& proj) : sys_(sys), proj_(proj) {
  const Window w = sys.window();
  if (!proj.window().contains(w)) throw std::invalid_argument("projection family does not cover the system window");
  if (proj.dim() != sys.dim()) throw std::invalid_argument("projection dimension differs from system dimension");

  const auto count = static_cast<size_t>(w.size());
  range_.reserve(count);
  kernel_.reserve(count);
  for (int n = w.first; n <= w.last; ++n) {
    range_.push_back(proj.range_basis(n));
    kernel_.push_back(proj.kernel_basis(n));
    stable_coords_.push_back(range_.back().transpose() * proj.at(n));
    unstable_coords_.push_back(kernel_.back().transpose() * proj.complement(n));
  }

  for (int n = w.first; n < w.last; ++n) {
    const auto i = static_cast<size_t>(n - w.first);
    const ScaledMatrix& a = sys.step(n);
    stable_step_.emplace_back(range_[i + 1].transpose() * a.mantissa * range_[i], a.log_scale);
    const Matrix ku = kernel_[i + 1].transpose() * a.mantissa * kernel_[i];
    unstable_step_.emplace_back(ku, a.log_scale);
    double cond = 1.0;
    if (ku.size() > 0) {
      Eigen::JacobiSVD<Matrix> svd(ku);
      const double top = spectral_norm(a.mantissa);
      cond = top > 0.0 ? svd.singularValues()(ku.rows() - 1) / top : 0.0;
    }
    kernel_condition_.push_back(cond);
    if (cond < kKernelSingularTolerance) {
      invertible_ = false;
      unstable_inverse_.emplace_back();
    } else {
      unstable_inverse_.push_back(unstable_step_.back().inverse("kernel restriction"));
    }
  }
}

const ScaledMatrix& SplitCocycle::unstable_step_inverse(int n) const {
  const ScaledMatrix& inv = at(unstable_inverse_, n);
  if (unstable_rank() > 0 && inv.rows() == 0) {
    throw AnalysisError("kernel restriction",
                        "A_n restricted to Ker P_n is not invertible at n = " + std::to_string(n));
  }
  return inv;
}

ScaledMatrix SplitCocycle::stable_block(int m, int n) const {
  if (m < n) throw std::invalid_argument("stable_block needs m >= n");
  ScaledMatrix acc = ScaledMatrix::identity(stable_rank());
  for (int k = n; k < m; ++k) acc = stable_step(k) * acc;
  return acc;
}

ScaledMatrix SplitCocycle::unstable_block(int m, int n) const {
  if (m > n) throw std::invalid_argument("unstable_block needs m <= n");
  ScaledMatrix acc = ScaledMatrix::identity(unstable_rank());
  for (int k = n - 1; k >= m; --k) acc = unstable_step_inverse(k) * acc;
  return acc;
}

ScaledMatrix SplitCocycle::stable_evolution(int m, int n) const {
  const ScaledMatrix block = stable_block(m, n);
  return ScaledMatrix(range_basis(m) * block.mantissa * stable_coords(n), block.log_scale);
}

ScaledMatrix SplitCocycle::unstable_evolution(int m, int n) const {
  const ScaledMatrix block = unstable_block(m, n);
  return ScaledMatrix(kernel_basis(m) * block.mantissa * unstable_coords(n), block.log_scale);
}

ScaledMatrix SplitCocycle::green(int m, int n) const {
  if (m >= n) return stable_evolution(m, n);
  ScaledMatrix g = unstable_evolution(m, n);
  g.mantissa = -g.mantissa;
  return g;
}

ScaledMatrix evolution_on_unstable(const LinearSystem& sys, const ProjectionFamily& proj, int m, int n) {
  if (m > n) throw std::invalid_argument("evolution_on_unstable needs m <= n");
  const SplitCocycle cocycle(sys, proj);
  return cocycle.unstable_block(m, n);
}

}  // namespace dichlab
