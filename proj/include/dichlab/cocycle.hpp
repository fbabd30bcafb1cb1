#pragma once

#include "dichlab/family.hpp"
#include "dichlab/system.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace dichlab {

/// The cocycle of a system split along a projection family.
///
/// Stable and unstable parts are propagated in orthonormal coordinates on
/// Im P_n and Ker P_n separately:
///   A(m,n) P_n        = S_m [B^s_{m-1} ... B^s_n] S_n^T P_n,          m >= n
///   A(m,n) (Id - P_n) = K_m [B^u_m^{-1} ... B^u_{n-1}^{-1}] K_n^T (Id - P_n), m <= n
/// with B^s_k = S_{k+1}^T A_k S_k and B^u_k = K_{k+1}^T A_k K_k. Forward
/// products of the full matrices would amplify rounding along unstable
/// directions; the restricted products do not.
class SplitCocycle {
 public:
  SplitCocycle(const LinearSystem& sys, const ProjectionFamily& proj);

  [[nodiscard]] const LinearSystem& system() const { return sys_; }
  [[nodiscard]] const ProjectionFamily& projections() const { return proj_; }
  [[nodiscard]] Window window() const { return sys_.window(); }
  [[nodiscard]] int dim() const { return sys_.dim(); }
  [[nodiscard]] int stable_rank() const { return proj_.stable_rank(); }
  [[nodiscard]] int unstable_rank() const { return proj_.unstable_rank(); }

  [[nodiscard]] const Matrix& range_basis(int n) const { return at(range_, n); }
  [[nodiscard]] const Matrix& kernel_basis(int n) const { return at(kernel_, n); }
  /// S_n^T P_n (d_s x d) and K_n^T (Id - P_n) (d_u x d).
  [[nodiscard]] const Matrix& stable_coords(int n) const { return at(stable_coords_, n); }
  [[nodiscard]] const Matrix& unstable_coords(int n) const { return at(unstable_coords_, n); }

  [[nodiscard]] const ScaledMatrix& stable_step(int n) const { return at(stable_step_, n); }
  [[nodiscard]] const ScaledMatrix& unstable_step(int n) const { return at(unstable_step_, n); }
  /// (B^u_n)^{-1}; throws AnalysisError if the kernel restriction is singular.
  [[nodiscard]] const ScaledMatrix& unstable_step_inverse(int n) const;

  /// sigma_min / sigma_max of B^u_n relative to |A_n|; 1 when d_u = 0.
  [[nodiscard]] double kernel_restriction_condition(int n) const { return at(kernel_condition_, n); }
  [[nodiscard]] bool kernel_restrictions_invertible() const { return invertible_; }

  /// Restricted products in coordinates: d_s x d_s for m >= n and the
  /// d_u x d_u inverse map Ker P_n -> Ker P_m for m <= n.
  [[nodiscard]] ScaledMatrix stable_block(int m, int n) const;
  [[nodiscard]] ScaledMatrix unstable_block(int m, int n) const;

  /// A(m,n) P_n for m >= n and A(m,n)(Id - P_n) for m <= n, as d x d maps.
  [[nodiscard]] ScaledMatrix stable_evolution(int m, int n) const;
  [[nodiscard]] ScaledMatrix unstable_evolution(int m, int n) const;

  /// Green kernel: A(m,n) P_n for m >= n, -A(m,n)(Id - P_n) for m < n.
  [[nodiscard]] ScaledMatrix green(int m, int n) const;

 private:
  template <typename T>
  const T& at(const std::vector<T>& v, int n) const {
    if (n < window().first || n - window().first >= static_cast<int>(v.size())) {
      throw std::out_of_range("cocycle index outside window");
    }
    return v[static_cast<size_t>(n - window().first)];
  }

  LinearSystem sys_;
  ProjectionFamily proj_;
  std::vector<Matrix> range_, kernel_, stable_coords_, unstable_coords_;
  std::vector<ScaledMatrix> stable_step_, unstable_step_, unstable_inverse_;
  std::vector<double> kernel_condition_;
  bool invertible_ = true;
};

enum class Branch { stable, unstable };

/// |A(m,n) P_n| (stable, m >= n) or |A(m,n)(Id - P_n)| (unstable, m <= n)
/// as exp(log_scale) * exp(mantissa_log).
struct BlockNorm {
  int m = 0;
  int n = 0;
  Branch branch = Branch::stable;
  ExtLog log_scale;
  double mantissa_log = 0.0;

  [[nodiscard]] double log_norm() const { return log_scale.value() + mantissa_log; }
};

/// Visit every pair of the window once per branch, accumulating the
/// restricted products column by column (O(N^2) block multiplications).
/// The orthonormal factor S_m or K_m is dropped since it preserves norms.
/// Zero blocks are skipped. The unstable branch is skipped when a kernel
/// restriction is singular.
template <typename Fn>
void for_each_block_norm(const SplitCocycle& c, Fn&& fn) {
  const Window w = c.window();
  if (c.stable_rank() > 0) {
    for (int n = w.first; n <= w.last; ++n) {
      const Matrix& coords = c.stable_coords(n);
      ScaledMatrix block = ScaledMatrix::identity(c.stable_rank());
      for (int m = n; m <= w.last; ++m) {
        if (m > n) block = c.stable_step(m - 1) * block;
        if (block.is_zero()) break;
        const double mn = spectral_norm(block.mantissa * coords);
        if (mn == 0.0) continue;
        fn(BlockNorm{m, n, Branch::stable, block.log_scale, std::log(mn)});
      }
    }
  }
  if (c.unstable_rank() > 0 && c.kernel_restrictions_invertible()) {
    for (int n = w.first; n <= w.last; ++n) {
      const Matrix& coords = c.unstable_coords(n);
      ScaledMatrix block = ScaledMatrix::identity(c.unstable_rank());
      for (int m = n; m >= w.first; --m) {
        if (m < n) block = c.unstable_step_inverse(m) * block;
        if (block.is_zero()) break;
        const double mn = spectral_norm(block.mantissa * coords);
        if (mn == 0.0) continue;
        fn(BlockNorm{m, n, Branch::unstable, block.log_scale, std::log(mn)});
      }
    }
  }
}

/// Kernel-restriction tolerance relative to |A_n|.
inline constexpr double kKernelSingularTolerance = 1e-10;

/// Inverse of A(n,m) restricted to Ker P_m, for m <= n, expressed in the
/// orthonormal kernel bases (d_u x d_u).
ScaledMatrix evolution_on_unstable(const LinearSystem& sys, const ProjectionFamily& proj, int m, int n);

}  // namespace dichlab
