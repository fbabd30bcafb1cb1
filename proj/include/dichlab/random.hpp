#pragma once

#include "dichlab/rates.hpp"

#include <cstdint>
#include <random>

namespace dichlab {

using Rng = std::mt19937_64;

/// Independent stream seed for task `index` under `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

Matrix gaussian_matrix(Rng& rng, int rows, int cols);
Vector gaussian_vector(Rng& rng, int dim);

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// sign of diag(R) folded into Q).
Matrix random_orthogonal(Rng& rng, int dim);

/// Q1 diag(s) Q2^T with s_1 = 1 and the other singular values uniform in
/// (0, 1]; spectral norm exactly one up to rounding.
Matrix random_unit_spectral(Rng& rng, int dim);

}  // namespace dichlab
