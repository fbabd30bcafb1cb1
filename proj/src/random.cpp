#include "dichlab/random.hpp"

namespace dichlab {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 finaliser over the combined words.
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Matrix gaussian_matrix(Rng& rng, int rows, int cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  // Fill in row-major order so the stream layout does not depend on storage.
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

Vector gaussian_vector(Rng& rng, int dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = normal(rng);
  return v;
}

Matrix random_orthogonal(Rng& rng, int dim) {
  const Matrix g = gaussian_matrix(rng, dim, dim);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(dim, dim);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < dim; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

Matrix random_unit_spectral(Rng& rng, int dim) {
  const Matrix q1 = random_orthogonal(rng, dim);
  const Matrix q2 = random_orthogonal(rng, dim);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector s(dim);
  s(0) = 1.0;
  for (int i = 1; i < dim; ++i) s(i) = 1.0 - unit(rng);  // (0, 1]
  return q1 * s.asDiagonal() * q2.transpose();
}

}  // namespace dichlab
