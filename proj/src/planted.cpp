#include "dichlab/planted.hpp"

#include "dichlab/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dichlab {

namespace {

struct Similarity {
  Matrix l;
  Matrix l_inv;
};

Similarity make_similarity(Rng& rng, int d, double cond) {
  if (cond == 1.0 || d == 1) return {Matrix::Identity(d, d), Matrix::Identity(d, d)};
  const Matrix q1 = random_orthogonal(rng, d);
  const Matrix q2 = random_orthogonal(rng, d);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double half = 0.5 * std::log(cond);
  Vector log_s(d);
  log_s(0) = half;
  log_s(d - 1) = -half;
  for (int i = 1; i < d - 1; ++i) log_s(i) = -half + 2.0 * half * unit(rng);
  const Vector s = log_s.array().exp();
  return {q1 * s.asDiagonal() * q2.transpose(), q2 * s.cwiseInverse().asDiagonal() * q1.transpose()};
}

}  // namespace

double fit_nu_exponent(const GrowthRate& rate, const NuSequence& nu) {
  const Window w = rate.window();
  double sx = 0.0, sy = 0.0;
  int count = 0;
  for (int n = w.first; n <= w.last; ++n) {
    if (!nu.window().contains(n)) continue;
    sx += rate.log_mu(n);
    sy += nu.log_nu(n);
    ++count;
  }
  if (count < 2) return 0.0;
  const double mx = sx / count, my = sy / count;
  double sxx = 0.0, sxy = 0.0;
  for (int n = w.first; n <= w.last; ++n) {
    if (!nu.window().contains(n)) continue;
    const double dx = rate.log_mu(n) - mx;
    sxx += dx * dx;
    sxy += dx * (nu.log_nu(n) - my);
  }
  if (sxx == 0.0) return 0.0;
  return std::max(0.0, sxy / sxx);
}

PlantedModel make_planted_model(const GrowthRate& rate, const NuSequence& nu, const PlantedSpectrum& spectrum,
                                double similarity_cond, std::uint64_t seed) {
  const int d_s = static_cast<int>(spectrum.stable_rates.size());
  const int d_u = static_cast<int>(spectrum.unstable_rates.size());
  const int d = d_s + d_u;
  if (d < 1) throw std::invalid_argument("planted model needs at least one direction");
  for (double r : spectrum.stable_rates) {
    if (!(r > 0.0)) throw std::invalid_argument("planted stable rates must be positive");
  }
  for (double r : spectrum.unstable_rates) {
    if (!(r > 0.0)) throw std::invalid_argument("planted unstable rates must be positive");
  }
  if (!(similarity_cond >= 1.0)) throw std::invalid_argument("similarity condition bound must be >= 1");
  const Window w = rate.window();
  if (w.size() < 2) throw std::invalid_argument("planted model needs a window of at least two indices");
  if (!nu.window().contains(w)) throw std::invalid_argument("nu does not cover the rate window");

  Rng rng(seed);
  std::vector<Similarity> sim;
  sim.reserve(static_cast<size_t>(w.size()));
  for (int n = w.first; n <= w.last; ++n) sim.push_back(make_similarity(rng, d, similarity_cond));

  std::vector<ScaledMatrix> steps;
  steps.reserve(static_cast<size_t>(w.size() - 1));
  for (int n = w.first; n < w.last; ++n) {
    const ExtLog step = ExtLog::exact_diff(rate.log_mu(n + 1), rate.log_mu(n));
    const ExtLog twist = ExtLog::exact_diff(nu.log_nu(n), nu.log_nu(n + 1));
    std::vector<ExtLog> coeff;
    coeff.reserve(static_cast<size_t>(d));
    for (double r : spectrum.stable_rates) coeff.push_back(step * (-r) + twist);
    for (double r : spectrum.unstable_rates) coeff.push_back(step * r);
    ExtLog top = coeff.front();
    for (const auto& c : coeff) {
      if (c.value() > top.value()) top = c;
    }
    Vector diag(d);
    for (int i = 0; i < d; ++i) diag(i) = std::exp((coeff[static_cast<size_t>(i)] - top).value());
    const auto i = static_cast<size_t>(n - w.first);
    steps.emplace_back(sim[i + 1].l * diag.asDiagonal() * sim[i].l_inv, top);
  }

  Matrix block = Matrix::Zero(d, d);
  block.topLeftCorner(d_s, d_s).setIdentity();
  std::vector<Matrix> projections;
  std::vector<Matrix> similarity;
  for (const auto& s : sim) {
    projections.push_back(s.l * block * s.l_inv);
    similarity.push_back(s.l);
  }

  DichotomyCertificate cert;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  cert.stable_exponent =
      d_s > 0 ? *std::min_element(spectrum.stable_rates.begin(), spectrum.stable_rates.end()) : nan;
  cert.unstable_exponent =
      d_u > 0 ? *std::min_element(spectrum.unstable_rates.begin(), spectrum.unstable_rates.end()) : nan;
  cert.lambda = d_s == 0 ? cert.unstable_exponent
                         : (d_u == 0 ? cert.stable_exponent : std::min(cert.stable_exponent, cert.unstable_exponent));
  cert.D = (d == 1 || similarity_cond == 1.0) ? 1.0 : similarity_cond;
  cert.epsilon = fit_nu_exponent(rate, nu);

  return PlantedModel{LinearSystem(rate.domain(), w, std::move(steps)), ProjectionFamily(w.first, std::move(projections)),
                      cert, std::move(similarity)};
}

PlantedModel make_planted_model(const GrowthRate& rate, const NuSequence& nu, double lambda_s, double lambda_u,
                                int d_s, int d_u, double similarity_cond, std::uint64_t seed) {
  if (d_s < 0 || d_u < 0) throw std::invalid_argument("block dimensions must be non-negative");
  PlantedSpectrum spectrum{std::vector<double>(static_cast<size_t>(d_s), lambda_s),
                           std::vector<double>(static_cast<size_t>(d_u), lambda_u)};
  return make_planted_model(rate, nu, spectrum, similarity_cond, seed);
}

PlantedModel paper_example_model(int n_max) {
  const GrowthRate rate = make_rate(RateKind::doubly_exponential, Domain::one_sided, {0, n_max});
  return make_planted_model(rate, make_uniform_nu(rate), PlantedSpectrum{{0.5}, {}}, 1.0, 0);
}

}  // namespace dichlab
