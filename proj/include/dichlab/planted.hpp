#pragma once

#include "dichlab/family.hpp"
#include "dichlab/system.hpp"

#include <cstdint>
#include <vector>

namespace dichlab {

/// A system built with a known dichotomy, used as ground truth.
struct PlantedModel {
  LinearSystem system;
  ProjectionFamily true_projections;
  DichotomyCertificate true_certificate;
  std::vector<Matrix> similarity;  // L_n for every window index
};

/// Per-direction rates: stable direction i contracts like
/// (mu_{n+1}/mu_n)^{-stable_rates[i]} (times the nu twist), unstable
/// direction j expands like (mu_{n+1}/mu_n)^{unstable_rates[j]}.
struct PlantedSpectrum {
  std::vector<double> stable_rates;
  std::vector<double> unstable_rates;
};

/// A_n = L_{n+1} diag(c_n) L_n^{-1} with seeded similarities L_n of
/// condition number `similarity_cond` (exactly the identity when it is 1).
PlantedModel make_planted_model(const GrowthRate& rate, const NuSequence& nu, const PlantedSpectrum& spectrum,
                                double similarity_cond, std::uint64_t seed);

/// Two-block convenience form with d_s copies of lambda_s and d_u of lambda_u.
PlantedModel make_planted_model(const GrowthRate& rate, const NuSequence& nu, double lambda_s, double lambda_u,
                                int d_s, int d_u, double similarity_cond, std::uint64_t seed);

/// Scalar system A_n = (mu_{n+1}/mu_n)^{-1/2} with mu_n = e^{e^n} on [0, n_max].
PlantedModel paper_example_model(int n_max);

/// Least-squares slope of log nu against log mu over the window, floored at 0.
double fit_nu_exponent(const GrowthRate& rate, const NuSequence& nu);

}  // namespace dichlab
