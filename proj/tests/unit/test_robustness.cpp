#include "dichlab/errors.hpp"
#include "dichlab/planted.hpp"
#include "dichlab/random.hpp"
#include "dichlab/robustness.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <tuple>

using namespace dichlab;

namespace {

struct Setup {
  GrowthRate rate;
  NuSequence nu;
  PlantedModel pm;
};

Setup planted(Domain domain, Window w, int ds, int du, double cond, std::uint64_t seed) {
  const GrowthRate r = make_rate(RateKind::exponential, domain, w);
  const NuSequence nu = make_uniform_nu(r);
  return {r, nu, make_planted_model(r, nu, 1.0, 1.0, ds, du, cond, seed)};
}

}  // namespace

TEST_CASE("zero perturbation") {
  const Setup s = planted(Domain::one_sided, {0, 20}, 1, 1, 2.0, 1);
  const Perturbation b = make_perturbation(s.pm.system, s.rate, s.nu, make_perturbation_spec({0, 20}, 0.0, 7, 0.3));
  REQUIRE(b.steps.size() == 20);
  for (const auto& m : b.steps) CHECK(m.norm() == 0.0);
}

TEST_CASE("scalar perturbation norms") {
  const GrowthRate e = make_rate(RateKind::exponential, Domain::one_sided, {0, 12});
  const LinearSystem sys = constant_system(Domain::one_sided, {0, 12}, Matrix::Constant(1, 1, std::exp(-1.0)));
  const Perturbation b = make_perturbation(sys, e, make_uniform_nu(e), make_perturbation_spec({0, 12}, 0.1, 3, 0.3));
  for (int n = 0; n < 12; ++n) {
    const double expected = 0.1 * std::pow(2.0, -n) * std::exp(-0.3);
    CHECK(std::abs(b.at(n)(0, 0)) == doctest::Approx(expected).epsilon(1e-13));
  }
}

TEST_CASE("perturbations saturate the bound") {
  const GrowthRate p = make_rate(RateKind::polynomial, Domain::one_sided, {0, 40});
  const NuSequence nu = make_power_nu(p, 0.2);
  const PlantedModel pm = make_planted_model(p, nu, 1.0, 1.0, 2, 2, 5.0, 4);
  const PerturbationSpec spec = make_perturbation_spec({0, 40}, 0.05, 11, 0.4);
  const Perturbation b = make_perturbation(pm.system, p, nu, spec);
  for (int n = 0; n < 40; ++n) {
    const double rho = 0.05 * spec.gamma_at(n) * std::exp(0.4 * p.log_mu(n) - nu.log_nu(n + 1) - 0.4 * p.log_mu(n + 1));
    CHECK(std::abs(spectral_norm(b.at(n)) / rho - 1.0) <= 1e-12);
  }
  // Same seed, same directions.
  const Perturbation again = make_perturbation(pm.system, p, nu, spec);
  for (int n = 0; n < 40; ++n) CHECK((b.at(n) - again.at(n)).norm() == 0.0);
}

TEST_CASE("bounded ratio lower bound") {
  const GrowthRate e = make_rate(RateKind::exponential, Domain::one_sided, {0, 30});
  const NuSequence nu = make_power_nu(e, 0.1);
  const PlantedModel pm = make_planted_model(e, nu, 1.0, 1.0, 1, 1, 3.0, 2);
  const Perturbation b = make_perturbation(pm.system, e, nu, make_perturbation_spec({0, 30}, 0.2, 5, 0.5));
  CHECK(bounded_ratio_lower_bound_holds(b, e, nu, std::exp(1.0)));
  // With K below the actual ratio no index qualifies, so the check is vacuous.
  CHECK(bounded_ratio_lower_bound_holds(b, e, nu, 1.5));
  CHECK_THROWS_AS(bounded_ratio_lower_bound_holds(b, e, nu, 0.5), std::invalid_argument);
}

TEST_CASE("graph operator") {
  const Setup s = planted(Domain::one_sided, {0, 15}, 1, 1, 3.0, 9);
  const LinearSystem& sys = s.pm.system;
  const GraphNormOperator op{&sys, nullptr, GraphMode::A_beta};

  SUBCASE("homogeneous solutions") {
    VectorSequence x(sys.window(), 2);
    x.at(0) = Vector::Ones(2);
    for (int n = 0; n < 15; ++n) x.at(n + 1) = sys.dense_step(n) * x.at(n);
    const VectorSequence ax = apply_graph_operator(op, x);
    for (int n = 0; n <= 15; ++n) CHECK(ax.at(n).norm() <= 1e-12 * (1.0 + x.at(n).norm()));
  }
  SUBCASE("impulse") {
    VectorSequence x(sys.window(), 2);
    x.at(0) = Vector::Ones(2);
    const VectorSequence ax = apply_graph_operator(op, x);
    CHECK(ax.at(0).norm() == 0.0);
    CHECK((ax.at(1) + sys.dense_step(0) * x.at(0)).norm() <= 1e-15);
    for (int n = 2; n <= 15; ++n) CHECK(ax.at(n).norm() == 0.0);
  }
  SUBCASE("inverse of the solver") {
    Rng rng(3);
    VectorSequence y(sys.window(), 2);
    for (int n = 1; n <= 15; ++n) y.at(n) = gaussian_vector(rng, 2);
    const SolveReport rep = solve_admissibility(sys, s.pm.true_projections, y, 0.3, s.rate, s.nu,
                                                BoundaryCondition::from_projections(s.pm.true_projections,
                                                                                    Domain::one_sided));
    const VectorSequence ax = apply_graph_operator(op, rep.solution);
    for (int n = 1; n <= 15; ++n) CHECK((ax.at(n) - y.at(n)).norm() <= 1e-8 * (1.0 + y.at(n).norm()));
  }
  SUBCASE("B mode") {
    const Perturbation b = make_perturbation(sys, s.rate, s.nu, make_perturbation_spec({0, 15}, 0.1, 1, 0.2));
    VectorSequence x(sys.window(), 2);
    for (int n = 0; n <= 15; ++n) x.at(n) = Vector::Constant(2, n);
    const VectorSequence bx = apply_graph_operator({&sys, &b, GraphMode::B_beta}, x);
    CHECK(bx.at(0).norm() == 0.0);
    for (int n = 1; n <= 15; ++n) CHECK((bx.at(n) - b.at(n - 1) * x.at(n - 1)).norm() == 0.0);
  }
}

TEST_CASE("graph norm") {
  const GrowthRate e = make_rate(RateKind::exponential, Domain::one_sided, {0, 6});
  const NuSequence nu = make_uniform_nu(e);
  const double a = -0.7;
  const LinearSystem sys = constant_system(Domain::one_sided, {0, 6}, Matrix::Constant(1, 1, a));
  VectorSequence x(sys.window(), 1);
  CHECK(graph_norm(x, sys, e, nu, 0.0) == 0.0);
  x.at(0)(0) = 2.5;
  CHECK(graph_norm(x, sys, e, nu, 0.0) == doctest::Approx(2.5 + std::abs(a) * 2.5).epsilon(1e-15));
  // Homogeneous: only the sup term survives.
  for (int n = 0; n < 6; ++n) x.at(n + 1) = a * x.at(n);
  const WeightedNormSpec inf = WeightedNormSpec::plain(0.4, NormKind::infinity);
  CHECK(graph_norm(x, sys, e, nu, 0.4) == doctest::Approx(norm(x, inf, e)).epsilon(1e-14));
}

TEST_CASE("smallness margin") {
  const Setup s = planted(Domain::one_sided, {0, 30}, 1, 0, 1.0, 0);
  PerturbationSpec spec;
  spec.gamma_first = 0;
  spec.gamma.assign(30, 1.0 / 30.0);
  spec.beta = 0.5;
  const ProjectionFamily& proj = s.pm.true_projections;
  const double t = operator_norm_T(s.pm.system, proj, s.rate, s.nu, 0.5).exact_sup;

  spec.c = 0.0;
  CHECK(smallness_margin(s.pm.system, proj, s.rate, s.nu, spec).margin == 0.0);
  spec.c = 0.1;
  const MarginReport m = smallness_margin(s.pm.system, proj, s.rate, s.nu, spec);
  CHECK(m.gamma_sum == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(m.operator_norm == t);
  CHECK(m.margin == doctest::Approx(0.1 * t * 1.1).epsilon(1e-14));
  CHECK(margin_value(m.critical_c, 1.0, t) == doctest::Approx(1.0).epsilon(1e-14));

  // Increasing, and linear to leading order.
  double prev = 0.0;
  for (double c : {1e-6, 1e-4, 1e-2, 1e-1, 1.0}) {
    const double v = margin_value(c, 1.0, t);
    CHECK(v > prev);
    prev = v;
  }
  const double h = 1e-7;
  CHECK((margin_value(h, 1.0, t) / h) == doctest::Approx(t).epsilon(1e-6));
}

TEST_CASE("Neumann cross-check on the window operator") {
  for (auto [ds, du, cond] : {std::tuple{1, 0, 1.0}, {1, 1, 4.0}, {2, 1, 8.0}}) {
    CAPTURE(ds);
    CAPTURE(du);
    const Setup s = planted(Domain::one_sided, {0, 30}, ds, du, cond, 17);
    const LinearSystem& sys = s.pm.system;
    const int d = ds + du;
    const Perturbation b = make_perturbation(sys, s.rate, s.nu, make_perturbation_spec({0, 30}, 0.05, 2, 0.5));
    Rng rng(5);
    VectorSequence y(sys.window(), d);
    for (int n = 1; n <= 30; ++n) y.at(n) = gaussian_vector(rng, d);
    const NeumannCheck nc = neumann_cross_check(sys, s.pm.true_projections, b, s.rate, s.nu, y);
    CHECK(nc.unknowns == 31 * d);
    CHECK(nc.block_norm <= nc.envelope * (1.0 + 1e-12));
    CHECK(nc.block_norm < 1.0);
    CHECK(nc.converged);
    CHECK(nc.difference <= 1e-12);
    CHECK(nc.residual <= 1e-12);
  }
  const Setup big = planted(Domain::one_sided, {0, 60}, 1, 1, 1.0, 0);
  const Perturbation b = make_perturbation(big.pm.system, big.rate, big.nu, make_perturbation_spec({0, 60}, 0.1, 0, 0.5));
  CHECK_THROWS_AS(neumann_cross_check(big.pm.system, big.pm.true_projections, b, big.rate, big.nu,
                                      VectorSequence({0, 60}, 2)),
                  std::invalid_argument);
}

TEST_CASE("zero perturbation persists unchanged") {
  const Setup s = planted(Domain::one_sided, {0, 40}, 1, 1, 3.0, 21);
  const Perturbation b = make_perturbation(s.pm.system, s.rate, s.nu, make_perturbation_spec({0, 40}, 0.0, 1, 0.5));
  const PersistenceReport rep = verify_persistence(s.pm.system, b, s.rate, s.nu);
  REQUIRE(rep.perturbed);
  CHECK(rep.persisted);
  CHECK(rep.verdict() == "persisted");
  CHECK(rep.margin.margin == 0.0);
  CHECK(rep.max_drift <= 1e-14);
  CHECK(rep.perturbed->certificate.lambda == rep.reference.certificate.lambda);
  CHECK(rep.perturbed->certificate.D == rep.reference.certificate.D);
}

TEST_CASE("small perturbations persist") {
  for (Domain dom : {Domain::one_sided, Domain::two_sided}) {
    const Window w = dom == Domain::one_sided ? Window{0, 40} : Window{-30, 30};
    const Setup s = planted(dom, w, 1, 1, 3.0, 8);
    const CharacterizeResult ref = characterize(s.pm.system, s.rate, s.nu);
    const LinearSystem core = s.pm.system.restricted(ref.core);
    PerturbationSpec spec = make_perturbation_spec(w, 1.0, 3, 0.5);
    const double t = smallness_margin(core, ref.projections, s.rate, s.nu, spec).operator_norm;
    spec.c = critical_c(spec.gamma_sum(), 2.0 * t);  // margin 1/2
    const Perturbation b = make_perturbation(s.pm.system, s.rate, s.nu, spec);
    const PersistenceReport rep = verify_persistence(s.pm.system, b, s.rate, s.nu);
    CHECK(rep.margin.margin == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rep.beta_in_range);
    CHECK(rep.persisted);
    CHECK(rep.max_drift < 0.5);
    CHECK(rep.max_drift > 0.0);
  }
}

TEST_CASE("large perturbations are reported, not thrown") {
  // Weak gap: exponents +-0.15 with a threshold that needs 0.2.
  const GrowthRate e = make_rate(RateKind::exponential, Domain::one_sided, {0, 40});
  const NuSequence nu = make_uniform_nu(e);
  const PlantedModel pm = make_planted_model(e, nu, 0.15, 0.15, 1, 1, 1.0, 0);
  const Perturbation b = make_perturbation(pm.system, e, nu, make_perturbation_spec({0, 40}, 40.0, 2, 0.05));
  const PersistenceReport rep = verify_persistence(pm.system, b, e, nu);
  CHECK(rep.margin.margin >= 10.0);
  CHECK_FALSE(rep.persisted);
  CHECK_FALSE(rep.failure_stage.empty());
}

TEST_CASE("persistence sweep is independent of scheduling") {
  const Setup s = planted(Domain::one_sided, {0, 30}, 1, 1, 2.0, 4);
  std::vector<SweepPoint> pts;
  for (double c : {0.0, 0.01, 0.1}) {
    for (std::uint64_t seed : {1u, 2u}) pts.push_back({c, seed});
  }
  const auto one = persistence_sweep(s.pm.system, s.rate, s.nu, pts, 0.5, 99, 1);
  const auto many = persistence_sweep(s.pm.system, s.rate, s.nu, pts, 0.5, 99, 4);
  REQUIRE(one.size() == pts.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    CHECK(one[i].verdict == many[i].verdict);
    CHECK(std::memcmp(&one[i].margin, &many[i].margin, sizeof(double)) == 0);
    CHECK(std::memcmp(&one[i].max_drift, &many[i].max_drift, sizeof(double)) == 0);
  }
  CHECK(one[0].margin == 0.0);
  // Margin does not depend on the seed; drift does.
  CHECK(one[2].margin == one[3].margin);
  CHECK(one[4].margin == doctest::Approx(10.0 * one[2].margin).epsilon(0.2));
  CHECK(one[4].max_drift != one[5].max_drift);
}
