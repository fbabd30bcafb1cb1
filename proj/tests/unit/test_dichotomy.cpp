#include "dichlab/dichotomy.hpp"
#include "dichlab/errors.hpp"
#include "dichlab/planted.hpp"

#include <doctest.h>

#include <cmath>

using namespace dichlab;

TEST_CASE("paper scalar example verifies with D = 1, lambda = 1/2") {
  const PlantedModel ex = paper_example_model(20);
  const GrowthRate r = make_rate(RateKind::doubly_exponential, Domain::one_sided, {0, 20});
  const ProjectionFamily id = ProjectionFamily::constant({0, 20}, Matrix::Identity(1, 1));
  const DichotomyLedger l = verify_dichotomy(ex.system, id, r, make_uniform_nu(r), 1.0, 0.5);
  CHECK(l.pass);
  CHECK(l.max_slack <= 1e-12);
  CHECK(l.max_slack >= -1e-12);  // attained with equality

  const DichotomyCertificate c = fit_certificate(ex.system, id, r, make_uniform_nu(r));
  CHECK(c.lambda == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(c.D == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("identity system is not dichotomic") {
  const GrowthRate r = make_rate(RateKind::exponential, Domain::one_sided, {0, 10});
  const LinearSystem sys = constant_system(Domain::one_sided, {0, 10}, Matrix::Identity(2, 2));
  const ProjectionFamily id = ProjectionFamily::constant({0, 10}, Matrix::Identity(2, 2));
  const DichotomyLedger l = verify_dichotomy(sys, id, r, make_uniform_nu(r), 1.0, 0.3, {1e-8, 1e-10, true});
  CHECK_FALSE(l.pass);
  CHECK(l.structural_ok);
  // slack of the pair (m, 0) is lambda * log mu_m
  CHECK(l.max_slack == doctest::Approx(0.3 * 10.0));
  CHECK(l.grid.size() == 66);
  CHECK_THROWS_AS(fit_certificate(sys, id, r, make_uniform_nu(r)), AnalysisError);
}

TEST_CASE("fit on planted models") {
  const GrowthRate r = make_rate(RateKind::exponential, Domain::one_sided, {0, 30});
  const PlantedModel pm = make_planted_model(r, make_uniform_nu(r), 1.0, 1.0, 1, 1, 1.0, 1);
  const DichotomyCertificate c = fit_certificate(pm.system, pm.true_projections, r, make_uniform_nu(r));
  CHECK(c.lambda == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(c.D <= 1.0 + 1e-8);
  CHECK(c.D >= 1.0 - 1e-8);

  const NuSequence nu = make_power_nu(r, 0.1);
  const PlantedModel tw = make_planted_model(r, nu, 1.0, 1.5, 2, 1, 10.0, 4);
  const DichotomyCertificate ct = fit_certificate(tw.system, tw.true_projections, r, nu);
  CHECK(ct.epsilon == doctest::Approx(0.1).epsilon(1e-3));
  const DichotomyLedger l = verify_dichotomy(tw.system, tw.true_projections, r, nu, ct.D, ct.lambda);
  CHECK(l.pass);
  CHECK(l.max_slack <= 1e-12);
  CHECK(l.max_commuting_residual <= 1e-10);
  CHECK(l.max_idempotence_residual <= 1e-10);

  // nu -> c nu keeps lambda and D * nu
  const DichotomyCertificate cs = fit_certificate(tw.system, tw.true_projections, r, nu.scaled(3.0));
  CHECK(cs.lambda == doctest::Approx(ct.lambda).epsilon(1e-8));
  CHECK(cs.D * 3.0 == doctest::Approx(ct.D).epsilon(1e-8));
}

TEST_CASE("polynomial planted model with power nu passes") {
  const GrowthRate r = make_rate(RateKind::polynomial, Domain::one_sided, {0, 60});
  const NuSequence nu = make_power_nu(r, 0.1);
  const PlantedModel pm = make_planted_model(r, nu, 1.0, 1.0, 1, 1, 10.0, 7);
  const DichotomyCertificate c = fit_certificate(pm.system, pm.true_projections, r, nu);
  CHECK(std::isfinite(c.D));
  CHECK(verify_dichotomy(pm.system, pm.true_projections, r, nu, c.D, c.lambda).pass);
}

TEST_CASE("munu and beta ranges") {
  const GrowthRate r = make_rate(RateKind::exponential, Domain::one_sided, {0, 100});
  CHECK(check_munu(r, make_uniform_nu(r), 0.3).sup_value == 1.0);
  CHECK(check_munu(r, make_power_nu(r, 0.1), 0.1).sup_value == doctest::Approx(1.0));
  CHECK(check_munu(r, make_power_nu(r, 0.2), 0.1).sup_value == doctest::Approx(std::exp(10.0)).epsilon(1e-12));

  const GrowthRate two = make_rate(RateKind::exponential, Domain::two_sided, {-5, 5});
  const MunuCheck m2 = check_munu(two, make_uniform_nu(two), 0.5);
  CHECK(m2.left_sup == doctest::Approx(1.0));

  DichotomyCertificate c;
  c.lambda = 0.5;
  OpenInterval i = beta_range(c, Domain::one_sided);
  CHECK(i.lo == -0.5);
  CHECK(i.hi == 0.5);
  c.lambda = 1.0;
  c.epsilon = 0.2;
  i = beta_range(c, Domain::two_sided);
  CHECK(i.lo == doctest::Approx(-0.8));
  CHECK(i.hi == doctest::Approx(0.8));
  i = beta_range(c, Domain::one_sided);
  CHECK(i.hi == 1.0);
  c.epsilon = 1.0;
  CHECK_THROWS(beta_range(c, Domain::one_sided));
}
