#include "dichlab/io.hpp"
#include "dichlab/planted.hpp"
#include "dichlab/scenario.hpp"

#include <doctest.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

using namespace dichlab;

namespace {

Json planted_config(const char* scenario) {
  return Json{{"scenario", scenario},
              {"seed", 5},
              {"rate", {{"kind", "exponential"}, {"domain", "one_sided"}, {"window", {0, 50}}}},
              {"system", {{"source", "planted"}, {"d_s", 1}, {"d_u", 1}, {"cond", 3}}}};
}

bool mentions(const std::vector<std::string>& errs, const std::string& needle) {
  for (const auto& e : errs) {
    if (e.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("numbers round-trip") {
  for (double v : {0.0, -0.0, 1.0 / 3.0, 6.02214076e23, 5e-324, std::nextafter(1.0, 2.0)}) {
    const std::string t = format_number(v);
    double back = 1.0;
    std::from_chars(t.data(), t.data() + t.size(), back);
    CHECK(back == v);
    const Json j = Json::parse(Json{{"x", num(v)}}.dump());
    CHECK(to_double(j["x"], "x") == v);
  }
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(num(inf) == "inf");
  CHECK(num(-inf) == "-inf");
  CHECK(num(std::nan("")) == "nan");
  CHECK(to_double(Json("inf"), "x") == inf);
  CHECK(std::isnan(to_double(Json("nan"), "x")));
  CHECK_THROWS_AS(to_double(Json("many"), "x"), ConfigError);
  CHECK(format_number(-inf) == "-inf");
}

TEST_CASE("systems and projections round-trip") {
  const GrowthRate r = make_rate(RateKind::doubly_exponential, Domain::one_sided, {0, 12});
  const PlantedModel ex = paper_example_model(12);
  const LinearSystem back = system_from_json(Json::parse(system_to_json(ex.system).dump()));
  CHECK(back.window() == ex.system.window());
  for (int n = 0; n < 12; ++n) {
    CHECK(back.step(n).mantissa == ex.system.step(n).mantissa);
    CHECK(back.step(n).log_scale.value() == ex.system.step(n).log_scale.value());
  }
  const GrowthRate e = make_rate(RateKind::exponential, Domain::two_sided, {-10, 10});
  const PlantedModel pm = make_planted_model(e, make_uniform_nu(e), 1.0, 1.0, 2, 1, 5.0, 3);
  const Json pj = planted_to_json(pm);
  const ProjectionFamily p = projections_from_json(Json::parse(pj["projections"].dump()));
  for (int n = -10; n <= 10; ++n) CHECK(p.at(n) == pm.true_projections.at(n));
  const GrowthRate rb = rate_from_json(rate_to_json(r));
  for (int n = 0; n <= 12; ++n) CHECK(rb.log_mu(n) == r.log_mu(n));
}

TEST_CASE("malformed inputs name the offending field") {
  Json s{{"domain", "one_sided"}, {"dim", 1}, {"window", {0, 2}},
         {"matrices", {{{"n", 0}, {"rows", {{0.5}}}}, {{"n", 1}, {"rows", {{0.5, 1.0}}}}}}};
  try {
    (void)system_from_json(s);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.path() == "system.matrices[1].rows");
  }
  CHECK_THROWS_AS(rate_from_json(Json{{"kind", "cubic"}, {"domain", "one_sided"}, {"window", {0, 3}}}), ConfigError);
}

TEST_CASE("schema validation") {
  CHECK(validate(planted_config("characterize"), config_schema()).empty());
  Json bad = planted_config("characterize");
  bad["rate"]["window"] = {0};
  bad["seed"] = -1;
  bad["colour"] = "blue";
  bad["system"]["cond"] = 0.5;
  const auto errs = validate(bad, config_schema());
  CHECK(mentions(errs, "$.rate.window: too few items"));
  CHECK(mentions(errs, "$.seed: below minimum"));
  CHECK(mentions(errs, "$.colour: unknown field"));
  CHECK(mentions(errs, "$.system.cond: below minimum"));
  CHECK(mentions(validate(Json{{"scenario", "dance"}}, config_schema()), "$.scenario"));
  CHECK(mentions(validate(Json::object(), config_schema()), "missing required field 'scenario'"));
}

TEST_CASE("atomic writes leave no temporary files") {
  const auto dir = std::filesystem::temp_directory_path() / "dichlab_io_test";
  std::filesystem::remove_all(dir);
  atomic_write((dir / "a" / "t.txt").string(), "first");
  atomic_write((dir / "a" / "t.txt").string(), "second");
  std::ifstream in(dir / "a" / "t.txt");
  std::string s;
  std::getline(in, s);
  CHECK(s == "second");
  int count = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "a")) {
    (void)e;
    ++count;
  }
  CHECK(count == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("counterexample scenario") {
  const RunOutput out = run_scenario(Json{{"scenario", "counterexample"}, {"counterexample", {{"n_max", 10}}}});
  CHECK(out.exit_code == 0);
  REQUIRE(out.tables.size() == 1);
  const CsvTable& t = out.tables[0].second;
  CHECK(t.header == std::vector<std::string>{"n", "log_x", "log_bound"});
  REQUIRE(t.rows.size() == 10);
  for (size_t i = 1; i < t.rows.size(); ++i) CHECK(std::stod(t.rows[i][1]) > std::stod(t.rows[i - 1][1]));
  CHECK(validate(out.report, report_schema()).empty());
}

TEST_CASE("verify scenarios") {
  SUBCASE("paper example passes") {
    const RunOutput out = run_scenario(Json{{"scenario", "verify"},
                                            {"system", {{"source", "paper_example"}, {"n_max", 20}}},
                                            {"projections", {{"kind", "identity"}}},
                                            {"certificate", {{"D", 1}, {"lambda", 0.5}}}});
    CHECK(out.exit_code == 0);
    CHECK(out.report["verdict"] == "pass");
    CHECK(to_double(out.report["results"]["ledger"]["max_slack"], "") <= 1e-12);
  }
  SUBCASE("identity fails with growing slack") {
    const RunOutput out = run_scenario(Json{{"scenario", "verify"},
                                            {"rate", {{"kind", "exponential"}, {"domain", "one_sided"}, {"window", {0, 10}}}},
                                            {"system", {{"source", "constant"}, {"matrix", {{1, 0}, {0, 1}}}}},
                                            {"projections", {{"kind", "identity"}}},
                                            {"certificate", {{"D", 1}, {"lambda", 0.5}}}});
    CHECK(out.exit_code == 2);
    CHECK(out.report["verdict"] == "fail");
    const Json& worst = out.report["results"]["ledger"]["worst_stable"];
    CHECK(to_double(worst["slack"], "") == doctest::Approx(5.0).epsilon(1e-12));  // lambda (m - n) at m - n = 10
    CHECK(validate(out.report, report_schema()).empty());
  }
}

TEST_CASE("configuration errors and analysis errors") {
  CHECK_THROWS_AS(run_scenario(Json{{"scenario", "verify"}}), ConfigError);
  Json j = planted_config("characterize");
  j["rate"]["window"] = {0, 3};
  j["system"] = {{"source", "file"}, {"path", "/nonexistent/system.json"}};
  CHECK_THROWS_AS(run_scenario(j), ConfigError);

  Json id{{"scenario", "characterize"},
          {"rate", {{"kind", "exponential"}, {"domain", "one_sided"}, {"window", {0, 20}}}},
          {"system", {{"source", "constant"}, {"matrix", {{1, 0}, {0, 1}}}}}};
  const RunOutput out = run_scenario(id);
  CHECK(out.exit_code == 2);
  CHECK(out.report["verdict"] == "error");
  CHECK(out.report["error"]["stage"] == "stable_subspace");
  CHECK(validate(out.report, report_schema()).empty());

  Json given = planted_config("admissibility");
  given["projections"] = {{"kind", "planted"}};
  given["certificate"] = {{"D", 3}, {"lambda", 1}};
  given["betas"] = {0.5, 1.5};
  CHECK_THROWS_AS(run_scenario(given), ConfigError);
}

TEST_CASE("system files resolve against the base directory") {
  const auto dir = std::filesystem::temp_directory_path() / "dichlab_sysfile";
  std::filesystem::create_directories(dir);
  const PlantedModel ex = paper_example_model(10);
  atomic_write((dir / "sys.json").string(), system_to_json(ex.system).dump());
  RunOptions opts;
  opts.base_dir = dir.string();
  const RunOutput out = run_scenario(Json{{"scenario", "verify"},
                                          {"rate", {{"kind", "doubly_exponential"}, {"domain", "one_sided"}, {"window", {0, 10}}}},
                                          {"system", {{"source", "file"}, {"path", "sys.json"}}},
                                          {"projections", {{"kind", "identity"}}},
                                          {"certificate", {{"D", 1}, {"lambda", 0.5}}}},
                                     opts);
  CHECK(out.exit_code == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("reports do not depend on the thread count") {
  for (const char* sc : {"admissibility", "sweep"}) {
    Json j = planted_config(sc);
    j["betas"] = {-0.4, 0.0, 0.3, 0.6};
    if (std::string(sc) == "sweep") j["sweep"] = {{"axis", "c"}, {"values", {0.0, 0.01, 0.05, 0.1}}};
    RunOptions one, four;
    four.threads = 4;
    const RunOutput a = run_scenario(j, one);
    const RunOutput b = run_scenario(j, four);
    CHECK(a.report.dump() == b.report.dump());
    REQUIRE(a.tables.size() == b.tables.size());
    for (size_t i = 0; i < a.tables.size(); ++i) CHECK(a.tables[i].second.str() == b.tables[i].second.str());
    CHECK(validate(a.report, report_schema()).empty());
  }
}

TEST_CASE("sweeps") {
  SUBCASE("c axis: margin zero then linear") {
    Json j = planted_config("sweep");
    j["perturbation"] = {{"beta", 0.5}};
    j["sweep"] = {{"axis", "c"}, {"values", {0.0, 0.01, 0.1}}};
    const Json rows = run_scenario(j).report["results"]["rows"];
    const double m1 = to_double(rows[1]["margin"], ""), m2 = to_double(rows[2]["margin"], "");
    CHECK(to_double(rows[0]["margin"], "") == 0.0);
    // c S t (1 + c S) with S the sum of 2^-n over the 50 steps.
    double S = 0.0;
    for (int n = 0; n < 50; ++n) S += std::ldexp(1.0, -n);
    CHECK(m2 / m1 == doctest::Approx(10.0 * (1.0 + 0.1 * S) / (1.0 + 0.01 * S)).epsilon(1e-12));
  }
  SUBCASE("seed axis: same margins, different drifts") {
    Json j = planted_config("sweep");
    j["perturbation"] = {{"beta", 0.5}, {"c", 0.05}};
    j["sweep"] = {{"axis", "seed"}, {"values", {1, 2, 3}}};
    const Json rows = run_scenario(j).report["results"]["rows"];
    CHECK(rows[0]["margin"] == rows[1]["margin"]);
    CHECK(rows[1]["margin"] == rows[2]["margin"]);
    CHECK(rows[0]["max_drift"] != rows[1]["max_drift"]);
  }
  SUBCASE("beta axis: sentinel outside the range") {
    Json j = planted_config("sweep");
    j["sweep"] = {{"axis", "beta"}, {"values", {-2.0, 0.0, 0.5, 1.0, 3.0}}};
    const RunOutput out = run_scenario(j);
    const Json rows = out.report["results"]["rows"];
    CHECK(rows[0]["exact_sup"] == "inf");
    CHECK(std::isfinite(to_double(rows[1]["exact_sup"], "")));
    CHECK(std::isfinite(to_double(rows[2]["exact_sup"], "")));
    CHECK(rows[3]["exact_sup"] == "inf");  // planted lambda = 1 is the open endpoint
    CHECK(rows[4]["exact_sup"] == "inf");
    CHECK(out.exit_code == 0);
  }
  SUBCASE("length axis records failures in-row") {
    Json j = planted_config("sweep");
    j["sweep"] = {{"axis", "length"}, {"values", {1, 30, 50, 80}}};
    const Json rows = run_scenario(j).report["results"]["rows"];
    CHECK_FALSE(rows[0]["error"].get<std::string>().empty());
    CHECK(rows[1]["pass"] == true);
    CHECK(rows[2]["pass"] == true);
    CHECK(rows[3]["error"] == "length does not fit the system window");
  }
}
