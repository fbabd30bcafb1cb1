#include "dichlab/scenario.hpp"

#include "dichlab/errors.hpp"
#include "dichlab/random.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

namespace dichlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ConfigError(path, what); }

// Runs fn(0..count-1) on up to `threads` workers; each index writes only
// its own slot, so results do not depend on scheduling.
void parallel_for(size_t count, int threads, const std::function<void(size_t)>& fn) {
  std::atomic<size_t> next{0};
  auto work = [&] {
    for (size_t i = next++; i < count; i = next++) fn(i);
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(count)));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
}

double get_or(const Json& j, const char* key, double fallback) {
  return j.is_object() && j.contains(key) ? to_double(j[key], key) : fallback;
}

struct Tolerances {
  double slack = 1e-8;
  double structural = 1e-10;
  double residual = 1e-10;
  double oracle = 1e-8;
  double bound = 1e-6;
  ClassifyOptions classify;
};

Tolerances read_tolerances(const Json& config) {
  Tolerances t;
  const Json j = config.value("tolerances", Json::object());
  t.slack = get_or(j, "slack", t.slack);
  t.structural = get_or(j, "structural", t.structural);
  t.residual = get_or(j, "residual", t.residual);
  t.oracle = get_or(j, "oracle", t.oracle);
  t.bound = get_or(j, "bound", t.bound);
  t.classify.gap_threshold = get_or(j, "gap_threshold", t.classify.gap_threshold);
  t.classify.horizon = get_or(j, "horizon", t.classify.horizon);
  t.classify.cutoff = get_or(j, "cutoff", t.classify.cutoff);
  if (j.contains("cutoff_rule")) t.classify.rule = cutoff_rule_from_string(j["cutoff_rule"].get<std::string>());
  return t;
}

CharacterizeOptions characterize_options(const Tolerances& t) {
  CharacterizeOptions o;
  o.classify = t.classify;
  o.verify.slack_tolerance = t.slack;
  o.verify.structural_tolerance = t.structural;
  return o;
}

struct Loaded {
  LinearSystem sys;
  GrowthRate rate;
  NuSequence nu;
  std::optional<PlantedModel> planted;
};

Json read_json_file(const std::string& path, const std::string& field_path) {
  std::ifstream in(path);
  if (!in) fail(field_path, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    fail(field_path, std::string("invalid JSON in '") + path + "': " + e.what());
  }
}

Loaded load(const Json& config, const RunOptions& options, std::uint64_t master) {
  const Json& s = config.at("system");
  const std::string source = s.at("source").get<std::string>();
  if (source == "paper_example") {
    const int n_max = s.value("n_max", 20);
    PlantedModel pm = paper_example_model(n_max);
    const GrowthRate rate = config.contains("rate")
                                ? rate_from_json(config["rate"])
                                : make_rate(RateKind::doubly_exponential, Domain::one_sided, {0, n_max});
    const NuSequence nu = config.contains("nu") ? nu_from_json(config["nu"], rate) : make_uniform_nu(rate);
    LinearSystem sys = pm.system;
    return {std::move(sys), rate, nu, std::move(pm)};
  }
  if (!config.contains("rate")) fail("rate", "required for system source '" + source + "'");
  const GrowthRate rate = rate_from_json(config["rate"]);
  const NuSequence nu = config.contains("nu") ? nu_from_json(config["nu"], rate) : make_uniform_nu(rate);

  std::optional<PlantedModel> planted;
  std::optional<LinearSystem> sys;
  if (source == "planted") {
    PlantedSpectrum spec;
    if (s.contains("stable_rates") || s.contains("unstable_rates")) {
      spec.stable_rates = s.value("stable_rates", std::vector<double>{});
      spec.unstable_rates = s.value("unstable_rates", std::vector<double>{});
    } else {
      spec.stable_rates.assign(static_cast<size_t>(s.value("d_s", 1)), s.value("lambda_s", 1.0));
      spec.unstable_rates.assign(static_cast<size_t>(s.value("d_u", 1)), s.value("lambda_u", 1.0));
    }
    const std::uint64_t seed = s.contains("seed") ? s["seed"].get<std::uint64_t>() : derive_seed(master, 0);
    try {
      planted = make_planted_model(rate, nu, spec, s.value("cond", 1.0), seed);
    } catch (const std::invalid_argument& e) {
      fail("system", e.what());
    }
    sys = planted->system;
  } else if (source == "constant") {
    const Matrix m = matrix_from_json(s.at("matrix"), "system.matrix");
    if (m.rows() != m.cols()) fail("system.matrix", "must be square");
    sys = constant_system(rate.domain(), rate.window(), m);
  } else if (source == "inline") {
    sys = system_from_json(s, "system");
  } else if (source == "file") {
    namespace fs = std::filesystem;
    fs::path p(s.at("path").get<std::string>());
    if (p.is_relative()) p = fs::path(options.base_dir) / p;
    sys = system_from_json(read_json_file(p.string(), "system.path"), "system(" + p.string() + ")");
  } else {
    fail("system.source", "unknown source '" + source + "'");
  }
  if (sys->domain() != rate.domain()) fail("rate.domain", "does not match the system domain");
  if (!rate.window().contains(sys->window())) fail("rate.window", "does not cover the system window");
  if (!nu.window().contains(sys->window())) fail("nu", "does not cover the system window");
  return {std::move(*sys), rate, nu, std::move(planted)};
}

// Projections and constants used by verify, admissibility and beta sweeps.
struct Analysed {
  LinearSystem sys;
  ProjectionFamily proj;
  DichotomyCertificate cert;
  std::string projection_source;
  std::string certificate_source;
  std::optional<CharacterizeResult> characterized;
  bool certificate_given = false;
};

Analysed analyse(const Json& config, const Loaded& L, const Tolerances& tol, bool need_certificate) {
  const Json pj = config.value("projections", Json::object());
  const std::string kind = pj.value("kind", L.planted ? "planted" : "characterize");
  std::optional<CharacterizeResult> ch;
  std::optional<LinearSystem> sys;
  std::optional<ProjectionFamily> proj;
  if (kind == "identity") {
    sys = L.sys;
    proj = ProjectionFamily::constant(L.sys.window(), Matrix::Identity(L.sys.dim(), L.sys.dim()));
  } else if (kind == "planted") {
    if (!L.planted) fail("projections.kind", "'planted' needs a planted or paper_example system");
    sys = L.sys;
    proj = L.planted->true_projections;
  } else if (kind == "inline") {
    sys = L.sys;
    proj = projections_from_json(pj, "projections");
    if (!proj->window().contains(L.sys.window())) fail("projections.window", "does not cover the system window");
  } else if (kind == "characterize") {
    ch = characterize(L.sys, L.rate, L.nu, std::nullopt, characterize_options(tol));
    sys = L.sys.restricted(ch->core);
    proj = ch->projections;
  } else {
    fail("projections.kind", "unknown kind '" + kind + "'");
  }

  Analysed a{std::move(*sys), std::move(*proj), {}, kind, "", std::move(ch), false};
  if (config.contains("certificate")) {
    const Json& c = config["certificate"];
    a.cert.D = to_double(c.at("D"), "certificate.D");
    a.cert.lambda = to_double(c.at("lambda"), "certificate.lambda");
    a.cert.epsilon = c.contains("epsilon") ? to_double(c["epsilon"], "certificate.epsilon") : fit_nu_exponent(L.rate, L.nu);
    a.cert.stable_exponent = a.cert.unstable_exponent = a.cert.lambda;
    a.certificate_source = "given";
    a.certificate_given = true;
  } else if (kind == "planted") {
    a.cert = L.planted->true_certificate;
    a.certificate_source = "planted";
  } else if (a.characterized) {
    a.cert = a.characterized->certificate;
    a.certificate_source = "fitted";
  } else if (need_certificate) {
    a.cert = fit_certificate(a.sys, a.proj, L.rate, L.nu);
    a.certificate_source = "fitted";
  }
  return a;
}

std::vector<double> betas_of(const Json& config, const Analysed& a) {
  std::vector<double> out;
  if (config.contains("betas")) {
    for (size_t i = 0; i < config["betas"].size(); ++i) {
      out.push_back(to_double(config["betas"][i], "betas[" + std::to_string(i) + "]"));
    }
  } else {
    out.push_back(0.5 * a.cert.lambda);
  }
  return out;
}

bool in_beta_range(const DichotomyCertificate& cert, Domain domain, double beta) {
  try {
    return beta_range(cert, domain).contains(beta);
  } catch (const std::invalid_argument&) {
    return false;
  }
}

NormVariant variant_of(const Json& j, const GrowthRate& rate) {
  if (j.is_object() && j.contains("variant")) return j["variant"] == "abs" ? NormVariant::abs : NormVariant::plain;
  return rate.domain() == Domain::two_sided && rate.supports_abs_spaces() ? NormVariant::abs : NormVariant::plain;
}

struct Outcome {
  Json results = Json::object();
  std::vector<std::pair<std::string, CsvTable>> tables;
  bool pass = false;
};

Outcome run_verify(const Json& config, const Loaded& L, const Tolerances& tol) {
  const Analysed a = analyse(config, L, tol, true);
  VerifyOptions vo;
  vo.slack_tolerance = tol.slack;
  vo.structural_tolerance = tol.structural;
  vo.keep_grid = true;
  const DichotomyLedger ledger = verify_dichotomy(a.sys, a.proj, L.rate, L.nu, a.cert.D, a.cert.lambda, vo);
  Outcome o;
  o.results["window"] = Json::array({a.sys.window().first, a.sys.window().last});
  o.results["projection_source"] = a.projection_source;
  o.results["certificate_source"] = a.certificate_source;
  o.results["certificate"] = to_json(a.cert);
  o.results["ledger"] = to_json(ledger);
  o.results["munu"] = to_json(check_munu(L.rate, L.nu, a.cert.epsilon));
  o.tables.emplace_back("slack_grid.csv", slack_table(ledger));
  o.pass = ledger.pass;
  return o;
}

Outcome run_characterize(const Json& config, const Loaded& L, const Tolerances& tol) {
  const CharacterizeResult r = characterize(L.sys, L.rate, L.nu, std::nullopt, characterize_options(tol));
  Outcome o;
  o.results = to_json(r);
  if (L.planted) {
    double range = 0.0, kernel = 0.0;
    for (int n = r.core.first; n <= r.core.last; ++n) {
      range = std::max(range, max_principal_angle(r.projections.range_basis(n), L.planted->true_projections.range_basis(n)));
      kernel = std::max(kernel,
                        max_principal_angle(r.projections.kernel_basis(n), L.planted->true_projections.kernel_basis(n)));
    }
    o.results["recovery"] = Json{{"max_range_angle", num(range)},
                                 {"max_kernel_angle", num(kernel)},
                                 {"planted", to_json(L.planted->true_certificate)},
                                 {"lambda_error", num(std::abs(r.certificate.lambda - L.planted->true_certificate.lambda))}};
  }
  if (config.contains("betas") && L.sys.domain() == Domain::one_sided) {
    Json checks = Json::array();
    for (const auto& b : config["betas"]) {
      const double beta = to_double(b, "betas");
      if (beta > 0.0) checks.push_back(to_json(s_beta_zero_check(L.sys, L.rate, beta, tol.classify.gap_threshold)));
    }
    o.results["s_beta_checks"] = checks;
  }
  o.tables.emplace_back("splitting.csv", split_table(r.splitting));
  o.pass = r.pass;
  return o;
}

Outcome run_admissibility(const Json& config, const Loaded& L, const Tolerances& tol, std::uint64_t master,
                          int threads) {
  const Analysed a = analyse(config, L, tol, true);
  const std::vector<double> betas = betas_of(config, a);
  const Domain dom = a.sys.domain();
  if (a.certificate_given) {
    for (size_t i = 0; i < betas.size(); ++i) {
      if (!in_beta_range(a.cert, dom, betas[i])) {
        fail("betas[" + std::to_string(i) + "]", "outside the beta range of the supplied certificate");
      }
    }
  }
  const Json aj = config.value("admissibility", Json::object());
  const NormVariant variant = variant_of(aj, L.rate);
  const int samples = aj.value("samples", 16);
  const BoundaryCondition boundary = BoundaryCondition::from_projections(a.proj, dom);
  const Window w = a.sys.window();
  const int d = a.sys.dim();

  std::vector<Json> rows(betas.size());
  std::vector<std::vector<std::string>> csv(betas.size());
  std::vector<char> ok(betas.size(), 0);
  parallel_for(betas.size(), threads, [&](size_t i) {
    const double beta = betas[i];
    const WeightedNormSpec out = variant == NormVariant::abs ? WeightedNormSpec::abs(beta, NormKind::infinity, L.rate)
                                                             : WeightedNormSpec::plain(beta, NormKind::infinity);
    const WeightedNormSpec in = variant == NormVariant::abs ? WeightedNormSpec::abs(beta, NormKind::one, L.rate)
                                                            : WeightedNormSpec::plain(beta, NormKind::one);
    Rng rng(derive_seed(master, 1000 + i));
    VectorSequence y(w, d);
    for (int n = w.first; n <= w.last; ++n) {
      if (dom == Domain::one_sided && n == w.first) continue;
      y.at(n) = gaussian_vector(rng, d) * std::exp(-log_weight(in, L.rate, n) - L.nu.log_nu(n) - std::log(w.size()));
    }
    const SolveReport rep = solve_admissibility(a.sys, a.proj, y, beta, L.rate, L.nu, boundary,
                                                SolveOptions{variant, tol.residual});
    const VectorSequence oracle = oracle_solve(a.sys, a.proj, y, boundary, OracleWeights{&L.rate, out});
    const double diff = relative_difference(rep.solution, oracle, out, L.rate);
    OperatorNormOptions oo;
    oo.samples = samples;
    oo.seed = derive_seed(master, 2000 + i);
    oo.variant = variant;
    const OperatorNormReport op = operator_norm_T(a.sys, a.proj, L.rate, L.nu, beta, oo);
    const bool in_range = in_beta_range(a.cert, dom, beta);
    const bool bound_ok = rep.solution_norm <= a.cert.D * rep.input_norm * (1.0 + tol.bound);
    Json row{{"beta", num(beta)},
             {"in_range", in_range},
             {"solve", to_json(rep)},
             {"oracle_relative_difference", num(diff)},
             {"bound_D", num(a.cert.D)},
             {"bound_ok", bound_ok},
             {"operator_norm", to_json(op)}};
    if (dom == Domain::one_sided) {
      row["uniqueness"] = to_json(uniqueness_probe(a.sys, L.rate, beta, boundary.z_basis,
                                                   default_uniqueness_margin(a.cert, beta)));
    }
    ok[i] = rep.ok && diff <= tol.oracle && bound_ok && in_range && op.sampled_lb <= op.exact_sup * (1.0 + 1e-12);
    csv[i] = {format_number(beta),          format_number(rep.input_norm), format_number(rep.solution_norm),
              format_number(rep.bound_constant), format_number(a.cert.D),   format_number(diff),
              format_number(rep.max_residual), format_number(op.exact_sup), format_number(op.sampled_lb),
              in_range ? "true" : "false"};
    rows[i] = std::move(row);
  });

  Outcome o;
  o.results["window"] = Json::array({w.first, w.last});
  o.results["variant"] = variant == NormVariant::abs ? "abs" : "plain";
  o.results["projection_source"] = a.projection_source;
  o.results["certificate_source"] = a.certificate_source;
  o.results["certificate"] = to_json(a.cert);
  o.results["rows"] = rows;
  o.tables.emplace_back("admissibility.csv",
                        CsvTable{{"beta", "input_norm", "solution_norm", "bound_constant", "D", "oracle_difference",
                                  "max_residual", "exact_sup", "sampled_lb", "in_range"},
                                 csv});
  o.pass = std::all_of(ok.begin(), ok.end(), [](char c) { return c != 0; });
  return o;
}

PersistenceOptions persistence_options(const Json& config, const Loaded& L, const Tolerances& tol) {
  PersistenceOptions po;
  po.characterize = characterize_options(tol);
  po.variant = variant_of(config.value("perturbation", Json::object()), L.rate);
  return po;
}

Outcome run_perturb(const Json& config, const Loaded& L, const Tolerances& tol, std::uint64_t master) {
  const Json pj = config.value("perturbation", Json::object());
  const PersistenceOptions po = persistence_options(config, L, tol);
  const CharacterizeResult ref = characterize(L.sys, L.rate, L.nu, std::nullopt, po.characterize);
  const double beta = pj.contains("beta") ? to_double(pj["beta"], "perturbation.beta") : 0.5 * ref.certificate.lambda;
  const PerturbationSpec spec = make_perturbation_spec(L.sys.window(), get_or(pj, "c", 0.0),
                                                       derive_seed(master, pj.value("seed", std::uint64_t{0})), beta,
                                                       get_or(pj, "gamma_ratio", 0.5));
  const Perturbation b = make_perturbation(L.sys, L.rate, L.nu, spec);
  double saturation = 0.0;
  for (size_t i = 0; i < b.steps.size(); ++i) {
    if (spec.c > 0.0) saturation = std::max(saturation, std::abs(spectral_norm(b.steps[i]) / std::exp(b.log_rho[i]) - 1.0));
  }
  const PersistenceReport rep = verify_persistence(L.sys, b, L.rate, L.nu, po);
  Outcome o;
  o.results = to_json(rep);
  o.results["beta"] = num(beta);
  o.results["saturation_error"] = num(saturation);
  CsvTable drift{{"n", "range_angle", "kernel_angle"}, {}};
  for (const auto& r : rep.drift) {
    drift.rows.push_back({std::to_string(r.n), format_number(r.range_angle), format_number(r.kernel_angle)});
  }
  o.tables.emplace_back("drift.csv", drift);
  o.pass = rep.persisted;
  return o;
}

Outcome run_counterexample_scenario(const Json& config) {
  const int n_max = config.value("counterexample", Json::object()).value("n_max", 10);
  if (n_max < 1 || n_max > 40) fail("counterexample.n_max", "must lie in [1, 40]");
  const auto rows = run_counterexample(n_max);
  Outcome o;
  Json arr = Json::array();
  bool all = true;
  for (const auto& r : rows) {
    arr.push_back(Json{{"n", r.n}, {"log_x", num(r.log_x)}, {"log_bound", num(r.log_bound)}, {"holds", r.holds}});
    all = all && r.holds;
  }
  o.results["rows"] = arr;
  o.tables.emplace_back("counterexample.csv", counterexample_table(rows));
  o.pass = all;
  return o;
}

Outcome run_sweep(const Json& config, const Loaded& L, const Tolerances& tol, std::uint64_t master, int threads) {
  const Json& sj = config.at("sweep");
  const std::string axis = sj.at("axis").get<std::string>();
  std::vector<double> values;
  for (size_t i = 0; i < sj.at("values").size(); ++i) {
    values.push_back(to_double(sj["values"][i], "sweep.values[" + std::to_string(i) + "]"));
  }
  Outcome o;
  o.results["axis"] = axis;
  o.pass = true;

  if (axis == "c" || axis == "seed") {
    const Json pj = config.value("perturbation", Json::object());
    const PersistenceOptions po = persistence_options(config, L, tol);
    std::vector<SweepPoint> pts;
    for (double v : values) {
      if (axis == "c") {
        pts.push_back({v, pj.value("seed", std::uint64_t{0})});
      } else {
        if (v < 0 || v != std::floor(v)) fail("sweep.values", "seeds must be non-negative integers");
        pts.push_back({get_or(pj, "c", 0.0), static_cast<std::uint64_t>(v)});
      }
    }
    double beta = get_or(pj, "beta", std::numeric_limits<double>::quiet_NaN());
    if (std::isnan(beta)) {
      beta = 0.5 * characterize(L.sys, L.rate, L.nu, std::nullopt, po.characterize).certificate.lambda;
    }
    const auto rows = persistence_sweep(L.sys, L.rate, L.nu, pts, beta, master, threads, po);
    Json arr = Json::array();
    for (const auto& r : rows) {
      arr.push_back(Json{{"c", num(r.c)}, {"seed", r.seed}, {"margin", num(r.margin)}, {"verdict", r.verdict},
                         {"max_drift", num(r.max_drift)}, {"lambda", num(r.lambda)}, {"error", r.error}});
    }
    o.results["beta"] = num(beta);
    o.results["rows"] = arr;
    o.tables.emplace_back("sweep.csv", sweep_table(rows));
    return o;
  }

  if (axis == "beta") {
    const Analysed a = analyse(config, L, tol, true);
    const NormVariant variant = variant_of(config.value("admissibility", Json::object()), L.rate);
    std::vector<Json> rows(values.size());
    std::vector<std::vector<std::string>> csv(values.size());
    parallel_for(values.size(), threads, [&](size_t i) {
      const double beta = values[i];
      const bool in_range = in_beta_range(a.cert, a.sys.domain(), beta);
      double exact = kInf, lb = kInf;
      std::string error;
      if (!in_range) {
        error = "beta outside beta_range";
      } else {
        try {
          OperatorNormOptions oo;
          oo.seed = derive_seed(master, 3000 + i);
          oo.variant = variant;
          const OperatorNormReport op = operator_norm_T(a.sys, a.proj, L.rate, L.nu, beta, oo);
          exact = op.exact_sup;
          lb = op.sampled_lb;
        } catch (const std::exception& e) {
          error = e.what();
        }
      }
      rows[i] = Json{{"beta", num(beta)}, {"in_range", in_range}, {"exact_sup", num(exact)}, {"sampled_lb", num(lb)},
                     {"error", error}};
      csv[i] = {format_number(beta), in_range ? "true" : "false", format_number(exact), format_number(lb), error};
    });
    o.results["certificate"] = to_json(a.cert);
    o.results["rows"] = rows;
    o.tables.emplace_back("sweep.csv", CsvTable{{"beta", "in_range", "exact_sup", "sampled_lb", "error"}, csv});
    return o;
  }

  if (axis == "length") {
    const Window w = L.sys.window();
    std::vector<Json> rows(values.size());
    std::vector<std::vector<std::string>> csv(values.size());
    const CharacterizeOptions co = characterize_options(tol);
    parallel_for(values.size(), threads, [&](size_t i) {
      const int len = static_cast<int>(values[i]);
      const Window sub = L.sys.domain() == Domain::one_sided ? Window{w.first, w.first + len}
                                                             : Window{std::max(w.first, -len / 2), std::min(w.last, len / 2)};
      double lambda = std::numeric_limits<double>::quiet_NaN(), D = lambda;
      bool pass = false;
      std::string error;
      if (len < 1 || !w.contains(sub) || sub.size() != len + 1) {
        error = "length does not fit the system window";
      } else {
        try {
          const CharacterizeResult r = characterize(L.sys.restricted(sub), L.rate, L.nu, std::nullopt, co);
          lambda = r.certificate.lambda;
          D = r.certificate.D;
          pass = r.pass;
        } catch (const AnalysisError& e) {
          error = e.what();
        }
      }
      rows[i] = Json{{"length", len}, {"lambda", num(lambda)}, {"D", num(D)}, {"pass", pass}, {"error", error}};
      csv[i] = {std::to_string(len), format_number(lambda), format_number(D), pass ? "true" : "false", error};
    });
    o.results["rows"] = rows;
    o.tables.emplace_back("sweep.csv", CsvTable{{"length", "lambda", "D", "pass", "error"}, csv});
    return o;
  }
  fail("sweep.axis", "unknown axis '" + axis + "'");
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += "\n  " + x;
  return s;
}

}  // namespace

const char* library_version() { return DICHLAB_VERSION; }

RunOutput run_scenario(Json config, const RunOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  if (options.scenario) config["scenario"] = *options.scenario;
  if (options.seed) config["seed"] = *options.seed;
  const auto errs = validate(config, config_schema());
  if (!errs.empty()) throw ConfigError("$", "config does not match the schema:" + join(errs));

  const std::string scenario = config["scenario"].get<std::string>();
  const std::uint64_t master = config.value("seed", std::uint64_t{0});
  const int threads = std::max(1, options.threads);

  RunOutput out;
  out.report = Json{{"schema_version", 1},
                    {"library_version", library_version()},
                    {"scenario", scenario},
                    {"seed", master},
                    {"config", config}};
  Outcome o;
  try {
    const Tolerances tol = read_tolerances(config);
    if (scenario == "counterexample") {
      o = run_counterexample_scenario(config);
    } else {
      if (!config.contains("system")) fail("system", "required for scenario '" + scenario + "'");
      const Loaded L = load(config, options, master);
      if (scenario == "verify") {
        o = run_verify(config, L, tol);
      } else if (scenario == "characterize") {
        o = run_characterize(config, L, tol);
      } else if (scenario == "admissibility") {
        o = run_admissibility(config, L, tol, master, threads);
      } else if (scenario == "perturb") {
        o = run_perturb(config, L, tol, master);
      } else if (scenario == "sweep") {
        if (!config.contains("sweep")) fail("sweep", "required for the sweep scenario");
        o = run_sweep(config, L, tol, master, threads);
      } else {
        fail("scenario", "unknown scenario '" + scenario + "'");
      }
    }
    out.report["results"] = std::move(o.results);
    out.report["verdict"] = o.pass ? "pass" : "fail";
    out.exit_code = o.pass ? 0 : 2;
    out.tables = std::move(o.tables);
  } catch (const AnalysisError& e) {
    out.report["results"] = Json::object();
    out.report["verdict"] = "error";
    out.report["error"] = Json{{"stage", e.stage()}, {"message", e.what()}};
    out.exit_code = 2;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError("$", e.what());
  } catch (const std::out_of_range& e) {
    throw ConfigError("$", e.what());
  } catch (const Json::exception& e) {
    throw ConfigError("$", e.what());
  }
  out.report["exit_code"] = out.exit_code;
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

void write_outputs(const RunOutput& out, const std::string& dir, const std::vector<std::string>& formats) {
  namespace fs = std::filesystem;
  auto wants = [&](const char* f) { return std::find(formats.begin(), formats.end(), f) != formats.end(); };
  const fs::path base(dir);
  if (wants("json")) {
    atomic_write((base / "report.json").string(), out.report.dump(2) + "\n");
    atomic_write((base / "timing.json").string(), Json{{"wall_seconds", out.wall_seconds}}.dump(2) + "\n");
  }
  if (wants("csv")) {
    for (const auto& [name, table] : out.tables) atomic_write((base / name).string(), table.str());
  }
}

}  // namespace dichlab
