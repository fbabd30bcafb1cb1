#include "dichlab/io.hpp"

#include "dichlab/schemas_embedded.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <unistd.h>

namespace dichlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ConfigError(path, what); }

const Json& field(const Json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) fail(path, std::string("missing field '") + key + "'");
  return j.at(key);
}

int to_int(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

Window window_from_json(const Json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) fail(path, "expected [first, last]");
  const Window w{to_int(j[0], path + "[0]"), to_int(j[1], path + "[1]")};
  if (w.last < w.first) fail(path, "last < first");
  return w;
}

Json window_json(Window w) { return Json::array({w.first, w.last}); }

std::vector<std::pair<int, double>> table_from_json(const Json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of {index, log_value}");
  std::vector<std::pair<int, double>> out;
  for (size_t i = 0; i < j.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    out.emplace_back(to_int(field(j[i], "index", p), p + ".index"), to_double(field(j[i], "log_value", p), p + ".log_value"));
  }
  return out;
}

Json slack_json(const SlackRecord& r) {
  return Json{{"m", r.m}, {"n", r.n}, {"branch", r.branch == Branch::stable ? "stable" : "unstable"},
              {"slack", num(r.slack)}};
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

Json num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double to_double(const Json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  fail(path, "expected a number");
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json r = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) r.push_back(num(m(i, k)));
    rows.push_back(std::move(r));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) fail(path, "expected a non-empty array of rows");
  const size_t cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) fail(path + "[" + std::to_string(i) + "]", "ragged row");
    for (size_t k = 0; k < cols; ++k) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          to_double(j[i][k], path + "[" + std::to_string(i) + "][" + std::to_string(k) + "]");
    }
  }
  return m;
}

Json system_to_json(const LinearSystem& sys) {
  Json mats = Json::array();
  const Window w = sys.window();
  for (int n = w.first; n < w.last; ++n) {
    const ScaledMatrix& s = sys.step(n);
    mats.push_back(Json{{"n", n}, {"rows", matrix_to_json(s.mantissa)}, {"log_scale", num(s.log_scale.value())}});
  }
  return Json{{"domain", to_string(sys.domain())}, {"dim", sys.dim()}, {"window", window_json(w)}, {"matrices", mats}};
}

LinearSystem system_from_json(const Json& j, const std::string& path) {
  Domain domain;
  try {
    domain = domain_from_string(field(j, "domain", path).get<std::string>());
  } catch (const std::exception& e) {
    fail(path + ".domain", e.what());
  }
  const Window w = window_from_json(field(j, "window", path), path + ".window");
  const int dim = to_int(field(j, "dim", path), path + ".dim");
  const Json& mats = field(j, "matrices", path);
  if (!mats.is_array() || static_cast<int>(mats.size()) != w.size() - 1) {
    fail(path + ".matrices", "expected one matrix per step n in [first, last - 1]");
  }
  std::vector<ScaledMatrix> steps;
  for (size_t i = 0; i < mats.size(); ++i) {
    const std::string p = path + ".matrices[" + std::to_string(i) + "]";
    if (to_int(field(mats[i], "n", p), p + ".n") != w.first + static_cast<int>(i)) fail(p + ".n", "out of order");
    const Matrix m = matrix_from_json(field(mats[i], "rows", p), p + ".rows");
    if (m.rows() != dim || m.cols() != dim) fail(p + ".rows", "expected a dim x dim matrix");
    const double ls = mats[i].contains("log_scale") ? to_double(mats[i]["log_scale"], p + ".log_scale") : 0.0;
    steps.emplace_back(m, ExtLog(ls));
  }
  try {
    return LinearSystem(domain, w, std::move(steps));
  } catch (const std::invalid_argument& e) {
    fail(path, e.what());
  }
}

Json projections_to_json(const ProjectionFamily& proj) {
  Json mats = Json::array();
  const Window w = proj.window();
  for (int n = w.first; n <= w.last; ++n) mats.push_back(Json{{"n", n}, {"rows", matrix_to_json(proj.at(n))}});
  return Json{{"window", window_json(w)}, {"stable_rank", proj.stable_rank()}, {"matrices", mats}};
}

ProjectionFamily projections_from_json(const Json& j, const std::string& path) {
  const Window w = window_from_json(field(j, "window", path), path + ".window");
  const Json& mats = field(j, "matrices", path);
  if (!mats.is_array() || static_cast<int>(mats.size()) != w.size()) fail(path + ".matrices", "one matrix per index");
  std::vector<Matrix> ps;
  for (size_t i = 0; i < mats.size(); ++i) {
    const std::string p = path + ".matrices[" + std::to_string(i) + "]";
    ps.push_back(matrix_from_json(field(mats[i], "rows", p), p + ".rows"));
  }
  try {
    return ProjectionFamily(w.first, std::move(ps));
  } catch (const std::invalid_argument& e) {
    fail(path, e.what());
  }
}

Json planted_to_json(const PlantedModel& pm) {
  Json sim = Json::array();
  for (const auto& l : pm.similarity) sim.push_back(matrix_to_json(l));
  return Json{{"system", system_to_json(pm.system)},
              {"projections", projections_to_json(pm.true_projections)},
              {"certificate", to_json(pm.true_certificate)},
              {"similarity", sim}};
}

GrowthRate rate_from_json(const Json& j, const std::string& path) {
  try {
    const RateKind kind = rate_kind_from_string(field(j, "kind", path).get<std::string>());
    const Domain domain = domain_from_string(field(j, "domain", path).get<std::string>());
    const Window w = window_from_json(field(j, "window", path), path + ".window");
    RateParams params;
    if (j.contains("scale")) params.scale = to_double(j["scale"], path + ".scale");
    if (j.contains("two_sided_extension")) params.two_sided_extension = j["two_sided_extension"].get<bool>();
    if (j.contains("table")) params.table = table_from_json(j["table"], path + ".table");
    return make_rate(kind, domain, w, params);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail(path, e.what());
  }
}

Json rate_to_json(const GrowthRate& rate) {
  Json t = Json::array();
  const Window w = rate.window();
  for (int n = w.first; n <= w.last; ++n) t.push_back(Json{{"index", n}, {"log_value", num(rate.log_mu(n))}});
  return Json{{"kind", "table"}, {"domain", to_string(rate.domain())}, {"window", window_json(w)}, {"table", t}};
}

NuSequence nu_from_json(const Json& j, const GrowthRate& rate, const std::string& path) {
  try {
    const NuKind kind = nu_kind_from_string(field(j, "kind", path).get<std::string>());
    switch (kind) {
      case NuKind::uniform:
        return make_uniform_nu(rate, j.contains("constant") ? to_double(j["constant"], path + ".constant") : 1.0);
      case NuKind::power:
        return make_power_nu(rate, to_double(field(j, "epsilon", path), path + ".epsilon"));
      case NuKind::table:
        return make_table_nu(rate.window(), table_from_json(field(j, "table", path), path + ".table"));
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail(path, e.what());
  }
  fail(path, "unknown nu kind");
}

Json to_json(const DichotomyCertificate& c) {
  return Json{{"D", num(c.D)},
              {"lambda", num(c.lambda)},
              {"epsilon", num(c.epsilon)},
              {"stable_exponent", num(c.stable_exponent)},
              {"unstable_exponent", num(c.unstable_exponent)}};
}

Json to_json(const DichotomyLedger& l) {
  return Json{{"D", num(l.D)},
              {"lambda", num(l.lambda)},
              {"max_slack", num(l.max_slack)},
              {"worst_stable", slack_json(l.worst_stable)},
              {"worst_unstable", slack_json(l.worst_unstable)},
              {"max_commuting_residual", num(l.max_commuting_residual)},
              {"max_idempotence_residual", num(l.max_idempotence_residual)},
              {"min_kernel_singular", num(l.min_kernel_singular)},
              {"pairs", static_cast<int>(l.grid.size())},
              {"structural_ok", l.structural_ok},
              {"inequalities_ok", l.inequalities_ok},
              {"pass", l.pass}};
}

Json to_json(const SplittingReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back(Json{{"n", row.n}, {"gap", num(row.gap)}, {"min_angle", num(row.min_angle)},
                        {"projection_norm", num(row.projection_norm)}});
  }
  return Json{{"core", window_json(r.core)},
              {"stable_dim", r.stable_dim},
              {"horizon", num(r.horizon)},
              {"gap", num(r.gap)},
              {"min_angle", num(r.min_angle)},
              {"max_stable_invariance", num(r.max_stable_invariance)},
              {"max_unstable_invariance", num(r.max_unstable_invariance)},
              {"max_angle_identity", num(r.max_angle_identity)},
              {"rows", rows},
              {"pass", r.pass}};
}

Json to_json(const GreenBoundReport& g) {
  return Json{{"beta", num(g.beta)}, {"log_sup", num(g.log_sup)}, {"sup", num(g.sup)},
              {"argmax_m", g.argmax_m}, {"argmax_n", g.argmax_n}, {"finite", g.finite}};
}

Json to_json(const CharacterizeResult& r) {
  return Json{{"core", window_json(r.core)},
              {"certificate", to_json(r.certificate)},
              {"ledger", to_json(r.ledger)},
              {"splitting", to_json(r.splitting)},
              {"green", to_json(r.green)},
              {"max_projection_log_ratio", num(r.max_projection_log_ratio)},
              {"projection_bound_ok", r.projection_bound_ok},
              {"pass", r.pass}};
}

Json to_json(const SolveReport& r) {
  return Json{{"max_residual", num(r.max_residual)},   {"boundary_residual", num(r.boundary_residual)},
              {"input_norm", num(r.input_norm)},       {"solution_norm", num(r.solution_norm)},
              {"log_input_norm", num(r.log_input_norm)}, {"log_solution_norm", num(r.log_solution_norm)},
              {"bound_constant", num(r.bound_constant)}, {"ok", r.ok}};
}

Json to_json(const OperatorNormReport& r) {
  return Json{{"exact_sup", num(r.exact_sup)}, {"log_exact_sup", num(r.log_exact_sup)},
              {"sampled_lb", num(r.sampled_lb)}, {"argmax_m", r.argmax_m},
              {"argmax_k", r.argmax_k},        {"impulse_value", num(r.impulse_value)},
              {"samples", r.samples}};
}

Json to_json(const UniquenessReport& r) {
  Json slopes = Json::array();
  for (const auto& t : r.traces) slopes.push_back(num(t.slope));
  return Json{{"margin", num(r.margin)}, {"min_slope", num(r.min_slope)}, {"slopes", slopes},
              {"verdict", to_string(r.verdict)}};
}

Json to_json(const MarginReport& m) {
  return Json{{"c", num(m.c)}, {"gamma_sum", num(m.gamma_sum)}, {"operator_norm", num(m.operator_norm)},
              {"margin", num(m.margin)}, {"critical_c", num(m.critical_c)}};
}

Json to_json(const NeumannCheck& n) {
  return Json{{"unknowns", n.unknowns}, {"block_norm", num(n.block_norm)}, {"envelope", num(n.envelope)},
              {"terms", n.terms},         {"converged", n.converged},      {"difference", num(n.difference)},
              {"residual", num(n.residual)}};
}

Json to_json(const PersistenceReport& r) {
  Json drift = Json::array();
  for (const auto& d : r.drift) {
    drift.push_back(Json{{"n", d.n}, {"range_angle", num(d.range_angle)}, {"kernel_angle", num(d.kernel_angle)}});
  }
  Json j{{"verdict", r.verdict()},
         {"margin", to_json(r.margin)},
         {"beta_in_range", r.beta_in_range},
         {"max_perturbation", num(r.max_perturbation)},
         {"max_drift", num(r.max_drift)},
         {"reference", to_json(r.reference)},
         {"perturbed", r.perturbed ? to_json(*r.perturbed) : Json(nullptr)},
         {"drift", drift}};
  if (!r.failure_stage.empty()) j["failure"] = Json{{"stage", r.failure_stage}, {"message", r.failure_message}};
  return j;
}

Json to_json(const SZeroBetaCheck& s) {
  return Json{{"beta", num(s.beta)},         {"dim_s0", static_cast<int>(s.basis_s0.basis.cols())},
              {"dim_sbeta", static_cast<int>(s.basis_sbeta.basis.cols())},
              {"gap_s0", num(s.gap_s0)},     {"gap_sbeta", num(s.gap_sbeta)},
              {"max_angle", num(s.max_angle)}, {"equal", s.equal}};
}

Json to_json(const MunuCheck& m) {
  return Json{{"finite", m.finite}, {"sup_value", num(m.sup_value)}, {"right_sup", num(m.right_sup)},
              {"left_sup", num(m.left_sup)}};
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string CsvTable::str() const {
  std::ostringstream out;
  for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << csv_cell(header[i]);
  out << '\n';
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_cell(row[i]);
    out << '\n';
  }
  return out.str();
}

CsvTable counterexample_table(const std::vector<CounterexampleRow>& rows) {
  CsvTable t{{"n", "log_x", "log_bound"}, {}};
  for (const auto& r : rows) t.rows.push_back({std::to_string(r.n), format_number(r.log_x), format_number(r.log_bound)});
  return t;
}

CsvTable slack_table(const DichotomyLedger& ledger) {
  CsvTable t{{"m", "n", "branch", "slack"}, {}};
  for (const auto& r : ledger.grid) {
    t.rows.push_back({std::to_string(r.m), std::to_string(r.n), r.branch == Branch::stable ? "stable" : "unstable",
                      format_number(r.slack)});
  }
  return t;
}

CsvTable split_table(const SplittingReport& rep) {
  CsvTable t{{"n", "gap", "min_angle", "projection_norm"}, {}};
  for (const auto& r : rep.rows) {
    t.rows.push_back({std::to_string(r.n), format_number(r.gap), format_number(r.min_angle),
                      format_number(r.projection_norm)});
  }
  return t;
}

CsvTable sweep_table(const std::vector<SweepRow>& rows) {
  CsvTable t{{"c", "seed", "margin", "verdict", "max_drift", "lambda", "error"}, {}};
  for (const auto& r : rows) {
    t.rows.push_back({format_number(r.c), std::to_string(r.seed), format_number(r.margin), r.verdict,
                      format_number(r.max_drift), format_number(r.lambda), r.error});
  }
  return t;
}

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw std::runtime_error("short write to " + tmp.string());
    }
  }
  fs::rename(tmp, target);
}

const Json& config_schema() {
  static const Json j = Json::parse(kConfigSchemaText);
  return j;
}

const Json& report_schema() {
  static const Json j = Json::parse(kReportSchemaText);
  return j;
}

namespace {

bool has_type(const Json& v, const std::string& t) {
  if (t == "object") return v.is_object();
  if (t == "array") return v.is_array();
  if (t == "string") return v.is_string();
  if (t == "boolean") return v.is_boolean();
  if (t == "null") return v.is_null();
  if (t == "integer") return v.is_number_integer();
  if (t == "number") return v.is_number();
  return false;
}

const Json& resolve(const Json& root, const Json& schema) {
  if (!schema.is_object() || !schema.contains("$ref")) return schema;
  const std::string ref = schema["$ref"].get<std::string>();
  if (ref.rfind("#/", 0) != 0) throw std::invalid_argument("only local $ref is supported: " + ref);
  return root.at(Json::json_pointer(ref.substr(1)));
}

void check(const Json& v, const Json& raw, const Json& root, const std::string& path, std::vector<std::string>& errs) {
  const Json& s = resolve(root, raw);
  if (s.is_boolean()) {
    if (!s.get<bool>()) errs.push_back(path + ": not allowed");
    return;
  }
  if (s.contains("type")) {
    bool ok = false;
    if (s["type"].is_array()) {
      for (const auto& t : s["type"]) ok = ok || has_type(v, t.get<std::string>());
    } else {
      ok = has_type(v, s["type"].get<std::string>());
    }
    if (!ok) {
      errs.push_back(path + ": expected type " + s["type"].dump());
      return;
    }
  }
  if (s.contains("const") && v != s["const"]) errs.push_back(path + ": expected " + s["const"].dump());
  if (s.contains("enum")) {
    bool found = false;
    for (const auto& e : s["enum"]) found = found || e == v;
    if (!found) errs.push_back(path + ": value " + v.dump() + " not in " + s["enum"].dump());
  }
  if (v.is_number()) {
    const double x = v.get<double>();
    if (s.contains("minimum") && x < s["minimum"].get<double>()) errs.push_back(path + ": below minimum");
    if (s.contains("maximum") && x > s["maximum"].get<double>()) errs.push_back(path + ": above maximum");
    if (s.contains("exclusiveMinimum") && x <= s["exclusiveMinimum"].get<double>()) {
      errs.push_back(path + ": must exceed " + s["exclusiveMinimum"].dump());
    }
  }
  if (v.is_object()) {
    if (s.contains("required")) {
      for (const auto& r : s["required"]) {
        if (!v.contains(r.get<std::string>())) errs.push_back(path + ": missing required field '" + r.get<std::string>() + "'");
      }
    }
    const Json props = s.value("properties", Json::object());
    for (auto it = v.begin(); it != v.end(); ++it) {
      const std::string p = path + "." + it.key();
      if (props.contains(it.key())) {
        check(it.value(), props[it.key()], root, p, errs);
      } else if (s.contains("additionalProperties")) {
        const Json& ap = s["additionalProperties"];
        if (ap.is_boolean() && !ap.get<bool>()) {
          errs.push_back(p + ": unknown field");
        } else if (ap.is_object()) {
          check(it.value(), ap, root, p, errs);
        }
      }
    }
  }
  if (v.is_array()) {
    if (s.contains("minItems") && v.size() < s["minItems"].get<size_t>()) errs.push_back(path + ": too few items");
    if (s.contains("maxItems") && v.size() > s["maxItems"].get<size_t>()) errs.push_back(path + ": too many items");
    if (s.contains("items")) {
      for (size_t i = 0; i < v.size(); ++i) check(v[i], s["items"], root, path + "[" + std::to_string(i) + "]", errs);
    }
  }
  if (s.contains("oneOf")) {
    int matches = 0;
    std::vector<std::string> first_errs;
    for (const auto& alt : s["oneOf"]) {
      std::vector<std::string> e;
      check(v, alt, root, path, e);
      if (e.empty()) {
        ++matches;
      } else if (first_errs.empty() || e.size() < first_errs.size()) {
        first_errs = e;
      }
    }
    if (matches == 0) {
      errs.push_back(path + ": matches none of the allowed forms");
      errs.insert(errs.end(), first_errs.begin(), first_errs.end());
    } else if (matches > 1) {
      errs.push_back(path + ": matches more than one allowed form");
    }
  }
}

}  // namespace

std::vector<std::string> validate(const Json& instance, const Json& schema) {
  std::vector<std::string> errs;
  check(instance, schema, schema, "$", errs);
  return errs;
}

}  // namespace dichlab
