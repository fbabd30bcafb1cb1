#include "dichlab/rates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dichlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::invalid_argument bad(const std::string& what) { return std::invalid_argument(what); }

template <typename E, size_t N>
E parse_enum(const std::string& s, const std::pair<const char*, E> (&table)[N], const char* what) {
  for (const auto& [name, value] : table) {
    if (s == name) return value;
  }
  throw bad(std::string("unknown ") + what + " '" + s + "'");
}

const std::pair<const char*, Domain> kDomains[] = {{"one_sided", Domain::one_sided},
                                                   {"two_sided", Domain::two_sided}};
const std::pair<const char*, RateKind> kRateKinds[] = {{"exponential", RateKind::exponential},
                                                       {"polynomial", RateKind::polynomial},
                                                       {"logarithmic", RateKind::logarithmic},
                                                       {"doubly_exponential", RateKind::doubly_exponential},
                                                       {"table", RateKind::table}};
const std::pair<const char*, NuKind> kNuKinds[] = {
    {"uniform", NuKind::uniform}, {"power", NuKind::power}, {"table", NuKind::table}};

std::vector<double> table_values(Window window, const std::vector<std::pair<int, double>>& table,
                                 const char* what) {
  std::vector<double> out(static_cast<size_t>(window.size()), std::numeric_limits<double>::quiet_NaN());
  for (const auto& [index, value] : table) {
    if (!window.contains(index)) throw bad(std::string(what) + " table index outside window");
    out[static_cast<size_t>(index - window.first)] = value;
  }
  for (double v : out) {
    if (std::isnan(v)) throw bad(std::string(what) + " table does not cover the window");
  }
  return out;
}

}  // namespace

std::string to_string(Domain d) { return d == Domain::one_sided ? "one_sided" : "two_sided"; }

std::string to_string(RateKind k) {
  for (const auto& [name, value] : kRateKinds) {
    if (value == k) return name;
  }
  return "unknown";
}

std::string to_string(NuKind k) {
  for (const auto& [name, value] : kNuKinds) {
    if (value == k) return name;
  }
  return "unknown";
}

Domain domain_from_string(const std::string& s) { return parse_enum(s, kDomains, "domain"); }
RateKind rate_kind_from_string(const std::string& s) { return parse_enum(s, kRateKinds, "rate kind"); }
NuKind nu_kind_from_string(const std::string& s) { return parse_enum(s, kNuKinds, "nu kind"); }

GrowthRate::GrowthRate(Domain domain, RateKind kind, Window window, std::vector<double> log_mu)
    : domain_(domain), kind_(kind), window_(window), log_mu_(std::move(log_mu)) {
  if (window_.size() < 1) throw bad("growth rate window is empty");
  if (static_cast<int>(log_mu_.size()) != window_.size()) throw bad("growth rate size does not match window");
  if (domain_ == Domain::one_sided && window_.first < 0) throw bad("one-sided growth rate window starts below 0");
  for (size_t i = 0; i < log_mu_.size(); ++i) {
    if (!std::isfinite(log_mu_[i])) throw bad("growth rate has a non-finite log value");
    if (i > 0 && !(log_mu_[i] > log_mu_[i - 1])) throw bad("growth rate is not strictly increasing");
  }
}

double GrowthRate::log_mu(int n) const {
  if (!window_.contains(n)) throw std::out_of_range("growth rate index outside window");
  return log_mu_[static_cast<size_t>(n - window_.first)];
}

bool GrowthRate::supports_abs_spaces() const {
  return domain_ == Domain::two_sided && log_mu_.front() < 0.0 && log_mu_.back() >= 0.0;
}

GrowthRate make_rate(RateKind kind, Domain domain, Window window, const RateParams& params) {
  if (window.size() < 1) throw bad("growth rate window is empty");
  if (kind == RateKind::table) {
    return GrowthRate(domain, kind, window, table_values(window, params.table, "growth rate"));
  }
  if ((kind == RateKind::polynomial || kind == RateKind::logarithmic) && domain == Domain::two_sided &&
      !(kind == RateKind::polynomial && params.two_sided_extension) && window.first < 0) {
    throw bad(to_string(kind) + " rate on negative indices requires the two-sided extension");
  }
  if (kind == RateKind::logarithmic && window.first < 0) throw bad("logarithmic rate on negative indices");
  if (kind == RateKind::exponential && !(params.scale > 0.0)) throw bad("exponential rate scale must be positive");

  std::vector<double> values;
  values.reserve(static_cast<size_t>(window.size()));
  for (int n = window.first; n <= window.last; ++n) {
    const double x = n;
    switch (kind) {
      case RateKind::exponential:
        values.push_back(params.scale * x);
        break;
      case RateKind::polynomial:
        // n < 0 only reachable through the extension mu_n = 1 / (1 - n).
        values.push_back(n >= 0 ? std::log1p(x) : -std::log1p(-x));
        break;
      case RateKind::logarithmic:
        values.push_back(std::log(std::log(2.0 + x)));
        break;
      case RateKind::doubly_exponential:
        values.push_back(std::exp(x));
        break;
      case RateKind::table:
        break;
    }
  }
  return GrowthRate(domain, kind, window, std::move(values));
}

int compute_n0(const GrowthRate& rate) {
  if (rate.domain() != Domain::two_sided) throw bad("n0 is defined for two-sided rates only");
  const auto values = rate.log_values();
  if (!(values.front() < 0.0)) throw bad("rate does not start below 1 on the window");
  for (size_t i = 0; i < values.size(); ++i) {
    if (values[i] >= 0.0) return rate.window().first + static_cast<int>(i);
  }
  throw bad("rate never reaches 1 on the window");
}

NuSequence::NuSequence(NuKind kind, Window window, std::vector<double> log_nu, double parameter)
    : kind_(kind), window_(window), log_nu_(std::move(log_nu)), parameter_(parameter) {
  if (static_cast<int>(log_nu_.size()) != window_.size()) throw bad("nu size does not match window");
  for (double v : log_nu_) {
    if (!std::isfinite(v)) throw bad("nu has a non-finite log value");
    if (v < 0.0) throw bad("nu_n must be >= 1");
  }
}

double NuSequence::log_nu(int n) const {
  if (!window_.contains(n)) throw std::out_of_range("nu index outside window");
  return log_nu_[static_cast<size_t>(n - window_.first)];
}

NuSequence NuSequence::scaled(double c) const {
  if (!(c >= 1.0)) throw bad("nu scale factor must be >= 1");
  std::vector<double> v = log_nu_;
  const double lc = std::log(c);
  for (double& x : v) x += lc;
  return NuSequence(kind_ == NuKind::uniform ? NuKind::uniform : NuKind::table, window_, std::move(v),
                    kind_ == NuKind::uniform ? parameter_ * c : 0.0);
}

NuSequence make_uniform_nu(const GrowthRate& rate, double constant) {
  if (!(constant >= 1.0)) throw bad("uniform nu constant must be >= 1");
  return NuSequence(NuKind::uniform, rate.window(),
                    std::vector<double>(static_cast<size_t>(rate.window().size()), std::log(constant)), constant);
}

NuSequence make_power_nu(const GrowthRate& rate, double epsilon) {
  if (!(epsilon >= 0.0)) throw bad("nu exponent must be >= 0");
  std::vector<double> v;
  v.reserve(rate.log_values().size());
  for (double lm : rate.log_values()) v.push_back(epsilon * std::abs(lm));
  return NuSequence(NuKind::power, rate.window(), std::move(v), epsilon);
}

NuSequence make_table_nu(Window window, const std::vector<std::pair<int, double>>& table) {
  return NuSequence(NuKind::table, window, table_values(window, table, "nu"));
}

WeightedNormSpec WeightedNormSpec::abs(double beta, NormKind p, const GrowthRate& rate) {
  if (!rate.supports_abs_spaces()) throw bad("abs-weighted norms need a two-sided rate crossing 1");
  return {beta, p, NormVariant::abs, compute_n0(rate)};
}

double log_weight(const WeightedNormSpec& spec, const GrowthRate& rate, int n) {
  const double lm = rate.log_mu(n);
  if (spec.variant == NormVariant::plain) return spec.beta * lm;
  const double b = std::abs(spec.beta);
  return n < spec.n0 ? b * lm : -b * lm;
}

double log_sum_exp(std::span<const double> terms) {
  double m = -kInf;
  for (double t : terms) m = std::max(m, t);
  if (!std::isfinite(m)) return m;
  // Neumaier summation of the rescaled terms.
  double sum = 0.0;
  double comp = 0.0;
  for (double t : terms) {
    const double v = std::exp(t - m);
    const double s = sum + v;
    comp += std::abs(sum) >= v ? (sum - s) + v : (v - s) + sum;
    sum = s;
  }
  return m + std::log(sum + comp);
}

double log_norm(const VectorSequence& x, const WeightedNormSpec& spec, const GrowthRate& rate,
                const NuSequence* nu) {
  if (spec.p == NormKind::one && nu == nullptr) throw bad("l1 weighted norm needs nu");
  if (spec.variant == NormVariant::abs && rate.domain() != Domain::two_sided) {
    throw bad("abs-weighted norm needs a two-sided rate");
  }
  const int dim = x.dim();
  std::vector<double> terms;
  terms.reserve(x.values.size());
  for (size_t i = 0; i < x.values.size(); ++i) {
    const int n = x.first + static_cast<int>(i);
    if (x.values[i].size() != dim) throw bad("dimension mismatch in vector sequence");
    const double len = x.values[i].norm();
    if (len == 0.0) continue;
    double t = log_weight(spec, rate, n) + std::log(len);
    if (spec.p == NormKind::one) t += nu->log_nu(n);
    terms.push_back(t);
  }
  if (terms.empty()) return -kInf;
  if (spec.p == NormKind::infinity) return *std::max_element(terms.begin(), terms.end());
  return log_sum_exp(terms);
}

double norm(const VectorSequence& x, const WeightedNormSpec& spec, const GrowthRate& rate, const NuSequence* nu) {
  return std::exp(log_norm(x, spec, rate, nu));
}

}  // namespace dichlab
