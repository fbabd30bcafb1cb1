#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dichlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Domain { one_sided, two_sided };
enum class RateKind { exponential, polynomial, logarithmic, doubly_exponential, table };
enum class NuKind { uniform, power, table };

std::string to_string(Domain d);
std::string to_string(RateKind k);
std::string to_string(NuKind k);
Domain domain_from_string(const std::string& s);
RateKind rate_kind_from_string(const std::string& s);
NuKind nu_kind_from_string(const std::string& s);

/// Closed integer interval [first, last].
struct Window {
  int first = 0;
  int last = 0;

  [[nodiscard]] int size() const { return last - first + 1; }
  [[nodiscard]] bool contains(int n) const { return n >= first && n <= last; }
  [[nodiscard]] bool contains(const Window& w) const { return w.first >= first && w.last <= last; }
  friend bool operator==(const Window&, const Window&) = default;
};

/// Strictly increasing positive sequence mu_n stored as log(mu_n).
///
/// Only logarithms are kept: mu_n = e^{e^n} is not representable as a
/// double beyond n = 6, but its log is.
class GrowthRate {
 public:
  GrowthRate(Domain domain, RateKind kind, Window window, std::vector<double> log_mu);

  [[nodiscard]] Domain domain() const { return domain_; }
  [[nodiscard]] RateKind kind() const { return kind_; }
  [[nodiscard]] Window window() const { return window_; }
  [[nodiscard]] double log_mu(int n) const;
  [[nodiscard]] std::span<const double> log_values() const { return log_mu_; }

  /// Two-sided rate whose window straddles mu = 1 (finite proxy for
  /// mu_n -> 0 at -infinity). Required by the |.|-weighted spaces.
  [[nodiscard]] bool supports_abs_spaces() const;

 private:
  Domain domain_;
  RateKind kind_;
  Window window_;
  std::vector<double> log_mu_;
};

struct RateParams {
  double scale = 1.0;                               // exponential: log mu_n = scale * n
  bool two_sided_extension = false;                 // polynomial on negative indices
  std::vector<std::pair<int, double>> table;        // (index, log mu) pairs
};

GrowthRate make_rate(RateKind kind, Domain domain, Window window, const RateParams& params = {});

/// Least window index with log mu_n >= 0.
int compute_n0(const GrowthRate& rate);

/// Nonuniformity sequence nu_n >= 1, as log(nu_n) >= 0.
class NuSequence {
 public:
  NuSequence(NuKind kind, Window window, std::vector<double> log_nu, double parameter = 0.0);

  [[nodiscard]] NuKind kind() const { return kind_; }
  [[nodiscard]] Window window() const { return window_; }
  [[nodiscard]] double log_nu(int n) const;
  [[nodiscard]] std::span<const double> log_values() const { return log_nu_; }
  /// The constant C (uniform) or exponent epsilon (power); 0 for tables.
  [[nodiscard]] double parameter() const { return parameter_; }

  /// c * nu, c >= 1.
  [[nodiscard]] NuSequence scaled(double c) const;

 private:
  NuKind kind_;
  Window window_;
  std::vector<double> log_nu_;
  double parameter_;
};

NuSequence make_uniform_nu(const GrowthRate& rate, double constant = 1.0);
/// nu_n = max(mu_n, 1/mu_n)^eps. Reduces to mu_n^eps wherever mu_n >= 1.
NuSequence make_power_nu(const GrowthRate& rate, double epsilon);
NuSequence make_table_nu(Window window, const std::vector<std::pair<int, double>>& table);

/// Finite family (x_n) for n in [first, first + size).
struct VectorSequence {
  int first = 0;
  std::vector<Vector> values;

  VectorSequence() = default;
  VectorSequence(Window w, int dim) : first(w.first), values(static_cast<size_t>(w.size()), Vector::Zero(dim)) {}

  [[nodiscard]] Window window() const { return {first, first + static_cast<int>(values.size()) - 1}; }
  [[nodiscard]] int dim() const { return values.empty() ? 0 : static_cast<int>(values.front().size()); }
  Vector& at(int n) { return values.at(static_cast<size_t>(n - first)); }
  [[nodiscard]] const Vector& at(int n) const { return values.at(static_cast<size_t>(n - first)); }
};

enum class NormKind { one, infinity };
enum class NormVariant { plain, abs };

struct WeightedNormSpec {
  double beta = 0.0;
  NormKind p = NormKind::infinity;
  NormVariant variant = NormVariant::plain;
  int n0 = 0;  // abs only

  static WeightedNormSpec plain(double beta, NormKind p) { return {beta, p, NormVariant::plain, 0}; }
  /// Abs variant with n0 taken from the rate.
  static WeightedNormSpec abs(double beta, NormKind p, const GrowthRate& rate);
};

/// log of the weight attached to index n: beta log mu_n (plain), or
/// +-|beta| log mu_n on either side of n0 (abs). Excludes nu.
double log_weight(const WeightedNormSpec& spec, const GrowthRate& rate, int n);

/// log of the weighted norm; -inf for the zero sequence, +inf on overflow.
double log_norm(const VectorSequence& x, const WeightedNormSpec& spec, const GrowthRate& rate,
                const NuSequence* nu = nullptr);

/// Weighted norm. The l^1 variants need nu; +inf is returned when the sum
/// overflows so that divergent inputs remain observable.
double norm(const VectorSequence& x, const WeightedNormSpec& spec, const GrowthRate& rate,
            const NuSequence* nu = nullptr);

/// log(sum_i exp(t_i)) with the maximum factored out.
double log_sum_exp(std::span<const double> terms);

}  // namespace dichlab
