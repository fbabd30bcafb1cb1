#pragma once

#include <cmath>
#include <limits>

namespace dichlab {

/// Double-double accumulator for log-domain bookkeeping.
///
/// Long products of step matrices carry their magnitude as a sum of
/// logarithms. For growth rates such as log(mu_n) = e^n the individual
/// terms reach 1e8 and plain double sums lose ~1e-8 absolute accuracy,
/// which is far above the slack tolerances used by the verifier. Sums of
/// exact differences log(mu_{n+1}) - log(mu_n) telescope exactly here.
class ExtLog {
 public:
  constexpr ExtLog() = default;
  constexpr ExtLog(double v) : hi_(v), lo_(0.0) {}  // NOLINT(google-explicit-constructor)

  static ExtLog exact_sum(double a, double b) {
    const double s = a + b;
    if (!std::isfinite(s)) return ExtLog(s);
    const double bb = s - a;
    const double err = (a - (s - bb)) + (b - bb);
    return ExtLog(s, err);
  }

  static ExtLog exact_diff(double a, double b) { return exact_sum(a, -b); }

  static ExtLog neg_inf() { return ExtLog(-std::numeric_limits<double>::infinity()); }

  [[nodiscard]] double hi() const { return hi_; }
  [[nodiscard]] double lo() const { return lo_; }
  [[nodiscard]] double value() const { return hi_ + lo_; }
  [[nodiscard]] bool is_finite() const { return std::isfinite(hi_); }

  ExtLog operator-() const { return ExtLog(-hi_, -lo_); }

  friend ExtLog operator+(const ExtLog& a, const ExtLog& b) {
    const ExtLog s = exact_sum(a.hi_, b.hi_);
    if (!s.is_finite()) return s;
    return renormalize(s.hi_, s.lo_ + a.lo_ + b.lo_);
  }
  friend ExtLog operator-(const ExtLog& a, const ExtLog& b) { return a + (-b); }

  friend ExtLog operator*(const ExtLog& a, double s) {
    const double p = a.hi_ * s;
    if (!std::isfinite(p)) return ExtLog(p);
    const double e = std::fma(a.hi_, s, -p) + a.lo_ * s;
    return renormalize(p, e);
  }
  friend ExtLog operator*(double s, const ExtLog& a) { return a * s; }

  ExtLog& operator+=(const ExtLog& o) { return *this = *this + o; }
  ExtLog& operator-=(const ExtLog& o) { return *this = *this - o; }

 private:
  constexpr ExtLog(double hi, double lo) : hi_(hi), lo_(lo) {}

  static ExtLog renormalize(double a, double b) {
    const double s = a + b;
    return ExtLog(s, b - (s - a));
  }

  double hi_ = 0.0;
  double lo_ = 0.0;
};

/// ln 2 split into a double-double pair.
inline ExtLog ln2_ext() {
  return ExtLog::exact_sum(0.6931471805599453, 2.3190468138462996e-17);
}

}  // namespace dichlab
