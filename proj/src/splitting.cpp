#include "dichlab/splitting.hpp"

#include "dichlab/cocycle.hpp"
#include "dichlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace dichlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix thin_q(const Matrix& m) {
  if (m.cols() == 0) return Matrix(m.rows(), 0);
  Eigen::HouseholderQR<Matrix> qr(m);
  return qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
}

Matrix complement_basis(const Matrix& w, int d) {
  if (w.cols() == 0) return Matrix::Identity(d, d);
  if (w.cols() >= d) return Matrix(d, 0);
  Eigen::HouseholderQR<Matrix> qr(w);
  const Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  return q.rightCols(d - w.cols());
}

double min_distance(const std::vector<double>& rho, double cutoff) {
  double m = kInf;
  for (double r : rho) m = std::min(m, std::abs(r - cutoff));
  return m;
}

double largest_gap_cutoff(const std::vector<double>& sorted_desc, double fallback) {
  double best = -1.0;
  double cut = fallback;
  for (size_t i = 0; i + 1 < sorted_desc.size(); ++i) {
    const double hi = sorted_desc[i];
    const double lo = sorted_desc[i + 1];
    if (!std::isfinite(hi)) continue;
    const double g = std::isfinite(lo) ? hi - lo : kInf;
    const double mid = std::isfinite(lo) ? 0.5 * (hi + lo) : hi - 1.0;
    // Ties go to the gap whose midpoint lies nearer the fixed cutoff.
    if (g > best || (g == best && std::abs(mid - fallback) < std::abs(cut - fallback))) {
      best = g;
      cut = mid;
    }
  }
  return cut;
}

std::string at_index(int n) { return " at n = " + std::to_string(n); }

double angle_between(const Matrix& a, const Matrix& b) {
  if (a.cols() == 0 || b.cols() == 0) return std::numbers::pi / 2;
  const std::vector<double> angles = principal_angles(a, b);
  return angles.front();
}

}  // namespace

std::string to_string(SubspaceRole r) { return r == SubspaceRole::stable ? "stable" : "unstable"; }
std::string to_string(CutoffRule r) { return r == CutoffRule::fixed ? "fixed" : "largest_gap"; }

CutoffRule cutoff_rule_from_string(const std::string& s) {
  if (s == "fixed") return CutoffRule::fixed;
  if (s == "largest_gap") return CutoffRule::largest_gap;
  throw std::invalid_argument("unknown cutoff rule '" + s + "'");
}

double resolve_horizon(const ClassifyOptions& options, const GrowthRate& rate, Window window) {
  if (!std::isnan(options.horizon)) return options.horizon;
  return (rate.log_mu(window.last) - rate.log_mu(window.first)) / 3.0;
}

Classification classify(const LinearSystem& sys, int n, const GrowthRate& rate, const ClassifyOptions& options) {
  const Window w = sys.window();
  if (n < w.first || n >= w.last) throw std::out_of_range("classification index needs at least one step to the right");
  if (!rate.window().contains(w)) throw std::invalid_argument("growth rate does not cover the system window");
  const int d = sys.dim();
  const double span = ExtLog::exact_diff(rate.log_mu(w.last), rate.log_mu(n)).value();

  const ScaledMatrix prod = evolution(sys, w.last, n);
  Eigen::JacobiSVD<Matrix> svd(prod.mantissa, Eigen::ComputeFullU | Eigen::ComputeFullV);

  // log sigma_i through the factors, in the flag of the product's right
  // singular vectors.
  Matrix q = svd.matrixV();
  std::vector<ExtLog> acc(static_cast<size_t>(d), ExtLog(0.0));
  for (int k = n; k < w.last; ++k) {
    const ScaledMatrix& a = sys.step(k);
    Eigen::HouseholderQR<Matrix> qr(a.mantissa * q);
    q = qr.householderQ() * Matrix::Identity(d, d);
    const Matrix& r = qr.matrixQR();
    for (int i = 0; i < d; ++i) {
      const double rii = std::abs(r(i, i));
      auto& s = acc[static_cast<size_t>(i)];
      s = (rii == 0.0 || a.is_zero()) ? ExtLog::neg_inf() : (s.is_finite() ? s + a.log_scale + ExtLog(std::log(rii)) : s);
    }
  }

  Classification c;
  c.n = n;
  c.end = w.last;
  for (const auto& s : acc) c.exponents.push_back(s.is_finite() ? s.value() / span : -kInf);
  std::sort(c.exponents.begin(), c.exponents.end(), std::greater<>());
  c.cutoff = options.rule == CutoffRule::fixed ? options.cutoff : largest_gap_cutoff(c.exponents, options.cutoff);
  c.unstable_count = static_cast<int>(
      std::count_if(c.exponents.begin(), c.exponents.end(), [&](double r) { return r >= c.cutoff; }));
  c.gap = 2.0 * min_distance(c.exponents, c.cutoff);

  const int k = c.unstable_count;
  if (k == 0) {
    c.dominant_basis = Matrix(d, 0);
    c.stable_basis = Matrix::Identity(d, d);
  } else if (k == d) {
    c.dominant_basis = Matrix::Identity(d, d);
    c.stable_basis = Matrix(d, 0);
  } else {
    // Top-k right singular subspace as the span of A(last,n)^T U_k, built by
    // a QR sweep backwards through the transposed factors.
    Matrix top = svd.matrixU().leftCols(k);
    for (int j = w.last - 1; j >= n; --j) top = thin_q(sys.step(j).mantissa.transpose() * top);
    c.dominant_basis = top;
    c.stable_basis = complement_basis(top, d);
  }
  return c;
}

SubspaceBasis stable_subspace(const LinearSystem& sys, int n, const GrowthRate& rate, const ClassifyOptions& options) {
  const Window w = sys.window();
  const double h = resolve_horizon(options, rate, w);
  if (n >= w.last || rate.log_mu(w.last) - rate.log_mu(n) < h) {
    throw AnalysisError("stable_subspace", "horizon to the right is shorter than " + std::to_string(h) + at_index(n));
  }
  const Classification c = classify(sys, n, rate, options);
  if (!(c.gap >= options.gap_threshold)) {
    std::ostringstream msg;
    msg << "no reliable splitting" << at_index(n) << ": no gap (width " << c.gap << " below threshold "
        << options.gap_threshold << ")";
    throw AnalysisError("stable_subspace", msg.str());
  }
  SubspaceBasis b;
  b.n = n;
  b.role = SubspaceRole::stable;
  b.basis = c.stable_basis;
  b.growth_exponents.assign(c.exponents.begin() + c.unstable_count, c.exponents.end());
  return b;
}

Matrix infer_z_candidate(const LinearSystem& sys, const GrowthRate& rate, const ClassifyOptions& options) {
  const Window w = sys.window();
  const Classification c = classify(sys, w.first, rate, options);
  if (!(c.gap >= options.gap_threshold)) {
    std::ostringstream msg;
    msg << "no reliable splitting" << at_index(w.first) << ": no gap (width " << c.gap << ")";
    throw AnalysisError("unstable_subspace", msg.str());
  }
  return c.dominant_basis;
}

std::vector<SubspaceBasis> unstable_subspaces(const LinearSystem& sys, const Matrix& z_basis, const GrowthRate& rate) {
  const Window w = sys.window();
  const int d = sys.dim();
  if (z_basis.cols() > 0 && z_basis.rows() != d) throw std::invalid_argument("Z basis has the wrong dimension");
  const int k = static_cast<int>(z_basis.cols());
  Matrix basis = k > 0 ? thin_q(z_basis) : Matrix(d, 0);
  std::vector<ExtLog> acc(static_cast<size_t>(k), ExtLog(0.0));
  std::vector<SubspaceBasis> out;
  out.reserve(static_cast<size_t>(w.size()));
  auto emit = [&](int n) {
    SubspaceBasis b;
    b.n = n;
    b.role = SubspaceRole::unstable;
    b.basis = basis;
    const double span = rate.log_mu(n) - rate.log_mu(w.first);
    for (const auto& s : acc) b.growth_exponents.push_back(n == w.first ? std::nan("") : s.value() / span);
    out.push_back(std::move(b));
  };
  emit(w.first);
  for (int n = w.first; n < w.last; ++n) {
    const ScaledMatrix& a = sys.step(n);
    if (k > 0) {
      const double top = spectral_norm(a.mantissa);
      Eigen::HouseholderQR<Matrix> qr(a.mantissa * basis);
      const Matrix& r = qr.matrixQR();
      for (int i = 0; i < k; ++i) {
        const double rii = std::abs(r(i, i));
        if (a.is_zero() || !(rii > kKernelSingularTolerance * top)) {
          throw AnalysisError("unstable_subspace", "forward image of U loses rank" + at_index(n));
        }
        acc[static_cast<size_t>(i)] += a.log_scale + ExtLog(std::log(rii));
      }
      basis = qr.householderQ() * Matrix::Identity(d, k);
    }
    emit(n + 1);
  }
  return out;
}

SubspaceBasis unstable_subspace(const LinearSystem& sys, int n, const Matrix& z_basis, const GrowthRate& rate) {
  if (!sys.window().contains(n)) throw std::out_of_range("index outside window");
  return unstable_subspaces(sys, z_basis, rate)[static_cast<size_t>(n - sys.window().first)];
}

SubspaceBasis unstable_subspace_two_sided(const LinearSystem& sys, int n, const GrowthRate& rate,
                                          const ClassifyOptions& options) {
  const Window w = sys.window();
  if (!w.contains(n)) throw std::out_of_range("index outside window");
  const double h = resolve_horizon(options, rate, w);
  if (rate.log_mu(n) - rate.log_mu(w.first) < h) {
    throw AnalysisError("unstable_subspace", "horizon to the left is shorter than " + std::to_string(h) + at_index(n));
  }
  return unstable_subspace(sys, n, infer_z_candidate(sys, rate, options), rate);
}

ProjectionFamily build_projections(int first, const std::vector<Matrix>& stable, const std::vector<Matrix>& unstable) {
  if (stable.size() != unstable.size() || stable.empty()) {
    throw std::invalid_argument("need matching non-empty stable and unstable basis lists");
  }
  std::vector<Matrix> ps;
  ps.reserve(stable.size());
  for (size_t i = 0; i < stable.size(); ++i) {
    const Matrix& s = stable[i];
    const Matrix& u = unstable[i];
    const int d = static_cast<int>(s.rows());
    const int n = first + static_cast<int>(i);
    if (s.cols() + u.cols() != d || (u.cols() > 0 && u.rows() != d)) {
      throw AnalysisError("build_projections", "stable and unstable dimensions do not add up to d" + at_index(n));
    }
    Matrix b(d, d);
    b << s, u;
    if (inverse_condition(b) < 1e-12) {
      throw AnalysisError("build_projections", "S(n) and U(n) are not complementary" + at_index(n));
    }
    const Matrix inv = b.inverse();
    ps.push_back(s * inv.topRows(s.cols()));
  }
  return ProjectionFamily(first, std::move(ps));
}

SZeroBetaCheck s_beta_zero_check(const LinearSystem& sys, const GrowthRate& rate, double beta, double gap_threshold) {
  if (sys.domain() != Domain::one_sided) throw std::invalid_argument("the S_beta(0) check is for one-sided systems");
  if (!(beta > 0.0)) throw std::invalid_argument("the S_beta(0) check needs beta > 0");
  const int first = sys.window().first;
  ClassifyOptions zero;
  zero.gap_threshold = gap_threshold;
  ClassifyOptions shifted = zero;
  shifted.cutoff = -beta;
  const Classification c0 = classify(sys, first, rate, zero);
  const Classification cb = classify(sys, first, rate, shifted);
  for (const auto* c : {&c0, &cb}) {
    if (!(c->gap >= gap_threshold)) {
      std::ostringstream msg;
      msg << "no gap at cutoff " << c->cutoff << " (width " << c->gap << ")";
      throw AnalysisError("s_beta_zero_check", msg.str());
    }
  }
  SZeroBetaCheck out;
  out.beta = beta;
  out.basis_s0 = {first, SubspaceRole::stable, c0.stable_basis,
                  std::vector<double>(c0.exponents.begin() + c0.unstable_count, c0.exponents.end())};
  out.basis_sbeta = {first, SubspaceRole::stable, cb.stable_basis,
                     std::vector<double>(cb.exponents.begin() + cb.unstable_count, cb.exponents.end())};
  out.gap_s0 = c0.gap;
  out.gap_sbeta = cb.gap;
  out.max_angle = max_principal_angle(c0.stable_basis, cb.stable_basis);
  out.equal = out.max_angle <= 1e-8;
  return out;
}

GreenBoundReport green_bound(const LinearSystem& sys, const ProjectionFamily& proj, const GrowthRate& rate,
                             const NuSequence& nu, double beta) {
  const SplitCocycle c(sys, proj);
  GreenBoundReport g;
  g.beta = beta;
  g.log_sup = -kInf;
  for_each_block_norm(c, [&](const BlockNorm& b) {
    if (b.branch == Branch::unstable && b.m == b.n) return;
    const double sep = std::abs(ExtLog::exact_diff(rate.log_mu(b.m), rate.log_mu(b.n)).value());
    const double v = b.log_norm() + beta * sep - nu.log_nu(b.n);
    if (v > g.log_sup) {
      g.log_sup = v;
      g.argmax_m = b.m;
      g.argmax_n = b.n;
    }
  });
  g.sup = std::exp(g.log_sup);
  g.finite = std::isfinite(g.log_sup) && std::isfinite(g.sup);
  return g;
}

CharacterizeResult characterize(const LinearSystem& sys, const GrowthRate& rate, const NuSequence& nu,
                                const std::optional<Matrix>& z_hint, const CharacterizeOptions& options) {
  const Window w = sys.window();
  const int d = sys.dim();
  const ClassifyOptions& co = options.classify;
  const double h = resolve_horizon(co, rate, w);
  const bool two_sided = sys.domain() == Domain::two_sided;

  Window core{w.first, w.last};
  if (two_sided) {
    while (core.first <= w.last && rate.log_mu(core.first) - rate.log_mu(w.first) < h) ++core.first;
  }
  while (core.last >= w.first && rate.log_mu(w.last) - rate.log_mu(core.last) < h) --core.last;
  if (core.last - core.first < 1) {
    throw AnalysisError("characterize", "window too short: no core indices with a horizon of " + std::to_string(h));
  }

  SplittingReport rep;
  rep.core = core;
  rep.horizon = h;
  rep.gap = kInf;
  std::vector<Matrix> s_bases;
  for (int n = core.first; n <= core.last; ++n) {
    const Classification c = classify(sys, n, rate, co);
    if (!(c.gap >= co.gap_threshold)) {
      std::ostringstream msg;
      msg << "no reliable splitting" << at_index(n) << ": no gap (width " << c.gap << " below threshold "
          << co.gap_threshold << ")";
      throw AnalysisError("stable_subspace", msg.str());
    }
    const int ds = static_cast<int>(c.stable_basis.cols());
    if (!s_bases.empty() && ds != s_bases.front().cols()) {
      throw AnalysisError("stable_subspace", "stable dimension changes" + at_index(n));
    }
    s_bases.push_back(c.stable_basis);
    rep.stable_exponents.emplace_back(c.exponents.begin() + c.unstable_count, c.exponents.end());
    rep.rows.push_back(SplitRow{n, c.gap, 0.0, 0.0});
    rep.gap = std::min(rep.gap, c.gap);
  }
  rep.stable_dim = static_cast<int>(s_bases.front().cols());

  const Matrix z = (!two_sided && z_hint) ? *z_hint : infer_z_candidate(sys, rate, co);
  if (z.cols() != d - rep.stable_dim) {
    throw AnalysisError("unstable_subspace", "Z has dimension " + std::to_string(z.cols()) +
                                                 " but the stable subspace has codimension " +
                                                 std::to_string(d - rep.stable_dim));
  }
  const std::vector<SubspaceBasis> u_all = unstable_subspaces(sys.restricted({w.first, core.last}), z, rate);
  std::vector<Matrix> u_bases;
  for (int n = core.first; n <= core.last; ++n) u_bases.push_back(u_all[static_cast<size_t>(n - w.first)].basis);

  ProjectionFamily proj = build_projections(core.first, s_bases, u_bases);
  const LinearSystem core_sys = sys.restricted(core);

  rep.min_angle = kInf;
  for (size_t i = 0; i < rep.rows.size(); ++i) {
    auto& row = rep.rows[i];
    row.min_angle = angle_between(s_bases[i], u_bases[i]);
    row.projection_norm = spectral_norm(proj.at(row.n));
    rep.min_angle = std::min(rep.min_angle, row.min_angle);
    if (s_bases[i].cols() > 0 && u_bases[i].cols() > 0) {
      rep.max_angle_identity =
          std::max(rep.max_angle_identity, std::abs(row.projection_norm * std::sin(row.min_angle) - 1.0));
    }
    if (i + 1 < rep.rows.size()) {
      const Matrix& a = sys.step(row.n).mantissa;
      if (s_bases[i].cols() > 0) {
        rep.max_stable_invariance = std::max(
            rep.max_stable_invariance,
            max_principal_angle(orthonormal_span(a * s_bases[i], static_cast<int>(s_bases[i].cols())), s_bases[i + 1]));
      }
      if (u_bases[i].cols() > 0) {
        rep.max_unstable_invariance = std::max(
            rep.max_unstable_invariance,
            max_principal_angle(orthonormal_span(a * u_bases[i], static_cast<int>(u_bases[i].cols())), u_bases[i + 1]));
      }
    }
  }
  rep.pass = rep.max_stable_invariance <= 1e-8 && rep.max_unstable_invariance <= 1e-8;

  const DichotomyCertificate cert = fit_certificate(core_sys, proj, rate, nu);
  DichotomyLedger ledger = verify_dichotomy(core_sys, proj, rate, nu, cert.D, cert.lambda, options.verify);
  const double gb = std::isnan(options.green_beta) ? 0.5 * cert.lambda : options.green_beta;
  GreenBoundReport green = green_bound(core_sys, proj, rate, nu, gb);

  double worst = -kInf;
  for (int n = core.first; n <= core.last; ++n) {
    worst = std::max(worst, std::log(spectral_norm(proj.at(n))) - std::log(cert.D) - nu.log_nu(n));
  }
  const bool proj_ok = worst <= std::log1p(options.projection_tolerance);
  const bool pass = ledger.pass && green.finite && proj_ok && rep.pass;
  return CharacterizeResult{core, std::move(proj), cert, std::move(ledger), std::move(rep), green, worst, proj_ok,
                            pass};
}

}  // namespace dichlab
