#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/zeta.hpp>

#include "rpchain/interaction.hpp"

namespace rpchain {

namespace detail {
constexpr double pi = boost::math::constants::pi<double>();
}

/// R̂(p) together with how it was obtained.
struct RHatValue {
  double value = 0.0;
  double tail_bound = 0.0; // bound on the neglected part of the series
  int terms = 0;           // series terms used
  bool divergent = false;
};

/// Evaluates R̂(p) = 4 Σ_{j≥1} W(j)(1 − cos pj).
///
/// For the power-law kind the lattice sum equals 4A[ζ(α) − Re Li_α(e^{ip})]
/// and is evaluated through the small-|μ| expansion of the polylogarithm at
/// μ = ip, which converges geometrically with ratio (p/2π)² on |p| ≤ π.
/// Coefficients are cached, so reuse one instance for many p.
class RHat {
public:
  explicit RHat(const InteractionSpec& spec, double series_tol = 1e-15) : spec_(spec), tol_(series_tol)
  {
    if (spec.kind != InteractionKind::power_law) return;
    const double a = spec.alpha;
    if (a <= 1.0) {
      divergent_ = true; // Σ j^{-α} diverges while Σ j^{-α} cos(pj) converges
      return;
    }
    const double rounded = std::round(a);
    integer_ = std::abs(a - rounded) < 1e-12;
    n_ = static_cast<int>(rounded);
    for (int m = 1; m <= kMaxTerms; ++m) {
      const int k = 2 * m;
      if (integer_ && k == n_ - 1) {
        coeff_.push_back(0.0); // handled by the logarithmic term
        continue;
      }
      const double z = boost::math::zeta(a - k);
      // −ζ(α−k)·Re((ip)^k)/k!  with Re((ip)^k) = (−1)^m p^k
      const double sign = (m % 2 == 0) ? 1.0 : -1.0;
      coeff_.push_back(-z * sign / std::tgamma(k + 1.0));
    }
    if (!integer_) lead_ = -std::tgamma(1.0 - a) * std::cos(detail::pi * (a - 1.0) / 2.0);
  }

  RHatValue operator()(double p) const
  {
    p = std::abs(p);
    if (p > detail::pi * (1.0 + 1e-12)) throw std::domain_error("r_hat requires |p| <= pi");
    RHatValue r;
    switch (spec_.kind) {
      case InteractionKind::none: return r;
      case InteractionKind::nearest:
        r.value = 4.0 * w_of(spec_, 1) * (1.0 - std::cos(p));
        r.terms = 1;
        return r;
      case InteractionKind::table:
        for (const auto& [j, v] : spec_.table) {
          if (j <= 0) continue;
          r.value += 4.0 * w_of(spec_, j) * (1.0 - std::cos(p * static_cast<double>(j)));
          ++r.terms;
        }
        return r;
      case InteractionKind::power_law: break;
    }
    if (divergent_) {
      r.divergent = true;
      r.value = std::numeric_limits<double>::infinity();
      return r;
    }
    if (p == 0.0) return r;
    double s = 0.0;
    if (integer_) {
      // μ^{n−1}/(n−1)! [H_{n−1} − ln(−μ)] with μ = ip, ln(−ip) = ln p − iπ/2
      double harmonic = 0.0;
      for (int k = 1; k <= n_ - 1; ++k) harmonic += 1.0 / k;
      const std::complex<double> mu(0.0, p);
      const std::complex<double> lg(std::log(p), -detail::pi / 2.0);
      const std::complex<double> term = std::pow(mu, n_ - 1) / std::tgamma(static_cast<double>(n_)) * (harmonic - lg);
      s -= term.real();
      // odd k = n−1 contributes only through the logarithmic term; even k handled below
    } else {
      s += lead_ * std::pow(p, spec_.alpha - 1.0);
    }
    const double p2 = p * p;
    double pk = 1.0;
    double last = 0.0;
    int used = 0;
    for (std::size_t m = 0; m < coeff_.size(); ++m) {
      pk *= p2;
      const double term = coeff_[m] * pk;
      s += term;
      ++used;
      last = std::abs(term);
      if (m >= 2 && last <= tol_ * std::max(1.0, std::abs(s)) * 1e-2) break;
    }
    r.value = 4.0 * spec_.amplitude * s;
    r.terms = used + 1;
    // remaining terms decay at least geometrically with ratio (p/2π)² ≤ 1/4
    r.tail_bound = 4.0 * spec_.amplitude * last * (4.0 / 3.0);
    return r;
  }

  const InteractionSpec& spec() const { return spec_; }

private:
  static constexpr int kMaxTerms = 80;
  InteractionSpec spec_;
  double tol_;
  bool divergent_ = false;
  bool integer_ = false;
  int n_ = 0;
  double lead_ = 0.0;
  std::vector<double> coeff_;
};

inline double r_hat(const InteractionSpec& spec, double p, double series_tol = 1e-15)
{
  return RHat(spec, series_tol)(p).value;
}

/// F(p) = 2t(1 + cos p).
inline double f_of(double t, double p) { return 2.0 * t * (1.0 + std::cos(p)); }

struct C2Diagnostic {
  bool holds = false;
  double exponent = 0.0;        // fitted κ in R̂(p) ≈ C p^κ near p = 0
  double divergence_rate = 0.0; // κ/2, the small-p exponent of R̂^{-1/2}
  std::optional<double> value;  // ∫_T R̂^{-1/2} dp when convergent
};

struct IRBoundResult {
  std::optional<double> sigma;
  std::optional<double> integral_value;   // ∫_T √(F/R̂) dp
  double quadrature_error_estimate = 0.0; // heuristic, not a rigorous enclosure
  std::optional<double> t_star;
  bool c2_holds = false;
  double split_point = 0.0;
  double fitted_exponent = 0.0;
  double fitted_prefactor = 0.0;
  double endpoint_part = 0.0; // contribution of (0, split] on one side
  double bulk_part = 0.0;     // contribution of [split, π] on one side
  double bulk_error = 0.0;
  double endpoint_error = 0.0;
  int series_terms = 0;
  double series_tail_bound = 0.0;
  std::string diagnostic;
};

struct IRBoundOptions {
  double split = 1e-2;          // endpoint region (0, split]
  double quad_tol = 1e-10;      // relative tolerance of the adaptive rule
  double fit_lo = 1e-4;         // exponent-fit window for condition C2
  double fit_hi = 1e-2;
  double c2_margin = 5e-3;      // κ < 2 − margin counts as integrable
};

namespace detail {

/// Two-point power-law fit R̂ ≈ C p^κ from R̂(p0) and R̂(p0/2).
inline std::pair<double, double> power_fit(const RHat& rh, double p0)
{
  const double r1 = rh(p0).value;
  const double r2 = rh(p0 / 2.0).value;
  const double kappa = std::log2(r1 / r2);
  return {r1 / std::pow(p0, kappa), kappa};
}

/// ∫_0^{p0} w(p) (C p^κ)^{-1/2} dp with w = cos(p/2) (weighted) or w = 1.
inline double endpoint_integral(double C, double kappa, double p0, bool weighted)
{
  const double e = -kappa / 2.0;
  if (!weighted) return std::pow(p0, 1.0 + e) / (1.0 + e) / std::sqrt(C);
  double s = 0.0;
  double coef = 1.0; // (−1)^m / (4^m (2m)!)
  for (int m = 0; m < 12; ++m) {
    if (m > 0) coef *= -1.0 / (4.0 * (2.0 * m - 1.0) * (2.0 * m));
    s += coef * std::pow(p0, 2.0 * m + 1.0 + e) / (2.0 * m + 1.0 + e);
  }
  return s / std::sqrt(C);
}

/// One-sided ∫_0^π w(p) g(p) R̂^{-1/2} dp with endpoint extrapolation.
template <typename Bulk>
inline void split_integral(const RHat& rh, const IRBoundOptions& opt, double prefactor, bool weighted, Bulk bulk,
                           IRBoundResult& out)
{
  const double p0 = opt.split;
  auto [C, kappa] = power_fit(rh, p0);
  auto [C2, kappa2] = power_fit(rh, p0 / 2.0);
  const double end1 = prefactor * endpoint_integral(C, kappa, p0, weighted);
  // same model fitted one octave lower, integrated over the same interval
  const double end2 = prefactor * (endpoint_integral(C2, kappa2, p0 / 2.0, weighted) +
                                   (endpoint_integral(C, kappa, p0, weighted) -
                                    endpoint_integral(C, kappa, p0 / 2.0, weighted)));
  double err = 0.0;
  const double b = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(bulk, p0, pi, 20, opt.quad_tol,
                                                                                  &err);
  out.split_point = p0;
  out.fitted_exponent = kappa;
  out.fitted_prefactor = C;
  out.endpoint_part = end1;
  out.bulk_part = b;
  out.bulk_error = err * std::abs(b);
  out.endpoint_error = std::abs(end1 - end2);
}

} // namespace detail

/// Classifies condition C2 by the small-p exponent of R̂ and integrates R̂^{-1/2} when it converges.
inline C2Diagnostic c2_diagnostic(const InteractionSpec& spec, const IRBoundOptions& opt = {})
{
  C2Diagnostic d;
  const RHat rh(spec);
  const int npts = 21;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int k = 0; k < npts; ++k) {
    const double lp = std::log(opt.fit_lo) + (std::log(opt.fit_hi) - std::log(opt.fit_lo)) * k / (npts - 1);
    const RHatValue v = rh(std::exp(lp));
    if (v.divergent || !(v.value > 0.0)) {
      d.holds = false;
      d.exponent = std::numeric_limits<double>::infinity();
      d.divergence_rate = std::numeric_limits<double>::infinity();
      return d;
    }
    const double ly = std::log(v.value);
    sx += lp;
    sy += ly;
    sxx += lp * lp;
    sxy += lp * ly;
  }
  d.exponent = (npts * sxy - sx * sy) / (npts * sxx - sx * sx);
  d.divergence_rate = d.exponent / 2.0;
  d.holds = d.exponent < 2.0 - opt.c2_margin;
  if (d.holds) {
    IRBoundResult tmp;
    auto f = [&](double p) { return 1.0 / std::sqrt(rh(p).value); };
    detail::split_integral(rh, opt, 1.0, false, f, tmp);
    d.value = 2.0 * (tmp.endpoint_part + tmp.bulk_part);
  }
  return d;
}

/// σ = (1/4)(2π)^{1/2} − (2π)^{-1/2} ∫_T √(F(p)/R̂(p)) dp.
inline IRBoundResult sigma(const InteractionSpec& spec, double t, const IRBoundOptions& opt = {})
{
  if (!(t > 0.0)) throw std::invalid_argument("sigma requires t > 0");
  IRBoundResult out;
  const C2Diagnostic c2 = c2_diagnostic(spec, opt);
  out.c2_holds = c2.holds;
  out.fitted_exponent = c2.exponent;
  if (!c2.holds) {
    out.diagnostic = "R^-1/2 not integrable near p=0 (fitted exponent " + std::to_string(c2.exponent) + ")";
    return out;
  }
  const RHat rh(spec);
  auto f = [&](double p) { return std::sqrt(f_of(t, p) / rh(p).value); };
  // √F = 2√t cos(p/2) exactly, so the endpoint model integrates cos(p/2) p^{-κ/2}
  detail::split_integral(rh, opt, 2.0 * std::sqrt(t), true, f, out);
  const RHatValue at_pi = rh(detail::pi);
  out.series_terms = at_pi.terms;
  out.series_tail_bound = at_pi.tail_bound;
  const double integral = 2.0 * (out.endpoint_part + out.bulk_part);
  out.integral_value = integral;
  out.quadrature_error_estimate = 2.0 * (out.bulk_error + out.endpoint_error);
  const double root2pi = std::sqrt(2.0 * detail::pi);
  out.sigma = 0.25 * root2pi - integral / root2pi;
  return out;
}

/// Closed-form threshold from σ(t) = (1/4)(2π)^{1/2} − √t I₁.
inline std::optional<double> t_star(const InteractionSpec& spec, const IRBoundOptions& opt = {})
{
  const IRBoundResult r = sigma(spec, 1.0, opt);
  if (!r.integral_value) return std::nullopt;
  const double root2pi = std::sqrt(2.0 * detail::pi);
  const double i1 = *r.integral_value / root2pi;
  const double s = root2pi / (4.0 * i1);
  return s * s;
}

/// Root of σ(t) = 0 by bisection on direct σ evaluations.
inline std::optional<double> t_star_bisection(const InteractionSpec& spec, const IRBoundOptions& opt = {},
                                              double rel_tol = 1e-13)
{
  auto sig = [&](double t) { return sigma(spec, t, opt).sigma; };
  double lo = 0.0, hi = 1e-3;
  auto s_hi = sig(hi);
  if (!s_hi) return std::nullopt;
  while (*s_hi > 0.0) {
    lo = hi;
    hi *= 2.0;
    s_hi = sig(hi);
    if (hi > 1e12) return std::nullopt;
  }
  while (hi - lo > rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    if (*sig(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

} // namespace rpchain
