#pragma once

// Sharp large-n approximations for the tail probability P(L_n > nb) and the
// expected shortfall E[L_n | L_n > nb] under an LT-Archimedean copula whose
// generator is regularly varying at 1 with index alpha.

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "ltcredit/errors.hpp"
#include "ltcredit/portfolio.hpp"

namespace ltcredit {

struct AsymptoticInputs {
  Portfolio portfolio;
  double alpha;
  double f_n;
  double b;

  void validate() const {
    if (!(alpha > 1.0)) throw DomainError("AsymptoticInputs: alpha must exceed 1");
    if (!(f_n > 0.0 && f_n < 1.0)) throw DomainError("AsymptoticInputs: f_n must lie in (0,1)");
    const double cbar = portfolio.mean_exposure();
    if (!(b > 0.0 && b < cbar)) {
      throw DomainError("AsymptoticInputs: b must lie in (0, c-bar) with c-bar = " + std::to_string(cbar));
    }
  }
};

/// P(L_n > nb) ~ f_n (v*)^{-1/alpha} / Gamma(1 - 1/alpha).
inline double tail_probability_asymptotic(const AsymptoticInputs& in) {
  in.validate();
  const double vstar = solve_vstar(in.portfolio, in.alpha, in.b);
  return in.f_n * std::pow(vstar, -1.0 / in.alpha) / boost::math::tgamma(1.0 - 1.0 / in.alpha);
}

/// psi(alpha, b) = b + (v*)^{1/alpha} * int_{v*}^inf r'(v) v^{-1/alpha} dv,
/// by quadrature after rescaling v by the smallest l_j^alpha so the integrand
/// decays like e^{-u}.
inline double shortfall_ratio(const Portfolio& pf, double alpha, double b) {
  const double vstar = solve_vstar(pf, alpha, b);
  double slowest = std::numeric_limits<double>::infinity();
  for (const auto& g : pf.groups()) slowest = std::min(slowest, std::pow(g.l, alpha));

  const double inv_alpha = 1.0 / alpha;
  const double lower = vstar * slowest;
  auto integrand = [&](double u) {
    const double v = u / slowest;
    return limiting_mean_loss_derivative(pf, alpha, v) * std::pow(v, -inv_alpha) / slowest;
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  double err = 0.0;
  double l1 = 0.0;
  // exp_sinh integrates over (0, inf); shift the lower limit to zero.
  const double integral =
      integrator.integrate([&](double t) { return integrand(lower + t); }, 1e-14, &err, &l1);
  if (err > 1e-10 * std::abs(integral)) {
    throw NumericalError("shortfall_ratio: quadrature did not reach 1e-10 relative", err / std::abs(integral));
  }
  return b + integral * std::pow(vstar, inv_alpha);
}

/// Closed form for one group: psi = b + c Gamma(1 - 1/alpha, L) L^{1/alpha},
/// L = ln(c / (c - b)), Gamma(., .) the upper incomplete gamma function.
inline double shortfall_ratio_homogeneous(double alpha, double c, double b) {
  if (!(alpha > 1.0) || !(c > 0.0) || !(b > 0.0 && b < c)) {
    throw DomainError("shortfall_ratio_homogeneous: need alpha > 1 and 0 < b < c");
  }
  const double big_l = std::log(c / (c - b));
  return b + c * boost::math::tgamma(1.0 - 1.0 / alpha, big_l) * std::pow(big_l, 1.0 / alpha);
}

/// E[L_n | L_n > nb] ~ n psi(alpha, b).
inline double expected_shortfall_asymptotic(const AsymptoticInputs& in) {
  in.validate();
  return static_cast<double>(in.portfolio.obligors()) * shortfall_ratio(in.portfolio, in.alpha, in.b);
}

}  // namespace ltcredit
