#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <string>
#include <vector>

#include "ltcredit/errors.hpp"
#include "ltcredit/rng.hpp"
#include "ltcredit/stable_dist.hpp"

namespace ltcredit {

/// An LT-Archimedean generator: phi with phi^{-1} the Laplace transform of a
/// positive mixing variable that the generator can hand out.
template <class G>
concept LtGenerator = requires(const G& g, double u, RngStream& rng) {
  { g.alpha() } -> std::convertible_to<double>;
  { g.phi(u) } -> std::convertible_to<double>;
  { g.phi_one_minus(u) } -> std::convertible_to<double>;
  { g.phi_inv(u) } -> std::convertible_to<double>;
  { g.mixing_law().sample(rng) } -> std::convertible_to<double>;
  { g.mixing_law().pdf(u) } -> std::convertible_to<double>;
  { g.mixing_law().sf(u) } -> std::convertible_to<double>;
};

/// Gumbel generator phi(t) = (-ln t)^alpha, alpha > 1.
class GumbelGenerator {
 public:
  explicit GumbelGenerator(double alpha) : alpha_(alpha), law_(PositiveStableLaw::from_alpha(alpha)) {}

  double alpha() const noexcept { return alpha_; }

  double phi(double u) const {
    if (!(u > 0.0 && u <= 1.0)) {
      throw DomainError("GumbelGenerator::phi: u must lie in (0,1], got " + std::to_string(u));
    }
    // u - 1 is exact for u >= 1/2.
    const double neg_log = (u >= 0.5) ? -std::log1p(u - 1.0) : -std::log(u);
    return std::pow(neg_log, alpha_);
  }

  /// phi(1 - eps) without forming 1 - eps.
  double phi_one_minus(double eps) const {
    if (!(eps >= 0.0 && eps < 1.0)) {
      throw DomainError("GumbelGenerator::phi_one_minus: eps must lie in [0,1), got " + std::to_string(eps));
    }
    return std::pow(-std::log1p(-eps), alpha_);
  }

  double phi_inv(double s) const {
    if (!(s >= 0.0)) {
      throw DomainError("GumbelGenerator::phi_inv: s must be nonnegative, got " + std::to_string(s));
    }
    return std::exp(-std::pow(s, 1.0 / alpha_));
  }

  const PositiveStableLaw& mixing_law() const noexcept { return law_; }

 private:
  double alpha_;
  PositiveStableLaw law_;
};

static_assert(LtGenerator<GumbelGenerator>);

/// Marshall-Olkin draw of copula uniforms given a realization v of the mixing
/// variable: U_i = phi^{-1}(R_i / v) with R_i i.i.d. standard exponential.
template <LtGenerator G>
std::vector<double> sample_uniforms(const G& gen, std::size_t n, double v, RngStream& rng) {
  if (!(v > 0.0)) throw DomainError("sample_uniforms: v must be positive");
  std::vector<double> u(n);
  for (auto& x : u) x = gen.phi_inv(rng.exponential() / v);
  return u;
}

}  // namespace ltcredit
