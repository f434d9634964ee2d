#pragma once

// One-sided (positive) stable law with Laplace transform exp(-s^beta),
// 0 < beta < 1. This is the mixing variable of the Gumbel copula with
// beta = 1/alpha.
//
// Density and survival function come from two representations:
//   * Zolotarev/Kanter integral over theta in (0, pi), evaluated with
//     adaptive Gauss-Kronrod on sub-intervals split where the exponent
//     A(theta) x^{-beta/(1-beta)} crosses fixed levels;
//   * the convergent power series in x^{-beta} (the "tail series").
// The series is used whenever its truncation plus cancellation error bound
// is below the target; otherwise quadrature.

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/sin_pi.hpp>

#include "ltcredit/errors.hpp"
#include "ltcredit/rng.hpp"

namespace ltcredit {

class PositiveStableLaw {
 public:
  /// Maximum number of tail-series terms tried before falling back to quadrature.
  static constexpr int kMaxSeriesTerms = 400;

  explicit PositiveStableLaw(double beta) : beta_(beta) {
    if (!(beta > 0.0 && beta < 1.0)) {
      throw DomainError("PositiveStableLaw: beta must lie in (0,1), got " + std::to_string(beta));
    }
    gamma_ = beta_ / (1.0 - beta_);
    auto coeffs = std::make_shared<SeriesCoefficients>();
    coeffs->log_pdf.resize(kMaxSeriesTerms);
    coeffs->log_sf.resize(kMaxSeriesTerms);
    coeffs->sign.resize(kMaxSeriesTerms);
    for (int k = 1; k <= kMaxSeriesTerms; ++k) {
      const double kb = k * beta_;
      const double lk = std::lgamma(k + 1.0);
      const double s = boost::math::sin_pi(kb);
      // (-1)^{k+1} sin(k pi beta)
      const double signed_sin = (k % 2 == 1 ? 1.0 : -1.0) * s;
      coeffs->sign[k - 1] = signed_sin;
      coeffs->log_pdf[k - 1] = std::lgamma(kb + 1.0) - lk;
      coeffs->log_sf[k - 1] = std::lgamma(kb) - lk;
    }
    coeffs_ = std::move(coeffs);
  }

  /// Construct the mixing law of a Gumbel copula with tail index alpha > 1.
  static PositiveStableLaw from_alpha(double alpha) {
    if (!(alpha > 1.0)) {
      throw DomainError("PositiveStableLaw::from_alpha: alpha must exceed 1, got " +
                        std::to_string(alpha));
    }
    return PositiveStableLaw(1.0 / alpha);
  }

  double beta() const noexcept { return beta_; }

  /// log of Zolotarev's function
  ///   A(theta) = sin((1-b)theta) sin(b theta)^{b/(1-b)} / sin(theta)^{1/(1-b)}.
  double log_zolotarev(double theta) const noexcept {
    if (theta <= 0.0) {
      return std::log1p(-beta_) + gamma_ * std::log(beta_);
    }
    return std::log(std::sin((1.0 - beta_) * theta)) + gamma_ * std::log(std::sin(beta_ * theta)) -
           (1.0 + gamma_) * std::log(std::sin(theta));
  }

  /// Exact draw by the Kanter transform: V = (A(Theta)/W)^{(1-b)/b}.
  double sample(RngStream& rng) const noexcept {
    const double theta = std::numbers::pi * rng.uniform_open();
    const double w = rng.exponential();
    double log_v = (log_zolotarev(theta) - std::log(w)) / gamma_;
    log_v = std::clamp(log_v, -kLogClamp, kLogClamp);
    return std::exp(log_v);
  }

  double pdf(double x) const {
    check_positive(x, "pdf");
    if (auto s = series(x, Kind::pdf)) return *s;
    return quadrature(x, Kind::pdf);
  }

  /// log density; finite wherever the density is representable in log space.
  double log_pdf(double x) const {
    check_positive(x, "log_pdf");
    if (auto l = log_series(x, Kind::pdf)) return *l;
    return std::log(quadrature(x, Kind::pdf));
  }

  double sf(double x) const {
    check_positive(x, "sf");
    if (auto s = series(x, Kind::sf)) return std::clamp(*s, 0.0, 1.0);
    return std::clamp(quadrature(x, Kind::sf), 0.0, 1.0);
  }

  double cdf(double x) const {
    check_positive(x, "cdf");
    if (auto s = series(x, Kind::sf)) return std::clamp(1.0 - *s, 0.0, 1.0);
    return std::clamp(quadrature(x, Kind::cdf), 0.0, 1.0);
  }

  /// Tail series only (no fallback); returns NaN when its error bound exceeds
  /// the target. Exposed for testing the crossover.
  double pdf_series(double x) const { return series(x, Kind::pdf).value_or(std::nan("")); }
  double sf_series(double x) const { return series(x, Kind::sf).value_or(std::nan("")); }

  /// Integral representation only.
  double pdf_quadrature(double x) const { return quadrature(x, Kind::pdf); }
  double sf_quadrature(double x) const { return quadrature(x, Kind::sf); }

 private:
  enum class Kind { pdf, sf, cdf };

  struct SeriesCoefficients {
    std::vector<double> log_pdf;  // log Gamma(kb+1)/k!
    std::vector<double> log_sf;   // log Gamma(kb)/k!
    std::vector<double> sign;     // (-1)^{k+1} sin(k pi b)
  };

  static constexpr double kLogClamp = 700.0;
  static constexpr double kSeriesRelTol = 1e-14;
  static constexpr double kQuadRelTol = 1e-9;
  static constexpr double kQuadAbsTol = 1e-9;

  static void check_positive(double x, const char* what) {
    if (!(x > 0.0)) {
      throw DomainError(std::string("PositiveStableLaw::") + what + ": x must be positive");
    }
  }

  // Returns log of the series value, or nullopt when the error bound misses
  // the target. Terms are summed relative to the k = 1 magnitude so that the
  // result stays representable far into the tail.
  std::optional<double> log_series(double x, Kind kind) const {
    const auto& c = *coeffs_;
    const auto& logc = (kind == Kind::pdf) ? c.log_pdf : c.log_sf;
    const double lx = std::log(x);
    const double base = (kind == Kind::pdf) ? -lx : 0.0;
    const double log_lead = logc[0] - beta_ * lx + base;
    double sum = 0.0;
    double max_term = 0.0;
    double prev_log_mag = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= kMaxSeriesTerms; ++k) {
      const double log_mag = logc[k - 1] - k * beta_ * lx + base;
      const double rel = log_mag - log_lead;
      if (rel > 700.0) return std::nullopt;
      const double mag = std::exp(rel);
      const double term = c.sign[k - 1] * mag;
      sum += term;
      max_term = std::max(max_term, std::abs(term));
      // Magnitude ratios decrease in k; once below 1/2 the remainder is
      // bounded by the current magnitude.
      const double log_ratio = log_mag - prev_log_mag;
      prev_log_mag = log_mag;
      if (k >= 2 && log_ratio <= -std::numbers::ln2) {
        const double rounding = max_term * k * std::numeric_limits<double>::epsilon();
        if (mag + rounding <= kSeriesRelTol * std::abs(sum)) {
          if (!(sum > 0.0)) return std::nullopt;
          return log_lead + std::log(sum) - std::log(std::numbers::pi);
        }
        if (rounding > kSeriesRelTol * std::abs(sum)) return std::nullopt;
      }
    }
    return std::nullopt;
  }

  std::optional<double> series(double x, Kind kind) const {
    if (auto l = log_series(x, kind)) return std::exp(*l);
    return std::nullopt;
  }

  double quadrature(double x, Kind kind) const {
    const double log_z = -gamma_ * std::log(x);
    auto log_h = [&](double theta) { return log_zolotarev(theta) + log_z; };

    // Breakpoints where log h crosses fixed levels. A(theta) increases from
    // A(0+) to +inf on (0, pi), so each level is crossed at most once.
    constexpr std::array<double, 13> levels = {-36.0, -30.0, -24.0, -18.0, -14.0, -10.0, -6.0,
                                               -3.0,  -1.0,  0.0,   1.0,   2.3,   3.81};  // h up to 45
    std::vector<double> points{0.0};
    for (double level : levels) {
      if (log_h(0.0) >= level) continue;
      double lo = 0.0;
      double hi = std::numbers::pi;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (log_h(mid) < level ? lo : hi) = mid;
      }
      const double p = 0.5 * (lo + hi);
      if (p > points.back() + 1e-14) points.push_back(p);
    }
    // Beyond h = 45 the cdf/pdf integrands are below e^{-45}.
    const bool truncate_tail = (kind != Kind::sf);
    if (!truncate_tail || points.size() == 1 || log_h(points.back()) < 3.8) {
      points.push_back(std::numbers::pi);
    }

    auto integrand = [&](double theta) -> double {
      const double lh = log_h(theta);
      if (lh > 6.6) {  // h > 735
        return kind == Kind::sf ? 1.0 : 0.0;
      }
      const double h = std::exp(lh);
      switch (kind) {
        case Kind::pdf:
          return h * std::exp(-h);
        case Kind::sf:
          return -std::expm1(-h);
        case Kind::cdf:
          return std::exp(-h);
      }
      return 0.0;
    };

    using Quad = boost::math::quadrature::gauss_kronrod<double, 31>;
    double total = 0.0;
    double total_err = 0.0;
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
      double err = 0.0;
      total += Quad::integrate(integrand, points[i], points[i + 1], 10, kQuadRelTol, &err);
      total_err += err;
    }
    double scale = 1.0 / std::numbers::pi;
    if (kind == Kind::pdf) scale *= gamma_ / x;
    const double value = total * scale;
    const double err = total_err * scale;
    // The Kronrod error estimate is pessimistic by several orders of magnitude.
    if (err > std::max(kQuadAbsTol, kQuadRelTol * std::abs(value))) {
      throw NumericalError("PositiveStableLaw: quadrature did not converge at x = " + std::to_string(x), err);
    }
    return value;
  }

  double beta_;
  double gamma_;  // beta / (1 - beta)
  std::shared_ptr<const SeriesCoefficients> coeffs_;
};

}  // namespace ltcredit
