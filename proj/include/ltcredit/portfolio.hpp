#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ltcredit/archimedean.hpp"
#include "ltcredit/errors.hpp"

namespace ltcredit {

/// A block of identical obligors: exposure c, default-scale multiplier l.
struct SubPortfolio {
  double c = 1.0;
  double l = 1.0;
  std::size_t count = 1;
};

class Portfolio {
 public:
  explicit Portfolio(std::vector<SubPortfolio> groups) : groups_(std::move(groups)) {
    if (groups_.empty()) throw DomainError("Portfolio: at least one sub-portfolio is required");
    for (std::size_t j = 0; j < groups_.size(); ++j) {
      const auto& g = groups_[j];
      if (!(g.c > 0.0) || !(g.l > 0.0) || g.count == 0) {
        throw DomainError("Portfolio: group " + std::to_string(j) + " needs c > 0, l > 0, count >= 1");
      }
      n_ += g.count;
    }
  }

  static Portfolio homogeneous(std::size_t n, double c, double l) { return Portfolio({{c, l, n}}); }

  const std::vector<SubPortfolio>& groups() const noexcept { return groups_; }
  std::size_t size() const noexcept { return groups_.size(); }
  const SubPortfolio& group(std::size_t j) const {
    if (j >= groups_.size()) throw DomainError("Portfolio: group index " + std::to_string(j) + " out of range");
    return groups_[j];
  }

  /// Total obligor count n.
  std::size_t obligors() const noexcept { return n_; }

  /// w_j = n_j / n.
  double weight(std::size_t j) const { return static_cast<double>(group(j).count) / static_cast<double>(n_); }

  /// c-bar = sum_j c_j w_j, the per-obligor loss when everybody defaults.
  double mean_exposure() const noexcept {
    double s = 0.0;
    for (const auto& g : groups_) s += g.c * static_cast<double>(g.count);
    return s / static_cast<double>(n_);
  }

  double total_exposure() const noexcept { return mean_exposure() * static_cast<double>(n_); }

  double max_l() const noexcept {
    double m = 0.0;
    for (const auto& g : groups_) m = std::max(m, g.l);
    return m;
  }

  bool equal_exposures() const noexcept {
    return std::all_of(groups_.begin(), groups_.end(), [&](const SubPortfolio& g) { return g.c == groups_[0].c; });
  }

 private:
  std::vector<SubPortfolio> groups_;
  std::size_t n_ = 0;
};

/// Marginal default probability scale f_n.
class DefaultScale {
 public:
  enum class Kind { reciprocal, log_reciprocal, constant };

  static DefaultScale reciprocal() { return DefaultScale(Kind::reciprocal, 0.0); }
  static DefaultScale log_reciprocal() { return DefaultScale(Kind::log_reciprocal, 0.0); }
  static DefaultScale constant(double value) {
    if (!(value > 0.0 && value < 1.0)) throw DomainError("DefaultScale: constant f_n must lie in (0,1)");
    return DefaultScale(Kind::constant, value);
  }

  Kind kind() const noexcept { return kind_; }

  double value(std::size_t n) const {
    double f = constant_;
    switch (kind_) {
      case Kind::reciprocal:
        f = 1.0 / static_cast<double>(n);
        break;
      case Kind::log_reciprocal:
        f = 1.0 / std::log(static_cast<double>(n));
        break;
      case Kind::constant:
        break;
    }
    if (!(f > 0.0 && f < 1.0)) {
      throw DomainError("DefaultScale: f_n = " + std::to_string(f) + " is not in (0,1) for n = " + std::to_string(n));
    }
    return f;
  }

  /// f_n for the portfolio, checking that every l_j f_n < 1.
  double value_for(const Portfolio& pf) const {
    const double f = value(pf.obligors());
    if (!(pf.max_l() * f < 1.0)) {
      throw DomainError("DefaultScale: max_j l_j * f_n = " + std::to_string(pf.max_l() * f) + " must be below 1");
    }
    return f;
  }

 private:
  DefaultScale(Kind kind, double v) : kind_(kind), constant_(v) {}
  Kind kind_;
  double constant_;
};

// Loss comparisons L > nb tolerate rounding in nb itself (e.g. 500 * 0.8).
inline constexpr double kLossRelTol = 1e-10;

inline bool exceeds(double loss, double threshold) noexcept {
  return loss > threshold + kLossRelTol * std::max(1.0, std::abs(threshold));
}

/// P(U_j > 1 - l_j f_n | V = v_raw) = 1 - exp(-v_raw phi(1 - l_j f_n)).
template <LtGenerator G>
double conditional_default_prob(const Portfolio& pf, double f_n, const G& gen, double v_raw, std::size_t j) {
  const auto& g = pf.group(j);
  if (!(g.l * f_n < 1.0)) throw DomainError("conditional_default_prob: l_j f_n must be below 1");
  return -std::expm1(-v_raw * gen.phi_one_minus(g.l * f_n));
}

/// Same probability parameterized by the scaled factor v = V phi(1 - f_n).
template <LtGenerator G>
double conditional_default_prob_scaled(const Portfolio& pf, double f_n, const G& gen, double v, std::size_t j) {
  return conditional_default_prob(pf, f_n, gen, v / gen.phi_one_minus(f_n), j);
}

/// r(v) = sum_j c_j w_j (1 - exp(-v l_j^alpha)).
inline double limiting_mean_loss(const Portfolio& pf, double alpha, double v) {
  if (!(v >= 0.0)) throw DomainError("limiting_mean_loss: v must be nonnegative");
  double r = 0.0;
  for (std::size_t j = 0; j < pf.size(); ++j) {
    const auto& g = pf.groups()[j];
    r += g.c * pf.weight(j) * -std::expm1(-v * std::pow(g.l, alpha));
  }
  return r;
}

/// r'(v) = sum_j c_j w_j l_j^alpha exp(-v l_j^alpha).
inline double limiting_mean_loss_derivative(const Portfolio& pf, double alpha, double v) {
  double d = 0.0;
  for (std::size_t j = 0; j < pf.size(); ++j) {
    const auto& g = pf.groups()[j];
    const double la = std::pow(g.l, alpha);
    d += g.c * pf.weight(j) * la * std::exp(-v * la);
  }
  return d;
}

/// Unique root v* of r(v) = b for b in (0, c-bar); bisection with bracket
/// doubling, |r(v*) - b| <= 1e-12 c-bar.
inline double solve_vstar(const Portfolio& pf, double alpha, double b) {
  const double cbar = pf.mean_exposure();
  if (!(b > 0.0 && b < cbar)) {
    throw DomainError("solve_vstar: b = " + std::to_string(b) + " must lie in (0, c-bar) with c-bar = " +
                      std::to_string(cbar));
  }
  const double tol = 1e-12 * cbar;
  double lo = 0.0;
  double hi = 1.0;
  while (limiting_mean_loss(pf, alpha, hi) <= b) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw NumericalError("solve_vstar: bracket diverged", b);
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 2000; ++it) {
    mid = 0.5 * (lo + hi);
    const double r = limiting_mean_loss(pf, alpha, mid);
    if (std::abs(r - b) <= tol) return mid;
    (r < b ? lo : hi) = mid;
    if (hi - lo <= 4 * std::numeric_limits<double>::epsilon() * hi) break;
  }
  const double residual = std::abs(limiting_mean_loss(pf, alpha, mid) - b);
  if (residual > tol) throw NumericalError("solve_vstar: bisection stalled", residual);
  return mid;
}

/// Loss threshold nb.
inline double loss_threshold(const Portfolio& pf, double b) { return static_cast<double>(pf.obligors()) * b; }

/// Smallest k with c_(1) + ... + c_(k) > nb for the given exposure order.
/// Returns nullopt when the total never exceeds nb.
inline std::optional<std::size_t> first_exceeding_index(std::span<const double> ordered_exposures, double nb) {
  double cum = 0.0;
  for (std::size_t i = 0; i < ordered_exposures.size(); ++i) {
    cum += ordered_exposures[i];
    if (exceeds(cum, nb)) return i + 1;
  }
  return std::nullopt;
}

struct ThresholdIndex {
  /// Set when all exposures are equal; heterogeneous portfolios resolve k per
  /// replication from the realized default order.
  std::optional<std::size_t> k;
  double nb = 0.0;
};

/// The order-statistic index k of the conditional MC estimator.
/// Equal exposures c: k = floor(nb / c) + 1 (first count whose loss strictly
/// exceeds nb).
inline ThresholdIndex threshold_index(const Portfolio& pf, double b) {
  if (!(b >= 0.0)) throw DomainError("threshold_index: b must be nonnegative");
  const double nb = loss_threshold(pf, b);
  if (!exceeds(pf.total_exposure(), nb)) {
    throw DomainError("threshold_index: loss level unattainable, nb = " + std::to_string(nb) +
                      " is not below total exposure " + std::to_string(pf.total_exposure()));
  }
  ThresholdIndex out{std::nullopt, nb};
  if (pf.equal_exposures()) {
    const double c = pf.groups()[0].c;
    double q = nb / c;
    const double r = std::round(q);
    if (std::abs(q - r) <= kLossRelTol * std::max(1.0, q)) q = r;
    out.k = static_cast<std::size_t>(std::floor(q)) + 1;
  }
  return out;
}

/// L_n = sum_j c_j d_j for per-group default counts d_j.
inline double realized_loss(const Portfolio& pf, std::span<const std::size_t> defaults) {
  if (defaults.size() != pf.size()) throw DomainError("realized_loss: one default count per group is required");
  double loss = 0.0;
  for (std::size_t j = 0; j < pf.size(); ++j) {
    const auto& g = pf.groups()[j];
    if (defaults[j] > g.count) {
      throw DomainError("realized_loss: group " + std::to_string(j) + " has more defaults than obligors");
    }
    loss += g.c * static_cast<double>(defaults[j]);
  }
  return loss;
}

}  // namespace ltcredit
