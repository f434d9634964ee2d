#pragma once

// Monte Carlo estimators of P(L_n > nb) and E[L_n | L_n > nb]:
//   naive        -- V from the mixing law, binomial defaults per group;
//   importance   -- Pareto-spliced proposal for V, then exponential twist of
//                   the conditional Bernoulli probabilities;
//   conditional  -- integrate V out given the exponentials R_i, returning
//                   P(V > O_(k)).
//
// Every replication i draws from RngStream(seed).split(i), and per-replication
// values are reduced in index order, so results do not depend on the thread
// count.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ltcredit/archimedean.hpp"
#include "ltcredit/errors.hpp"
#include "ltcredit/portfolio.hpp"
#include "ltcredit/rng.hpp"

namespace ltcredit {

enum class EstimatorKind { naive, importance, conditional };

inline const char* to_string(EstimatorKind k) noexcept {
  switch (k) {
    case EstimatorKind::naive:
      return "naive";
    case EstimatorKind::importance:
      return "importance";
    case EstimatorKind::conditional:
      return "conditional";
  }
  return "?";
}

struct EstimatorConfig {
  Portfolio portfolio = Portfolio::homogeneous(500, 1.0, 0.5);
  double alpha = 1.5;
  DefaultScale scale = DefaultScale::reciprocal();
  double b = 0.8;
  std::size_t replications = 50'000;
  std::uint64_t seed = 20240101;
  double x0 = 1.0;
  EstimatorKind kind = EstimatorKind::conditional;
  unsigned threads = 1;

  void validate() const {
    if (!(alpha > 1.0)) throw DomainError("EstimatorConfig: alpha must exceed 1");
    if (replications < 2) throw DomainError("EstimatorConfig: at least 2 replications are required");
    if (!(x0 > 0.0)) throw DomainError("EstimatorConfig: x0 must be positive");
    if (threads == 0) throw DomainError("EstimatorConfig: threads must be at least 1");
    if (!(b >= 0.0)) throw DomainError("EstimatorConfig: b must be nonnegative");
    scale.value_for(portfolio);
  }
};

struct EstimateReport {
  double estimate = 0.0;
  double std_error = 0.0;
  /// 100 * std_error / estimate: relative error of the mean over m replications.
  double relative_error_pct = std::numeric_limits<double>::quiet_NaN();
  /// p(1-p) / per-replication variance; NaN when not applicable.
  double variance_reduction = std::numeric_limits<double>::quiet_NaN();
  bool variance_reduction_capped = false;
  bool relative_error_undefined = false;
  std::size_t replications = 0;
  std::uint64_t seed = 0;
  double wall_ms = 0.0;
  std::vector<std::string> warnings;
};

/// Per-replication state of the exponential twist.
struct TwistState {
  double theta = 0.0;
  std::vector<double> twisted;  // p_j^theta
  double cgf = 0.0;             // Lambda_{L_n|V}(theta)
};

/// Everything the samplers need, resolved once from a config.
template <LtGenerator G>
struct LossModel {
  Portfolio portfolio;
  G generator;
  double f_n;
  double nb;
  std::vector<double> hazard;  // phi(1 - l_j f_n)

  LossModel(Portfolio pf, G gen, double fn, double b)
      : portfolio(std::move(pf)), generator(std::move(gen)), f_n(fn), nb(loss_threshold(portfolio, b)) {
    if (!(f_n > 0.0 && f_n < 1.0)) throw DomainError("LossModel: f_n must lie in (0,1)");
    hazard.reserve(portfolio.size());
    for (const auto& g : portfolio.groups()) {
      if (!(g.l * f_n < 1.0)) throw DomainError("LossModel: l_j f_n must be below 1");
      hazard.push_back(generator.phi_one_minus(g.l * f_n));
    }
  }

  double b() const noexcept { return nb / static_cast<double>(portfolio.obligors()); }
};

inline LossModel<GumbelGenerator> make_model(const EstimatorConfig& cfg) {
  cfg.validate();
  return LossModel<GumbelGenerator>(cfg.portfolio, GumbelGenerator(cfg.alpha), cfg.scale.value_for(cfg.portfolio),
                                    cfg.b);
}

namespace detail {

// log(1 + e^x) without overflow.
inline double softplus(double x) noexcept { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double logistic(double x) noexcept {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Conditional default probability of group j in logit form, from the hazard
// a = V phi(1 - l_j f_n): log(1-p) = -a, log p = log(-expm1(-a)).
struct BernoulliLogits {
  std::vector<double> p;
  std::vector<double> logit;
};

template <LtGenerator G>
BernoulliLogits conditional_logits(const LossModel<G>& model, double v) {
  BernoulliLogits out;
  out.p.resize(model.hazard.size());
  out.logit.resize(model.hazard.size());
  for (std::size_t j = 0; j < model.hazard.size(); ++j) {
    const double a = v * model.hazard[j];
    const double p = -std::expm1(-a);
    out.p[j] = p;
    out.logit[j] = std::log(std::max(p, std::numeric_limits<double>::denorm_min())) + a;
  }
  return out;
}

inline std::size_t draw_binomial(std::size_t n, double p, RngStream& rng) {
  if (p <= 0.0) return 0;
  if (p >= 1.0) return n;
  std::binomial_distribution<long long> dist(static_cast<long long>(n), p);
  return static_cast<std::size_t>(dist(rng));
}

}  // namespace detail

/// Runs `one_rep(i, rng)` for i = 0..m-1 on `threads` workers, each
/// replication on its own substream. Output is indexed by replication.
template <class T, class Fn>
std::vector<T> run_replications(std::size_t m, std::uint64_t seed, unsigned threads, Fn&& one_rep) {
  std::vector<T> out(m);
  const RngStream root(seed);
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(m, 1))));
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      RngStream rng = root.split(i);
      out[i] = one_rep(i, rng);
    }
  };
  if (workers == 1) {
    work(0, m);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t begin = m * w / workers;
      const std::size_t end = m * (w + 1) / workers;
      pool.emplace_back([&, w, begin, end] {
        try {
          work(begin, end);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

/// Mean, standard error, relative error and variance reduction of
/// per-replication estimator values. The naive baseline variance is
/// p(1-p) with p the mean of `values`.
inline EstimateReport aggregate(std::span<const double> values) {
  if (values.size() < 2) throw DomainError("aggregate: at least 2 values are required");
  const double m = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / m;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double var = ss / (m - 1.0);

  EstimateReport r;
  r.replications = values.size();
  r.estimate = mean;
  r.std_error = std::sqrt(var / m);
  if (mean > 0.0) {
    r.relative_error_pct = 100.0 * r.std_error / mean;
  } else {
    r.relative_error_undefined = true;
    r.warnings.emplace_back("relative error undefined: estimate is zero");
  }
  const double baseline = mean * (1.0 - mean);
  if (var > 0.0) {
    r.variance_reduction = baseline / var;
  } else {
    r.variance_reduction = std::numeric_limits<double>::infinity();
    r.variance_reduction_capped = true;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Naive Monte Carlo

template <LtGenerator G>
double naive_loss(const LossModel<G>& model, RngStream& rng) {
  const double v = model.generator.mixing_law().sample(rng);
  double loss = 0.0;
  for (std::size_t j = 0; j < model.hazard.size(); ++j) {
    const auto& g = model.portfolio.groups()[j];
    const double p = -std::expm1(-v * model.hazard[j]);
    loss += g.c * static_cast<double>(detail::draw_binomial(g.count, p, rng));
  }
  return loss;
}

template <LtGenerator G>
double naive_tail_one_rep(const LossModel<G>& model, RngStream& rng) {
  return exceeds(naive_loss(model, rng), model.nb) ? 1.0 : 0.0;
}

// ---------------------------------------------------------------------------
// Importance sampling

/// Proposal density for V: the mixing density below x0, and above x0 a Pareto
/// tail with shape eta = -1 / log phi(1 - f_n) carrying mass P(V > x0).
struct ImportanceProposal {
  double x0;
  double eta;
  double sf_x0;
  double cdf_x0;
  double log_sf_x0;
  double log_eta;
};

template <LtGenerator G>
ImportanceProposal make_proposal(const LossModel<G>& model, double x0) {
  if (!(x0 > 0.0)) throw DomainError("make_proposal: x0 must be positive");
  const double log_phi = std::log(model.generator.phi_one_minus(model.f_n));
  if (!(log_phi < 0.0)) {
    throw DomainError("make_proposal: phi(1 - f_n) must be below 1 for a positive Pareto shape");
  }
  const auto& law = model.generator.mixing_law();
  ImportanceProposal p{};
  p.x0 = x0;
  p.eta = -1.0 / log_phi;
  p.sf_x0 = law.sf(x0);
  p.cdf_x0 = law.cdf(x0);
  p.log_sf_x0 = std::log(p.sf_x0);
  p.log_eta = std::log(p.eta);
  return p;
}

struct ProposalDraw {
  double v;
  double lr;  // f_V(v) / f*_V(v)
};

inline constexpr std::size_t kRejectionCap = 1'000'000;

/// One draw from the spliced proposal with its likelihood factor.
template <LtGenerator G>
ProposalDraw is_sample_v(const LossModel<G>& model, const ImportanceProposal& prop, RngStream& rng) {
  const auto& law = model.generator.mixing_law();
  if (rng.uniform_open() < prop.cdf_x0) {
    for (std::size_t tries = 0; tries < kRejectionCap; ++tries) {
      const double v = law.sample(rng);
      if (v < prop.x0) return {v, 1.0};
    }
    throw NumericalError("is_sample_v: rejection cap reached; x0 is too small", prop.cdf_x0);
  }
  const double log_u = std::log(rng.uniform_open());
  const double log_v = std::log(prop.x0) - log_u / prop.eta;
  const double v = std::exp(log_v);
  // log f*_V(v) = log sf(x0) + log eta + eta log x0 - (eta + 1) log v
  const double log_proposal = prop.log_sf_x0 + prop.log_eta + prop.eta * std::log(prop.x0) - (prop.eta + 1.0) * log_v;
  return {v, std::exp(law.log_pdf(v) - log_proposal)};
}

/// Twisted probabilities p_j^theta for a twist theta.
inline std::vector<double> twist_probabilities(const Portfolio& pf, std::span<const double> logits, double theta) {
  std::vector<double> out(pf.size());
  for (std::size_t j = 0; j < pf.size(); ++j) out[j] = detail::logistic(logits[j] + theta * pf.groups()[j].c);
  return out;
}

/// Lambda'(theta) = sum_j n_j c_j p_j^theta.
inline double twisted_mean_loss(const Portfolio& pf, std::span<const double> logits, double theta) {
  double s = 0.0;
  for (std::size_t j = 0; j < pf.size(); ++j) {
    const auto& g = pf.groups()[j];
    s += static_cast<double>(g.count) * g.c * detail::logistic(logits[j] + theta * g.c);
  }
  return s;
}

/// Lambda(theta) = sum_j n_j log(1 + p_j (e^{theta c_j} - 1)).
inline double twist_cgf(const Portfolio& pf, std::span<const double> logits, double theta) {
  double s = 0.0;
  for (std::size_t j = 0; j < pf.size(); ++j) {
    const auto& g = pf.groups()[j];
    // log(1 - p + p e^{theta c}) = softplus(logit + theta c) - softplus(logit)
    s += static_cast<double>(g.count) * (detail::softplus(logits[j] + theta * g.c) - detail::softplus(logits[j]));
  }
  return s;
}

/// Twist maximizing nb theta - Lambda(theta). The conditional default
/// probabilities are passed as logits log(p/(1-p)).
inline TwistState solve_theta_star_logit(const Portfolio& pf, std::span<const double> logits, double nb) {
  TwistState st;
  const double mean0 = twisted_mean_loss(pf, logits, 0.0);
  if (mean0 >= nb) {
    st.twisted = twist_probabilities(pf, logits, 0.0);
    return st;
  }
  if (!(nb < pf.total_exposure())) {
    throw DomainError("solve_theta_star: nb must be below the total exposure for the twist to exist");
  }
  const double tol = 1e-9 * nb;
  double lo = 0.0;
  double hi = 1.0;
  while (twisted_mean_loss(pf, logits, hi) < nb) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw NumericalError("solve_theta_star: bracket diverged", hi);
  }
  double theta = 0.5 * (lo + hi);
  for (int it = 0; it < 500; ++it) {
    const double f = twisted_mean_loss(pf, logits, theta) - nb;
    if (std::abs(f) <= tol) break;
    (f < 0.0 ? lo : hi) = theta;
    // Newton step with Lambda''(theta) = sum n_j c_j^2 p(1-p), kept inside the bracket.
    double slope = 0.0;
    for (std::size_t j = 0; j < pf.size(); ++j) {
      const auto& g = pf.groups()[j];
      const double q = detail::logistic(logits[j] + theta * g.c);
      slope += static_cast<double>(g.count) * g.c * g.c * q * (1.0 - q);
    }
    double next = (slope > 0.0) ? theta - f / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    theta = next;
  }
  const double residual = std::abs(twisted_mean_loss(pf, logits, theta) - nb);
  if (residual > tol) throw NumericalError("solve_theta_star: root not reached", residual / nb);
  st.theta = theta;
  st.twisted = twist_probabilities(pf, logits, theta);
  st.cgf = twist_cgf(pf, logits, theta);
  return st;
}

/// Same, from probabilities p_j in (0,1).
inline TwistState solve_theta_star(const Portfolio& pf, std::span<const double> p, double nb) {
  if (p.size() != pf.size()) throw DomainError("solve_theta_star: one probability per group is required");
  std::vector<double> logits(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (!(p[j] > 0.0 && p[j] < 1.0)) throw DomainError("solve_theta_star: probabilities must lie in (0,1)");
    logits[j] = std::log(p[j]) - std::log1p(-p[j]);
  }
  return solve_theta_star_logit(pf, logits, nb);
}

/// Loss and full likelihood ratio of one importance-sampling replication.
struct ImportanceReplication {
  double loss = 0.0;
  double likelihood = 1.0;  // L* = f_V/f*_V times the Bernoulli ratio
  bool exceeded = false;

  double tail_value() const noexcept { return exceeded ? likelihood : 0.0; }
};

template <LtGenerator G>
ImportanceReplication is_replication(const LossModel<G>& model, const ImportanceProposal& prop, RngStream& rng) {
  const auto draw = is_sample_v(model, prop, rng);
  const auto cond = detail::conditional_logits(model, draw.v);
  const auto& pf = model.portfolio;

  ImportanceReplication rep;
  double log_lr = std::log(draw.lr);
  const double mean0 = twisted_mean_loss(pf, cond.logit, 0.0);
  if (mean0 >= model.nb) {
    // Not rare under this V: untwisted Bernoulli draws.
    for (std::size_t j = 0; j < pf.size(); ++j) {
      const auto& g = pf.groups()[j];
      rep.loss += g.c * static_cast<double>(detail::draw_binomial(g.count, cond.p[j], rng));
    }
  } else {
    const auto twist = solve_theta_star_logit(pf, cond.logit, model.nb);
    for (std::size_t j = 0; j < pf.size(); ++j) {
      const auto& g = pf.groups()[j];
      const std::size_t d = detail::draw_binomial(g.count, twist.twisted[j], rng);
      rep.loss += g.c * static_cast<double>(d);
      // d log(p/p*) + (n - d) log((1-p)/(1-p*)) with logits x, x*:
      // log p = -softplus(-x), log(1-p) = -softplus(x).
      const double x = cond.logit[j];
      const double xs = x + twist.theta * g.c;
      const double log_ratio_def = detail::softplus(-xs) - detail::softplus(-x);
      const double log_ratio_surv = detail::softplus(xs) - detail::softplus(x);
      log_lr += static_cast<double>(d) * log_ratio_def + static_cast<double>(g.count - d) * log_ratio_surv;
    }
  }
  rep.likelihood = std::exp(log_lr);
  rep.exceeded = exceeds(rep.loss, model.nb);
  return rep;
}

/// 1{L_n > nb} L* for one replication.
template <LtGenerator G>
double is_tail_one_rep(const LossModel<G>& model, const ImportanceProposal& prop, RngStream& rng) {
  return is_replication(model, prop, rng).tail_value();
}

// ---------------------------------------------------------------------------
// Conditional Monte Carlo

/// Scratch buffers reused across replications of one worker.
struct CondMcScratch {
  std::vector<double> o;
  std::vector<std::pair<double, double>> o_c;
};

/// P(V > O_(k) | R): O_i = R_i / phi(1 - l_i f_n), k the first index in O
/// order whose cumulative exposure exceeds nb.
template <LtGenerator G>
double condmc_one_rep(const LossModel<G>& model, RngStream& rng, CondMcScratch& scratch) {
  const auto& pf = model.portfolio;
  const auto& law = model.generator.mixing_law();
  const auto idx = threshold_index(pf, model.b());
  if (idx.k) {
    auto& o = scratch.o;
    o.resize(pf.obligors());
    std::size_t pos = 0;
    for (std::size_t j = 0; j < pf.size(); ++j) {
      const double inv = 1.0 / model.hazard[j];
      for (std::size_t i = 0; i < pf.groups()[j].count; ++i) o[pos++] = rng.exponential() * inv;
    }
    const auto kth = o.begin() + static_cast<std::ptrdiff_t>(*idx.k - 1);
    std::nth_element(o.begin(), kth, o.end());
    return law.sf(*kth);
  }
  auto& oc = scratch.o_c;
  oc.resize(pf.obligors());
  std::size_t pos = 0;
  for (std::size_t j = 0; j < pf.size(); ++j) {
    const double inv = 1.0 / model.hazard[j];
    const double c = pf.groups()[j].c;
    for (std::size_t i = 0; i < pf.groups()[j].count; ++i) oc[pos++] = {rng.exponential() * inv, c};
  }
  std::sort(oc.begin(), oc.end());
  double cum = 0.0;
  for (const auto& [o, c] : oc) {
    cum += c;
    if (exceeds(cum, model.nb)) return law.sf(o);
  }
  return 0.0;
}

template <LtGenerator G>
double condmc_one_rep(const LossModel<G>& model, RngStream& rng) {
  CondMcScratch scratch;
  return condmc_one_rep(model, rng, scratch);
}

// ---------------------------------------------------------------------------
// Drivers

namespace detail {

template <class Clock = std::chrono::steady_clock>
double elapsed_ms(typename Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace detail

/// Per-replication estimator values for the configured method.
template <LtGenerator G>
std::vector<double> tail_values(const LossModel<G>& model, EstimatorKind kind, std::size_t m, std::uint64_t seed,
                                unsigned threads, double x0 = 1.0) {
  switch (kind) {
    case EstimatorKind::naive:
      return run_replications<double>(m, seed, threads,
                                      [&](std::size_t, RngStream& rng) { return naive_tail_one_rep(model, rng); });
    case EstimatorKind::importance: {
      const auto prop = make_proposal(model, x0);
      return run_replications<double>(
          m, seed, threads, [&](std::size_t, RngStream& rng) { return is_tail_one_rep(model, prop, rng); });
    }
    case EstimatorKind::conditional: {
      threshold_index(model.portfolio, model.b());  // feasibility
      return run_replications<double>(m, seed, threads, [&](std::size_t, RngStream& rng) {
        thread_local CondMcScratch scratch;
        return condmc_one_rep(model, rng, scratch);
      });
    }
  }
  throw DomainError("tail_values: unknown estimator kind");
}

/// Estimate of P(L_n > nb) with the configured method.
inline EstimateReport estimate_tail_probability(const EstimatorConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto model = make_model(cfg);
  std::vector<std::string> warnings;
  if (cfg.kind == EstimatorKind::conditional && model.f_n < 1.0 / (10.0 * static_cast<double>(cfg.portfolio.obligors()))) {
    warnings.emplace_back("conditional MC: f_n < 1/(10 n); bounded relative error is not guaranteed");
  }
  const auto values = tail_values(model, cfg.kind, cfg.replications, cfg.seed, cfg.threads, cfg.x0);
  auto report = aggregate(values);
  report.seed = cfg.seed;
  report.warnings.insert(report.warnings.begin(), warnings.begin(), warnings.end());
  report.wall_ms = detail::elapsed_ms(t0);
  return report;
}

/// Ratio estimator nb + sum (L^i - nb)_+ L*_i / sum 1{L^i > nb} L*_i from
/// importance-sampling replications; standard error by the delta method.
inline EstimateReport expected_shortfall_from(std::span<const ImportanceReplication> reps, double nb) {
  const std::size_t m = reps.size();
  if (m < 2) throw DomainError("expected_shortfall: at least 2 replications are required");
  std::size_t hits = 0;
  double sum_a = 0.0;
  double sum_b = 0.0;
  for (const auto& r : reps) {
    if (!r.exceeded) continue;
    ++hits;
    sum_a += (r.loss - nb) * r.likelihood;
    sum_b += r.likelihood;
  }
  if (hits == 0 || !(sum_b > 0.0)) {
    throw EstimationError("expected_shortfall: no replication exceeded nb; increase the replication count");
  }
  const double md = static_cast<double>(m);
  const double mean_a = sum_a / md;
  const double mean_b = sum_b / md;
  const double ratio = mean_a / mean_b;
  double var_a = 0.0, var_b = 0.0, cov = 0.0;
  for (const auto& r : reps) {
    const double a = r.exceeded ? (r.loss - nb) * r.likelihood : 0.0;
    const double b = r.tail_value();
    var_a += (a - mean_a) * (a - mean_a);
    var_b += (b - mean_b) * (b - mean_b);
    cov += (a - mean_a) * (b - mean_b);
  }
  var_a /= md - 1.0;
  var_b /= md - 1.0;
  cov /= md - 1.0;
  const double var_ratio = std::max(0.0, (var_a - 2.0 * ratio * cov + ratio * ratio * var_b) / (mean_b * mean_b * md));

  EstimateReport rep;
  rep.replications = m;
  rep.estimate = nb + ratio;
  rep.std_error = std::sqrt(var_ratio);
  rep.relative_error_pct = 100.0 * rep.std_error / rep.estimate;
  if (hits < 10) rep.warnings.emplace_back("expected shortfall based on fewer than 10 exceedances");
  return rep;
}

template <LtGenerator G>
std::vector<ImportanceReplication> is_replications(const LossModel<G>& model, const ImportanceProposal& prop,
                                                   std::size_t m, std::uint64_t seed, unsigned threads) {
  return run_replications<ImportanceReplication>(
      m, seed, threads, [&](std::size_t, RngStream& rng) { return is_replication(model, prop, rng); });
}

/// E[L_n | L_n > nb] by importance sampling.
inline EstimateReport is_expected_shortfall(const EstimatorConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto model = make_model(cfg);
  const auto prop = make_proposal(model, cfg.x0);
  const auto reps = is_replications(model, prop, cfg.replications, cfg.seed, cfg.threads);
  auto report = expected_shortfall_from(reps, model.nb);
  report.seed = cfg.seed;
  report.wall_ms = detail::elapsed_ms(t0);
  return report;
}

}  // namespace ltcredit
