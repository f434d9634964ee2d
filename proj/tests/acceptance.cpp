// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "ltcredit/ltcredit.hpp"

#ifndef LTCREDIT_CLI_PATH
#error "LTCREDIT_CLI_PATH must point at the ltcredit executable"
#endif

using namespace ltcredit;

namespace {

struct Gate {
  int failures = 0;

  void record(const std::string& id, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << "  " << id << ": " << detail << std::endl;
    if (!ok) ++failures;
  }
};

std::string sig(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*e", digits - 1, v);
  return buf;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

bool within_se(const EstimateReport& a, const EstimateReport& b, double z = 4.0) {
  return std::abs(a.estimate - b.estimate) <= z * std::hypot(a.std_error, b.std_error);
}

EstimatorConfig baseline(double alpha, std::size_t n, double b, EstimatorKind kind, double x0 = 1.0) {
  EstimatorConfig cfg;
  cfg.portfolio = Portfolio::homogeneous(n, 1.0, 0.5);
  cfg.alpha = alpha;
  cfg.b = b;
  cfg.replications = 50'000;
  cfg.kind = kind;
  cfg.x0 = x0;
  return cfg;
}

struct Cell {
  double alpha;
  std::size_t n;
  double b;
};

// Cells of the three tail-probability tables.
const std::vector<Cell> kTable2{{1.1, 500, 0.8}, {1.5, 500, 0.8}, {2.0, 500, 0.8}, {5.0, 500, 0.8}};
const std::vector<Cell> kTable3{{1.5, 500, 0.3}, {1.5, 500, 0.5}, {1.5, 500, 0.7}, {1.5, 500, 0.9}};
const std::vector<Cell> kTable4{{1.5, 100, 0.8}, {1.5, 250, 0.8}, {1.5, 500, 0.8}, {1.5, 1000, 0.8}};

struct CellResult {
  EstimateReport cond;
  EstimateReport is;
};

std::map<std::tuple<double, std::size_t, double>, CellResult> g_cells;

const CellResult& run_cell(const Cell& c) {
  const auto key = std::make_tuple(c.alpha, c.n, c.b);
  auto it = g_cells.find(key);
  if (it != g_cells.end()) return it->second;
  CellResult r;
  r.cond = estimate_tail_probability(baseline(c.alpha, c.n, c.b, EstimatorKind::conditional));
  r.is = estimate_tail_probability(baseline(c.alpha, c.n, c.b, EstimatorKind::importance));
  return g_cells.emplace(key, r).first->second;
}

void criterion1(Gate& gate) {
  const std::array<std::size_t, 4> ns{100, 250, 500, 1000};
  const std::array<const char*, 4> expected{"1.359e-03", "5.436e-04", "2.718e-04", "1.359e-04"};
  bool ok = true;
  std::string got;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double p =
        tail_probability_asymptotic({Portfolio::homogeneous(ns[i], 1.0, 0.5), 1.5, 1.0 / static_cast<double>(ns[i]), 0.8});
    const auto s = sig(p, 4);
    ok = ok && s == expected[i];
    got += (i ? " " : "") + s;
  }
  gate.record("1 asymptotic tail (n sweep)", ok, got);
}

void criterion2(Gate& gate) {
  const std::array<std::size_t, 4> ns{50, 100, 250, 500};
  const std::array<double, 4> expected{47.695, 95.390, 238.475, 476.950};
  bool ok = true;
  std::string got;
  double worst = 0.0;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double n = static_cast<double>(ns[i]);
    const double quad = n * shortfall_ratio(Portfolio::homogeneous(ns[i], 1.0, 0.5), 1.5, 0.8);
    const double closed = n * shortfall_ratio_homogeneous(1.5, 1.0, 0.8);
    const double agree = std::abs(quad - closed) / closed;
    worst = std::max(worst, agree);
    // five significant digits
    const double scale = std::pow(10.0, 4 - std::floor(std::log10(expected[i])));
    ok = ok && std::round(quad * scale) == std::round(expected[i] * scale) &&
         std::round(closed * scale) == std::round(expected[i] * scale) && agree <= 1e-9;
    got += (i ? " " : "") + fmt(quad);
  }
  gate.record("2 asymptotic expected shortfall", ok, got + "; quadrature vs closed form " + sig(worst, 2));
}

void criterion3(Gate& gate) {
  const std::array<double, 4> published{6.208e-5, 2.726e-4, 4.457e-4, 7.815e-4};
  bool ok = true;
  std::string got;
  for (std::size_t i = 0; i < kTable2.size(); ++i) {
    const auto& r = run_cell(kTable2[i]).cond;
    const double dev = std::abs(r.estimate / published[i] - 1.0);
    ok = ok && dev <= 0.01 && r.relative_error_pct <= 0.1;
    got += (i ? "; " : "") + sig(r.estimate, 4) + " (" + fmt(100 * dev) + "% off, RE " + fmt(r.relative_error_pct) + "%)";
  }
  gate.record("3 conditional MC, alpha sweep", ok, got);
}

void criterion4(Gate& gate) {
  bool ok = true;
  std::string got;
  for (std::size_t i = 0; i < kTable2.size(); ++i) {
    const auto& r = run_cell(kTable2[i]);
    ok = ok && within_se(r.is, r.cond) && r.is.relative_error_pct <= 3.0;
    got += (i ? "; " : "") + sig(r.is.estimate, 4) + " (RE " + fmt(r.is.relative_error_pct) + "%)";
  }
  gate.record("4 importance sampling, alpha sweep", ok, got);
}

void criterion5(Gate& gate) {
  bool ok = true;
  std::string got;
  double min_cond_500 = HUGE_VAL;
  for (const auto* table : {&kTable2, &kTable3, &kTable4}) {
    for (const auto& c : *table) {
      const auto& r = run_cell(c);
      const double vc = r.cond.variance_reduction;
      const double vi = r.is.variance_reduction;
      const bool cell_ok = vc > vi && vi > 10.0 && (c.n != 500 || vc >= 1e5);
      if (c.n == 500) min_cond_500 = std::min(min_cond_500, vc);
      if (!cell_ok) {
        got += " [alpha=" + fmt(c.alpha) + " n=" + std::to_string(c.n) + " b=" + fmt(c.b) + ": " + sig(vc, 3) +
               " vs " + sig(vi, 3) + "]";
      }
      ok = ok && cell_ok;
    }
  }
  gate.record("5 variance-reduction ordering", ok, "min conditional VR at n=500 " + sig(min_cond_500, 3) + got);
}

void criterion6(Gate& gate) {
  const std::array<std::size_t, 4> ns{50, 100, 250, 500};
  const std::array<double, 4> published{47.886, 95.573, 238.873, 477.558};
  bool ok = true;
  std::string got;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const auto r = is_expected_shortfall(baseline(1.5, ns[i], 0.8, EstimatorKind::importance));
    const double dev = std::abs(r.estimate / published[i] - 1.0);
    ok = ok && dev <= 0.005;
    got += (i ? "; " : "") + fmt(r.estimate) + " (" + fmt(100 * dev) + "% off)";
  }
  gate.record("6 expected shortfall by importance sampling", ok, got);
}

void criterion7(Gate& gate) {
  EstimatorConfig cfg;
  cfg.portfolio = Portfolio::homogeneous(20, 1.0, 0.5);
  cfg.scale = DefaultScale::constant(0.3);
  cfg.alpha = 1.5;
  cfg.b = 0.4;
  cfg.replications = 1'000'000;
  std::array<EstimateReport, 3> r;
  const std::array<EstimatorKind, 3> kinds{EstimatorKind::naive, EstimatorKind::importance, EstimatorKind::conditional};
  for (std::size_t i = 0; i < 3; ++i) {
    cfg.kind = kinds[i];
    r[i] = estimate_tail_probability(cfg);
  }
  const bool ok = within_se(r[0], r[1]) && within_se(r[0], r[2]) && within_se(r[1], r[2]);
  gate.record("7 naive / importance / conditional agreement", ok,
              "naive " + fmt(r[0].estimate) + ", importance " + fmt(r[1].estimate) + ", conditional " +
                  fmt(r[2].estimate));
}

void criterion8(Gate& gate) {
  // Levy closed forms at beta = 1/2
  PositiveStableLaw levy(0.5);
  double worst = 0.0;
  for (int i = 0; i <= 90; ++i) {
    const double x = 1e-3 * std::pow(10.0, i / 10.0);
    const double pdf = std::pow(x, -1.5) * std::exp(-0.25 / x) / (2.0 * std::sqrt(std::numbers::pi));
    const double sf = std::erf(0.5 / std::sqrt(x));
    worst = std::max({worst, std::abs(levy.pdf(x) - pdf), std::abs(levy.sf(x) - sf)});
  }
  bool ok = worst <= 1e-8;
  std::string got = "Levy max abs error " + sig(worst, 2);

  // Laplace transform of the sampler
  double worst_z = 0.0;
  for (double beta : {0.3, 0.5, 0.8}) {
    PositiveStableLaw law(beta);
    for (double s : {0.25, 1.0, 4.0}) {
      const auto vals = run_replications<double>(1'000'000, 8080, 1, [&](std::size_t, RngStream& rng) {
        return std::exp(-s * law.sample(rng));
      });
      const auto r = aggregate(vals);
      worst_z = std::max(worst_z, std::abs(r.estimate - std::exp(-std::pow(s, beta))) / r.std_error);
    }
  }
  ok = ok && worst_z <= 4.0;
  got += "; Laplace max |z| " + fmt(worst_z);

  // likelihood ratio of the spliced proposal
  double worst_lr = 0.0;
  for (double alpha : {1.1, 1.5, 2.0, 5.0}) {
    const auto model = make_model(baseline(alpha, 500, 0.8, EstimatorKind::importance));
    const auto prop = make_proposal(model, 1.0);
    const auto lrs = run_replications<double>(200'000, 4242, 1, [&](std::size_t, RngStream& rng) {
      return is_sample_v(model, prop, rng).lr;
    });
    const auto r = aggregate(lrs);
    worst_lr = std::max(worst_lr, std::abs(r.estimate - 1.0) / r.std_error);
  }
  ok = ok && worst_lr <= 4.0;
  got += "; likelihood-ratio mean max |z| " + fmt(worst_lr);
  gate.record("8 stable law suite", ok, got);
}

void criterion9(Gate& gate) {
  bool ok = true;
  std::string got;
  for (const auto& c : kTable2) {
    std::array<EstimateReport, 3> r;
    const std::array<double, 3> x0s{0.5, 1.0, 2.0};
    for (std::size_t i = 0; i < 3; ++i) {
      r[i] = x0s[i] == 1.0 ? run_cell(c).is
                           : estimate_tail_probability(baseline(c.alpha, c.n, c.b, EstimatorKind::importance, x0s[i]));
    }
    const bool cell = within_se(r[0], r[1]) && within_se(r[0], r[2]) && within_se(r[1], r[2]);
    ok = ok && cell;
    got += (got.empty() ? "" : "; ") + std::string("alpha=") + fmt(c.alpha) + " " + sig(r[0].estimate, 3) + "/" +
           sig(r[1].estimate, 3) + "/" + sig(r[2].estimate, 3);
  }
  gate.record("9 x0 insensitivity (0.5/1/2)", ok, got);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void criterion10(Gate& gate) {
  const auto dir = std::filesystem::temp_directory_path();
  const auto a = dir / "ltcredit_acceptance_a.csv";
  const auto b = dir / "ltcredit_acceptance_b.csv";
  bool ok = true;
  for (const auto& out : {a, b}) {
    const std::string cmd = std::string("\"") + LTCREDIT_CLI_PATH + "\" table 2 --seed 20240101 --threads 2 -o \"" +
                            out.string() + "\" 2>/dev/null";
    ok = ok && std::system(cmd.c_str()) == 0;
  }
  const auto ta = slurp(a);
  const auto tb = slurp(b);
  ok = ok && !ta.empty() && ta == tb;
  gate.record("10 deterministic table output", ok, std::to_string(ta.size()) + " bytes, identical: " + (ta == tb ? "yes" : "no"));
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

void relative_error_trend(Gate& gate) {
  bool ok = true;
  std::string got;
  double prev = 0.0;
  for (const auto& c : kTable4) {
    const double re = run_cell(c).cond.relative_error_pct;
    if (prev > 0.0) ok = ok && re <= 2.0 * prev;
    got += (prev > 0.0 ? " " : "") + fmt(re) + "%";
    prev = re;
  }
  gate.record("efficiency proxy: conditional MC relative error over n", ok, got);
}

}  // namespace

int main() {
  Gate gate;
  const std::vector<void (*)(Gate&)> checks{criterion1, criterion2,  criterion3, criterion4, criterion5,
                                            criterion6, criterion7,  criterion8, criterion9, criterion10,
                                            relative_error_trend};
  for (std::size_t i = 0; i < checks.size(); ++i) {
    try {
      checks[i](gate);
    } catch (const std::exception& e) {
      gate.record("check " + std::to_string(i + 1), false, std::string("exception: ") + e.what());
    }
  }
  std::cout << (gate.failures == 0 ? "all acceptance criteria passed" : std::to_string(gate.failures) + " failed")
            << std::endl;
  return gate.failures == 0 ? 0 : 1;
}
