#pragma once

// Experiment configuration, table presets, report rows and their CSV /
// markdown rendering. Used by the command-line front end.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ltcredit/asymptotics.hpp"
#include "ltcredit/errors.hpp"
#include "ltcredit/estimators.hpp"
#include "ltcredit/portfolio.hpp"

namespace ltcredit {

/// Invalid or inconsistent experiment configuration (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OutputFormat { csv, markdown };

struct ExperimentConfig {
  std::vector<double> alphas{1.5};
  std::vector<SubPortfolio> groups{{1.0, 0.5, 500}};
  /// Portfolio sizes to sweep; only for single-group portfolios. Empty means
  /// use the group count as given.
  std::vector<std::size_t> sizes;
  DefaultScale scale = DefaultScale::reciprocal();
  std::vector<double> bs{0.8};
  std::vector<EstimatorKind> methods{EstimatorKind::importance, EstimatorKind::conditional};
  std::size_t replications = 50'000;
  std::uint64_t seed = 20240101;
  unsigned threads = 1;
  double x0 = 1.0;
  OutputFormat format = OutputFormat::csv;
  std::string output = "-";
  bool asymptotic = true;
  /// Fill runtime_ms. Off by default so reruns are byte-identical.
  bool timing = false;

  std::vector<Portfolio> portfolios() const {
    if (sizes.empty()) return {Portfolio(groups)};
    std::vector<Portfolio> out;
    for (auto n : sizes) {
      auto g = groups;
      g[0].count = n;
      out.emplace_back(std::move(g));
    }
    return out;
  }

  /// Checks every module precondition up front; throws ConfigError naming the field.
  void validate(bool need_methods = true) const {
    auto fail = [](const std::string& field, const std::string& msg) { throw ConfigError(field + ": " + msg); };
    if (alphas.empty()) fail("alpha", "at least one value is required");
    for (double a : alphas) {
      if (!(a > 1.0)) fail("alpha", "must exceed 1, got " + std::to_string(a));
    }
    if (groups.empty()) fail("portfolio.groups", "at least one group is required");
    for (std::size_t j = 0; j < groups.size(); ++j) {
      const auto& g = groups[j];
      const std::string f = "portfolio.groups[" + std::to_string(j) + "]";
      if (!(g.c > 0.0)) fail(f + ".c", "must be positive");
      if (!(g.l > 0.0)) fail(f + ".l", "must be positive");
      if (g.count == 0) fail(f + ".count", "must be at least 1");
    }
    if (!sizes.empty() && groups.size() != 1) fail("n", "only applies to single-group portfolios");
    for (auto n : sizes) {
      if (n == 0) fail("n", "must be at least 1");
    }
    if (bs.empty()) fail("b", "at least one value is required");
    if (need_methods && methods.empty()) fail("estimators", "at least one estimator is required");
    if (replications < 2) fail("replications", "must be at least 2");
    if (threads == 0) fail("threads", "must be at least 1");
    if (!(x0 > 0.0)) fail("x0", "must be positive");
    for (const auto& pf : portfolios()) {
      try {
        scale.value_for(pf);
      } catch (const DomainError& e) {
        fail("default_scale", e.what());
      }
      for (double b : bs) {
        if (!(b > 0.0 && b < pf.mean_exposure())) {
          fail("b", "must lie in (0, c-bar) with c-bar = " + std::to_string(pf.mean_exposure()) + ", got " +
                        std::to_string(b));
        }
      }
    }
  }
};

inline EstimatorKind parse_method(const std::string& s) {
  if (s == "naive") return EstimatorKind::naive;
  if (s == "importance" || s == "is") return EstimatorKind::importance;
  if (s == "conditional" || s == "condmc") return EstimatorKind::conditional;
  throw ConfigError("estimators: unknown estimator '" + s + "' (naive, importance, conditional)");
}

inline OutputFormat parse_format(const std::string& s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "markdown" || s == "md") return OutputFormat::markdown;
  throw ConfigError("format: unknown output format '" + s + "' (csv, markdown)");
}

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
T get_as(const nlohmann::json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(field + ": wrong type");
  }
}

template <class T>
std::vector<T> scalar_or_list(const nlohmann::json& j, const std::string& field) {
  if (j.is_array()) {
    std::vector<T> out;
    for (const auto& e : j) out.push_back(get_as<T>(e, field));
    return out;
  }
  return {get_as<T>(j, field)};
}

}  // namespace detail

/// Reads a JSON experiment description on top of `base`. Unknown keys are
/// rejected at every level.
inline ExperimentConfig parse_config(const nlohmann::json& j, ExperimentConfig base = {}) {
  detail::reject_unknown(j,
                         {"alpha", "portfolio", "n", "default_scale", "b", "estimators", "replications", "seed",
                          "threads", "x0", "format", "output", "asymptotic", "timing"},
                         "config");
  auto cfg = std::move(base);
  if (j.contains("alpha")) cfg.alphas = detail::scalar_or_list<double>(j["alpha"], "alpha");
  if (j.contains("portfolio")) {
    const auto& p = j["portfolio"];
    detail::reject_unknown(p, {"groups"}, "portfolio");
    if (!p.contains("groups") || !p["groups"].is_array()) throw ConfigError("portfolio.groups: array required");
    cfg.groups.clear();
    std::size_t idx = 0;
    for (const auto& g : p["groups"]) {
      const std::string where = "portfolio.groups[" + std::to_string(idx++) + "]";
      detail::reject_unknown(g, {"c", "l", "count"}, where);
      for (const char* k : {"c", "l", "count"}) {
        if (!g.contains(k)) throw ConfigError(where + "." + k + ": required");
      }
      const auto count = detail::get_as<std::int64_t>(g["count"], where + ".count");
      if (count < 1) throw ConfigError(where + ".count: must be at least 1");
      cfg.groups.push_back({detail::get_as<double>(g["c"], where + ".c"), detail::get_as<double>(g["l"], where + ".l"),
                            static_cast<std::size_t>(count)});
    }
  }
  if (j.contains("n")) {
    cfg.sizes.clear();
    for (auto n : detail::scalar_or_list<std::int64_t>(j["n"], "n")) {
      if (n < 1) throw ConfigError("n: must be at least 1");
      cfg.sizes.push_back(static_cast<std::size_t>(n));
    }
  }
  if (j.contains("default_scale")) {
    const auto& s = j["default_scale"];
    detail::reject_unknown(s, {"kind", "value"}, "default_scale");
    const auto kind = detail::get_as<std::string>(s.value("kind", std::string("reciprocal")), "default_scale.kind");
    if (kind == "reciprocal") {
      cfg.scale = DefaultScale::reciprocal();
    } else if (kind == "log_reciprocal") {
      cfg.scale = DefaultScale::log_reciprocal();
    } else if (kind == "constant") {
      if (!s.contains("value")) throw ConfigError("default_scale.value: required for kind 'constant'");
      try {
        cfg.scale = DefaultScale::constant(detail::get_as<double>(s["value"], "default_scale.value"));
      } catch (const DomainError& e) {
        throw ConfigError(std::string("default_scale.value: ") + e.what());
      }
    } else {
      throw ConfigError("default_scale.kind: unknown kind '" + kind + "' (reciprocal, log_reciprocal, constant)");
    }
  }
  if (j.contains("b")) cfg.bs = detail::scalar_or_list<double>(j["b"], "b");
  if (j.contains("estimators")) {
    cfg.methods.clear();
    for (const auto& m : detail::scalar_or_list<std::string>(j["estimators"], "estimators")) {
      cfg.methods.push_back(parse_method(m));
    }
  }
  if (j.contains("replications")) {
    const auto m = detail::get_as<std::int64_t>(j["replications"], "replications");
    if (m < 2) throw ConfigError("replications: must be at least 2");
    cfg.replications = static_cast<std::size_t>(m);
  }
  if (j.contains("seed")) cfg.seed = detail::get_as<std::uint64_t>(j["seed"], "seed");
  if (j.contains("threads")) {
    const auto t = detail::get_as<std::int64_t>(j["threads"], "threads");
    if (t < 1) throw ConfigError("threads: must be at least 1");
    cfg.threads = static_cast<unsigned>(t);
  }
  if (j.contains("x0")) cfg.x0 = detail::get_as<double>(j["x0"], "x0");
  if (j.contains("format")) cfg.format = parse_format(detail::get_as<std::string>(j["format"], "format"));
  if (j.contains("output")) cfg.output = detail::get_as<std::string>(j["output"], "output");
  if (j.contains("asymptotic")) cfg.asymptotic = detail::get_as<bool>(j["asymptotic"], "asymptotic");
  if (j.contains("timing")) cfg.timing = detail::get_as<bool>(j["timing"], "timing");
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(j, std::move(base));
}

/// Parameter grids of the published tables: n = 500, f_n = 1/n, b = 0.8,
/// l = 0.5, c = 1 unless the table varies that parameter.
inline ExperimentConfig table_preset(int table) {
  ExperimentConfig cfg;
  switch (table) {
    case 2:
      cfg.alphas = {1.1, 1.5, 2.0, 5.0};
      break;
    case 3:
      cfg.bs = {0.3, 0.5, 0.7, 0.9};
      break;
    case 4:
      cfg.sizes = {100, 250, 500, 1000};
      break;
    case 5:
      cfg.sizes = {50, 100, 250, 500};
      cfg.methods = {EstimatorKind::importance};
      break;
    default:
      throw ConfigError("table: unknown preset " + std::to_string(table) + " (2, 3, 4, 5)");
  }
  return cfg;
}

struct ReportRow {
  std::string method;
  double alpha = 0.0;
  std::size_t n = 0;
  double b = 0.0;
  double estimate = std::nan("");
  double std_error = std::nan("");
  double rel_error_pct = std::nan("");
  double var_reduction = std::nan("");
  double asymptotic = std::nan("");
  double discrepancy_pct = std::nan("");
  double runtime_ms = std::nan("");
  std::uint64_t seed = 0;
  std::string error;  // non-empty when the row failed

  bool failed() const noexcept { return !error.empty(); }
};

enum class RowLayout { estimate, shortfall };

using LogSink = std::function<void(const std::string&)>;

/// One row per (alpha, portfolio size, b, estimator). Failures are recorded in
/// the row and do not stop the remaining rows.
inline std::vector<ReportRow> run_estimate(const ExperimentConfig& cfg, const LogSink& log = {}) {
  cfg.validate();
  std::vector<ReportRow> rows;
  for (double alpha : cfg.alphas) {
    for (const auto& pf : cfg.portfolios()) {
      for (double b : cfg.bs) {
        double asym = std::nan("");
        if (cfg.asymptotic) {
          try {
            asym = tail_probability_asymptotic({pf, alpha, cfg.scale.value_for(pf), b});
          } catch (const std::exception& e) {
            if (log) log(std::string("asymptotic failed: ") + e.what());
          }
        }
        for (auto kind : cfg.methods) {
          ReportRow row;
          row.method = to_string(kind);
          row.alpha = alpha;
          row.n = pf.obligors();
          row.b = b;
          row.seed = cfg.seed;
          row.asymptotic = asym;
          try {
            EstimatorConfig ec{pf, alpha, cfg.scale, b, cfg.replications, cfg.seed, cfg.x0, kind, cfg.threads};
            const auto r = estimate_tail_probability(ec);
            row.estimate = r.estimate;
            row.std_error = r.std_error;
            row.rel_error_pct = r.relative_error_pct;
            row.var_reduction = r.variance_reduction;
            if (cfg.timing) row.runtime_ms = r.wall_ms;
            if (log) {
              for (const auto& w : r.warnings) log("warning: " + w);
              std::ostringstream os;
              os << row.method << " alpha=" << alpha << " n=" << row.n << " b=" << b << " estimate=" << r.estimate
                 << " (" << r.wall_ms << " ms)";
              log(os.str());
            }
          } catch (const std::exception& e) {
            row.error = e.what();
            if (log) log("row failed: " + row.error);
          }
          rows.push_back(std::move(row));
        }
      }
    }
  }
  return rows;
}

/// Expected shortfall by importance sampling against the n psi asymptotic.
inline std::vector<ReportRow> run_es(const ExperimentConfig& cfg, const LogSink& log = {}) {
  cfg.validate(false);
  std::vector<ReportRow> rows;
  for (double alpha : cfg.alphas) {
    for (const auto& pf : cfg.portfolios()) {
      for (double b : cfg.bs) {
        ReportRow row;
        row.method = "importance_es";
        row.alpha = alpha;
        row.n = pf.obligors();
        row.b = b;
        row.seed = cfg.seed;
        try {
          row.asymptotic = expected_shortfall_asymptotic({pf, alpha, cfg.scale.value_for(pf), b});
          EstimatorConfig ec{pf, alpha, cfg.scale, b, cfg.replications, cfg.seed, cfg.x0, EstimatorKind::importance,
                             cfg.threads};
          const auto r = is_expected_shortfall(ec);
          row.estimate = r.estimate;
          row.std_error = r.std_error;
          row.rel_error_pct = r.relative_error_pct;
          row.discrepancy_pct = 100.0 * (r.estimate - row.asymptotic) / row.asymptotic;
          if (cfg.timing) row.runtime_ms = r.wall_ms;
          if (log) {
            for (const auto& w : r.warnings) log("warning: " + w);
            std::ostringstream os;
            os << "es alpha=" << alpha << " n=" << row.n << " b=" << b << " estimate=" << r.estimate << " ("
               << r.wall_ms << " ms)";
            log(os.str());
          }
        } catch (const std::exception& e) {
          row.error = e.what();
          if (log) log("row failed: " + row.error);
        }
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

/// Deterministic asymptotics only: tail probability and expected shortfall.
inline std::vector<ReportRow> run_asymptotic(const ExperimentConfig& cfg) {
  cfg.validate(false);
  std::vector<ReportRow> rows;
  for (double alpha : cfg.alphas) {
    for (const auto& pf : cfg.portfolios()) {
      for (double b : cfg.bs) {
        const AsymptoticInputs in{pf, alpha, cfg.scale.value_for(pf), b};
        for (int which = 0; which < 2; ++which) {
          ReportRow row;
          row.method = which == 0 ? "asymptotic_tail" : "asymptotic_es";
          row.alpha = alpha;
          row.n = pf.obligors();
          row.b = b;
          row.seed = cfg.seed;
          try {
            row.asymptotic = which == 0 ? tail_probability_asymptotic(in) : expected_shortfall_asymptotic(in);
            row.estimate = row.asymptotic;
          } catch (const std::exception& e) {
            row.error = e.what();
          }
          rows.push_back(std::move(row));
        }
      }
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Rendering

/// RFC 4180 field quoting.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

/// 17 significant digits; empty for NaN (not applicable / failed).
inline std::string format_number(double v, int digits = 17) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline std::vector<std::string> column_names(RowLayout layout) {
  if (layout == RowLayout::shortfall) {
    return {"method", "alpha", "n", "b", "estimate", "std_error", "rel_error_pct", "asymptotic", "discrepancy_pct",
            "runtime_ms", "seed"};
  }
  return {"method", "alpha", "n", "b", "estimate", "std_error", "rel_error_pct", "var_reduction", "asymptotic",
          "runtime_ms", "seed"};
}

inline std::vector<std::string> row_fields(const ReportRow& r, RowLayout layout, int digits) {
  auto num = [&](double v) { return format_number(v, digits); };
  std::vector<std::string> f{r.method, num(r.alpha), std::to_string(r.n), num(r.b), num(r.estimate),
                             num(r.std_error), num(r.rel_error_pct)};
  if (layout == RowLayout::shortfall) {
    f.push_back(num(r.asymptotic));
    f.push_back(num(r.discrepancy_pct));
  } else {
    f.push_back(num(r.var_reduction));
    f.push_back(num(r.asymptotic));
  }
  f.push_back(num(r.runtime_ms));
  f.push_back(std::to_string(r.seed));
  return f;
}

inline void write_csv(std::ostream& os, const std::vector<ReportRow>& rows, RowLayout layout) {
  const auto cols = column_names(layout);
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\r\n";
  for (const auto& r : rows) {
    const auto f = row_fields(r, layout, 17);
    for (std::size_t i = 0; i < f.size(); ++i) os << (i ? "," : "") << csv_field(f[i]);
    os << "\r\n";
  }
}

inline void write_markdown(std::ostream& os, const std::vector<ReportRow>& rows, RowLayout layout) {
  const auto cols = column_names(layout);
  os << "|";
  for (const auto& c : cols) os << ' ' << c << " |";
  os << "\n|";
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i < 4 ? " --- |" : " ---: |");
  os << "\n";
  for (const auto& r : rows) {
    auto f = row_fields(r, layout, 6);
    if (r.failed()) f[4] = "failed";
    os << "|";
    for (const auto& x : f) os << ' ' << x << " |";
    os << "\n";
  }
}

inline void write_rows(std::ostream& os, const std::vector<ReportRow>& rows, RowLayout layout, OutputFormat fmt) {
  if (fmt == OutputFormat::csv) {
    write_csv(os, rows, layout);
  } else {
    write_markdown(os, rows, layout);
  }
}

}  // namespace ltcredit
