#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "ltcredit/experiment.hpp"

using namespace ltcredit;
using nlohmann::json;

namespace {

// Minimal RFC 4180 reader for the round-trip checks.
std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows(1);
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      rows.back().push_back(field);
      field.clear();
    } else if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      rows.back().push_back(field);
      field.clear();
      rows.emplace_back();
      ++i;
    } else {
      field += ch;
    }
  }
  if (rows.back().empty()) rows.pop_back();
  return rows;
}

}  // namespace

TEST_CASE("parse a full config", "[experiment][config]") {
  const auto j = json::parse(R"({
    "alpha": [1.1, 2.0],
    "portfolio": {"groups": [{"c": 1.0, "l": 0.5, "count": 300}, {"c": 2.0, "l": 0.25, "count": 200}]},
    "default_scale": {"kind": "constant", "value": 0.01},
    "b": 0.9,
    "estimators": ["naive", "is", "condmc"],
    "replications": 1000,
    "seed": 7,
    "threads": 2,
    "x0": 0.5,
    "format": "markdown",
    "output": "out.md",
    "asymptotic": false,
    "timing": true
  })");
  const auto cfg = parse_config(j);
  CHECK(cfg.alphas == std::vector<double>{1.1, 2.0});
  REQUIRE(cfg.groups.size() == 2);
  CHECK(cfg.groups[1].c == 2.0);
  CHECK(cfg.groups[1].count == 200);
  CHECK(cfg.scale.value(500) == 0.01);
  CHECK(cfg.bs == std::vector<double>{0.9});
  CHECK(cfg.methods.size() == 3);
  CHECK(cfg.methods[2] == EstimatorKind::conditional);
  CHECK(cfg.replications == 1000);
  CHECK(cfg.seed == 7);
  CHECK(cfg.threads == 2);
  CHECK(cfg.x0 == 0.5);
  CHECK(cfg.format == OutputFormat::markdown);
  CHECK(cfg.output == "out.md");
  CHECK_FALSE(cfg.asymptotic);
  CHECK(cfg.timing);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("config errors name the field", "[experiment][config]") {
  auto message = [](const char* text) {
    try {
      parse_config(json::parse(text)).validate();
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message(R"({"alpah": 1.5})").find("unknown key 'alpah'") != std::string::npos);
  CHECK(message(R"({"portfolio": {"groups": [{"c": 1, "l": 0.5, "count": 3, "rating": "A"}]}})").find("rating") !=
        std::string::npos);
  CHECK(message(R"({"alpha": 0.5})").rfind("alpha:", 0) == 0);
  CHECK(message(R"({"b": 1.5})").rfind("b:", 0) == 0);
  CHECK(message(R"({"estimators": []})").rfind("estimators:", 0) == 0);
  CHECK(message(R"({"estimators": ["magic"]})").rfind("estimators:", 0) == 0);
  CHECK(message(R"({"replications": "many"})").rfind("replications:", 0) == 0);
  CHECK(message(R"({"default_scale": {"kind": "constant"}})").rfind("default_scale.value", 0) == 0);
  CHECK(message(R"({"default_scale": {"kind": "constant", "value": 2.5}})").rfind("default_scale", 0) == 0);
  CHECK(message(R"({"portfolio": {"groups": [{"c": 1, "l": 3, "count": 3}]}})").rfind("default_scale", 0) == 0);
  CHECK(message(R"({"threads": 0})").rfind("threads:", 0) == 0);
  CHECK(message(R"({"format": "xml"})").rfind("format:", 0) == 0);
  REQUIRE_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("empty estimator set is a usage error", "[experiment][config]") {
  ExperimentConfig cfg;
  cfg.methods.clear();
  REQUIRE_THROWS_AS(run_estimate(cfg), ConfigError);
}

TEST_CASE("table presets", "[experiment]") {
  CHECK(table_preset(2).alphas.size() == 4);
  CHECK(table_preset(3).bs == std::vector<double>{0.3, 0.5, 0.7, 0.9});
  CHECK(table_preset(4).portfolios().size() == 4);
  CHECK(table_preset(4).portfolios()[3].obligors() == 1000);
  CHECK(table_preset(5).methods.size() == 1);
  REQUIRE_THROWS_AS(table_preset(6), ConfigError);
  for (int t : {2, 3, 4, 5}) CHECK_NOTHROW(table_preset(t).validate());
}

TEST_CASE("asymptotic rows for the n sweep", "[experiment]") {
  const auto rows = run_asymptotic(table_preset(4));
  REQUIRE(rows.size() == 8);
  CHECK(rows[0].method == "asymptotic_tail");
  CHECK(rows[0].estimate == Catch::Approx(1.359e-3).epsilon(5e-4));
  CHECK(rows[7].method == "asymptotic_es");
  CHECK(rows[7].estimate == Catch::Approx(953.900425491862).epsilon(1e-10));
}

TEST_CASE("failed rows do not stop the run", "[experiment]") {
  auto cfg = table_preset(5);
  cfg.sizes = {50};
  cfg.alphas = {1.5, 2.0};
  cfg.bs = {0.95};
  // with seed 2 neither of the two alpha = 1.5 replications exceeds nb
  cfg.replications = 2;
  cfg.seed = 2;
  std::vector<std::string> log;
  const auto rows = run_es(cfg, [&](const std::string& s) { log.push_back(s); });
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].failed());
  CHECK(std::isfinite(rows[0].asymptotic));
  CHECK(rows[1].alpha == 2.0);
  CHECK_FALSE(log.empty());
}

TEST_CASE("CSV quoting and full-precision round trip", "[experiment][csv]") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_field("two\nlines") == "\"two\nlines\"");
  CHECK(format_number(std::nan("")).empty());
  CHECK(format_number(HUGE_VAL) == "inf");

  ReportRow r;
  r.method = "odd,name \"x\"";
  r.alpha = 1.1;
  r.n = 500;
  r.b = 0.8;
  r.estimate = 6.1763284671209876e-05;
  r.std_error = 1.0 / 3.0;
  r.rel_error_pct = 0.1 + 0.2;
  r.var_reduction = 6.3e6;
  r.asymptotic = 2.718031166902820e-4;
  r.seed = 18446744073709551615ull;
  std::ostringstream os;
  write_csv(os, {r}, RowLayout::estimate);
  const auto rows = read_csv(os.str());
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == column_names(RowLayout::estimate));
  const auto& f = rows[1];
  REQUIRE(f.size() == 11);
  CHECK(f[0] == r.method);
  CHECK(std::strtod(f[1].c_str(), nullptr) == r.alpha);
  CHECK(f[2] == "500");
  CHECK(std::strtod(f[4].c_str(), nullptr) == r.estimate);
  CHECK(std::strtod(f[5].c_str(), nullptr) == r.std_error);
  CHECK(std::strtod(f[6].c_str(), nullptr) == r.rel_error_pct);
  CHECK(std::strtod(f[7].c_str(), nullptr) == r.var_reduction);
  CHECK(std::strtod(f[8].c_str(), nullptr) == r.asymptotic);
  CHECK(f[9].empty());
  CHECK(f[10] == "18446744073709551615");
}

TEST_CASE("markdown rendering", "[experiment]") {
  ReportRow ok;
  ok.method = "conditional";
  ok.estimate = 2.7175e-4;
  ReportRow bad;
  bad.method = "importance_es";
  bad.error = "no exceedances";
  std::ostringstream os;
  write_rows(os, {ok, bad}, RowLayout::shortfall, OutputFormat::markdown);
  const auto text = os.str();
  CHECK(text.rfind("| method | alpha | n | b | estimate |", 0) == 0);
  CHECK(text.find("0.00027175") != std::string::npos);
  CHECK(text.find("| failed |") != std::string::npos);
}
