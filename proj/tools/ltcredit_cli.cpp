// ltcredit: large-loss risk of a Gumbel-copula credit portfolio.
//
//   ltcredit estimate   [--config file.json] [overrides]
//   ltcredit es         [--config file.json] [overrides]
//   ltcredit asymptotic [--config file.json] [overrides]
//   ltcredit table <2|3|4|5> [overrides]
//
// Data goes to stdout (or --output); progress and warnings to stderr.
// Exit codes: 0 success, 2 configuration error, 3 numerical/estimation failure.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ltcredit/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Overrides {
  std::string config;
  std::vector<double> alpha;
  std::vector<std::size_t> n;
  std::vector<double> b;
  std::optional<std::size_t> m;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::vector<std::string> method;
  std::optional<double> x0;
  std::optional<std::string> format;
  std::optional<std::string> output;
  bool timing = false;
  bool no_asymptotic = false;
};

void add_overrides(CLI::App* cmd, Overrides& o, bool with_config) {
  if (with_config) cmd->add_option("-c,--config", o.config, "JSON experiment file")->check(CLI::ExistingFile);
  cmd->add_option("--alpha", o.alpha, "Gumbel alpha (> 1); comma-separated list allowed")->delimiter(',');
  cmd->add_option("--n", o.n, "portfolio size(s) for a single-group portfolio")->delimiter(',');
  cmd->add_option("--b", o.b, "loss level(s) b")->delimiter(',');
  cmd->add_option("--m", o.m, "replications");
  cmd->add_option("--seed", o.seed, "base seed");
  cmd->add_option("--threads", o.threads, "worker threads");
  cmd->add_option("--method", o.method, "naive, importance, conditional")->delimiter(',');
  cmd->add_option("--x0", o.x0, "importance-sampling splice point");
  cmd->add_option("--format", o.format, "csv or markdown");
  cmd->add_option("-o,--output", o.output, "output file ('-' for stdout)");
  cmd->add_flag("--timing", o.timing, "fill the runtime_ms column (output no longer reproducible)");
  cmd->add_flag("--no-asymptotic", o.no_asymptotic, "omit the asymptotic column");
}

ltcredit::ExperimentConfig apply(ltcredit::ExperimentConfig cfg, const Overrides& o) {
  using namespace ltcredit;
  if (!o.config.empty()) cfg = load_config(o.config, std::move(cfg));
  if (!o.alpha.empty()) cfg.alphas = o.alpha;
  if (!o.n.empty()) cfg.sizes = o.n;
  if (!o.b.empty()) cfg.bs = o.b;
  if (o.m) cfg.replications = *o.m;
  if (o.seed) cfg.seed = *o.seed;
  if (o.threads) cfg.threads = *o.threads;
  if (!o.method.empty()) {
    cfg.methods.clear();
    for (const auto& s : o.method) cfg.methods.push_back(parse_method(s));
  }
  if (o.x0) cfg.x0 = *o.x0;
  if (o.format) cfg.format = parse_format(*o.format);
  if (o.output) cfg.output = *o.output;
  if (o.timing) cfg.timing = true;
  if (o.no_asymptotic) cfg.asymptotic = false;
  return cfg;
}

int emit(const ltcredit::ExperimentConfig& cfg, const std::vector<ltcredit::ReportRow>& rows,
         ltcredit::RowLayout layout) {
  if (cfg.output.empty() || cfg.output == "-") {
    ltcredit::write_rows(std::cout, rows, layout, cfg.format);
    std::cout.flush();
  } else {
    std::ofstream out(cfg.output, std::ios::binary);
    if (!out) {
      std::cerr << "ltcredit: cannot write '" << cfg.output << "'\n";
      return kExitConfig;
    }
    ltcredit::write_rows(out, rows, layout, cfg.format);
  }
  for (const auto& r : rows) {
    if (r.failed()) return kExitNumerical;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Large-loss risk of an LT-Archimedean (Gumbel) credit portfolio"};
  app.require_subcommand(1);

  Overrides est_o, es_o, asym_o, table_o;
  auto* estimate = app.add_subcommand("estimate", "tail probability by Monte Carlo");
  add_overrides(estimate, est_o, true);
  auto* es = app.add_subcommand("es", "expected shortfall by importance sampling");
  add_overrides(es, es_o, true);
  auto* asymptotic = app.add_subcommand("asymptotic", "sharp asymptotics only");
  add_overrides(asymptotic, asym_o, true);
  auto* table = app.add_subcommand("table", "reproduce a published table (2, 3, 4 or 5)");
  int table_id = 0;
  table->add_option("table", table_id, "table number")->required();
  add_overrides(table, table_o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  const ltcredit::LogSink log = [](const std::string& msg) { std::cerr << "[ltcredit] " << msg << '\n'; };

  try {
    if (estimate->parsed()) {
      const auto cfg = apply({}, est_o);
      return emit(cfg, ltcredit::run_estimate(cfg, log), ltcredit::RowLayout::estimate);
    }
    if (es->parsed()) {
      const auto cfg = apply({}, es_o);
      return emit(cfg, ltcredit::run_es(cfg, log), ltcredit::RowLayout::shortfall);
    }
    if (asymptotic->parsed()) {
      const auto cfg = apply({}, asym_o);
      return emit(cfg, ltcredit::run_asymptotic(cfg), ltcredit::RowLayout::estimate);
    }
    if (table->parsed()) {
      const auto cfg = apply(ltcredit::table_preset(table_id), table_o);
      if (table_id == 5) return emit(cfg, ltcredit::run_es(cfg, log), ltcredit::RowLayout::shortfall);
      return emit(cfg, ltcredit::run_estimate(cfg, log), ltcredit::RowLayout::estimate);
    }
  } catch (const ltcredit::ConfigError& e) {
    std::cerr << "ltcredit: configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ltcredit::DomainError& e) {
    std::cerr << "ltcredit: configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "ltcredit: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitConfig;
}
