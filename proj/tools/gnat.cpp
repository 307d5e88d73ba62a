// gnat: batch verification runs for g-natural metrics on tangent bundles.
//
//   gnat <command> [field] --config <path> [--tol x] [--samples n] [--seed n] [--report out.json] [--csv out.csv]
//
// Commands: check-metric, classify, lie-derivative <field>, verify-killing <field>, taylor <field>, suite,
// and run (the command list of the config). Exit codes: 0 pass, 1 check failure, 2 usage or config error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "gnat/cli_report.hpp"

namespace {

bool write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << bytes;
  return static_cast<bool>(out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Verification runs for g-natural metrics on tangent bundles"};
  std::string command, field, config_path, report_path, csv_path;
  std::optional<double> tol;
  std::optional<int> samples;
  std::optional<std::uint64_t> seed;
  bool serial = false, timing = false;

  app.add_option("command", command,
                 "check-metric | classify | lie-derivative | verify-killing | taylor | suite | run")
      ->required();
  app.add_option("field", field, "field name for lie-derivative, verify-killing and taylor");
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--tol", tol, "tolerance override");
  app.add_option("--samples", samples, "sample count override");
  app.add_option("--seed", seed, "seed override");
  app.add_option("--report", report_path, "write the JSON report here instead of stdout");
  app.add_option("--csv", csv_path, "write residual rows as CSV");
  app.add_flag("--serial", serial, "run sample sweeps on one thread");
  app.add_flag("--timing", timing, "include wall time in the JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  gnat::RunConfig cfg;
  std::vector<std::string> commands;
  try {
    if (!config_path.empty()) {
      cfg = gnat::load_config(config_path);
    } else if (command != "suite") {
      throw gnat::ConfigError("--config is required for '" + command + "'");
    }
    gnat::apply_overrides(cfg, samples, seed, tol);
    if (command == "run") {
      if (!field.empty()) throw gnat::ConfigError("'run' takes no field");
      commands = cfg.commands;
    } else {
      commands.push_back(field.empty() ? command : command + " " + field);
    }
    for (const auto& c : commands) gnat::validate_command(cfg, c);
  } catch (const std::exception& e) {
    std::cerr << "gnat: " << e.what() << "\n";
    return 2;
  }

  const auto report = gnat::run_report(cfg, commands, serial ? gnat::Exec::serial : gnat::Exec::parallel);
  const std::string json = gnat::report_json(report, timing);
  if (report_path.empty()) {
    std::cout << json;
  } else {
    if (!write_file(report_path, json)) {
      std::cerr << "gnat: cannot write " << report_path << "\n";
      return 2;
    }
    for (const auto& r : report.results)
      std::cout << (r.ok ? "PASS  " : (r.error.empty() ? "FAIL  " : "ERROR ")) << r.command
                << (r.error.empty() ? "" : ": " + r.error) << "\n";
  }
  if (!csv_path.empty() && !write_file(csv_path, gnat::report_csv(report, cfg.chart ? cfg.chart->dim() : 0))) {
    std::cerr << "gnat: cannot write " << csv_path << "\n";
    return 2;
  }
  return report.ok() ? 0 : 1;
}
