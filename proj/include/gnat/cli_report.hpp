#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "gnat/chart.hpp"
#include "gnat/gnatural.hpp"
#include "gnat/lifts_killing.hpp"
#include "gnat/taylor_classify.hpp"

namespace gnat {

using Json = nlohmann::ordered_json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Sampling

enum class Exec { serial, parallel };

// Halton points in [0,1)^dim, shifted by a seeded Cranley-Patterson rotation.
std::vector<std::vector<double>> halton_points(int dim, int count, std::uint64_t seed);
// x inside the chart box (5% padding per side), u in [-fiber, fiber]^n.
std::vector<BundlePoint> sample_bundle(const Chart& chart, int count, std::uint64_t seed, double fiber = 1.0);

// f(i) for i in [0, count), results in index order regardless of the policy.
template <class T, class F>
std::vector<T> sweep(int count, F&& f, Exec exec) {
  std::vector<T> out(static_cast<std::size_t>(count));
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = f(i);
  } else {
    for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = f(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

struct RunConfig {
  std::shared_ptr<const Chart> chart;
  WeightProfile profile = preset_profile("sasaki");
  std::map<std::string, BundleVectorField> fields;
  int samples = 20;
  std::uint64_t seed = 1;
  double tolerance = 1e-7;
  std::vector<std::string> commands;
  Json source;  // normalized input, digested into the report
};

RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_config(const std::string& path);
void apply_overrides(RunConfig& cfg, std::optional<int> samples, std::optional<std::uint64_t> seed,
                     std::optional<double> tolerance);

// Throws ConfigError for an unknown command or field name.
void validate_command(const RunConfig& cfg, const std::string& command);

// ---------------------------------------------------------------------------
// Suite

struct SuiteOptions {
  int samples = 20;
  std::uint64_t seed = 1;
  Exec exec = Exec::parallel;
};

struct CriterionResult {
  int id = 0;
  std::string title;
  double value = 0.0;      // worst measured quantity
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct SuiteResult {
  std::vector<CriterionResult> criteria;
  // Worst verdict per registry key over every Taylor run of the suite.
  std::map<std::string, IdentityReport> registry;
  bool pass() const;
};

SuiteResult run_suite(const SuiteOptions& opts);
// Single criterion, 1..11.
CriterionResult run_criterion(int id, const SuiteOptions& opts, SuiteResult* sink = nullptr);

// ---------------------------------------------------------------------------
// Commands and report

// CSV row; x and u are empty for rows not tied to a sample point, k and l are -1 when unused.
struct CsvRow {
  std::vector<double> x, u;
  std::string block;
  int k = -1, l = -1;
  double value = 0.0;
};

struct CommandResult {
  std::string command;
  bool ok = true;
  std::string error;  // set when the command threw
  Json data;
  std::vector<CsvRow> rows;
};

CommandResult run_command(const RunConfig& cfg, const std::string& command, Exec exec = Exec::parallel);

struct Report {
  std::string config_digest;
  std::vector<CommandResult> results;
  double wall_seconds = 0.0;
  bool ok() const;
};

Report run_report(const RunConfig& cfg, const std::vector<std::string>& commands, Exec exec = Exec::parallel);

// Wall time is written only when `timing` is set, so default output is byte-stable.
std::string report_json(const Report& report, bool timing = false);
// Columns: x1..xn, u1..un, block, k, l, value.
std::string report_csv(const Report& report, int dim);

std::string fnv1a_hex(const std::string& bytes);
inline constexpr const char* kVersion = "0.1.0";

}  // namespace gnat
