#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "twistflow/flow.hpp"

namespace twistflow {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvariant = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitIo = 4;

struct InitialMetricSpec {
  enum class Kind { Reference, Conformal, Random };
  Kind kind = Kind::Reference;
  /// conformal factor id: cos_s, cos_t, cos_st, bump, random
  std::string expression = "cos_s";
  double amplitude = 0.5;
  std::uint64_t seed = 1;
  int modes = 2;
};

enum class Action { Validate, Report, Lagrangian, Flow, Suite };

std::string to_string(Action action);

struct ScenarioConfig {
  std::string name;
  std::string preset;
  PresetKind kind = PresetKind::LineBundle;
  PresetParams params;
  cplx tau{0.0, 1.0};
  int grid_n = 64;
  double b_coeff = 0.0;
  InitialMetricSpec initial;
  Action action = Action::Report;
  FlowConfig flow;
  /// target metric and quadrature nodes for the lagrangian action
  InitialMetricSpec target{InitialMetricSpec::Kind::Random, "cos_s", 0.3, 2, 2};
  int path_nodes = 33;
  std::filesystem::path output_dir = "out";
  /// the parsed document, echoed into report.json
  nlohmann::json source;
};

/// Validates and fills defaults (N = 64, τ = i, b = 0). Throws IoError when
/// the file cannot be read, ParseError, UnknownPreset or BadField otherwise;
/// messages carry the offending field path.
ScenarioConfig load_config(const std::filesystem::path& path);
ScenarioConfig parse_config(const nlohmann::json& doc, const std::string& default_name);

/// Real conformal factor of the given id scaled to sup norm `amplitude`.
ScalarField conformal_factor(const TorusGeometry& geom, const std::string& id, double amplitude,
                             std::uint64_t seed = 1, int modes = 2);

BundlePtr build_bundle(const ScenarioConfig& cfg);
MetricState build_metric(const BundlePtr& bundle, const InitialMetricSpec& spec);

struct ScenarioResult {
  std::string name;
  std::filesystem::path output_dir;
  int exit_code = kExitOk;
  nlohmann::json report;
  std::optional<FlowTrace> trace;
};

/// Numeric failures land in report["errors"] with exit 3; a monotonicity
/// breach in the flow trace gives exit 2.
ScenarioResult run_scenario(const ScenarioConfig& cfg);

/// Writes <output_dir>/<name>/report.json and, for flows, trace.csv.
/// Throws IoError.
void emit_reports(const std::vector<ScenarioResult>& results);

/// report.json text: sorted keys, shortest round-trip doubles.
std::string render_report(const nlohmann::json& report);

}  // namespace twistflow
