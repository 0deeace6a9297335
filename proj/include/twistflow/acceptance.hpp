#pragma once

#include <functional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace twistflow {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  int grid_n = 64;
  /// empty runs everything
  std::set<int> only;
  /// called after each criterion, for streaming output
  std::function<void(const CriterionResult&)> on_result;
};

inline constexpr int kCriterionCount = 15;

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts = {});

nlohmann::json criteria_json(const std::vector<CriterionResult>& results);

}  // namespace twistflow
