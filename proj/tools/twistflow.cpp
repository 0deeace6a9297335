#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "twistflow/acceptance.hpp"
#include "twistflow/scenario.hpp"

namespace fs = std::filesystem;
using namespace twistflow;

namespace {

int exit_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::IoError:
    case ErrorCode::ParseError:
    case ErrorCode::UnknownPreset:
    case ErrorCode::BadField: return kExitIo;
    default: return kExitNumeric;
  }
}

void apply_thread_env() {
  if (const char* env = std::getenv("TWISTFLOW_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) set_thread_limit(n);
    } catch (const std::exception&) {
      std::cerr << "ignoring TWISTFLOW_THREADS=" << env << "\n";
    }
  }
}

int run_single(const fs::path& config, Action action, const std::string& out) {
  ScenarioConfig cfg;
  try {
    cfg = load_config(config);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_for(e);
  }
  cfg.action = action;
  if (!out.empty()) cfg.output_dir = out;
  ScenarioResult r = run_scenario(cfg);
  try {
    emit_reports({r});
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitIo;
  }
  for (const auto& err : r.report["errors"]) std::cerr << err["message"].get<std::string>() << "\n";
  std::cout << (r.output_dir / r.name).string() << "\n";
  return r.exit_code;
}

int run_suite(const fs::path& dir, const std::string& out, bool skip_acceptance, int grid_n) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    std::cerr << "not a directory: " << dir << "\n";
    return kExitIo;
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  const fs::path out_dir = out.empty() ? dir / "out" : fs::path(out);
  int code = kExitOk;
  nlohmann::json scenarios = nlohmann::json::array();
  for (const auto& f : files) {
    int status = kExitOk;
    std::string name = f.stem().string();
    std::string action;
    try {
      ScenarioConfig cfg = load_config(f);
      cfg.output_dir = out_dir;
      name = cfg.name;
      action = to_string(cfg.action);
      ScenarioResult r = run_scenario(cfg);
      emit_reports({r});
      status = r.exit_code;
    } catch (const Error& e) {
      std::cerr << f.string() << ": " << e.what() << "\n";
      status = exit_for(e);
    }
    std::cout << (status == kExitOk ? "ok   " : "fail ") << name << " (exit " << status << ")\n";
    scenarios.push_back({{"name", name}, {"action", action}, {"exit_code", status}, {"status", status == kExitOk ? "pass" : "fail"}});
    code = std::max(code, status);
  }

  nlohmann::json criteria = nlohmann::json::array();
  if (!skip_acceptance) {
    AcceptanceOptions opts;
    opts.grid_n = grid_n;
    opts.on_result = [](const CriterionResult& r) {
      std::cout << (r.passed ? "PASS " : "FAIL ") << r.id << " " << r.title << ": " << r.detail << "\n";
    };
    criteria = criteria_json(run_acceptance(opts));
  } else {
    for (int id = 1; id <= kCriterionCount; ++id) criteria.push_back({{"id", id}, {"status", "skipped"}});
  }
  fs::create_directories(out_dir, ec);
  std::ofstream summary(out_dir / "suite_summary.json");
  if (ec || !summary) {
    std::cerr << "cannot write " << (out_dir / "suite_summary.json") << "\n";
    return kExitIo;
  }
  summary << render_report({{"scenarios", scenarios}, {"criteria", criteria}});
  if (!summary) return kExitIo;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_env();
  CLI::App app{"twisted bundle Hermite-Einstein lab"};
  app.require_subcommand(1);

  struct Single {
    const char* name;
    Action action;
    const char* help;
  };
  const Single singles[] = {
      {"validate", Action::Validate, "check the cocycle and the initial metric"},
      {"report", Action::Report, "degree, Einstein constant, HE residual and stability verdict"},
      {"flow", Action::Flow, "run the heat flow and write trace.csv"},
      {"lagrangian", Action::Lagrangian, "Lagrangian between the initial and target metrics"},
  };
  std::string config;
  std::string out;
  int code = kExitOk;
  for (const auto& s : singles) {
    auto* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("config", config, "scenario JSON")->required();
    sub->add_option("--out", out, "override output_dir");
    const Action action = s.action;
    sub->callback([&, action] { code = run_single(config, action, out); });
  }

  std::string dir;
  bool skip = false;
  int grid_n = 64;
  auto* suite = app.add_subcommand("suite", "run every config in a directory plus the acceptance criteria");
  suite->add_option("dir", dir, "directory of scenario JSON files")->required();
  suite->add_option("--out", out, "output directory (default <dir>/out)");
  suite->add_flag("--skip-acceptance", skip, "only run the scenario files");
  suite->add_option("--grid", grid_n, "grid size for the acceptance criteria");
  suite->callback([&] { code = run_suite(dir, out, skip, grid_n); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitIo;
  }
  return code;
}
