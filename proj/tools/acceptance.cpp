#include <cstdio>
#include <set>

#include <CLI11.hpp>

#include "twistflow/acceptance.hpp"

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  int grid_n = 64;
  std::vector<int> only;
  std::vector<int> expect_fail;
  app.add_option("--grid", grid_n, "grid size");
  app.add_option("--only", only, "criterion ids to run");
  app.add_option("--expect-fail", expect_fail, "ids known to fail; exit 0 when exactly these fail");
  CLI11_PARSE(app, argc, argv);

  twistflow::AcceptanceOptions opts;
  opts.grid_n = grid_n;
  opts.only = {only.begin(), only.end()};
  opts.on_result = [](const twistflow::CriterionResult& r) {
    std::printf("%s criterion %2d %-30s %6.2fs  %s\n", r.passed ? "PASS" : "FAIL", r.id, r.title.c_str(), r.seconds,
                r.detail.c_str());
    std::fflush(stdout);
  };
  const auto results = twistflow::run_acceptance(opts);
  const std::set<int> expected(expect_fail.begin(), expect_fail.end());
  std::set<int> failed;
  for (const auto& r : results)
    if (!r.passed) failed.insert(r.id);
  std::printf("%zu/%zu criteria pass\n", results.size() - failed.size(), results.size());
  for (int id : expected)
    if (!failed.contains(id) && (opts.only.empty() || opts.only.contains(id)))
      std::printf("criterion %d was expected to fail but passed\n", id);
  std::set<int> unexpected;
  for (int id : failed)
    if (!expected.contains(id)) unexpected.insert(id);
  for (int id : unexpected) std::printf("criterion %d failed unexpectedly\n", id);
  bool surprise_pass = false;
  for (int id : expected)
    if (!failed.contains(id) && (opts.only.empty() || opts.only.contains(id))) surprise_pass = true;
  return unexpected.empty() && !surprise_pass ? 0 : 1;
}
