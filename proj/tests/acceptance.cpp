// Runs every verification suite at medium size and prints one PASS/FAIL line per acceptance
// criterion, preceded by the individual measurements. Exit status 0 iff every criterion passes.
#include <cstdio>
#include <cstdlib>
#include <map>
#include <string>

#include <glog/logging.h>

#include "gauge_ot_checks/checks.hpp"

namespace {

const std::map<int, std::string> kCriteria = {
    {1, "scalar recovery against the 1D oracle"},
    {2, "momentum-map duality (vector and matrix)"},
    {3, "conservation on balanced geodesics"},
    {4, "coadjoint action vs bracket duality"},
    {5, "reduced system vs concrete integrators, one RK4 step"},
    {6, "rank-1 commuting diagram, second order"},
    {7, "horizontal lifts orthogonal to vertical generators"},
    {8, "shoot vs path_relax on forward-generated instances"},
    {9, "adjoint gradients vs central differences"},
    {10, "unbalanced mass laws, second order"},
    {11, "alternative system consistency"},
};

}  // namespace

int main(int argc, char** argv) {
  google::InitGoogleLogging(argv[0]);
  FLAGS_minloglevel = google::GLOG_FATAL;
  using namespace gauge_ot::checks;
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;
  const Report r = run_suite("all", seed, Size::Medium, default_threads());

  std::map<int, bool> ok;
  for (const auto& [id, name] : kCriteria) ok[id] = false;
  std::map<int, int> seen;
  for (const Check& c : r.checks) {
    std::printf("  [%s] c%-2d %-10s %-60s measured %.6e %s %.3e%s%s\n", c.pass ? "ok" : "!!", c.criterion,
                c.suite.c_str(), c.name.c_str(), c.measured, c.timing ? "limit" : "tol", c.tolerance,
                c.detail.empty() ? "" : "  ", c.detail.c_str());
    for (const auto& row : c.table) {
      std::printf("        ");
      for (std::size_t j = 0; j < row.size(); ++j)
        std::printf("%s=%.6g ", j < c.columns.size() ? c.columns[j].c_str() : "?", row[j]);
      std::printf("\n");
    }
    if (c.criterion == 0) continue;
    ok[c.criterion] = (seen[c.criterion]++ == 0 ? true : ok[c.criterion]) && c.pass;
  }
  bool all = true;
  for (const auto& [id, name] : kCriteria) {
    const bool pass = seen[id] > 0 && ok[id];
    all = all && pass;
    std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", id, name.c_str());
  }
  std::fflush(stdout);
  return all ? 0 : 1;
}
