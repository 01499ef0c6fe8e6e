#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <glog/logging.h>

#include <CLI11.hpp>

#include "gauge_ot/bvp.hpp"
#include "gauge_ot/calculus.hpp"
#include "gauge_ot/errors.hpp"
#include "gauge_ot/fiber.hpp"
#include "gauge_ot/version.hpp"
#include "gauge_ot_checks/checks.hpp"
#include "io.hpp"

namespace fs = std::filesystem;
using namespace gauge_ot;
using namespace gauge_ot::cli;

namespace {

enum Exit { kOk = 0, kInput = 1, kSolver = 2, kVerify = 3 };

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw SchemaError("out", "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json base_result(const std::string& command, std::uint64_t seed) {
  return {{"version", version()}, {"command", command}, {"seed", seed}};
}

// ---- distance

json solution_json(const BvpSolution& s, const BvpOptions& o, double seconds) {
  return {{"distance_sq", s.distance_sq},
          {"endpoint_residual", s.endpoint_residual},
          {"residual_tol", o.residual_tol},
          {"converged", s.converged},
          {"iterations", s.iterations},
          {"seconds", seconds}};
}

void write_solution_trajectory(const fs::path& dir, const BvpProblem& p, const BvpSolution& s) {
  const PeriodicGrid& g = p.endpoint0.grid();
  const bool matrix = is_matrix_space(p.space);
  const bool prob = p.space == Space::VhProb || p.space == Space::MProb;
  const int n = static_cast<int>(s.trajectory.size()) - 1;
  std::vector<Snapshot> snaps;
  std::vector<Diagnostics> diag;
  const auto mass = [&](const Field& f) { return matrix ? matrix_mass(f) : vector_mass(f); };
  const double m0 = mass(s.trajectory.front());
  for (int i = 0; i <= n; ++i) {
    const Field& f = s.trajectory[static_cast<std::size_t>(i)];
    const double t = n > 0 ? static_cast<double>(i) / n : 0.0;
    snaps.push_back({t, {{matrix ? "sigma" : "w", f}}});
    // relax: Bures energy of the step's controls; shoot: the conserved geodesic energy
    double e = s.distance_sq;
    if (!s.controls.u.empty()) {
      const std::size_t c = static_cast<std::size_t>(std::min(i, s.controls.steps() - 1));
      const Field a = matrix ? s.controls.a[c] : project_flavor(s.controls.a[c], p.k(), space_flavor(p.space)).values;
      e = matrix ? bures_energy_matrix(s.controls.u[c], a, f) : bures_energy(s.controls.u[c], a, f);
    }
    diag.push_back({t, mass(f), e, prob ? std::abs(mass(f) - m0) : 0.0});
  }
  write_trajectory(dir, g, snaps, diag,
                   {{"version", version()}, {"kind", "bvp"}, {"space", to_string(p.space)}, {"method", s.method}});
}

int cmd_distance(const fs::path& problem, const std::string& solver, const fs::path& out, const std::string& traj) {
  const auto t0 = std::chrono::steady_clock::now();
  const ProblemFile pf = load_problem(problem);
  const BvpProblem p = distance_problem(pf);
  json r = base_result("distance", pf.seed);
  r["inputs"] = {{"problem", problem.string()}, {"document", pf.doc}, {"solver", solver}};
  json results = json::object();
  bool ok = true;
  const BvpSolution* best = nullptr;
  BvpSolution sh, rx;
  auto run = [&](const std::string& name, BvpSolution (*fn)(const BvpProblem&), BvpSolution& dst) {
    const auto ts = std::chrono::steady_clock::now();
    try {
      dst = fn(p);
      results[name] = solution_json(dst, p.options, seconds_since(ts));
      ok = ok && dst.converged;
      if (!best || dst.endpoint_residual < best->endpoint_residual) best = &dst;
    } catch (const NoConvergence& e) {
      results[name] = {{"error", e.what()}, {"endpoint_residual", e.residual()}, {"iterations", e.iterations()},
                       {"converged", false}, {"seconds", seconds_since(ts)}};
      ok = false;
    }
  };
  if (solver == "shoot" || solver == "both") run("shoot", shoot, sh);
  if (solver == "relax" || solver == "both") run("relax", path_relax, rx);
  r["results"] = results;
  if (best) {
    r["distance_sq"] = best->distance_sq;
    r["endpoint_residual"] = best->endpoint_residual;
    r["residual_tol"] = p.options.residual_tol;
  }
  if (results.contains("shoot") && results.contains("relax") && results["shoot"].contains("distance_sq") &&
      results["relax"].contains("distance_sq")) {
    const double a = sh.distance_sq, b = rx.distance_sq;
    r["relative_gap"] = std::max(a, b) > 0.0 ? std::abs(a - b) / std::max(a, b) : 0.0;
  }
  if (!traj.empty() && best) {
    write_solution_trajectory(traj, p, *best);
    r["trajectory_dir"] = traj;
  }
  r["converged"] = ok;
  r["timings"] = {{"total_seconds", seconds_since(t0)}};
  write_json(out, r);
  std::printf("distance_sq %s (%s)\n", best ? format_double(best->distance_sq).c_str() : "n/a",
              ok ? "converged" : "not converged");
  return ok ? kOk : kSolver;
}

// ---- geodesic

struct GeodesicRun {
  std::vector<Snapshot> snaps;
  std::vector<Diagnostics> diag;
};

GeodesicRun run_vector(const ProblemFile& pf, VectorSystem sys, GeodesicMethod method, SignConvention conv,
                       double T, int steps, int substeps) {
  const VectorGeodesicState s0 = vector_initial_state(pf, sys);
  const auto traj = integrate_geodesic_vector(s0, T, steps, {sys, method, conv, substeps});
  const Flavor flavor = sys == VectorSystem::Balanced ? Flavor::So : Flavor::Conf;
  GeodesicRun out;
  for (const auto& st : traj) {
    out.snaps.push_back({st.t, {{"u", st.u}, {"a", st.a}, {"w", st.w}}});
    const double defect = (project_flavor(st.a, st.k(), flavor).values - st.a).max_abs();
    out.diag.push_back({st.t, vector_mass(st.w), bures_energy(st.u, st.a, st.w), defect});
  }
  return out;
}

GeodesicRun run_matrix(const ProblemFile& pf, MatrixSystem sys, SignConvention conv, double T, int steps,
                       int substeps) {
  const MatrixGeodesicState s0 = matrix_initial_state(pf, sys);
  const auto traj = integrate_geodesic_matrix(s0, T, steps, {sys, conv, substeps, false});
  GeodesicRun out;
  for (const auto& st : traj) {
    out.snaps.push_back({st.t, {{"u", st.u}, {"a", st.a}, {"S", st.S}, {"rho", st.rho}}});
    const Field sigma = st.sigma();
    const double e = sys == MatrixSystem::Alternative ? alternative_energy_matrix(st.u, st.a, sigma)
                                                      : bures_energy_matrix(st.u, st.a, sigma);
    const double c = sys == MatrixSystem::Balanced ? pgl_constraint_defect(st.a, st.S) : max_trace_drift(st.S);
    out.diag.push_back({st.t, integrate(st.rho), e, c});
  }
  return out;
}

json conservation_json(const std::vector<Diagnostics>& d) {
  json steps = json::array();
  double dm = 0.0, de = 0.0, dc = 0.0;
  for (const auto& x : d) {
    steps.push_back({{"t", x.t}, {"mass", x.mass}, {"energy", x.energy}, {"constraint_drift", x.constraint}});
    dm = std::max(dm, std::abs(x.mass - d.front().mass));
    de = std::max(de, std::abs(x.energy - d.front().energy) / std::max(std::abs(d.front().energy), 1e-300));
    dc = std::max(dc, x.constraint);
  }
  return {{"max_mass_drift", dm}, {"max_relative_energy_drift", de}, {"max_constraint", dc}, {"per_step", steps}};
}

int cmd_geodesic(const fs::path& problem, double T, int steps, const std::string& system, const std::string& method,
                 const std::string& convention, int substeps, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const ProblemFile pf = load_problem(problem);
  if (steps < 1) throw SchemaError("--steps", "must be positive");
  if (!(T > 0.0)) throw SchemaError("--T", "must be positive");
  const SignConvention conv = convention == "published" ? SignConvention::Published : SignConvention::Derived;
  json r = base_result("geodesic", pf.seed);
  r["inputs"] = {{"problem", problem.string()}, {"document", pf.doc}, {"T", T},        {"steps", steps},
                 {"system", system},            {"method", method},   {"convention", convention}, {"substeps", substeps}};
  int code = kOk;
  try {
    GeodesicRun run;
    if (system == "vector-balanced" || system == "vector-unbalanced") {
      const VectorSystem sys = system == "vector-balanced" ? VectorSystem::Balanced : VectorSystem::Unbalanced;
      const GeodesicMethod m = method == "eulerian" ? GeodesicMethod::Eulerian : GeodesicMethod::Characteristics;
      run = run_vector(pf, sys, m, conv, T, steps, substeps);
    } else {
      if (method == "characteristics") throw SchemaError("--method", "matrix systems are integrated eulerian");
      const MatrixSystem sys = system == "matrix-balanced"   ? MatrixSystem::Balanced
                               : system == "matrix-alternative" ? MatrixSystem::Alternative
                                                                : MatrixSystem::Unbalanced;
      run = run_matrix(pf, sys, conv, T, steps, substeps);
    }
    write_trajectory(out_dir, pf.grid, run.snaps, run.diag,
                     {{"version", version()}, {"kind", "geodesic"}, {"system", system}, {"T", T}, {"steps", steps}});
    r["trajectory_dir"] = out_dir.string();
    r["conservation"] = conservation_json(run.diag);
    r["status"] = "ok";
  } catch (const ShockTime& e) {
    r["status"] = "shock";
    r["error"] = e.what();
    r["failing_time"] = e.time();
    code = kSolver;
  } catch (const CflViolation& e) {
    r["status"] = "cfl";
    r["error"] = e.what();
    r["courant"] = e.courant();
    code = kSolver;
  } catch (const DegenerateDensity& e) {
    r["status"] = "degenerate";
    r["error"] = e.what();
    code = kSolver;
  }
  r["timings"] = {{"total_seconds", seconds_since(t0)}};
  write_json(out_dir / "result.json", r);
  if (code != kOk) std::fprintf(stderr, "error: %s\n", r["error"].get<std::string>().c_str());
  return code;
}

// ---- verify

json check_json(const checks::Check& c) {
  json j = {{"criterion", c.criterion}, {"suite", c.suite},         {"name", c.name},
            {"measured", c.measured},   {"tolerance", c.tolerance}, {"pass", c.pass}};
  if (!c.detail.empty()) j["detail"] = c.detail;
  if (!c.columns.empty()) {
    j["columns"] = c.columns;
    j["table"] = c.table;
  }
  return j;
}

int cmd_verify(const std::string& suite, std::uint64_t seed, const std::string& size, const std::string& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const checks::Size sz = checks::size_from_string(size);
  const checks::Report rep = checks::run_suite(suite, seed, sz, checks::default_threads());
  json body = json::array(), timing = json::array();
  for (const auto& c : rep.checks) {
    if (c.timing) {
      timing.push_back(check_json(c));
      continue;
    }
    body.push_back(check_json(c));
    std::printf("%s  c%-2d %-12s %-58s %.6e  (tol %.1e)\n", c.pass ? "PASS" : "FAIL", c.criterion, c.suite.c_str(),
                c.name.c_str(), c.measured, c.tolerance);
    for (const auto& row : c.table) {
      std::printf("      ");
      for (std::size_t j = 0; j < row.size(); ++j)
        std::printf(" %s=%.6g", j < c.columns.size() ? c.columns[j].c_str() : "?", row[j]);
      std::printf("\n");
    }
  }
  std::printf("-- timings\n");
  for (const auto& c : rep.checks)
    if (c.timing)
      std::printf("%s  c%-2d %-12s %-58s %.2f s  (limit %.0f s)\n", c.pass ? "PASS" : "FAIL", c.criterion,
                  c.suite.c_str(), c.name.c_str(), c.measured, c.tolerance);
  std::printf("%s\n", rep.passed() ? "all checks passed" : "verification FAILED");
  if (!out.empty()) {
    json r = base_result("verify", seed);
    r["inputs"] = {{"suite", suite}, {"size", size}};
    r["report"] = {{"passed", rep.passed()}, {"checks", body}};
    r["timings"] = {{"checks", timing}, {"total_seconds", seconds_since(t0)}};
    write_json(out, r);
  }
  return rep.passed() ? kOk : kVerify;
}

// ---- export

int cmd_export(const fs::path& state_dir, const std::string& format, const std::string& out) {
  if (format != "csv") throw SchemaError("--format", "only csv is supported");
  const Trajectory tr = read_trajectory(state_dir);
  const fs::path dir = out.empty() ? state_dir / "csv" : fs::path(out);
  const auto files = export_csv(tr, dir);
  std::printf("wrote %zu files to %s\n", files.size(), dir.string().c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  google::InitGoogleLogging(argv[0]);
  FLAGS_minloglevel = google::GLOG_FATAL;
  CLI::App app{"Gauge-theoretic optimal transport of vector half-densities and matrix densities"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);

  std::string problem, solver = "relax", out, traj;
  auto* dist = app.add_subcommand("distance", "Distance between two endpoints of a problem file");
  dist->add_option("problem", problem, "problem JSON")->required();
  dist->add_option("--solver", solver, "shoot, relax or both")
      ->check(CLI::IsMember({"shoot", "relax", "both"}));
  dist->add_option("--out", out, "result JSON")->required();
  dist->add_option("--trajectory-dir", traj, "also write the solution path here");

  double T = 1.0;
  int steps = 32, substeps = 1;
  std::string system, method = "characteristics", convention = "derived", out_dir;
  auto* geo = app.add_subcommand("geodesic", "Integrate a geodesic system from an initial state");
  geo->add_option("problem", problem, "problem JSON with an 'initial' block")->required();
  geo->add_option("--T", T, "final time");
  geo->add_option("--steps", steps, "output steps");
  geo->add_option("--system", system, "geodesic system")
      ->required()
      ->check(CLI::IsMember(
          {"vector-balanced", "vector-unbalanced", "matrix-unbalanced", "matrix-balanced", "matrix-alternative"}));
  geo->add_option("--method", method, "characteristics (vector only) or eulerian")
      ->check(CLI::IsMember({"characteristics", "eulerian"}));
  geo->add_option("--convention", convention, "sign convention")->check(CLI::IsMember({"derived", "published"}));
  geo->add_option("--substeps", substeps, "RK4 steps per output step")->check(CLI::PositiveNumber);
  geo->add_option("--out-dir", out_dir, "trajectory directory")->required();

  std::string suite = "all", size = "small";
  std::uint64_t seed = 1;
  auto* ver = app.add_subcommand("verify", "Run verification suites");
  ver->add_option("--suite", suite)->check(
      CLI::IsMember({"duality", "conservation", "submersion", "rank1", "oracle", "appendixA", "all"}));
  ver->add_option("--seed", seed);
  ver->add_option("--size", size)->check(CLI::IsMember({"small", "medium"}));
  ver->add_option("--out", out, "report JSON");

  std::string state_dir, format = "csv", export_out;
  auto* exp = app.add_subcommand("export", "Export a trajectory directory for plotting");
  exp->add_option("state_dir", state_dir)->required();
  exp->add_option("--format", format)->check(CLI::IsMember({"csv"}));
  exp->add_option("--out-dir", export_out, "default: <state_dir>/csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  // geodesic default method depends on the system family
  if (geo->parsed() && system.rfind("matrix", 0) == 0 && geo->count("--method") == 0) method = "eulerian";

  try {
    if (dist->parsed()) return cmd_distance(problem, solver, out, traj);
    if (geo->parsed()) return cmd_geodesic(problem, T, steps, system, method, convention, substeps, out_dir);
    if (ver->parsed()) return cmd_verify(suite, seed, size, out);
    if (exp->parsed()) return cmd_export(state_dir, format, export_out);
  } catch (const SchemaError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInput;
  } catch (const PreconditionViolation& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInput;
  } catch (const ShapeMismatch& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInput;
  } catch (const Error& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return kSolver;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInput;
  }
  return kInput;
}
