#include <cmath>

#include "common.hpp"
#include "gauge_ot/bvp.hpp"
#include "gauge_ot/errors.hpp"
#include "gauge_ot/fiber.hpp"
#include "gauge_ot_checks/fixtures.hpp"

namespace gauge_ot::checks::detail {

namespace {

Controls random_controls(const PeriodicGrid& g, int k, int steps, std::uint64_t seed, double amp) {
  Controls c;
  for (int n = 0; n < steps; ++n) {
    const std::uint64_t s = seed + 10 * static_cast<std::uint64_t>(n);
    c.u.push_back(random_band_limited(g, g.dim(), s, 2, amp));
    c.a.push_back(random_band_limited(g, k * k, s + 5, 2, amp));
  }
  return c;
}

double controls_dot(const Controls& x, const Controls& y) {
  double s = 0.0;
  for (std::size_t n = 0; n < x.u.size(); ++n)
    s += dot(x.u[n].values(), y.u[n].values()) + dot(x.a[n].values(), y.a[n].values());
  return s * x.u.front().grid().cell_volume();
}

Controls shifted(const Controls& x, double s, const Controls& d) {
  Controls out = x;
  for (std::size_t n = 0; n < x.u.size(); ++n) {
    out.u[n].axpy(s, d.u[n]);
    out.a[n].axpy(s, d.a[n]);
  }
  return out;
}

struct SolverRun {
  double distance_sq = 0.0;
  double seconds = 0.0;
  bool converged = false;
};

// a solver error shows up as a NaN distance, which fails every comparison
SolverRun timed(BvpSolution (*solver)(const BvpProblem&), const BvpProblem& p) {
  Stopwatch sw;
  try {
    const BvpSolution s = solver(p);
    return {s.distance_sq, sw.seconds(), s.converged};
  } catch (const Error&) {
    return {NAN, sw.seconds(), false};
  }
}

}  // namespace

std::vector<Check> oracle_suite(std::uint64_t seed, Size size, int threads) {
  const std::string suite = "oracle";
  const bool medium = size == Size::Medium;
  std::vector<Check> out;

  // scalar recovery against the 1D monotone-rearrangement oracle
  {
    const auto g = PeriodicGrid::line(medium ? 256 : 128);
    auto pairs = fixtures::oracle_pairs(g);
    if (!medium) pairs.resize(2);
    BvpOptions opt;
    opt.steps = medium ? 32 : 16;
    opt.max_seconds = 55.0;
    const int n = static_cast<int>(pairs.size());
    std::vector<double> oracle(pairs.size());
    std::vector<SolverRun> sh(pairs.size()), rx(pairs.size());
    parallel_for(n, threads, [&](int i) {
      const auto& [r0, r1] = pairs[static_cast<std::size_t>(i)];
      const BvpProblem p{Space::VhProb, fixtures::sqrt_density(r0), fixtures::sqrt_density(r1), opt};
      oracle[static_cast<std::size_t>(i)] = wasserstein_1d_oracle(r0, r1);
      sh[static_cast<std::size_t>(i)] = timed(shoot, p);
      rx[static_cast<std::size_t>(i)] = timed(path_relax, p);
    });
    double es = 0.0, er = 0.0, ts = 0.0, tr = 0.0;
    Check table = make_check(1, suite, "scalar recovery: worst relative error of either solver", 0.0, 0.02);
    table.columns = {"pair", "oracle", "shoot", "path_relax"};
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      es = worse(es, relative(sh[i].distance_sq, oracle[i]));
      er = worse(er, relative(rx[i].distance_sq, oracle[i]));
      ts = std::max(ts, sh[i].seconds);
      tr = std::max(tr, rx[i].seconds);
      table.table.push_back({static_cast<double>(i), oracle[i], sh[i].distance_sq, rx[i].distance_sq});
    }
    const std::string where = std::to_string(pairs.size()) + " pairs, N=" + std::to_string(g.size(0)) + ", " +
                              std::to_string(opt.steps) + " steps, k=1 vhprob";
    out.push_back(make_check(1, suite, "scalar recovery: shoot vs oracle (relative)", es, 0.02, where));
    out.push_back(make_check(1, suite, "scalar recovery: path_relax vs oracle (relative)", er, 0.02, where));
    table.measured = worse(es, er);
    table.pass = table.measured <= table.tolerance;
    table.detail = where;
    out.push_back(table);
    out.push_back(make_timing(1, suite, "scalar recovery: slowest shoot pair (s)", ts, 60.0));
    out.push_back(make_timing(1, suite, "scalar recovery: slowest path_relax pair (s)", tr, 60.0));
  }

  // solver agreement on forward-generated k = 2 instances
  {
    const auto g = PeriodicGrid::line(32);
    const int per = medium ? 5 : 2;
    BvpOptions opt;
    opt.steps = 16;
    opt.max_seconds = 60.0;
    for (bool matrix : {false, true}) {
      std::vector<double> agree(static_cast<std::size_t>(per)), recover(static_cast<std::size_t>(per));
      std::vector<std::vector<double>> rows(static_cast<std::size_t>(per));
      parallel_for(per, threads, [&](int i) {
        const Space s = matrix ? (i % 2 ? Space::MDens : Space::MProb) : (i % 2 ? Space::VhDens : Space::VhProb);
        const std::uint64_t sd = seed * 1000 + 1100 + (matrix ? 50 : 0) + static_cast<std::uint64_t>(i) * 7;
        const auto [p, cost] = fixtures::forward_instance(s, g, 2, sd, 0.02, opt);
        const double ds = timed(shoot, p).distance_sq, dr = timed(path_relax, p).distance_sq;
        agree[static_cast<std::size_t>(i)] = relative(ds, dr);
        recover[static_cast<std::size_t>(i)] = relative(ds, cost);
        rows[static_cast<std::size_t>(i)] = {static_cast<double>(i), cost, ds, dr};
      });
      const std::string kind = matrix ? "matrix" : "vector";
      const std::string where = std::to_string(per) + " instances, N=32, k=2, 16 steps";
      Check c = make_check(8, suite, kind + ": shoot vs path_relax (relative)",
                           worst(agree), 0.03, where);
      c.columns = {"instance", "generating_cost", "shoot", "path_relax"};
      c.table = rows;
      out.push_back(c);
      out.push_back(make_check(8, suite, kind + ": shoot vs generating cost (relative)",
                               worst(recover), 1e-4, where));
    }
  }

  // adjoint gradients against central differences
  {
    const auto g = PeriodicGrid::line(16);
    const int k = 2, steps = 16, per = medium ? 10 : 3;
    for (Space s : {Space::VhProb, Space::VhDens, Space::MProb, Space::MDens}) {
      const std::uint64_t sd = seed * 1000 + 1200 + static_cast<std::uint64_t>(s) * 100;
      const Field x0 = fixtures::endpoint(s, g, k, sd), x1 = fixtures::endpoint(s, g, k, sd + 1);
      const Controls c = random_controls(g, k, steps, sd + 2, 0.1);
      const RelaxObjective r = relax_objective(c, x0, x1, s, 3.0);
      std::vector<double> err(static_cast<std::size_t>(per));
      parallel_for(per, threads, [&](int i) {
        Controls d = random_controls(g, k, steps, sd + 1000 * static_cast<std::uint64_t>(i + 1), 1.0);
        // a enters vector spaces through its flavor projection
        if (!is_matrix_space(s))
          for (auto& a : d.a) a = project_flavor(a, k, space_flavor(s)).values;
        const double eps = 1e-5;
        const double fd = (relax_objective(shifted(c, eps, d), x0, x1, s, 3.0).objective -
                           relax_objective(shifted(c, -eps, d), x0, x1, s, 3.0).objective) /
                          (2 * eps);
        err[static_cast<std::size_t>(i)] = relative(controls_dot(r.gradient, d), fd);
      });
      out.push_back(make_check(9, suite, "adjoint vs central differences: " + to_string(s),
                               worst(err), 1e-4,
                               std::to_string(per) + " perturbations, N=16, k=2, 16 steps"));
    }
  }
  return out;
}

}  // namespace gauge_ot::checks::detail
