#include <cmath>

#include "common.hpp"
#include "gauge_ot/integrators.hpp"
#include "gauge_ot/matrix_transport.hpp"
#include "gauge_ot/vector_transport.hpp"
#include "gauge_ot_checks/fixtures.hpp"

namespace gauge_ot::checks::detail {

namespace {

Field times_norm(const Field& theta, const Field& w) {
  Field out = theta;
  for (std::size_t c = 0; c < w.cells(); ++c) {
    double n = 0.0;
    for (double x : w.at(c)) n += x * x;
    for (double& x : out.at(c)) x *= std::sqrt(n);
  }
  return out;
}

}  // namespace

std::vector<Check> duality_suite(std::uint64_t seed, Size size, int threads) {
  const std::string suite = "duality";
  const int n = size == Size::Medium ? 64 : 32;
  const int trials = size == Size::Medium ? 20 : 5;
  const auto g = PeriodicGrid::square(n);
  std::vector<Check> out;
  Stopwatch clock;

  std::vector<double> vec_err(static_cast<std::size_t>(trials)), mat_err(static_cast<std::size_t>(trials));
  parallel_for(trials, threads, [&](int i) {
    const std::uint64_t s = seed * 1000 + static_cast<std::uint64_t>(i) * 10;
    const int k = 2 + i % 2;
    const Flavor fl = i % 4 < 2 ? Flavor::So : Flavor::Conf;
    const Field w = fixtures::half_density(g, k, s + 1);
    const Field theta = random_band_limited(g, k, s + 2);
    const Field u = random_band_limited(g, 2, s + 3);
    const auto a = random_gauge_algebra(g, k, fl, s + 4);
    const double lhs = pairing(momentum_map_vector(w, theta, fl), Generator{u, a.values});
    const double rhs = field_dot(infinitesimal_action(u, a.values, w), times_norm(theta, w));
    vec_err[static_cast<std::size_t>(i)] = relative(lhs, rhs);

    const Field sigma = fixtures::spd_field(g, k, s + 5);
    const Field P = fixtures::symmetric_field(g, k, s + 6);
    const Generator xi{random_band_limited(g, 2, s + 7), random_band_limited(g, k * k, s + 8)};
    const double ml = pairing(momentum_map_matrix(sigma, P), xi);
    const double mr = field_dot(P, infinitesimal_action_matrix(xi.u, xi.a, sigma));
    mat_err[static_cast<std::size_t>(i)] = relative(ml, mr);
  });
  const double elapsed = clock.seconds();
  const std::string where = std::to_string(trials) + " instances, N=" + std::to_string(n) + "x" +
                            std::to_string(n) + ", k in {2,3}";
  Check cv = make_check(2, suite, "vector momentum map duality (max relative)", worst(vec_err), 1e-12, where);
  Check cm = make_check(2, suite, "matrix momentum map duality (max relative)", worst(mat_err), 1e-12, where);
  cv.columns = cm.columns = {"trial", "relative_error"};
  for (int i = 0; i < trials; ++i) {
    cv.table.push_back({static_cast<double>(i), vec_err[static_cast<std::size_t>(i)]});
    cm.table.push_back({static_cast<double>(i), mat_err[static_cast<std::size_t>(i)]});
  }
  out.push_back(cv);
  out.push_back(cm);
  out.push_back(make_timing(2, suite, "duality runtime (s)", elapsed, 5.0));

  // ad* is the transpose of the bracket
  const int na = size == Size::Medium ? 32 : 16;
  const auto ga = PeriodicGrid::square(na);
  std::vector<double> ad_err(static_cast<std::size_t>(trials));
  parallel_for(trials, threads, [&](int i) {
    const std::uint64_t s = seed * 1000 + 500 + static_cast<std::uint64_t>(i) * 10;
    const int k = 2 + i % 2;
    const Generator x1{random_band_limited(ga, 2, s), random_gauge_algebra(ga, k, Flavor::So, s + 1).values};
    const Generator x2{random_band_limited(ga, 2, s + 2), random_gauge_algebra(ga, k, Flavor::So, s + 3).values};
    const Momentum mu{random_band_limited(ga, 2, s + 4), random_gauge_algebra(ga, k, Flavor::So, s + 5).values};
    const double lhs = pairing(ad_star_vector(x1.u, x1.a, mu.m, mu.beta), x2);
    const double rhs = pairing(mu, bracket(x1, x2));
    ad_err[static_cast<std::size_t>(i)] = relative(lhs, rhs);
  });
  Check cad = make_check(4, suite, "ad* / bracket duality (max relative)", worst(ad_err), 1e-6,
                         std::to_string(trials) + " instances, N=" + std::to_string(na) + "x" + std::to_string(na));
  cad.columns = {"trial", "relative_error"};
  for (int i = 0; i < trials; ++i) cad.table.push_back({static_cast<double>(i), ad_err[static_cast<std::size_t>(i)]});
  out.push_back(cad);
  return out;
}

std::vector<Check> submersion_suite(std::uint64_t seed, Size size, int threads) {
  const std::string suite = "submersion";
  const int n = size == Size::Medium ? 16 : 8;
  const int trials = size == Size::Medium ? 20 : 6;
  const auto g = PeriodicGrid::square(n);
  std::vector<double> vert(static_cast<std::size_t>(trials)), orth(static_cast<std::size_t>(trials)),
      lift(static_cast<std::size_t>(trials));
  parallel_for(trials, threads, [&](int i) {
    const std::uint64_t s = seed * 1000 + 100 + static_cast<std::uint64_t>(i) * 10;
    const int k = 2 + i % 2;
    const Field w = fixtures::half_density(g, k, s);
    const Field rho = polar_decompose(w).rho;
    const Generator v = vertical_generator(w, s + 1);
    vert[static_cast<std::size_t>(i)] = infinitesimal_action(v.u, v.a, w).max_abs();
    // horizontal lift of a tangent vector produced by a random generator
    const Field wdot = infinitesimal_action(random_band_limited(g, 2, s + 2, 3, 0.5),
                                            random_gauge_algebra(g, k, Flavor::So, s + 3).values, w);
    const VectorLift l = horizontal_lift(wdot, w);
    lift[static_cast<std::size_t>(i)] = l.relative_residual;
    Generator h = horizontal_from_theta(l.theta, w);
    for (std::size_t c = 0; c < g.cells(); ++c) {
      for (double& x : h.u.at(c)) x *= rho(c);
      for (double& x : h.a.at(c)) x *= rho(c);
    }
    orth[static_cast<std::size_t>(i)] = std::abs(pairing(Momentum{h.u, h.a}, v));
  });
  const std::string where = std::to_string(trials) + " vertical generators, N=" + std::to_string(n) + "x" +
                            std::to_string(n) + ", k in {2,3}";
  std::vector<Check> out;
  Check co = make_check(7, suite, "Bures pairing horizontal vs vertical (max abs)", worst(orth), 1e-8, where);
  co.columns = {"trial", "pairing", "vertical_action", "lift_residual"};
  for (int i = 0; i < trials; ++i) {
    const auto j = static_cast<std::size_t>(i);
    co.table.push_back({static_cast<double>(i), orth[j], vert[j], lift[j]});
  }
  out.push_back(co);
  out.push_back(make_check(7, suite, "vertical generators annihilate w (max abs)", worst(vert), 1e-8, where));
  out.push_back(make_check(7, suite, "horizontal lift relative residual (max)", worst(lift), 1e-6, where));
  return out;
}

std::vector<Check> appendix_suite(std::uint64_t seed, Size size, int threads) {
  const std::string suite = "appendixA";
  const int trials = size == Size::Medium ? 10 : 3;
  const int n = size == Size::Medium ? 64 : 32;
  const auto g = PeriodicGrid::line(n, 1.0, DiffScheme::Spectral);
  const double dt = 0.01;
  std::vector<Check> out;

  auto vec_diff = [](const VectorGeodesicState& a, const VectorGeodesicState& b) {
    return std::max({(a.u - b.u).max_abs(), (a.a - b.a).max_abs(), (a.w - b.w).max_abs()});
  };
  auto mat_diff = [](const MatrixGeodesicState& a, const MatrixGeodesicState& b) {
    return std::max({(a.u - b.u).max_abs(), (a.a - b.a).max_abs(), (a.S - b.S).max_abs(), (a.rho - b.rho).max_abs()});
  };

  // one RK4 step of the reduced (ad*, momentum map) system against each concrete integrator
  struct VecCase {
    const char* name;
    VectorSystem sys;
  };
  for (const VecCase vc : {VecCase{"vector-balanced", VectorSystem::Balanced},
                           VecCase{"vector-unbalanced", VectorSystem::Unbalanced}}) {
    const Flavor fl = vc.sys == VectorSystem::Balanced ? Flavor::So : Flavor::Conf;
    std::vector<double> err(static_cast<std::size_t>(trials));
    parallel_for(trials, threads, [&](int i) {
      const std::uint64_t s = seed * 1000 + 200 + static_cast<std::uint64_t>(i) * 10;
      VectorGeodesicState st{random_band_limited(g, 1, s, 2, 0.3),
                             project_flavor(random_band_limited(g, 4, s + 1, 2, 0.5), 2, fl).values,
                             fixtures::half_density(g, 2, s + 2, false, 0.3, 2), 0.0};
      const VectorGeodesicState concrete =
          integrate_geodesic_vector(st, dt, 1, {vc.sys, GeodesicMethod::Eulerian, SignConvention::Derived, 1}).back();
      VectorGeodesicState reduced =
          rk4_step([&](const VectorGeodesicState& x) { return vector_geodesic_rhs_reduced(x, vc.sys); }, st, dt);
      err[static_cast<std::size_t>(i)] = vec_diff(concrete, reduced);
    });
    out.push_back(make_check(5, suite, std::string("reduced vs concrete RK4 step, ") + vc.name, worst(err), 1e-8,
                             std::to_string(trials) + " instances, N=" + std::to_string(n) + ", dt=0.01"));
  }
  struct MatCase {
    const char* name;
    MatrixSystem sys;
  };
  for (const MatCase mc : {MatCase{"matrix-unbalanced", MatrixSystem::Unbalanced},
                           MatCase{"matrix-balanced", MatrixSystem::Balanced},
                           MatCase{"matrix-alternative", MatrixSystem::Alternative}}) {
    std::vector<double> err(static_cast<std::size_t>(trials));
    parallel_for(trials, threads, [&](int i) {
      const std::uint64_t s = seed * 1000 + 300 + static_cast<std::uint64_t>(i) * 10;
      const MatrixGeodesicState st = fixtures::random_matrix_state(g, 2, s, mc.sys);
      const MatrixGeodesicState concrete =
          integrate_geodesic_matrix(st, dt, 1, {mc.sys, SignConvention::Derived, 1, false}).back();
      const MatrixGeodesicState reduced =
          rk4_step([&](const MatrixGeodesicState& x) { return matrix_geodesic_rhs_reduced(x, mc.sys); }, st, dt);
      err[static_cast<std::size_t>(i)] = mat_diff(concrete, reduced);
    });
    out.push_back(make_check(5, suite, std::string("reduced vs concrete RK4 step, ") + mc.name, worst(err), 1e-8,
                             std::to_string(trials) + " instances, N=" + std::to_string(n) + ", dt=0.01"));
  }

  // alternative metric: skew gauge data leaves no velocity source
  const auto g2 = PeriodicGrid::square(size == Size::Medium ? 16 : 8);
  std::vector<double> src_derived(static_cast<std::size_t>(trials)), src_published(static_cast<std::size_t>(trials));
  parallel_for(trials, threads, [&](int i) {
    const std::uint64_t s = seed * 1000 + 400 + static_cast<std::uint64_t>(i) * 10;
    MatrixGeodesicState st = fixtures::random_matrix_state(g2, 3, s, MatrixSystem::Alternative);
    st.a = fixtures::skew_field(g2, 3, s + 5);
    src_derived[static_cast<std::size_t>(i)] = alternative_velocity_source(st, SignConvention::Derived).max_abs();
    src_published[static_cast<std::size_t>(i)] = alternative_velocity_source(st, SignConvention::Published).max_abs();
  });
  out.push_back(make_check(11, suite, "alternative u-source with skew gauge (max abs)", worst(src_derived), 1e-10,
                           "k=3, printed-sign variant " + fmt(worst(src_published))));

  // k = 1: alternative dynamics reduce to the scalar unbalanced dynamics
  std::vector<double> k1(static_cast<std::size_t>(trials));
  parallel_for(trials, threads, [&](int i) {
    const std::uint64_t s = seed * 1000 + 600 + static_cast<std::uint64_t>(i) * 10;
    const MatrixGeodesicState st = fixtures::random_matrix_state(g2, 1, s, MatrixSystem::Alternative);
    const auto da = matrix_geodesic_rhs(st, MatrixSystem::Alternative);
    const auto du = matrix_geodesic_rhs(st, MatrixSystem::Unbalanced);
    const auto ta = integrate_geodesic_matrix_alternative(st, 0.2, 4, 2).back();
    const auto tu = integrate_geodesic_matrix_unbalanced(st, 0.2, 4, 2).back();
    k1[static_cast<std::size_t>(i)] = std::max({mat_diff(da, du), mat_diff(ta, tu)});
  });
  out.push_back(make_check(11, suite, "k=1 alternative vs scalar unbalanced dynamics (max abs)", worst(k1), 1e-8,
                           std::to_string(trials) + " instances, right-hand sides and T=0.2 trajectories"));
  return out;
}

}  // namespace gauge_ot::checks::detail
