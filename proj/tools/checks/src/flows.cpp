#include <cmath>

#include "common.hpp"
#include "gauge_ot/integrators.hpp"
#include "gauge_ot/matrix_transport.hpp"
#include "gauge_ot/vector_transport.hpp"
#include "gauge_ot_checks/fixtures.hpp"

namespace gauge_ot::checks::detail {

namespace {

const std::vector<double> kDts = {1.0 / 16, 1.0 / 32, 1.0 / 64};

// smallest log2 ratio of successive residuals (dt halves each time)
double observed_order(const std::vector<double>& r) {
  double order = INFINITY;
  for (std::size_t i = 0; i + 1 < r.size(); ++i) order = std::min(order, std::log2(r[i] / r[i + 1]));
  return order;
}

// max over steps of |(M_{n+1} - M_n)/dt - (src_n + src_{n+1})/2| for the given source sign
double mass_law_residual(const std::vector<double>& mass, const std::vector<double>& src, double dt, double sign) {
  double r = 0.0;
  for (std::size_t n = 0; n + 1 < mass.size(); ++n) {
    const double rate = (mass[n + 1] - mass[n]) / dt;
    r = std::max(r, std::abs(rate - sign * 0.5 * (src[n] + src[n + 1])));
  }
  return r;
}

// RK4 for a state driven by time-dependent controls
template <class F>
Field rk4_controlled(const F& rhs, Field x, double T, double dt) {
  const int steps = static_cast<int>(std::lround(T / dt));
  for (int n = 0; n < steps; ++n) {
    const double t = n * dt;
    const Field k1 = rhs(t, x);
    Field y = x;
    y.axpy(0.5 * dt, k1);
    const Field k2 = rhs(t + 0.5 * dt, y);
    y = x;
    y.axpy(0.5 * dt, k2);
    const Field k3 = rhs(t + 0.5 * dt, y);
    y = x;
    y.axpy(dt, k3);
    const Field k4 = rhs(t + dt, y);
    x.axpy(dt / 6.0, k1);
    x.axpy(dt / 3.0, k2);
    x.axpy(dt / 3.0, k3);
    x.axpy(dt / 6.0, k4);
  }
  return x;
}

}  // namespace

std::vector<Check> conservation_suite(std::uint64_t seed, Size size, int threads) {
  const std::string suite = "conservation";
  const int trials = size == Size::Medium ? 3 : 1;
  std::vector<Check> out;

  // balanced vector geodesics by characteristics
  {
    const auto g = PeriodicGrid::line(size == Size::Medium ? 128 : 64);
    std::vector<double> mass(static_cast<std::size_t>(trials)), energy(static_cast<std::size_t>(trials));
    parallel_for(trials, threads, [&](int i) {
      const std::uint64_t s = seed * 1000 + 700 + static_cast<std::uint64_t>(i) * 10;
      const Field w = fixtures::half_density(g, 2, s);
      const VectorGeodesicState s0 = vector_state_from_theta(w, random_band_limited(g, 2, s + 1, 3, 0.02), Flavor::So);
      const auto traj = integrate_geodesic_vector(s0, 0.5, 10);
      const double m0 = vector_mass(s0.w), e0 = bures_energy(s0.u, s0.a, s0.w);
      double dm = 0.0, de = 0.0;
      for (const auto& st : traj) {
        dm = std::max(dm, std::abs(vector_mass(st.w) - m0));
        de = std::max(de, std::abs(bures_energy(st.u, st.a, st.w) - e0) / e0);
      }
      mass[static_cast<std::size_t>(i)] = dm;
      energy[static_cast<std::size_t>(i)] = de;
    });
    const std::string where =
        std::to_string(trials) + " instances, N=" + std::to_string(g.size(0)) + ", k=2, T=0.5, characteristics";
    out.push_back(make_check(3, suite, "balanced vector: mass drift", worst(mass),
                             1e-8, where));
    out.push_back(make_check(3, suite, "balanced vector: relative Bures energy drift",
                             worst(energy), 1e-6, where));
  }

  // balanced matrix geodesics
  {
    const auto g = PeriodicGrid::square(size == Size::Medium ? 32 : 16, 1.0, DiffScheme::Spectral);
    std::vector<double> mass(static_cast<std::size_t>(trials)), constraint(static_cast<std::size_t>(trials));
    parallel_for(trials, threads, [&](int i) {
      const std::uint64_t s = seed * 1000 + 800 + static_cast<std::uint64_t>(i) * 10;
      MatrixGeodesicState s0 = fixtures::random_matrix_state(g, 2, s, MatrixSystem::Balanced, 0.2);
      s0.rho *= 1.0 / integrate(s0.rho);
      const auto traj = integrate_geodesic_matrix_balanced(s0, 0.5, 20, 2);
      double dm = 0.0, dc = 0.0;
      for (const auto& st : traj) {
        dm = std::max(dm, std::abs(integrate(st.rho) - 1.0));
        dc = std::max(dc, pgl_constraint_defect(st.a, st.S));
      }
      mass[static_cast<std::size_t>(i)] = dm;
      constraint[static_cast<std::size_t>(i)] = dc;
    });
    const std::string where = std::to_string(trials) + " instances, N=" + std::to_string(g.size(0)) + "x" +
                              std::to_string(g.size(0)) + ", k=2, T=0.5";
    out.push_back(make_check(3, suite, "balanced matrix: mass drift", worst(mass),
                             1e-8, where));
    out.push_back(make_check(3, suite, "balanced matrix: max pointwise |tr(aS)|",
                             worst(constraint), 1e-8, where));
  }

  // unbalanced mass laws: residual of the discrete rate against the source, per dt
  const double T = 0.5;
  // coarse enough that dt = 1/16 is inside the explicit RK4 stability region
  const auto g = PeriodicGrid::line(32, 1.0, DiffScheme::Spectral);
  {
    const Field w = fixtures::half_density(g, 2, seed * 1000 + 900, false, 0.3, 2);
    const VectorGeodesicState s0 =
        vector_state_from_theta(w, random_band_limited(g, 2, seed * 1000 + 901, 2, 0.02), Flavor::Conf);
    std::vector<double> derived, printed;
    for (double dt : kDts) {
      const int steps = static_cast<int>(std::lround(T / dt));
      const auto traj = integrate_geodesic_vector(
          s0, T, steps, {VectorSystem::Unbalanced, GeodesicMethod::Eulerian, SignConvention::Derived, 1});
      std::vector<double> mass, src;
      for (const auto& st : traj) {
        mass.push_back(vector_mass(st.w));
        Field e(g, 1);
        for (std::size_t c = 0; c < g.cells(); ++c) {
          double n2 = 0.0;
          for (double x : st.w.at(c)) n2 += x * x;
          e(c) = (2.0 / st.k()) * mat_at(st.a, c, st.k()).trace() * n2;
        }
        src.push_back(integrate(e));
      }
      derived.push_back(mass_law_residual(mass, src, dt, 1.0));
      printed.push_back(mass_law_residual(mass, src, dt, -1.0));
    }
    Check c = make_floor_check(10, suite, "unbalanced vector mass law: observed order", observed_order(derived), 1.9,
                               "d/dt int|w|^2 = (2/k) int tr(a)|w|^2; opposite-sign residuals " + fmt(printed[0]) +
                                   ", " + fmt(printed[1]) + ", " + fmt(printed[2]));
    c.columns = {"dt", "residual_derived_sign", "residual_printed_sign"};
    for (std::size_t i = 0; i < kDts.size(); ++i) c.table.push_back({kDts[i], derived[i], printed[i]});
    out.push_back(c);
  }
  {
    const MatrixGeodesicState s0 = fixtures::random_matrix_state(g, 2, seed * 1000 + 950, MatrixSystem::Unbalanced, 0.05);
    std::vector<double> res;
    for (double dt : kDts) {
      const int steps = static_cast<int>(std::lround(T / dt));
      const auto traj = integrate_geodesic_matrix_unbalanced(s0, T, steps, 1);
      std::vector<double> mass, src;
      for (const auto& st : traj) {
        mass.push_back(integrate(st.rho));
        Field e(g, 1);
        for (std::size_t c = 0; c < g.cells(); ++c)
          e(c) = 2.0 * (mat_at(st.a, c, 2) * mat_at(st.S, c, 2)).trace() * st.rho(c);
        src.push_back(integrate(e));
      }
      res.push_back(mass_law_residual(mass, src, dt, 1.0));
    }
    Check c = make_floor_check(10, suite, "unbalanced matrix mass law: observed order", observed_order(res), 1.9,
                               "d/dt int rho = 2 int tr(aS) rho");
    c.columns = {"dt", "residual"};
    for (std::size_t i = 0; i < kDts.size(); ++i) c.table.push_back({kDts[i], res[i]});
    out.push_back(c);
  }
  return out;
}

std::vector<Check> rank1_suite(std::uint64_t seed, Size size, int threads) {
  const std::string suite = "rank1";
  // dt = 1/16 must stay inside the RK4 stability region of the spectral transport
  const auto g = PeriodicGrid::line(size == Size::Medium ? 32 : 16, 1.0, DiffScheme::Spectral);
  const std::vector<int> ks = size == Size::Medium ? std::vector<int>{2, 3} : std::vector<int>{2};
  const double T = 1.0;
  std::vector<Check> out(ks.size());
  parallel_for(static_cast<int>(ks.size()), threads, [&](int idx) {
    const int k = ks[static_cast<std::size_t>(idx)];
    const std::uint64_t s = seed * 1000 + 1000 + static_cast<std::uint64_t>(k);
    const Field w0 = fixtures::half_density(g, k, s, false, 0.3, 2);
    const Field u0 = random_band_limited(g, 1, s + 1, 2, 0.1);
    const Field a0 = fixtures::skew_field(g, k, s + 2, 2, 0.5);
    // shared time-dependent controls u(t) = (1 + t) u0, a(t) = cos(t) a0
    auto controls = [&](double t) {
      Field u = u0, a = a0;
      u *= 1.0 + t;
      a *= std::cos(t);
      return std::pair<Field, Field>{u, a};
    };
    auto vec_rhs = [&](double t, const Field& w) {
      const auto [u, a] = controls(t);
      return infinitesimal_action(u, a, w);
    };
    auto mat_rhs = [&](double t, const Field& sig) {
      const auto [u, a] = controls(t);
      return infinitesimal_action_matrix(u, a, sig);
    };
    const Field sig0 = rank1_embed(w0).sigma;
    std::vector<double> res;
    for (double dt : kDts) {
      const Field wT = rk4_controlled(vec_rhs, w0, T, dt);
      const Field sT = rk4_controlled(mat_rhs, sig0, T, dt);
      res.push_back((rank1_embed(wT).sigma - sT).max_abs());
    }
    double cmax = 0.0;
    for (std::size_t i = 0; i < kDts.size(); ++i) cmax = std::max(cmax, res[i] / (kDts[i] * kDts[i]));
    Check c = make_floor_check(6, suite, "rank-1 commuting diagram k=" + std::to_string(k) + ": observed order",
                               observed_order(res), 1.9,
                               "max |(w w^T)(T) - Sigma(T)|, T=1, N=" + std::to_string(g.size(0)) +
                                   ", C = max residual/dt^2 = " + fmt(cmax));
    c.columns = {"dt", "residual", "residual_over_dt2"};
    for (std::size_t i = 0; i < kDts.size(); ++i) c.table.push_back({kDts[i], res[i], res[i] / (kDts[i] * kDts[i])});
    out[static_cast<std::size_t>(idx)] = c;
  });
  return out;
}

}  // namespace gauge_ot::checks::detail
