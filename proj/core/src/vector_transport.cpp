#include "gauge_ot/vector_transport.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "gauge_ot/calculus.hpp"
#include "gauge_ot/errors.hpp"
#include "gauge_ot/integrators.hpp"

namespace gauge_ot {

namespace {

Field squared_norm(const Field& w) {
  Field rho(w.grid(), 1);
  for (std::size_t c = 0; c < w.cells(); ++c) {
    double s = 0.0;
    for (double x : w.at(c)) s += x * x;
    rho(c) = s;
  }
  return rho;
}

void check_pair(const Field& u, const Field& a, const Field& w, const char* ctx) {
  require_same_grid(u, w, ctx);
  require_same_grid(a, w, ctx);
  require_ncomp(u, w.grid().dim(), ctx);
  require_ncomp(a, w.ncomp() * w.ncomp(), ctx);
}

// 1/2 [ (u.D) w + D.(u w) ]
Field skew_lie(const Field& u, const Field& w) {
  const PeriodicGrid& g = w.grid();
  if (g.scheme() == DiffScheme::Centered) {
    // one pass per axis over the three-point stencil
    const std::size_t nc = static_cast<std::size_t>(w.ncomp());
    const std::size_t dim = static_cast<std::size_t>(g.dim());
    Field l(g, w.ncomp());
    const double* wv = w.values().data();
    const double* uv = u.values().data();
    double* out = l.values().data();
    for (int ax = 0; ax < g.dim(); ++ax) {
      const std::size_t n = static_cast<std::size_t>(g.size(ax));
      const std::size_t inner = g.stride(ax);
      const double q = 0.25 / g.spacing(ax);
      for (std::size_t line = 0; line < g.cells() / n; ++line) {
        const std::size_t b = (line / inner) * n * inner + line % inner;
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t c = b + i * inner;
          const std::size_t cp = b + (i + 1 == n ? 0 : i + 1) * inner;
          const std::size_t cm = b + (i == 0 ? n - 1 : i - 1) * inner;
          const double uc = uv[c * dim + static_cast<std::size_t>(ax)];
          const double up = uv[cp * dim + static_cast<std::size_t>(ax)];
          const double um = uv[cm * dim + static_cast<std::size_t>(ax)];
          for (std::size_t j = 0; j < nc; ++j) {
            const double fp = wv[cp * nc + j], fm = wv[cm * nc + j];
            out[c * nc + j] += q * (uc * (fp - fm) + up * fp - um * fm);
          }
        }
      }
    }
    return l;
  }
  Field l = convect(u, w);
  l += flux_div(u, w);
  l *= 0.5;
  return l;
}

// Momentum map against the half-density covector theta~ = theta |w|.
Momentum momentum_tilde(const Field& w, const Field& tt, Flavor flavor) {
  const PeriodicGrid& g = w.grid();
  const int k = w.ncomp();
  const int dim = g.dim();
  Momentum mu{Field(g, dim), Field(g, k * k)};
  for (int al = 0; al < dim; ++al) {
    const Field dt = diff(tt, al), dw = diff(w, al);
    for (std::size_t c = 0; c < g.cells(); ++c) {
      double s = 0.0;
      for (int j = 0; j < k; ++j) s += w(c, j) * dt(c, j) - tt(c, j) * dw(c, j);
      mu.m(c, al) = 0.5 * s;
    }
  }
  for (std::size_t c = 0; c < g.cells(); ++c) {
    const Vec wv = vec_at(w, c), tv = vec_at(tt, c);
    const Mat outer = tv * wv.transpose();
    put_mat(mu.beta, c, project_flavor(outer, flavor));
  }
  return mu;
}

Generator raise(const Momentum& mu, const Field& rho) {
  Generator xi{mu.m, mu.beta};
  for (std::size_t c = 0; c < rho.cells(); ++c) {
    const double s = 2.0 / rho(c);
    for (double& x : xi.u.at(c)) x *= s;
    for (double& x : xi.a.at(c)) x *= s;
  }
  return xi;
}

Field tilde(const Field& theta, const Field& w) {
  Field tt = theta;
  for (std::size_t c = 0; c < w.cells(); ++c) {
    double n = 0.0;
    for (double x : w.at(c)) n += x * x;
    n = std::sqrt(n);
    for (double& x : tt.at(c)) x *= n;
  }
  return tt;
}

Flavor system_flavor(VectorSystem s) { return s == VectorSystem::Balanced ? Flavor::So : Flavor::Conf; }

}  // namespace

double vector_mass(const Field& w) { return integrate(squared_norm(w)); }

double min_norm(const Field& w) {
  double m = std::numeric_limits<double>::infinity();
  const Field rho = squared_norm(w);
  for (double r : rho.values()) m = std::min(m, std::sqrt(r));
  return m;
}

void require_floor(const Field& w, const char* context) {
  if (!w.all_finite()) throw DegenerateDensity(std::string(context) + ": non-finite half-density");
  const double m = min_norm(w);
  if (m < kHalfDensityFloor) {
    throw DegenerateDensity(std::string(context) + ": min |w| = " + std::to_string(m) + " below floor");
  }
}

Field normalize_mass(const Field& w) {
  Field out = w;
  out *= 1.0 / std::sqrt(vector_mass(w));
  return out;
}

VectorHalfDensity make_vector_half_density(Field w, bool balanced) {
  require_floor(w, "make_vector_half_density");
  if (balanced) {
    const double m = vector_mass(w);
    if (std::abs(m - 1.0) > 1e-10) {
      throw PreconditionViolation("balanced half-density needs unit mass, got " + std::to_string(m));
    }
  }
  return {std::move(w), balanced};
}

Polar polar_decompose(const Field& w) {
  require_floor(w, "polar_decompose");
  Polar p{w, squared_norm(w)};
  for (std::size_t c = 0; c < w.cells(); ++c) {
    const double n = std::sqrt(p.rho(c));
    for (double& x : p.v.at(c)) x /= n;
  }
  return p;
}

Field infinitesimal_action(const Field& u, const Field& a, const Field& w) {
  check_pair(u, a, w, "infinitesimal_action");
  const int k = w.ncomp();
  Field out = skew_lie(u, w);
  out *= -1.0;
  for (std::size_t c = 0; c < w.cells(); ++c)
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) out(c, i) += a(c, i * k + j) * w(c, j);
  return out;
}

double bures_energy(const Field& u, const Field& a, const Field& w) {
  check_pair(u, a, w, "bures_energy");
  Field e(w.grid(), 1);
  for (std::size_t c = 0; c < w.cells(); ++c) {
    double s = 0.0, r = 0.0;
    for (double x : u.at(c)) s += x * x;
    for (double x : a.at(c)) s += x * x;
    for (double x : w.at(c)) r += x * x;
    e(c) = s * r;
  }
  return integrate(e);
}

Momentum momentum_map_vector(const Field& w, const Field& theta, Flavor flavor) {
  require_same_grid(w, theta, "momentum_map_vector");
  require_ncomp(theta, w.ncomp(), "momentum_map_vector");
  require_floor(w, "momentum_map_vector");
  return momentum_tilde(w, tilde(theta, w), flavor);
}

Generator horizontal_from_theta(const Field& theta, const Field& w, Flavor flavor) {
  require_same_grid(w, theta, "horizontal_from_theta");
  require_ncomp(theta, w.ncomp(), "horizontal_from_theta");
  require_floor(w, "horizontal_from_theta");
  return raise(momentum_tilde(w, tilde(theta, w), flavor), squared_norm(w));
}

VectorLift horizontal_lift(const Field& wdot, const Field& w, Flavor flavor, double tol, int max_iter) {
  require_same_grid(w, wdot, "horizontal_lift");
  require_ncomp(wdot, w.ncomp(), "horizontal_lift");
  require_floor(w, "horizontal_lift");
  const Field rho = squared_norm(w);
  const double mass = integrate(rho);
  if (flavor == Flavor::So) {
    Field tw(w.grid(), 1);
    for (std::size_t c = 0; c < w.cells(); ++c) {
      double s = 0.0;
      for (int j = 0; j < w.ncomp(); ++j) s += w(c, j) * wdot(c, j);
      tw(c) = s;
    }
    const double tang = integrate(tw);
    const double scale = std::sqrt(mass * vector_mass(wdot));
    if (std::abs(tang) > 1e-8 * std::max(scale, 1.0)) {
      throw PreconditionViolation("horizontal_lift: wdot is not tangent to the mass sphere (<w,wdot> = " +
                                  std::to_string(tang) + ")");
    }
  }
  const PeriodicGrid& g = w.grid();
  const int k = w.ncomp();
  LinearOperator op = [&](std::span<const double> x, std::span<double> y) {
    Field tt(g, k, std::vector<double>(x.begin(), x.end()));
    const Generator xi = raise(momentum_tilde(w, tt, flavor), rho);
    const Field r = infinitesimal_action(xi.u, xi.a, w);
    std::copy(r.values().begin(), r.values().end(), y.begin());
  };
  CgResult res = cg_solve(op, wdot.values(), tol, max_iter);
  Field theta(g, k, std::move(res.x));
  for (std::size_t c = 0; c < g.cells(); ++c) {
    const double n = std::sqrt(rho(c));
    for (double& x : theta.at(c)) x /= n;
  }
  return {std::move(theta), res.iterations, res.relative_residual};
}

SubmersionMetric submersion_metric(const Field& wdot, const Field& w, Flavor flavor) {
  const VectorLift lift = horizontal_lift(wdot, w, flavor);
  const Generator xi = horizontal_from_theta(lift.theta, w, flavor);
  SubmersionMetric out;
  out.bures = bures_energy(xi.u, xi.a, w);
  const Field rho = squared_norm(w);
  Field e(w.grid(), 1);
  for (std::size_t c = 0; c < w.cells(); ++c) {
    double s = 0.0;
    for (double x : xi.u.at(c)) s += x * x;
    for (double x : lift.theta.at(c)) s += x * x;
    e(c) = s * rho(c);
  }
  out.theta_form = integrate(e);
  out.lift_residual = lift.relative_residual;
  return out;
}

double pairing(const Momentum& mu, const Generator& xi) {
  require_same_grid(mu.m, xi.u, "pairing");
  require_ncomp(xi.u, mu.m.ncomp(), "pairing");
  require_ncomp(xi.a, mu.beta.ncomp(), "pairing");
  Field e(mu.m.grid(), 1);
  for (std::size_t c = 0; c < e.cells(); ++c) {
    double s = 0.0;
    const auto m = mu.m.at(c), u = xi.u.at(c), b = mu.beta.at(c), a = xi.a.at(c);
    for (std::size_t i = 0; i < m.size(); ++i) s += m[i] * u[i];
    for (std::size_t i = 0; i < b.size(); ++i) s += b[i] * a[i];
    e(c) = s;
  }
  return integrate(e);
}

Momentum ad_star_vector(const Field& u, const Field& a, const Field& m, const Field& beta) {
  const PeriodicGrid& g = u.grid();
  const int dim = g.dim();
  require_ncomp(u, dim, "ad_star_vector");
  require_ncomp(m, dim, "ad_star_vector");
  require_same_grid(u, a, "ad_star_vector");
  require_same_grid(u, m, "ad_star_vector");
  require_same_grid(u, beta, "ad_star_vector");
  require_ncomp(beta, a.ncomp(), "ad_star_vector");
  // first slot: -[ D_b(u_b m_a) + (D_a u_b) m_b ] - sum_ij beta_ij D_a a_ij
  Momentum out{flux_div(u, m), flux_div(u, beta)};
  out.m *= -1.0;
  out.beta *= -1.0;
  for (int al = 0; al < dim; ++al) {
    const Field du = diff(u, al), da = diff(a, al);
    for (std::size_t c = 0; c < g.cells(); ++c) {
      double s = 0.0;
      for (int b = 0; b < dim; ++b) s += du(c, b) * m(c, b);
      for (int i = 0; i < a.ncomp(); ++i) s += beta(c, i) * da(c, i);
      out.m(c, al) -= s;
    }
  }
  return out;
}

Generator bracket(const Generator& x1, const Generator& x2) {
  Generator out{convect(x1.u, x2.u), convect(x1.u, x2.a)};
  out.u -= convect(x2.u, x1.u);
  out.a -= convect(x2.u, x1.a);
  return out;
}

Generator vertical_generator(const Field& w, std::uint64_t seed, double tol) {
  require_floor(w, "vertical_generator");
  const PeriodicGrid& g = w.grid();
  const int k = w.ncomp();
  const int dim = g.dim();
  // G u = w . L_u w (pointwise scalar), G^T phi = 1/2 sum_j [phi w_j D w_j - w_j D(phi w_j)].
  auto apply_G = [&](const Field& u) {
    const Field l = skew_lie(u, w);
    Field s(g, 1);
    for (std::size_t c = 0; c < g.cells(); ++c)
      for (int j = 0; j < k; ++j) s(c) += w(c, j) * l(c, j);
    return s;
  };
  auto apply_Gt = [&](const Field& phi) {
    Field pw = w;
    for (std::size_t c = 0; c < g.cells(); ++c)
      for (double& x : pw.at(c)) x *= phi(c);
    Field u(g, dim);
    for (int al = 0; al < dim; ++al) {
      const Field dw = diff(w, al), dpw = diff(pw, al);
      for (std::size_t c = 0; c < g.cells(); ++c) {
        double s = 0.0;
        for (int j = 0; j < k; ++j) s += phi(c) * w(c, j) * dw(c, j) - w(c, j) * dpw(c, j);
        u(c, al) = 0.5 * s;
      }
    }
    return u;
  };
  Field u0 = random_band_limited(g, dim, seed);
  const Field b = apply_G(u0);
  LinearOperator ggt = [&](std::span<const double> x, std::span<double> y) {
    const Field r = apply_G(apply_Gt(Field(g, 1, std::vector<double>(x.begin(), x.end()))));
    std::copy(r.values().begin(), r.values().end(), y.begin());
  };
  const Field y = cg_solve(ggt, b, tol, 50000);
  Generator out{u0 - apply_Gt(y), Field(g, k * k)};
  const Field l = skew_lie(out.u, w);
  const Field extra = k >= 3 ? random_band_limited(g, 2 * k, seed + 7919) : Field();
  for (std::size_t c = 0; c < g.cells(); ++c) {
    const Vec wv = vec_at(w, c);
    const double n = wv.norm();
    const Vec v = wv / n;
    const Vec q = vec_at(l, c) / n;
    Mat a = q * v.transpose() - v * q.transpose();
    if (k >= 3) {
      Vec p(k), r(k);
      for (int j = 0; j < k; ++j) {
        p(j) = extra(c, j);
        r(j) = extra(c, k + j);
      }
      p -= v * v.dot(p);
      r -= v * v.dot(r);
      a += p * r.transpose() - r * p.transpose();
    }
    put_mat(out.a, c, a);
  }
  return out;
}

VectorGeodesicState& VectorGeodesicState::axpy(double s, const VectorGeodesicState& d) {
  u.axpy(s, d.u);
  a.axpy(s, d.a);
  w.axpy(s, d.w);
  return *this;
}

VectorGeodesicState vector_geodesic_rhs(const VectorGeodesicState& s, VectorSystem system,
                                        SignConvention convention) {
  const int k = s.k();
  VectorGeodesicState d{convect(s.u, s.u), convect(s.u, s.a), infinitesimal_action(s.u, s.a, s.w), 0.0};
  d.u *= -1.0;
  d.a *= -1.0;
  if (system == VectorSystem::Unbalanced && convention == SignConvention::Derived) {
    for (std::size_t c = 0; c < s.w.cells(); ++c) {
      const Mat a = mat_at(s.a, c, k);
      double cc = 0.0;
      for (double x : s.u.at(c)) cc += x * x;
      cc += a.squaredNorm();
      const double tr = a.trace();
      for (int al = 0; al < s.u.ncomp(); ++al) d.u(c, al) -= 2.0 / k * tr * s.u(c, al);
      Mat src = -2.0 / k * tr * a;
      src.diagonal().array() += cc / k;
      for (int i = 0; i < k * k; ++i) d.a(c, i) += src(i / k, i % k);
    }
  }
  return d;
}

VectorGeodesicState vector_geodesic_rhs_reduced(const VectorGeodesicState& s, VectorSystem system) {
  const Flavor flavor = system_flavor(system);
  const PeriodicGrid& g = s.w.grid();
  const int k = s.k();
  const Field rho = squared_norm(s.w);
  // mu = (rho u, rho a); dH/dw = -(|u|^2 + |a|^2) w
  Field m = s.u, beta = s.a, dh = s.w;
  for (std::size_t c = 0; c < g.cells(); ++c) {
    double cc = 0.0;
    for (double x : s.u.at(c)) cc += x * x;
    for (double x : s.a.at(c)) cc += x * x;
    for (double& x : m.at(c)) x *= rho(c);
    for (double& x : beta.at(c)) x *= rho(c);
    for (double& x : dh.at(c)) x *= -cc;
  }
  Momentum mdot = ad_star_vector(s.u, s.a, m, beta);
  const Momentum phi = momentum_tilde(s.w, dh, flavor);
  mdot.m -= phi.m;
  mdot.beta -= phi.beta;
  VectorGeodesicState d{Field(g, g.dim()), Field(g, k * k), infinitesimal_action(s.u, s.a, s.w), 0.0};
  for (std::size_t c = 0; c < g.cells(); ++c) {
    double rdot = 0.0;
    for (int j = 0; j < k; ++j) rdot += 2.0 * s.w(c, j) * d.w(c, j);
    for (int al = 0; al < g.dim(); ++al) d.u(c, al) = (mdot.m(c, al) - rdot * s.u(c, al)) / rho(c);
    for (int i = 0; i < k * k; ++i) d.a(c, i) = (mdot.beta(c, i) - rdot * s.a(c, i)) / rho(c);
  }
  return d;
}

VectorGeodesicState vector_characteristics_at(const VectorGeodesicState& s0, double t, VectorSystem system) {
  (void)system;
  const PeriodicGrid& g = s0.w.grid();
  const int dim = g.dim();
  const int k = s0.k();
  CharacteristicMap map(s0.u, InterpKind::Trigonometric);
  map.require_preshock(t);
  TrigInterpolant ai(s0.a), wi(s0.w);
  VectorGeodesicState out{Field(g, dim), Field(g, k * k), Field(g, k), t};
  std::vector<double> uv(static_cast<std::size_t>(dim)), du(static_cast<std::size_t>(dim * dim));
  std::vector<double> av(static_cast<std::size_t>(k * k)), wv(static_cast<std::size_t>(k));
  for (std::size_t c = 0; c < g.cells(); ++c) {
    const Point x{g.center(c, 0), dim == 2 ? g.center(c, 1) : 0.0};
    const Point x0 = map.foot(t, x);
    map.velocity(x0, uv, du);
    ai.value(x0, av);
    wi.value(x0, wv);
    double det = 1.0 + t * du[0];
    if (dim == 2) det = (1.0 + t * du[0]) * (1.0 + t * du[3]) - t * t * du[1] * du[2];
    Mat a0(k, k);
    for (int i = 0; i < k * k; ++i) a0(i / k, i % k) = av[static_cast<std::size_t>(i)];
    Vec w0(k);
    for (int j = 0; j < k; ++j) w0(j) = wv[static_cast<std::size_t>(j)];
    const Vec w = expm(a0, t) * w0 / std::sqrt(det);
    for (int al = 0; al < dim; ++al) out.u(c, al) = uv[static_cast<std::size_t>(al)];
    put_mat(out.a, c, a0);
    put_vec(out.w, c, w);
  }
  return out;
}

std::vector<VectorGeodesicState> integrate_geodesic_vector(const VectorGeodesicState& s0, double T, int steps,
                                                           const VectorGeodesicOptions& opt) {
  if (steps < 1) throw PreconditionViolation("integrate_geodesic_vector: steps must be positive");
  const Flavor flavor = system_flavor(opt.system);
  require_floor(s0.w, "integrate_geodesic_vector");
  check_pair(s0.u, s0.a, s0.w, "integrate_geodesic_vector");
  const double defect = flavor_defect({s0.a, s0.k(), flavor});
  if (defect > 1e-10) {
    throw PreconditionViolation("integrate_geodesic_vector: gauge field violates " + to_string(flavor) +
                                " constraint by " + std::to_string(defect));
  }
  std::vector<VectorGeodesicState> traj;
  traj.reserve(static_cast<std::size_t>(steps) + 1);
  traj.push_back(s0);
  const double dt = T / steps;
  if (opt.method == GeodesicMethod::Characteristics) {
    if (opt.system == VectorSystem::Unbalanced && opt.convention == SignConvention::Derived) {
      throw PreconditionViolation(
          "integrate_geodesic_vector: the derived unbalanced system forces u; use the eulerian method");
    }
    CharacteristicMap(s0.u, InterpKind::Trigonometric).require_preshock(T);
    for (int n = 1; n <= steps; ++n) {
      traj.push_back(vector_characteristics_at(s0, n * dt, opt.system));
      traj.back().t = s0.t + n * dt;
    }
    return traj;
  }
  const int sub = std::max(1, opt.substeps);
  const double h = dt / sub;
  auto rhs = [&](const VectorGeodesicState& s) { return vector_geodesic_rhs(s, opt.system, opt.convention); };
  VectorGeodesicState s = s0;
  for (int n = 1; n <= steps; ++n) {
    for (int q = 0; q < sub; ++q) {
      require_explicit_cfl(s.u, h, "integrate_geodesic_vector");
      s = rk4_step(rhs, s, h);
      if (!s.w.all_finite()) throw DegenerateDensity("integrate_geodesic_vector: state blew up");
    }
    s.t = s0.t + n * dt;
    traj.push_back(s);
  }
  return traj;
}

VectorGeodesicState vector_state_from_theta(const Field& w, const Field& theta, Flavor flavor) {
  Generator xi = horizontal_from_theta(theta, w, flavor);
  return {std::move(xi.u), std::move(xi.a), w, 0.0};
}

}  // namespace gauge_ot
