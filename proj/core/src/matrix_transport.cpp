#include "gauge_ot/matrix_transport.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <string>

#include "gauge_ot/calculus.hpp"
#include "gauge_ot/errors.hpp"
#include "gauge_ot/integrators.hpp"

namespace gauge_ot {

namespace {

void check_matrix(const Field& sigma, const char* ctx) {
  fiber_dim_from_ncomp(sigma.ncomp());
  (void)ctx;
}

void check_generator(const Field& u, const Field& a, const Field& sigma, const char* ctx) {
  require_same_grid(u, sigma, ctx);
  require_same_grid(a, sigma, ctx);
  require_ncomp(u, sigma.grid().dim(), ctx);
  require_ncomp(a, sigma.ncomp(), ctx);
}

Field trace_field(const Field& m) {
  const int k = fiber_dim_from_ncomp(m.ncomp());
  Field t(m.grid(), 1);
  for (std::size_t c = 0; c < m.cells(); ++c) {
    double s = 0.0;
    for (int i = 0; i < k; ++i) s += m(c, i * k + i);
    t(c) = s;
  }
  return t;
}

double sq_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

// Momentum map without symmetrizing P's role in the first slot: sum_ij Sigma_ij D P_ij.
Momentum momentum_raw(const Field& sigma, const Field& P) {
  const PeriodicGrid& g = sigma.grid();
  const int k = fiber_dim_from_ncomp(sigma.ncomp());
  Momentum mu{Field(g, g.dim()), Field(g, k * k)};
  for (int al = 0; al < g.dim(); ++al) {
    const Field dp = diff(P, al);
    for (std::size_t c = 0; c < g.cells(); ++c) {
      double s = 0.0;
      for (int i = 0; i < k * k; ++i) s += sigma(c, i) * dp(c, i);
      mu.m(c, al) = s;
    }
  }
  for (std::size_t c = 0; c < g.cells(); ++c) {
    const Mat p = mat_at(P, c, k);
    put_mat(mu.beta, c, (p + p.transpose()) * mat_at(sigma, c, k));
  }
  return mu;
}

Field symmetrized(const Field& P) {
  const int k = fiber_dim_from_ncomp(P.ncomp());
  Field out(P.grid(), k * k);
  for (std::size_t c = 0; c < P.cells(); ++c) {
    const Mat p = mat_at(P, c, k);
    put_mat(out, c, 0.5 * (p + p.transpose()));
  }
  return out;
}

// Multiplier keeping d/dt tr(aS) = 0 given every other term of adot and Sdot.
double balanced_multiplier(const Mat& adot_rest, const Mat& a, const Mat& S, const Mat& Sdot, bool published) {
  const double rest = (adot_rest * S).trace() + (a * Sdot).trace();
  const double denom = published ? S.trace() : (S * S).trace();
  return -rest / denom;
}

void check_state(const MatrixGeodesicState& s, const char* ctx) {
  const int k = fiber_dim_from_ncomp(s.S.ncomp());
  check_generator(s.u, s.a, s.S, ctx);
  require_same_grid(s.rho, s.S, ctx);
  require_ncomp(s.rho, 1, ctx);
  (void)k;
}

void monitor(const MatrixGeodesicState& s, const char* ctx, bool semidefinite) {
  if (!s.u.all_finite() || !s.a.all_finite() || !s.S.all_finite() || !s.rho.all_finite()) {
    throw DegenerateDensity(std::string(ctx) + ": state blew up at t = " + std::to_string(s.t));
  }
  double rmin = std::numeric_limits<double>::infinity();
  for (double r : s.rho.values()) rmin = std::min(rmin, r);
  if (rmin <= 0.0) throw DegenerateDensity(std::string(ctx) + ": rho lost positivity");
  const double emin = semidefinite ? kPositivityFloor : min_eigenvalue(s.S);
  if (emin < kPositivityFloor) {
    throw DegenerateDensity(std::string(ctx) + ": S lost positivity (min eigenvalue " + std::to_string(emin) +
                            ") at t = " + std::to_string(s.t));
  }
  const double drift = max_trace_drift(s.S);
  if (drift > 1e-8) {
    throw DegenerateDensity(std::string(ctx) + ": tr S drifted by " + std::to_string(drift));
  }
}

}  // namespace

double symmetry_defect(const Field& sigma) {
  const int k = fiber_dim_from_ncomp(sigma.ncomp());
  double d = 0.0;
  for (std::size_t c = 0; c < sigma.cells(); ++c) {
    const Mat m = mat_at(sigma, c, k);
    d = std::max(d, (m - m.transpose()).cwiseAbs().maxCoeff());
  }
  return d;
}

double min_eigenvalue(const Field& sigma) {
  const int k = fiber_dim_from_ncomp(sigma.ncomp());
  double e = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < sigma.cells(); ++c) {
    const Mat m = mat_at(sigma, c, k);
    const Mat sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
    e = std::min(e, es.eigenvalues().minCoeff());
  }
  return e;
}

void require_spd(const Field& sigma, const char* context) {
  if (!sigma.all_finite()) throw DegenerateDensity(std::string(context) + ": non-finite matrix density");
  const double sd = symmetry_defect(sigma);
  if (sd > 1e-12) {
    throw PreconditionViolation(std::string(context) + ": matrix field not symmetric (" + std::to_string(sd) + ")");
  }
  const double e = min_eigenvalue(sigma);
  if (e < kPositivityFloor) {
    throw DegenerateDensity(std::string(context) + ": min eigenvalue " + std::to_string(e) + " below floor");
  }
}

double matrix_mass(const Field& sigma) { return integrate(trace_field(sigma)); }

MatrixDensityField make_matrix_density(Field sigma, bool normalized) {
  require_spd(sigma, "make_matrix_density");
  if (normalized) {
    const double m = matrix_mass(sigma);
    if (std::abs(m - 1.0) > 1e-10) {
      throw PreconditionViolation("normalized matrix density needs unit mass, got " + std::to_string(m));
    }
  }
  const int k = fiber_dim_from_ncomp(sigma.ncomp());
  return {std::move(sigma), k, normalized, false};
}

Factorized factorize(const Field& sigma) {
  require_spd(sigma, "factorize");
  Factorized f{sigma, trace_field(sigma)};
  for (std::size_t c = 0; c < sigma.cells(); ++c)
    for (double& x : f.S.at(c)) x /= f.rho(c);
  return f;
}

Field assemble_sigma(const Field& S, const Field& rho) {
  require_same_grid(S, rho, "assemble_sigma");
  require_ncomp(rho, 1, "assemble_sigma");
  Field out = S;
  for (std::size_t c = 0; c < S.cells(); ++c)
    for (double& x : out.at(c)) x *= rho(c);
  return out;
}

Field infinitesimal_action_matrix(const Field& u, const Field& a, const Field& sigma) {
  check_matrix(sigma, "infinitesimal_action_matrix");
  check_generator(u, a, sigma, "infinitesimal_action_matrix");
  const int k = fiber_dim_from_ncomp(sigma.ncomp());
  Field out = flux_div(u, sigma);
  out *= -1.0;
  for (std::size_t c = 0; c < sigma.cells(); ++c) {
    const Mat am = mat_at(a, c, k), s = mat_at(sigma, c, k);
    const Mat g = am * s + s * am.transpose();
    for (int i = 0; i < k * k; ++i) out(c, i) += g(i / k, i % k);
  }
  return out;
}

Momentum momentum_map_matrix(const Field& sigma, const Field& P) {
  require_same_grid(sigma, P, "momentum_map_matrix");
  require_ncomp(P, sigma.ncomp(), "momentum_map_matrix");
  return momentum_raw(sigma, P);
}

double bures_energy_matrix(const Field& u, const Field& a, const Field& sigma) {
  check_generator(u, a, sigma, "bures_energy_matrix");
  const Field tr = trace_field(sigma);
  Field e(sigma.grid(), 1);
  for (std::size_t c = 0; c < sigma.cells(); ++c) e(c) = (sq_norm(u.at(c)) + sq_norm(a.at(c))) * tr(c);
  return integrate(e);
}

double alternative_energy_matrix(const Field& u, const Field& a, const Field& sigma) {
  check_generator(u, a, sigma, "alternative_energy_matrix");
  const int k = fiber_dim_from_ncomp(sigma.ncomp());
  Field e(sigma.grid(), 1);
  for (std::size_t c = 0; c < sigma.cells(); ++c) {
    const Mat am = mat_at(a, c, k), s = mat_at(sigma, c, k);
    e(c) = sq_norm(u.at(c)) * s.trace() + (am * s * am.transpose()).trace();
  }
  return integrate(e);
}

Generator horizontal_from_P(const Field& P, const Field& sigma) {
  require_same_grid(sigma, P, "horizontal_from_P");
  require_ncomp(P, sigma.ncomp(), "horizontal_from_P");
  const Field rho = trace_field(sigma);
  Momentum mu = momentum_raw(sigma, P);
  for (std::size_t c = 0; c < sigma.cells(); ++c) {
    if (!(rho(c) > 0.0)) throw DegenerateDensity("horizontal_from_P: tr Sigma must be positive");
    for (double& x : mu.m.at(c)) x /= rho(c);
    for (double& x : mu.beta.at(c)) x /= rho(c);
  }
  return {std::move(mu.m), std::move(mu.beta)};
}

MatrixLift horizontal_lift_matrix(const Field& sigmadot, const Field& sigma, double tol, int max_iter) {
  require_same_grid(sigma, sigmadot, "horizontal_lift_matrix");
  require_ncomp(sigmadot, sigma.ncomp(), "horizontal_lift_matrix");
  const double sd = symmetry_defect(sigmadot);
  if (sd > 1e-10 * std::max(1.0, sigmadot.max_abs())) {
    throw PreconditionViolation("horizontal_lift_matrix: Sigmadot is not symmetric");
  }
  const PeriodicGrid& g = sigma.grid();
  const int nc = sigma.ncomp();
  // Restricted to symmetric P the map P -> action(horizontal(P)) is symmetric positive
  // semi-definite for the Frobenius pairing; CG started at 0 stays in that subspace.
  LinearOperator op = [&](std::span<const double> x, std::span<double> y) {
    const Field p = symmetrized(Field(g, nc, std::vector<double>(x.begin(), x.end())));
    const Generator xi = horizontal_from_P(p, sigma);
    const Field r = infinitesimal_action_matrix(xi.u, xi.a, sigma);
    std::copy(r.values().begin(), r.values().end(), y.begin());
  };
  const Field b = symmetrized(sigmadot);
  CgResult res = cg_solve(op, b.values(), tol, max_iter);
  return {symmetrized(Field(g, nc, std::move(res.x))), res.iterations, res.relative_residual};
}

MatrixDensityField rank1_embed(const Field& w) {
  const int k = w.ncomp();
  Field sigma(w.grid(), k * k);
  for (std::size_t c = 0; c < w.cells(); ++c) {
    const Vec v = vec_at(w, c);
    put_mat(sigma, c, v * v.transpose());
  }
  return {std::move(sigma), k, false, true};
}

Field trace_normalize(const Field& sigma) {
  require_spd(sigma, "trace_normalize");
  Field out = factorize(sigma).S;
  out *= 1.0 / matrix_mass(out);
  return out;
}

MatrixGeodesicState& MatrixGeodesicState::axpy(double s, const MatrixGeodesicState& d) {
  u.axpy(s, d.u);
  a.axpy(s, d.a);
  S.axpy(s, d.S);
  rho.axpy(s, d.rho);
  return *this;
}

double pgl_constraint_defect(const Field& a, const Field& S) {
  const int k = fiber_dim_from_ncomp(S.ncomp());
  double d = 0.0;
  for (std::size_t c = 0; c < S.cells(); ++c) d = std::max(d, std::abs((mat_at(a, c, k) * mat_at(S, c, k)).trace()));
  return d;
}

double max_trace_drift(const Field& S) {
  const Field t = trace_field(S);
  double d = 0.0;
  for (double x : t.values()) d = std::max(d, std::abs(x - 1.0));
  return d;
}

Field alternative_velocity_source(const MatrixGeodesicState& s, SignConvention convention) {
  check_state(s, "alternative_velocity_source");
  const PeriodicGrid& g = s.S.grid();
  const int k = s.k();
  const int dim = g.dim();
  Field src(g, dim);
  std::vector<Field> da;
  if (convention == SignConvention::Published)
    for (int al = 0; al < dim; ++al) da.push_back(diff(s.a, al));
  for (std::size_t c = 0; c < g.cells(); ++c) {
    const Mat a = mat_at(s.a, c, k), S = mat_at(s.S, c, k);
    const double tau = (a * S).trace();
    const double sign = convention == SignConvention::Derived ? -2.0 : 2.0;
    for (int al = 0; al < dim; ++al) {
      double v = sign * tau * s.u(c, al);
      if (convention == SignConvention::Published) {
        const Mat comm = a * S - S * a;
        v -= (comm * mat_at(da[static_cast<std::size_t>(al)], c, k).transpose()).trace();
      }
      src(c, al) = v;
    }
  }
  return src;
}

MatrixGeodesicState matrix_geodesic_rhs(const MatrixGeodesicState& s, MatrixSystem system,
                                        SignConvention convention) {
  check_state(s, "matrix_geodesic_rhs");
  const PeriodicGrid& g = s.S.grid();
  const int k = s.k();
  const int dim = g.dim();
  const bool published = convention == SignConvention::Published;
  MatrixGeodesicState d{convect(s.u, s.u), convect(s.u, s.a), convect(s.u, s.S), flux_div(s.u, s.rho), 0.0};
  d.u *= -1.0;
  d.a *= -1.0;
  d.S *= -1.0;
  d.rho *= -1.0;
  if (system == MatrixSystem::Alternative) d.u += alternative_velocity_source(s, convention);
  const double sgn = published ? 1.0 : -1.0;  // sign of the 2 tr(aS) forcing on u and a
  for (std::size_t c = 0; c < g.cells(); ++c) {
    const Mat a = mat_at(s.a, c, k), S = mat_at(s.S, c, k);
    const double tau = (a * S).trace();
    const double uu = sq_norm(s.u.at(c));
    const double cc = uu + a.squaredNorm();
    Mat sdot = mat_at(d.S, c, k) + a * S + S * a.transpose();
    Mat adot = mat_at(d.a, c, k);
    switch (system) {
      case MatrixSystem::Unbalanced:
        for (int al = 0; al < dim; ++al) d.u(c, al) += sgn * 2.0 * tau * s.u(c, al);
        adot += cc * S + sgn * 2.0 * tau * a;
        sdot -= 2.0 * tau * S;
        d.rho(c) += 2.0 * tau * s.rho(c);
        break;
      case MatrixSystem::Balanced: {
        if (!published) sdot -= 2.0 * tau * S;
        const double lam = balanced_multiplier(adot, a, S, sdot, published);
        if (published) {
          adot.diagonal().array() += lam;
        } else {
          adot += lam * S;
        }
        break;
      }
      case MatrixSystem::Alternative: {
        Mat src = a.transpose() * a - a * a - a * S * a.transpose() * S.inverse();
        src.diagonal().array() += uu;
        adot += src;
        sdot -= 2.0 * tau * S;
        d.rho(c) += 2.0 * tau * s.rho(c);
        break;
      }
    }
    put_mat(d.a, c, adot);
    put_mat(d.S, c, sdot);
  }
  return d;
}

MatrixGeodesicState matrix_geodesic_rhs_reduced(const MatrixGeodesicState& s, MatrixSystem system) {
  check_state(s, "matrix_geodesic_rhs_reduced");
  const PeriodicGrid& g = s.S.grid();
  const int k = s.k();
  const int dim = g.dim();
  const Field sigma = s.sigma();
  const bool alt = system == MatrixSystem::Alternative;
  // mu = (rho u, beta) with beta = rho a, or a Sigma for the alternative metric.
  // dH/dSigma = -1/2 (|u|^2 + |a|^2) I, or -1/2 (|u|^2 I + a^T a).
  Field m = s.u, beta(g, k * k), P(g, k * k);
  for (std::size_t c = 0; c < g.cells(); ++c) {
    for (double& x : m.at(c)) x *= s.rho(c);
    const Mat a = mat_at(s.a, c, k);
    const double uu = sq_norm(s.u.at(c));
    Mat p = Mat::Zero(k, k);
    if (alt) {
      put_mat(beta, c, a * mat_at(sigma, c, k));
      p = a.transpose() * a;
      p.diagonal().array() += uu;
    } else {
      put_mat(beta, c, s.rho(c) * a);
      p.diagonal().array() += uu + a.squaredNorm();
    }
    put_mat(P, c, -0.5 * p);
  }
  Momentum mdot = ad_star_vector(s.u, s.a, m, beta);
  const Momentum phi = momentum_raw(sigma, P);
  mdot.m -= phi.m;
  mdot.beta -= phi.beta;
  const Field sdot_full = infinitesimal_action_matrix(s.u, s.a, sigma);
  const Field rdot = trace_field(sdot_full);
  MatrixGeodesicState d{Field(g, dim), Field(g, k * k), Field(g, k * k), rdot, 0.0};
  for (std::size_t c = 0; c < g.cells(); ++c) {
    const double r = s.rho(c);
    for (int al = 0; al < dim; ++al) d.u(c, al) = (mdot.m(c, al) - rdot(c) * s.u(c, al)) / r;
    const Mat a = mat_at(s.a, c, k), S = mat_at(s.S, c, k), sig = mat_at(sigma, c, k);
    const Mat sd = mat_at(sdot_full, c, k);
    const Mat sdot = (sd - rdot(c) * S) / r;
    const Mat bdot = mat_at(mdot.beta, c, k);
    Mat adot = alt ? Mat((bdot - a * sd) * sig.inverse()) : Mat((bdot - rdot(c) * a) / r);
    if (system == MatrixSystem::Balanced) adot += balanced_multiplier(adot, a, S, sdot, false) * S;
    put_mat(d.a, c, adot);
    put_mat(d.S, c, sdot);
  }
  return d;
}

std::vector<MatrixGeodesicState> integrate_geodesic_matrix(const MatrixGeodesicState& s0, double T, int steps,
                                                           const MatrixGeodesicOptions& opt) {
  static const char* ctx = "integrate_geodesic_matrix";
  if (steps < 1) throw PreconditionViolation("integrate_geodesic_matrix: steps must be positive");
  check_state(s0, ctx);
  if (opt.system == MatrixSystem::Balanced) {
    const double d = pgl_constraint_defect(s0.a, s0.S);
    if (d > 1e-10) {
      throw PreconditionViolation("integrate_geodesic_matrix: balanced data needs tr(aS) = 0, off by " +
                                  std::to_string(d));
    }
  }
  monitor(s0, ctx, opt.semidefinite);
  std::vector<MatrixGeodesicState> traj;
  traj.reserve(static_cast<std::size_t>(steps) + 1);
  traj.push_back(s0);
  const double dt = T / steps;
  const int sub = std::max(1, opt.substeps);
  const double h = dt / sub;
  auto rhs = [&](const MatrixGeodesicState& s) { return matrix_geodesic_rhs(s, opt.system, opt.convention); };
  MatrixGeodesicState s = s0;
  for (int n = 1; n <= steps; ++n) {
    for (int q = 0; q < sub; ++q) {
      require_explicit_cfl(s.u, h, ctx);
      s = rk4_step(rhs, s, h);
      s.t += h;
      monitor(s, ctx, opt.semidefinite);
    }
    s.t = s0.t + n * dt;
    traj.push_back(s);
  }
  return traj;
}

std::vector<MatrixGeodesicState> integrate_geodesic_matrix_unbalanced(const MatrixGeodesicState& s0, double T,
                                                                     int steps, int substeps) {
  return integrate_geodesic_matrix(s0, T, steps, {MatrixSystem::Unbalanced, SignConvention::Derived, substeps, false});
}

std::vector<MatrixGeodesicState> integrate_geodesic_matrix_balanced(const MatrixGeodesicState& s0, double T,
                                                                   int steps, int substeps) {
  return integrate_geodesic_matrix(s0, T, steps, {MatrixSystem::Balanced, SignConvention::Derived, substeps, false});
}

std::vector<MatrixGeodesicState> integrate_geodesic_matrix_alternative(const MatrixGeodesicState& s0, double T,
                                                                      int steps, int substeps) {
  return integrate_geodesic_matrix(s0, T, steps, {MatrixSystem::Alternative, SignConvention::Derived, substeps, false});
}

MatrixGeodesicState matrix_state_from_P(const Field& sigma, const Field& P, MatrixSystem system) {
  const Factorized f = factorize(sigma);
  const Field p = symmetrized(P);
  Generator xi = horizontal_from_P(p, sigma);
  const int k = f.S.ncomp() == 1 ? 1 : fiber_dim_from_ncomp(f.S.ncomp());
  if (system == MatrixSystem::Alternative) {
    // raising with the weight tr(a Sigma a^T) gives a = (P + P^T) Sigma Sigma^-1
    xi.a = p;
    xi.a *= 2.0;
  } else if (system == MatrixSystem::Balanced) {
    for (std::size_t c = 0; c < sigma.cells(); ++c) {
      const Mat S = mat_at(f.S, c, k);
      put_mat(xi.a, c, project_flavor(mat_at(xi.a, c, k), Flavor::Pgl, &S));
    }
  }
  return {std::move(xi.u), std::move(xi.a), f.S, f.rho, 0.0};
}

}  // namespace gauge_ot
