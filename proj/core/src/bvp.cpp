#include "gauge_ot/bvp.hpp"

#include <ceres/ceres.h>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <chrono>
#include <complex>
#include <limits>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <utility>

#include "gauge_ot/calculus.hpp"
#include "gauge_ot/errors.hpp"
#include "gauge_ot/integrators.hpp"
#include "gauge_ot/matrix_transport.hpp"
#include "gauge_ot/vector_transport.hpp"

namespace gauge_ot {

namespace {

// State equation x' = f(x; u, a) of one space, with the transposed Jacobians needed by the
// reverse sweep and the running cost density e = |u|^2 + |a_eff|^2 weighted by rho(x).
struct Model {
  Space space;
  int k;
  Flavor flavor;
  bool matrix;

  Model(Space s, int k_) : space(s), k(k_), flavor(space_flavor(s)), matrix(is_matrix_space(s)) {}

  // tr(a S) with S = Sigma / tr Sigma
  double tau(const Mat& a, const Mat& sig) const { return (a * sig).trace() / sig.trace(); }

  // vector controls arrive already projected onto the flavor (see control_a)
  Field control_a(const Field& a) const { return matrix ? a : project_flavor(a, k, flavor).values; }

  Field a_eff(const Field& x, const Field& a) const {
    if (!matrix) return a;
    if (space == Space::MDens) return a;
    Field out(a.grid(), k * k);
    for (std::size_t c = 0; c < a.cells(); ++c) {
      const Mat am = mat_at(a, c, k), sig = mat_at(x, c, k);
      put_mat(out, c, am - tau(am, sig) * Mat::Identity(k, k));
    }
    return out;
  }

  Field f(const Field& x, const Field& u, const Field& a) const {
    const Field ae = a_eff(x, a);
    return matrix ? infinitesimal_action_matrix(u, ae, x) : infinitesimal_action(u, ae, x);
  }

  Field jx_t(const Field& x, const Field& u, const Field& a, const Field& mu) const {
    const Field ae = a_eff(x, a);
    if (!matrix) {
      // the transport part is antisymmetric, so A^T mu = -action(u, -a^T, mu)
      Field b(ae.grid(), k * k);
      for (std::size_t c = 0; c < b.cells(); ++c)
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < k; ++j) b(c, i * k + j) = -ae(c, j * k + i);
      Field out = infinitesimal_action(u, b, mu);
      out *= -1.0;
      return out;
    }
    Field out = convect(u, mu);
    for (std::size_t c = 0; c < out.cells(); ++c) {
      const Mat am = mat_at(ae, c, k), m = mat_at(mu, c, k);
      Mat g = mat_at(out, c, k) + am.transpose() * m + m * am;
      if (space == Space::MProb) {
        const Mat a0 = mat_at(a, c, k), sig = mat_at(x, c, k);
        const double ms = (m.cwiseProduct(sig)).sum();
        g -= 2.0 * ms / sig.trace() * (a0.transpose() - tau(a0, sig) * Mat::Identity(k, k));
      }
      put_mat(out, c, g);
    }
    return out;
  }

  // Adds J_c^T mu into (gu, ga).
  void jc_t(const Field& x, const Field& mu, Field& gu, Field& ga) const {
    const PeriodicGrid& g = x.grid();
    for (int al = 0; al < g.dim(); ++al) {
      const Field dmu = diff(mu, al);
      if (matrix) {
        for (std::size_t c = 0; c < g.cells(); ++c) {
          double s = 0.0;
          for (int i = 0; i < k * k; ++i) s += x(c, i) * dmu(c, i);
          gu(c, al) += s;
        }
      } else {
        const Field dx = diff(x, al);
        for (std::size_t c = 0; c < g.cells(); ++c) {
          double s = 0.0;
          for (int j = 0; j < k; ++j) s += x(c, j) * dmu(c, j) - mu(c, j) * dx(c, j);
          gu(c, al) += 0.5 * s;
        }
      }
    }
    if (!matrix) {  // projected onto the flavor once, by the caller
      for (std::size_t c = 0; c < g.cells(); ++c)
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < k; ++j) ga(c, i * k + j) += mu(c, i) * x(c, j);
      return;
    }
    for (std::size_t c = 0; c < g.cells(); ++c) {
      const Mat m = mat_at(mu, c, k), sig = mat_at(x, c, k);
      Mat ga_c = (m + m.transpose()) * sig;
      if (space == Space::MProb) ga_c -= 2.0 * (m.cwiseProduct(sig)).sum() / sig.trace() * sig;
      put_mat(ga, c, mat_at(ga, c, k) + ga_c);
    }
  }

  Field rho(const Field& x) const {
    Field r(x.grid(), 1);
    for (std::size_t c = 0; c < x.cells(); ++c) {
      double s = 0.0;
      if (matrix) {
        for (int i = 0; i < k; ++i) s += x(c, i * k + i);
      } else {
        for (double v : x.at(c)) s += v * v;
      }
      r(c) = s;
    }
    return r;
  }

  // out += s(x) * d rho / dx for a scalar field s
  void add_drho_t(const Field& x, const Field& s, Field& out) const {
    for (std::size_t c = 0; c < x.cells(); ++c) {
      if (matrix) {
        for (int i = 0; i < k; ++i) out(c, i * k + i) += s(c);
      } else {
        for (int j = 0; j < k; ++j) out(c, j) += 2.0 * s(c) * x(c, j);
      }
    }
  }

  Field energy_density(const Field& x, const Field& u, const Field& a) const {
    const Field ae = a_eff(x, a);
    Field e(x.grid(), 1);
    for (std::size_t c = 0; c < x.cells(); ++c) {
      double s = 0.0;
      for (double v : u.at(c)) s += v * v;
      for (double v : ae.at(c)) s += v * v;
      e(c) = s;
    }
    return e;
  }

  // gu += w * de/du, ga += w * de/da, gx += w * de/dx
  void add_energy_grad(const Field& x, const Field& u, const Field& a, const Field& w, Field& gu, Field& ga,
                       Field& gx) const {
    const Field ae = a_eff(x, a);
    for (std::size_t c = 0; c < x.cells(); ++c) {
      const double wc = w(c);
      for (int al = 0; al < u.ncomp(); ++al) gu(c, al) += 2.0 * wc * u(c, al);
      if (space != Space::MProb) {
        for (int i = 0; i < k * k; ++i) ga(c, i) += 2.0 * wc * ae(c, i);
        continue;
      }
      const Mat at = mat_at(ae, c, k), a0 = mat_at(a, c, k), sig = mat_at(x, c, k);
      const double r = sig.trace();
      const double tra = at.trace();
      put_mat(ga, c, mat_at(ga, c, k) + wc * (2.0 * at - 2.0 * tra / r * sig));
      const Mat dx = -2.0 * tra / r * (a0.transpose() - tau(a0, sig) * Mat::Identity(k, k));
      put_mat(gx, c, mat_at(gx, c, k) + wc * dx);
    }
  }
};

struct Stages {
  Field x1, x2, x3, x4;
};

Field rk4_transport(const Model& m, const Field& x, const Field& u, const Field& a, double dt, Stages* st) {
  const Field k1 = m.f(x, u, a);
  Field x2 = x;
  x2.axpy(0.5 * dt, k1);
  const Field k2 = m.f(x2, u, a);
  Field x3 = x;
  x3.axpy(0.5 * dt, k2);
  const Field k3 = m.f(x3, u, a);
  Field x4 = x;
  x4.axpy(dt, k3);
  const Field k4 = m.f(x4, u, a);
  Field out = x;
  out.axpy(dt / 6.0, k1);
  out.axpy(dt / 3.0, k2);
  out.axpy(dt / 3.0, k3);
  out.axpy(dt / 6.0, k4);
  if (st) *st = {x, std::move(x2), std::move(x3), std::move(x4)};
  return out;
}

constexpr int kMaxSubsteps = 256;

// RK4 substeps for one control step: the base count, doubled until the per-substep Courant
// number is at most 0.9
int step_substeps(const Field& u, double dt, int base, const char* context) {
  const double courant = explicit_courant(u, dt);
  int sub = base;
  while (courant / sub > 0.9 && sub < kMaxSubsteps) sub *= 2;
  if (courant / sub > 1.0)
    throw CflViolation(std::string(context) + ": Courant number " + std::to_string(courant / sub) + " exceeds 1",
                       courant / sub);
  return sub;
}

// reverse sweep of one rk4_transport step: lam <- (dx_out/dx)^T lam, control adjoints accumulated
void rk4_adjoint(const Model& m, const Stages& s, const Field& u, const Field& a, double dt, Field& lam, Field& gu,
                 Field& ga) {
  Field lk = lam;
  lk *= dt / 6.0;
  const Field g4 = m.jx_t(s.x4, u, a, lk);
  m.jc_t(s.x4, lk, gu, ga);
  lk = lam;
  lk *= dt / 3.0;
  lk.axpy(dt, g4);
  const Field g3 = m.jx_t(s.x3, u, a, lk);
  m.jc_t(s.x3, lk, gu, ga);
  lk = lam;
  lk *= dt / 3.0;
  lk.axpy(0.5 * dt, g3);
  const Field g2 = m.jx_t(s.x2, u, a, lk);
  m.jc_t(s.x2, lk, gu, ga);
  lk = lam;
  lk *= dt / 6.0;
  lk.axpy(0.5 * dt, g2);
  const Field g1 = m.jx_t(s.x1, u, a, lk);
  m.jc_t(s.x1, lk, gu, ga);
  lam += g4;
  lam += g3;
  lam += g2;
  lam += g1;
}

void check_controls(const Controls& c, const Field& x0, int k) {
  if (c.steps() < 1 || c.a.size() != c.u.size()) throw PreconditionViolation("controls: need matching u, a per step");
  if (c.substeps < 1) throw PreconditionViolation("controls: substeps must be positive");
  for (int n = 0; n < c.steps(); ++n) {
    require_same_grid(c.u[static_cast<std::size_t>(n)], x0, "controls");
    require_same_grid(c.a[static_cast<std::size_t>(n)], x0, "controls");
    require_ncomp(c.u[static_cast<std::size_t>(n)], x0.grid().dim(), "controls");
    require_ncomp(c.a[static_cast<std::size_t>(n)], k * k, "controls");
  }
}

// Fourier basis: 1, cos(2 pi m x / L), sin(2 pi m x / L) for m < modes, tensor products in 2D.
std::vector<Field> fourier_basis(const PeriodicGrid& g, int modes) {
  auto axis_fn = [&](int j, double x, double L) {
    if (j == 0) return 1.0;
    const int m = (j + 1) / 2;
    const double ph = 2.0 * std::numbers::pi * m * x / L;
    return j % 2 == 1 ? std::cos(ph) : std::sin(ph);
  };
  const int n1 = 2 * modes - 1;
  std::vector<Field> out;
  const int n2 = g.dim() == 2 ? n1 : 1;
  for (int j0 = 0; j0 < n1; ++j0)
    for (int j1 = 0; j1 < n2; ++j1) {
      Field f(g, 1);
      for (std::size_t c = 0; c < g.cells(); ++c) {
        double v = axis_fn(j0, g.center(c, 0), g.length(0));
        if (g.dim() == 2) v *= axis_fn(j1, g.center(c, 1), g.length(1));
        f(c) = v;
      }
      out.push_back(std::move(f));
    }
  return out;
}

// Applies a separable circulant operator given by its real Fourier symbol per axis (one value
// per DFT mode). Even symbols give symmetric operators.
Field circulant_apply(const Field& f, const std::vector<std::vector<double>>& symbols) {
  const PeriodicGrid& g = f.grid();
  Field cur = f;
  Eigen::FFT<double> fft;
  std::vector<double> line;
  std::vector<std::complex<double>> spec;
  for (int ax = 0; ax < g.dim(); ++ax) {
    const std::vector<double>& sym = symbols[static_cast<std::size_t>(ax)];
    const std::size_t n = sym.size();
    const std::size_t nc = static_cast<std::size_t>(f.ncomp());
    const std::size_t inner = g.stride(ax);
    double* data = cur.values().data();
    line.resize(n);
    for (std::size_t l = 0; l < g.cells() / n; ++l) {
      const std::size_t b = (l / inner) * n * inner + l % inner;
      for (std::size_t c = 0; c < nc; ++c) {
        for (std::size_t i = 0; i < n; ++i) line[i] = data[(b + i * inner) * nc + c];
        fft.fwd(spec, line);
        for (std::size_t m = 0; m < n; ++m) spec[m] *= sym[m];
        fft.inv(line, spec);
        for (std::size_t i = 0; i < n; ++i) data[(b + i * inner) * nc + c] = line[i];
      }
    }
  }
  return cur;
}

double mode_wavenumber(std::size_t m, std::size_t n, double len) {
  return 2.0 * std::numbers::pi * static_cast<double>(std::min(m, n - m)) / len;
}

// periodic Gaussian blur of width sigma (absolute length per axis)
Field gaussian_blur(const Field& f, double sigma) {
  if (sigma <= 0.0) return f;
  const PeriodicGrid& g = f.grid();
  std::vector<std::vector<double>> symbols;
  for (int ax = 0; ax < g.dim(); ++ax) {
    const std::size_t n = static_cast<std::size_t>(g.size(ax));
    std::vector<double> sym(n);
    for (std::size_t m = 0; m < n; ++m) {
      const double kappa = mode_wavenumber(m, n, g.length(ax));
      sym[m] = std::exp(-0.5 * sigma * sigma * kappa * kappa);
    }
    symbols.push_back(std::move(sym));
  }
  return circulant_apply(f, symbols);
}

// symbols of prod_axis (1 - ell^2 d^2/dx^2)^-1
std::vector<std::vector<double>> sobolev_symbols(const PeriodicGrid& g, double ell) {
  std::vector<std::vector<double>> symbols;
  for (int ax = 0; ax < g.dim(); ++ax) {
    const std::size_t n = static_cast<std::size_t>(g.size(ax));
    std::vector<double> sym(n);
    for (std::size_t m = 0; m < n; ++m) {
      const double kappa = mode_wavenumber(m, n, g.length(ax));
      sym[m] = 1.0 / (1.0 + ell * ell * kappa * kappa);
    }
    symbols.push_back(std::move(sym));
  }
  return symbols;
}

// per-cell w w^T, the mass-like quantity compared in warm-start rounds for vector spaces
Field outer_square(const Field& w) {
  const int k = w.ncomp();
  Field out(w.grid(), k * k);
  for (std::size_t c = 0; c < w.cells(); ++c)
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) out(c, i * k + j) = w(c, i) * w(c, j);
  return out;
}

// Endpoint mismatch of warm-start rounds (sigma > 0): the blurred difference of densities, w w^T
// for vector spaces and Sigma for matrix spaces. With sigma = 0 it is the plain state difference.
Field blurred_mismatch(const Field& x, const Field& target, bool matrix, double sigma) {
  if (sigma <= 0.0) return x - target;
  if (matrix) return gaussian_blur(x - target, sigma);
  return gaussian_blur(outer_square(x) - outer_square(target), sigma);
}

// adjoint of blurred_mismatch at x applied to r (times 1)
Field blurred_mismatch_t(const Field& x, const Field& r, bool matrix, double sigma) {
  if (sigma <= 0.0) return r;
  const Field br = gaussian_blur(r, sigma);
  if (matrix) return br;
  const int k = x.ncomp();
  Field out(x.grid(), k);
  for (std::size_t c = 0; c < x.cells(); ++c)
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) out(c, i) += (br(c, i * k + j) + br(c, j * k + i)) * x(c, j);
  return out;
}

int covector_ncomp(Space s, int k) { return is_matrix_space(s) ? k * k : k; }
int covector_params(Space s, int k) { return is_matrix_space(s) ? k * (k + 1) / 2 : k; }

Field covector_from_params(const std::vector<Field>& basis, Space s, int k, const double* p) {
  const PeriodicGrid& g = basis.front().grid();
  const std::size_t nb = basis.size();
  Field cov(g, covector_ncomp(s, k));
  auto add = [&](int comp_a, int comp_b, std::size_t off) {
    for (std::size_t j = 0; j < nb; ++j) {
      const double coef = p[off + j];
      if (coef == 0.0) continue;
      for (std::size_t c = 0; c < g.cells(); ++c) {
        const double v = coef * basis[j](c);
        cov(c, comp_a) += v;
        if (comp_b != comp_a) cov(c, comp_b) += v;
      }
    }
  };
  if (!is_matrix_space(s)) {
    for (int j = 0; j < k; ++j) add(j, j, static_cast<std::size_t>(j) * nb);
  } else {
    std::size_t off = 0;
    for (int i = 0; i < k; ++i)
      for (int j = i; j < k; ++j, off += nb) add(i * k + j, j * k + i, off);
  }
  return cov;
}

int auto_substeps(const Field& u0, int steps) {
  const double courant = explicit_courant(u0, 1.0 / steps);
  int sub = 1;
  while (sub < 2.0 * courant) sub *= 2;
  return sub;
}

Field terminal_state(const BvpProblem& p, const Field& cov, int substeps) {
  const int k = p.k();
  switch (p.space) {
    case Space::VhProb: {
      const VectorGeodesicState s0 = vector_state_from_theta(p.endpoint0, cov, Flavor::So);
      return vector_characteristics_at(s0, 1.0, VectorSystem::Balanced).w;
    }
    case Space::VhDens: {
      const VectorGeodesicState s0 = vector_state_from_theta(p.endpoint0, cov, Flavor::Conf);
      const int sub = substeps > 0 ? substeps : auto_substeps(s0.u, p.options.steps);
      VectorGeodesicOptions o{VectorSystem::Unbalanced, GeodesicMethod::Eulerian, SignConvention::Derived, sub};
      return integrate_geodesic_vector(s0, 1.0, p.options.steps, o).back().w;
    }
    case Space::MProb:
    case Space::MDens: {
      const MatrixSystem sys = p.space == Space::MProb ? MatrixSystem::Balanced : MatrixSystem::Unbalanced;
      const MatrixGeodesicState s0 = matrix_state_from_P(p.endpoint0, cov, sys);
      const int sub = substeps > 0 ? substeps : auto_substeps(s0.u, p.options.steps);
      return integrate_geodesic_matrix(s0, 1.0, p.options.steps, {sys, SignConvention::Derived, sub, false})
          .back()
          .sigma();
    }
  }
  (void)k;
  throw PreconditionViolation("terminal_state: unknown space");
}

struct ShootResidual {
  const BvpProblem* p;
  const std::vector<Field>* basis;
  double weight;
  double smoothing;

  bool operator()(double const* const* params, double* residuals) const {
    try {
      const Field cov = covector_from_params(*basis, p->space, p->k(), params[0]);
      const Field d = blurred_mismatch(terminal_state(*p, cov, 0), p->endpoint1, is_matrix_space(p->space), smoothing);
      const auto& dv = d.values();
      for (std::size_t i = 0; i < dv.size(); ++i) residuals[i] = weight * dv[i];
      return true;
    } catch (const Error&) {
      return false;
    }
  }
};

std::size_t control_size(const PeriodicGrid& g, int k) {
  return g.cells() * static_cast<std::size_t>(g.dim() + k * k);
}

void unpack(const double* z, Controls& c) {
  std::size_t off = 0;
  for (int n = 0; n < c.steps(); ++n) {
    for (Field* f : {&c.u[static_cast<std::size_t>(n)], &c.a[static_cast<std::size_t>(n)]}) {
      auto& v = f->values();
      std::copy(z + off, z + off + v.size(), v.begin());
      off += v.size();
    }
  }
}

void pack(const Controls& c, double* z, double scale) {
  std::size_t off = 0;
  for (int n = 0; n < c.steps(); ++n) {
    for (const Field* f : {&c.u[static_cast<std::size_t>(n)], &c.a[static_cast<std::size_t>(n)]}) {
      for (double v : f->values()) z[off++] = scale * v;
    }
  }
}

class BestIterate : public ceres::IterationCallback {
 public:
  explicit BestIterate(std::vector<double>& live) : live_(live), kept(live) {}
  ceres::CallbackReturnType operator()(const ceres::IterationSummary& s) override {
    if (s.step_is_successful || s.iteration == 0) kept = live_;
    return ceres::SOLVER_CONTINUE;
  }

 private:
  std::vector<double>& live_;

 public:
  std::vector<double> kept;
};

struct LbfgsOutcome {
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  // objective after each accepted step
};

// L-BFGS with backtracking Armijo search and initial inverse Hessian gamma * K for an SPD
// preconditioner K. `eval` returns false on an infeasible point (CFL, degenerate state), which
// only shrinks the step. `first_step` caps the initial trial step along a fresh direction.
// Stops when the relative objective decrease over the last `window` accepted steps is below
// `progress_tol`.
template <class Eval, class Precond, class FirstStep>
LbfgsOutcome lbfgs_armijo(const Eval& eval, std::vector<double>& z, const Precond& precond,
                          const FirstStep& first_step, int max_iter, double grad_tol, double progress_tol,
                          double deadline_s, std::chrono::steady_clock::time_point t0) {
  constexpr std::size_t kWindow = 25;
  constexpr int kMemory = 20;
  constexpr double kArmijo = 1e-4;
  auto dotv = [](const std::vector<double>& x, const std::vector<double>& y) {
    return dot(std::span<const double>(x), std::span<const double>(y));
  };
  LbfgsOutcome out;
  const std::size_t n = z.size();
  std::vector<double> g(n), gn(n), d(n), zn(n);
  double f = 0.0;
  if (!eval(z, f, g)) throw PreconditionViolation("path_relax: initial controls are infeasible");
  out.history.push_back(f);
  std::vector<std::vector<double>> S, Y;
  std::vector<double> rho;
  double gamma = 1.0;
  int stalls = 0;
  for (int it = 0; it < max_iter; ++it) {
    double gmax = 0.0;
    for (double v : g) gmax = std::max(gmax, std::abs(v));
    if (gmax <= grad_tol) {
      out.converged = true;
      break;
    }
    if (deadline_s > 0.0 && std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() > deadline_s)
      break;
    // two-loop recursion
    d = g;
    std::vector<double> alpha(S.size());
    for (std::size_t j = S.size(); j-- > 0;) {
      alpha[j] = rho[j] * dotv(S[j], d);
      for (std::size_t i = 0; i < n; ++i) d[i] -= alpha[j] * Y[j][i];
    }
    d = precond(d);
    for (double& v : d) v *= gamma;
    for (std::size_t j = 0; j < S.size(); ++j) {
      const double beta = rho[j] * dotv(Y[j], d);
      for (std::size_t i = 0; i < n; ++i) d[i] += (alpha[j] - beta) * S[j][i];
    }
    for (double& v : d) v = -v;
    double slope = dotv(g, d);
    if (slope >= 0.0) {  // lost descent; restart from steepest descent
      S.clear();
      Y.clear();
      rho.clear();
      gamma = 1.0;
      d = precond(g);
      for (double& v : d) v = -v;
      slope = dotv(g, d);
    }
    double step = S.empty() ? first_step(d) : 1.0;
    double fn = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt, step *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) zn[i] = z[i] + step * d[i];
      const bool ok = eval(zn, fn, gn);
      if (ok && fn <= f + kArmijo * step * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    std::vector<double> sv(n), yv(n);
    for (std::size_t i = 0; i < n; ++i) {
      sv[i] = zn[i] - z[i];
      yv[i] = gn[i] - g[i];
    }
    const double sy = dotv(sv, yv);
    if (sy > 1e-300) {
      if (static_cast<int>(S.size()) == kMemory) {
        S.erase(S.begin());
        Y.erase(Y.begin());
        rho.erase(rho.begin());
      }
      gamma = sy / dotv(yv, precond(yv));
      S.push_back(std::move(sv));
      Y.push_back(std::move(yv));
      rho.push_back(1.0 / sy);
    }
    const double decrease = f - fn;
    z.swap(zn);
    g.swap(gn);
    f = fn;
    out.history.push_back(f);
    ++out.iterations;
    stalls = decrease <= 1e-15 * std::max(1.0, std::abs(f)) ? stalls + 1 : 0;
    const std::size_t h = out.history.size();
    if (stalls >= 3 ||
        (h > kWindow && out.history[h - 1 - kWindow] - f <= progress_tol * std::max(1e-300, std::abs(f)))) {
      out.converged = true;
      break;
    }
  }
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::string to_string(Space s) {
  switch (s) {
    case Space::VhProb: return "vhprob";
    case Space::VhDens: return "vhdens";
    case Space::MProb: return "mprob";
    case Space::MDens: return "mdens";
  }
  return "?";
}

Space space_from_string(const std::string& s) {
  if (s == "vhprob") return Space::VhProb;
  if (s == "vhdens") return Space::VhDens;
  if (s == "mprob") return Space::MProb;
  if (s == "mdens") return Space::MDens;
  throw PreconditionViolation("unknown space '" + s + "' (expected vhprob, vhdens, mprob, mdens)");
}

bool is_matrix_space(Space s) { return s == Space::MProb || s == Space::MDens; }

Flavor space_flavor(Space s) {
  switch (s) {
    case Space::VhProb: return Flavor::So;
    case Space::VhDens: return Flavor::Conf;
    case Space::MProb: return Flavor::Pgl;
    case Space::MDens: return Flavor::Gl;
  }
  return Flavor::Gl;
}

int space_fiber_dim(Space s, const Field& endpoint) {
  return is_matrix_space(s) ? fiber_dim_from_ncomp(endpoint.ncomp()) : endpoint.ncomp();
}

void validate_problem(const BvpProblem& p) {
  require_same_grid(p.endpoint0, p.endpoint1, "validate_problem");
  require_ncomp(p.endpoint1, p.endpoint0.ncomp(), "validate_problem");
  if (p.options.steps < 1) throw PreconditionViolation("validate_problem: steps must be positive");
  const bool normalized = p.space == Space::VhProb || p.space == Space::MProb;
  for (const Field* e : {&p.endpoint0, &p.endpoint1}) {
    if (is_matrix_space(p.space)) {
      make_matrix_density(*e, normalized);
    } else {
      make_vector_half_density(*e, normalized);
    }
  }
}

Controls zero_controls(const PeriodicGrid& g, int k, int steps, int substeps) {
  Controls c;
  c.substeps = substeps;
  for (int n = 0; n < steps; ++n) {
    c.u.emplace_back(g, g.dim());
    c.a.emplace_back(g, k * k);
  }
  return c;
}

double l2_distance(const Field& a, const Field& b) {
  require_same_grid(a, b, "l2_distance");
  require_ncomp(b, a.ncomp(), "l2_distance");
  const Field d = a - b;
  return std::sqrt(std::max(0.0, dot(d.values(), d.values()) * d.grid().cell_volume()));
}

ActionResult action_functional(const Controls& c, const Field& endpoint0, Space space) {
  const Model m(space, space_fiber_dim(space, endpoint0));
  check_controls(c, endpoint0, m.k);
  const double dt = 1.0 / c.steps();
  ActionResult out;
  out.path.push_back(endpoint0);
  Field x = endpoint0;
  Field rho0 = m.rho(x);
  for (int n = 0; n < c.steps(); ++n) {
    const Field& u = c.u[static_cast<std::size_t>(n)];
    const Field a = m.control_a(c.a[static_cast<std::size_t>(n)]);
    const int sub = step_substeps(u, dt, c.substeps, "action_functional");
    const Field e = m.energy_density(x, u, a);
    Field next = x;
    for (int j = 0; j < sub; ++j) next = rk4_transport(m, next, u, a, dt / sub, nullptr);
    if (!next.all_finite()) throw DegenerateDensity("action_functional: state blew up");
    Field rho1 = m.rho(next);
    Field w(x.grid(), 1);
    for (std::size_t i = 0; i < x.cells(); ++i) w(i) = 0.5 * (rho0(i) + rho1(i)) * e(i);
    out.action += dt * integrate(w);
    x = std::move(next);
    rho0 = std::move(rho1);
    out.path.push_back(x);
  }
  out.terminal = x;
  return out;
}

RelaxObjective relax_objective(const Controls& c, const Field& endpoint0, const Field& endpoint1, Space space,
                               double penalty, double smoothing) {
  const Model m(space, space_fiber_dim(space, endpoint0));
  check_controls(c, endpoint0, m.k);
  require_same_grid(endpoint0, endpoint1, "relax_objective");
  const PeriodicGrid& g = endpoint0.grid();
  const int M = c.steps();
  const double dt = 1.0 / M;
  std::vector<std::vector<Stages>> st(static_cast<std::size_t>(M));
  std::vector<Field> xs{endpoint0}, rhos{m.rho(endpoint0)}, es, as;
  as.reserve(static_cast<std::size_t>(M));
  RelaxObjective out;
  for (int n = 0; n < M; ++n) {
    const Field& u = c.u[static_cast<std::size_t>(n)];
    as.push_back(m.control_a(c.a[static_cast<std::size_t>(n)]));
    const Field& a = as.back();
    const int sub = step_substeps(u, dt, c.substeps, "relax_objective");
    auto& stn = st[static_cast<std::size_t>(n)];
    stn.resize(static_cast<std::size_t>(sub));
    es.push_back(m.energy_density(xs.back(), u, a));
    Field x = xs.back();
    for (int j = 0; j < sub; ++j) x = rk4_transport(m, x, u, a, dt / sub, &stn[static_cast<std::size_t>(j)]);
    xs.push_back(std::move(x));
    if (!xs.back().all_finite()) throw DegenerateDensity("relax_objective: state blew up");
    rhos.push_back(m.rho(xs.back()));
    Field w(g, 1);
    for (std::size_t i = 0; i < g.cells(); ++i) w(i) = 0.5 * (rhos[n](i) + rhos[n + 1](i)) * es.back()(i);
    out.action += dt * integrate(w);
  }
  const Field mis = blurred_mismatch(xs.back(), endpoint1, m.matrix, smoothing);
  out.mismatch_sq = dot(mis.values(), mis.values()) * g.cell_volume();
  out.objective = out.action + penalty * out.mismatch_sq;

  out.gradient = zero_controls(g, m.k, M, c.substeps);
  Field lam = blurred_mismatch_t(xs.back(), mis, m.matrix, smoothing);
  lam *= 2.0 * penalty;
  for (int n = M - 1; n >= 0; --n) {
    const std::size_t ni = static_cast<std::size_t>(n);
    const Field& u = c.u[ni];
    const Field& a = as[ni];
    Field& gu = out.gradient.u[ni];
    Field& ga = out.gradient.a[ni];
    // running cost of step n: dt * e(x_n) * (rho_n + rho_{n+1}) / 2
    Field half_e = es[ni];
    half_e *= 0.5 * dt;
    m.add_drho_t(xs[ni + 1], half_e, lam);
    const double ds = dt / static_cast<double>(st[ni].size());
    for (std::size_t jj = st[ni].size(); jj-- > 0;) rk4_adjoint(m, st[ni][jj], u, a, ds, lam, gu, ga);
    m.add_drho_t(xs[ni], half_e, lam);
    Field wbar(g, 1);
    for (std::size_t i = 0; i < g.cells(); ++i) wbar(i) = 0.5 * dt * (rhos[ni](i) + rhos[ni + 1](i));
    m.add_energy_grad(xs[ni], u, a, wbar, gu, ga, lam);
    if (!is_matrix_space(space)) ga = project_flavor(ga, m.k, m.flavor).values;
  }
  return out;
}

BvpSolution path_relax(const BvpProblem& p) {
  validate_problem(p);
  const auto t0 = std::chrono::steady_clock::now();
  const PeriodicGrid& g = p.endpoint0.grid();
  const int k = p.k();
  const BvpOptions& o = p.options;
  Controls c = zero_controls(g, k, o.steps, o.transport_substeps);
  if (o.seed != 0) {
    for (int n = 0; n < o.steps; ++n) {
      c.u[static_cast<std::size_t>(n)] = random_band_limited(g, g.dim(), o.seed + static_cast<std::uint64_t>(n), 3, 1e-3);
    }
  }
  std::vector<double> z(control_size(g, k) * static_cast<std::size_t>(o.steps));
  pack(c, z.data(), 1.0);
  BvpSolution sol;
  sol.method = "path_relax";
  sol.seed = o.seed;
  // coarse-to-fine warm start on a blurred mismatch, then the plain L2 penalty rounds
  std::vector<std::pair<double, double>> schedule;
  for (double frac : o.warm_start) schedule.emplace_back(o.penalty, frac * g.length(0));
  double penalty = o.penalty;
  for (int round = 0; round < o.penalty_rounds; ++round, penalty *= o.penalty_growth) schedule.emplace_back(penalty, 0.0);
  Controls scratch = c;
  const double h = g.cell_volume();
  const double dt = 1.0 / o.steps;
  const std::size_t per_step = control_size(g, k);
  const std::size_t u_len = g.cells() * static_cast<std::size_t>(g.dim());
  auto first_step = [&](const std::vector<double>& d) {
    double umax = 0.0;
    for (std::size_t off = 0; off < d.size(); off += per_step)
      for (std::size_t i = 0; i < u_len; ++i) umax = std::max(umax, std::abs(d[off + i]));
    const double courant = dt * umax / g.min_spacing() * (g.scheme() == DiffScheme::Spectral ? std::numbers::pi : 1.0);
    return courant > 1.0 ? 1.0 / courant : 1.0;
  };
  const auto kernels = sobolev_symbols(g, o.precond_length * g.length(0));
  Controls pscratch = c;
  auto precond = [&](const std::vector<double>& v) {
    if (o.precond_length <= 0.0) return v;
    unpack(v.data(), pscratch);
    for (auto& f : pscratch.u) f = circulant_apply(f, kernels);
    for (auto& f : pscratch.a) f = circulant_apply(f, kernels);
    std::vector<double> out(v.size());
    pack(pscratch, out.data(), 1.0);
    return out;
  };
  for (std::size_t round = 0; round < schedule.size(); ++round) {
    const auto [pen, sigma] = schedule[round];
    // an equal share of the remaining time per remaining round
    double deadline = 0.0;
    if (o.max_seconds > 0.0) {
      const double used = seconds_since(t0);
      deadline = used + (o.max_seconds - used) / static_cast<double>(schedule.size() - round);
    }
    auto eval = [&, pen = pen, sigma = sigma](const std::vector<double>& x, double& f, std::vector<double>& grad) {
      unpack(x.data(), scratch);
      try {
        const RelaxObjective r = relax_objective(scratch, p.endpoint0, p.endpoint1, p.space, pen, sigma);
        if (!std::isfinite(r.objective)) return false;
        f = r.objective;
        pack(r.gradient, grad.data(), h);
        return true;
      } catch (const Error&) {
        return false;
      }
    };
    const LbfgsOutcome lo =
        lbfgs_armijo(eval, z, precond, first_step, sigma > 0.0 ? o.warm_iterations : o.max_iterations,
                     o.gradient_tol * h, o.progress_tol, deadline, t0);
    sol.iterations += lo.iterations;
    sol.converged = lo.converged;
    sol.objective_history.push_back(lo.history);
  }
  unpack(z.data(), c);
  ActionResult ar = action_functional(c, p.endpoint0, p.space);
  sol.distance_sq = ar.action;
  sol.endpoint_residual = l2_distance(ar.terminal, p.endpoint1);
  sol.trajectory = std::move(ar.path);
  sol.controls = std::move(c);
  return sol;
}

std::vector<Field> shoot_trajectory(const BvpProblem& p, const Field& cov, int substeps) {
  const int steps = p.options.steps;
  std::vector<Field> out;
  switch (p.space) {
    case Space::VhProb: {
      const VectorGeodesicState s0 = vector_state_from_theta(p.endpoint0, cov, Flavor::So);
      for (const auto& s : integrate_geodesic_vector(s0, 1.0, steps, {})) out.push_back(s.w);
      break;
    }
    case Space::VhDens: {
      const VectorGeodesicState s0 = vector_state_from_theta(p.endpoint0, cov, Flavor::Conf);
      const int sub = substeps > 0 ? substeps : auto_substeps(s0.u, steps);
      VectorGeodesicOptions o{VectorSystem::Unbalanced, GeodesicMethod::Eulerian, SignConvention::Derived, sub};
      for (const auto& s : integrate_geodesic_vector(s0, 1.0, steps, o)) out.push_back(s.w);
      break;
    }
    case Space::MProb:
    case Space::MDens: {
      const MatrixSystem sys = p.space == Space::MProb ? MatrixSystem::Balanced : MatrixSystem::Unbalanced;
      const MatrixGeodesicState s0 = matrix_state_from_P(p.endpoint0, cov, sys);
      const int sub = substeps > 0 ? substeps : auto_substeps(s0.u, steps);
      for (const auto& s : integrate_geodesic_matrix(s0, 1.0, steps, {sys, SignConvention::Derived, sub, false}))
        out.push_back(s.sigma());
      break;
    }
  }
  return out;
}

double shoot_energy(const BvpProblem& p, const Field& cov) {
  switch (p.space) {
    case Space::VhProb:
    case Space::VhDens: {
      const VectorGeodesicState s0 = vector_state_from_theta(p.endpoint0, cov, space_flavor(p.space));
      return bures_energy(s0.u, s0.a, s0.w);
    }
    case Space::MProb:
    case Space::MDens: {
      const MatrixSystem sys = p.space == Space::MProb ? MatrixSystem::Balanced : MatrixSystem::Unbalanced;
      const MatrixGeodesicState s0 = matrix_state_from_P(p.endpoint0, cov, sys);
      return bures_energy_matrix(s0.u, s0.a, s0.sigma());
    }
  }
  return 0.0;
}

// Initial generator (u, a) of the geodesic from endpoint0 with the given covector.
std::pair<Field, Field> initial_generator(const BvpProblem& p, const Field& cov) {
  if (!is_matrix_space(p.space)) {
    VectorGeodesicState s0 = vector_state_from_theta(p.endpoint0, cov, space_flavor(p.space));
    return {std::move(s0.u), std::move(s0.a)};
  }
  const MatrixSystem sys = p.space == Space::MProb ? MatrixSystem::Balanced : MatrixSystem::Unbalanced;
  MatrixGeodesicState s0 = matrix_state_from_P(p.endpoint0, cov, sys);
  return {std::move(s0.u), std::move(s0.a)};
}

// Band-limited covector whose initial generator best matches (u, a) in the density-weighted L2
// norm. The generator is linear in the covector, so this is one least-squares solve. A uniform
// weight (a tenth of the peak density) keeps the fit tame where the density vanishes.
std::vector<double> fit_covector(const BvpProblem& p, const std::vector<Field>& basis, const Field& u,
                                 const Field& a) {
  const PeriodicGrid& g = p.endpoint0.grid();
  const int k = p.k();
  const int np = static_cast<int>(basis.size()) * covector_params(p.space, k);
  const Field rho = Model(p.space, k).rho(p.endpoint0);
  double rmax = 0.0;
  for (double v : rho.values()) rmax = std::max(rmax, v);
  const int du = g.dim(), da = a.ncomp();
  const Eigen::Index rows = static_cast<Eigen::Index>(g.cells()) * (du + da);
  Eigen::VectorXd sw(static_cast<Eigen::Index>(g.cells()));
  for (std::size_t c = 0; c < g.cells(); ++c) sw(static_cast<Eigen::Index>(c)) = std::sqrt(rho(c) + 0.1 * rmax);
  auto flatten = [&](const Field& fu, const Field& fa, Eigen::Ref<Eigen::VectorXd> out) {
    for (std::size_t c = 0; c < g.cells(); ++c) {
      const Eigen::Index r = static_cast<Eigen::Index>(c) * (du + da);
      const double w = sw(static_cast<Eigen::Index>(c));
      for (int j = 0; j < du; ++j) out(r + j) = w * fu(c, j);
      for (int j = 0; j < da; ++j) out(r + du + j) = w * fa(c, j);
    }
  };
  Eigen::MatrixXd A(rows, np);
  std::vector<double> e(static_cast<std::size_t>(np), 0.0);
  for (int j = 0; j < np; ++j) {
    e[static_cast<std::size_t>(j)] = 1.0;
    const auto [gu, ga] = initial_generator(p, covector_from_params(basis, p.space, k, e.data()));
    flatten(gu, ga, A.col(j));
    e[static_cast<std::size_t>(j)] = 0.0;
  }
  Eigen::VectorXd b(rows);
  flatten(u, a, b);
  const Eigen::VectorXd x = A.colPivHouseholderQr().solve(b);
  return {x.data(), x.data() + x.size()};
}

BvpSolution shoot(const BvpProblem& p) {
  validate_problem(p);
  const PeriodicGrid& g = p.endpoint0.grid();
  const int k = p.k();
  const BvpOptions& o = p.options;
  const std::vector<Field> basis = fourier_basis(g, o.shoot_modes);
  const int np = static_cast<int>(basis.size()) * covector_params(p.space, k);
  const int nr = static_cast<int>(p.endpoint1.values().size());
  std::vector<double> params(static_cast<std::size_t>(np), 0.0);

  BvpSolution sol;
  sol.method = "shoot";
  sol.seed = o.seed;
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> schedule;
  if (o.shoot_warm_relax && !o.warm_start.empty()) {
    // blurred-mismatch path relaxation, then fit the covector to its first control
    BvpProblem rp = p;
    rp.options.penalty_rounds = 0;
    if (o.max_seconds > 0.0) rp.options.max_seconds = o.max_seconds / 3.0;
    const BvpSolution r = path_relax(rp);
    sol.iterations += r.iterations;
    const Model m(p.space, k);
    params = fit_covector(p, basis, r.controls.u.front(),
                          m.a_eff(p.endpoint0, m.control_a(r.controls.a.front())));
    // a fit whose characteristics cross before t = 1 is shrunk towards the identity
    for (int tries = 0; tries < 40; ++tries) {
      try {
        terminal_state(p, covector_from_params(basis, p.space, k, params.data()), 0);
        break;
      } catch (const Error&) {
        for (double& v : params) v *= 0.5;
      }
    }
  } else {
    for (double frac : o.warm_start) schedule.push_back(frac * g.length(0));
  }
  schedule.push_back(0.0);
  for (double sigma : schedule) {
    auto* cost = new ceres::DynamicNumericDiffCostFunction<ShootResidual, ceres::CENTRAL>(
        new ShootResidual{&p, &basis, std::sqrt(g.cell_volume()), sigma});
    cost->AddParameterBlock(np);
    const bool outer = sigma > 0.0 && !is_matrix_space(p.space);
    cost->SetNumResiduals(outer ? static_cast<int>(g.cells()) * k * k : nr);
    ceres::Problem problem;
    problem.AddResidualBlock(cost, nullptr, params.data());
    ceres::Solver::Options so;
    so.minimizer_type = ceres::TRUST_REGION;
    so.trust_region_strategy_type = ceres::LEVENBERG_MARQUARDT;
    so.linear_solver_type = ceres::DENSE_QR;
    so.max_num_iterations = std::min(o.max_iterations, 200);
    so.function_tolerance = 1e-16;
    so.gradient_tolerance = 1e-18;
    so.parameter_tolerance = 1e-14;
    so.logging_type = ceres::SILENT;
    so.minimizer_progress_to_stdout = false;
    if (o.max_seconds > 0.0) {
      const double left = o.max_seconds - seconds_since(t0);
      if (left <= 0.0) break;
      so.max_solver_time_in_seconds = left;
    }
    // Ceres leaves the parameters untouched when it terminates with FAILURE (e.g. a Jacobian
    // evaluation hits crossing characteristics); keep the last accepted iterate instead
    BestIterate best(params);
    so.update_state_every_iteration = true;
    so.callbacks.push_back(&best);
    ceres::Solver::Summary summary;
    ceres::Solve(so, &problem, &summary);
    if (!summary.IsSolutionUsable()) params = best.kept;
    sol.iterations += static_cast<int>(summary.iterations.size());
  }

  const Field cov = covector_from_params(basis, p.space, k, params.data());
  sol.trajectory = shoot_trajectory(p, cov, 0);
  sol.endpoint_residual = l2_distance(sol.trajectory.back(), p.endpoint1);
  sol.distance_sq = shoot_energy(p, cov);
  sol.converged = sol.endpoint_residual <= o.residual_tol;
  sol.initial_covector = cov;
  return sol;
}

double wasserstein_1d_oracle(const Field& rho0, const Field& rho1) {
  require_same_grid(rho0, rho1, "wasserstein_1d_oracle");
  require_ncomp(rho0, 1, "wasserstein_1d_oracle");
  require_ncomp(rho1, 1, "wasserstein_1d_oracle");
  const PeriodicGrid& g = rho0.grid();
  if (g.dim() != 1) throw PreconditionViolation("wasserstein_1d_oracle: needs a 1D grid");
  const std::size_t N = g.cells();
  const double h = g.spacing(0);
  const double L = g.length(0);
  for (const Field* r : {&rho0, &rho1}) {
    for (double v : r->values())
      if (v < 0.0 || !std::isfinite(v)) throw PreconditionViolation("wasserstein_1d_oracle: negative density");
    const double m = integrate(*r);
    if (std::abs(m - 1.0) > 1e-8) {
      throw PreconditionViolation("wasserstein_1d_oracle: densities must be normalized, got " + std::to_string(m));
    }
  }
  // cut at the cell boundary whose +-10% window carries the least mass
  const std::size_t half = static_cast<std::size_t>(std::ceil(0.1 * L / h));
  std::size_t cut = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < N; ++b) {
    double m0 = 0.0, m1 = 0.0;
    for (std::size_t j = 0; j < 2 * half; ++j) {
      const std::size_t c = (b + N - half + j) % N;
      m0 += rho0(c) * h;
      m1 += rho1(c) * h;
    }
    const double worst = std::max(m0, m1);
    if (worst < best) {
      best = worst;
      cut = b;
    }
  }
  if (best >= 1e-6) {
    throw PreconditionViolation("wasserstein_1d_oracle: mass " + std::to_string(best) +
                                " within 10% of every cut point; densities must be localized");
  }
  auto cdf = [&](const Field& r) {
    std::vector<double> C(N + 1, 0.0);
    for (std::size_t j = 0; j < N; ++j) C[j + 1] = C[j] + r((cut + j) % N) * h;
    for (double& v : C) v /= C[N];
    return C;
  };
  const std::vector<double> C0 = cdf(rho0), C1 = cdf(rho1);
  auto quantile = [&](const std::vector<double>& C, double s) {
    const auto it = std::upper_bound(C.begin(), C.end(), s);
    const std::size_t j = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - C.begin() - 1, 0, static_cast<std::ptrdiff_t>(N) - 1));
    const double m = C[j + 1] - C[j];
    const double frac = m > 0.0 ? (s - C[j]) / m : 0.0;
    return (static_cast<double>(j) + frac) * h;
  };
  constexpr int Q = 10000;
  double acc = 0.0;
  for (int q = 0; q < Q; ++q) {
    const double s = (q + 0.5) / Q;
    const double d = quantile(C0, s) - quantile(C1, s);
    acc += d * d;
  }
  return acc / Q;
}

}  // namespace gauge_ot
