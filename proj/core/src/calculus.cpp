#include "gauge_ot/calculus.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "gauge_ot/errors.hpp"

namespace gauge_ot {

namespace {

// Circulant weights d[s] with (Df)_i = sum_s d[s] f_{i-s}.
std::vector<double> spectral_weights(int n, double len) {
  std::vector<double> d(static_cast<std::size_t>(n), 0.0);
  for (int s = 1; s < n; ++s) {
    const double sign = (s % 2 == 0) ? 1.0 : -1.0;
    d[static_cast<std::size_t>(s)] = std::numbers::pi / len * sign / std::tan(std::numbers::pi * s / n);
  }
  return d;
}

}  // namespace

Field diff(const Field& f, int axis) {
  const PeriodicGrid& g = f.grid();
  if (axis < 0 || axis >= g.dim()) throw PreconditionViolation("diff: axis out of range");
  const std::size_t n = static_cast<std::size_t>(g.size(axis));
  const std::size_t nc = static_cast<std::size_t>(f.ncomp());
  const std::size_t stride = g.stride(axis) * nc;  // in doubles
  const std::size_t lines = g.cells() / n;
  // line l starts at cell (l / inner) * n * inner + l % inner, inner = cells per axis step
  const std::size_t inner = g.stride(axis);
  Field out(g, f.ncomp());
  const double* src = f.values().data();
  double* dst = out.values().data();
  auto line_start = [&](std::size_t l) { return ((l / inner) * n * inner + l % inner) * nc; };
  if (g.scheme() == DiffScheme::Centered) {
    const double inv = 1.0 / (2.0 * g.spacing(axis));
    for (std::size_t l = 0; l < lines; ++l) {
      const std::size_t b = line_start(l);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ip = b + (i + 1 == n ? 0 : i + 1) * stride, im = b + (i == 0 ? n - 1 : i - 1) * stride;
        const std::size_t o = b + i * stride;
        for (std::size_t c = 0; c < nc; ++c) dst[o + c] = (src[ip + c] - src[im + c]) * inv;
      }
    }
    return out;
  }
  const std::vector<double> d = spectral_weights(static_cast<int>(n), g.length(axis));
  for (std::size_t l = 0; l < lines; ++l) {
    const std::size_t b = line_start(l);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t o = b + i * stride;
      for (std::size_t s = 1; s < n; ++s) {
        const std::size_t j = b + ((i + n - s) % n) * stride;
        for (std::size_t c = 0; c < nc; ++c) dst[o + c] += d[s] * src[j + c];
      }
    }
  }
  return out;
}

Field grad(const Field& f) {
  const PeriodicGrid& g = f.grid();
  const int nc = f.ncomp();
  Field out(g, nc * g.dim());
  for (int a = 0; a < g.dim(); ++a) {
    const Field da = diff(f, a);
    for (std::size_t cell = 0; cell < g.cells(); ++cell) {
      for (int c = 0; c < nc; ++c) out(cell, a * nc + c) = da(cell, c);
    }
  }
  return out;
}

Field div(const Field& u) {
  const PeriodicGrid& g = u.grid();
  require_ncomp(u, g.dim(), "div");
  Field out(g, 1);
  for (int a = 0; a < g.dim(); ++a) out += diff(u.component(a), a);
  return out;
}

Field convect(const Field& u, const Field& f) {
  const PeriodicGrid& g = f.grid();
  require_same_grid(u, f, "convect");
  require_ncomp(u, g.dim(), "convect");
  Field out(g, f.ncomp());
  for (int a = 0; a < g.dim(); ++a) {
    const Field d = diff(f, a);
    for (std::size_t cell = 0; cell < g.cells(); ++cell) {
      for (int c = 0; c < f.ncomp(); ++c) out(cell, c) += u(cell, a) * d(cell, c);
    }
  }
  return out;
}

Field flux_div(const Field& u, const Field& f) {
  const PeriodicGrid& g = f.grid();
  require_same_grid(u, f, "flux_div");
  require_ncomp(u, g.dim(), "flux_div");
  Field out(g, f.ncomp());
  Field flux(g, f.ncomp());
  for (int a = 0; a < g.dim(); ++a) {
    for (std::size_t cell = 0; cell < g.cells(); ++cell) {
      for (int c = 0; c < f.ncomp(); ++c) flux(cell, c) = u(cell, a) * f(cell, c);
    }
    out += diff(flux, a);
  }
  return out;
}

double integrate(const Field& f) {
  require_ncomp(f, 1, "integrate");
  return f.grid().cell_volume() * pairwise_sum(f.values());
}

double courant_number(const Field& u, double dt) {
  const PeriodicGrid& g = u.grid();
  require_ncomp(u, g.dim(), "courant_number");
  double cfl = 0.0;
  for (std::size_t cell = 0; cell < g.cells(); ++cell) {
    for (int a = 0; a < g.dim(); ++a) cfl = std::max(cfl, std::abs(dt * u(cell, a)) / g.spacing(a));
  }
  return cfl;
}

Field advect(const Field& f, const Field& u, double dt) {
  require_same_grid(f, u, "advect");
  const PeriodicGrid& g = f.grid();
  const double cfl = courant_number(u, dt);
  if (cfl > 1.0) {
    throw CflViolation("advect: Courant number " + std::to_string(cfl) + " exceeds 1", cfl);
  }
  CatmullRomInterpolant interp(f);
  Field out(g, f.ncomp());
  for (std::size_t cell = 0; cell < g.cells(); ++cell) {
    Point x{g.center(cell, 0), g.dim() == 2 ? g.center(cell, 1) : 0.0};
    for (int a = 0; a < g.dim(); ++a) x[static_cast<std::size_t>(a)] -= dt * u(cell, a);
    interp.value(x, out.at(cell));
  }
  return out;
}

CharacteristicMap::CharacteristicMap(const Field& u0, InterpKind kind) {
  require_ncomp(u0, u0.grid().dim(), "CharacteristicMap");
  interp_ = make_interpolant(u0, kind);
}

void CharacteristicMap::velocity(Point x, std::span<double> u, std::span<double> du) const {
  interp_->value_and_grad(x, u, du);
}

namespace {

double jacobian_det(int dim, double t, std::span<const double> du) {
  if (dim == 1) return 1.0 + t * du[0];
  // du[alpha*2 + beta] = d_alpha u_beta; J_{beta alpha} = delta + t d_alpha u_beta
  const double j00 = 1.0 + t * du[0], j11 = 1.0 + t * du[3];
  return j00 * j11 - t * du[1] * t * du[2];
}

}  // namespace

double CharacteristicMap::min_jacobian_det(double t) const {
  const PeriodicGrid& g = interp_->grid();
  const int dim = g.dim();
  std::vector<double> u(static_cast<std::size_t>(dim)), du(static_cast<std::size_t>(dim * dim));
  double m = 1.0;
  for (std::size_t cell = 0; cell < g.cells(); ++cell) {
    Point x{g.center(cell, 0), dim == 2 ? g.center(cell, 1) : 0.0};
    interp_->value_and_grad(x, u, du);
    m = std::min(m, jacobian_det(dim, t, du));
  }
  return m;
}

void CharacteristicMap::require_preshock(double t) const {
  const double d = min_jacobian_det(t);
  if (d <= kShockDelta) {
    throw ShockTime("characteristics cross: min det(I + t Du0) = " + std::to_string(d) + " at t = " +
                        std::to_string(t),
                    t, d);
  }
}

Point CharacteristicMap::foot(double t, Point x, double tol) const {
  const PeriodicGrid& g = interp_->grid();
  const int dim = g.dim();
  std::vector<double> u(static_cast<std::size_t>(dim)), du(static_cast<std::size_t>(dim * dim));
  auto residual = [&](const Point& x0, Point& r) {
    interp_->value_and_grad(x0, u, du);
    double n2 = 0.0;
    for (int a = 0; a < dim; ++a) {
      const auto ua = static_cast<std::size_t>(a);
      r[ua] = x0[ua] + t * u[ua] - x[ua];
      n2 += r[ua] * r[ua];
    }
    return std::sqrt(n2);
  };
  Point x0 = x;
  Point r{0.0, 0.0};
  residual(x0, r);
  for (int a = 0; a < dim; ++a) x0[static_cast<std::size_t>(a)] -= r[static_cast<std::size_t>(a)];
  double res = residual(x0, r);
  const double scale = std::max(1.0, g.length(0));
  int it = 0;
  for (; it < 60 && res > tol * scale; ++it) {
    Point step{0.0, 0.0};
    if (dim == 1) {
      step[0] = r[0] / (1.0 + t * du[0]);
    } else {
      const double j00 = 1.0 + t * du[0], j01 = t * du[2];
      const double j10 = t * du[1], j11 = 1.0 + t * du[3];
      const double det = j00 * j11 - j01 * j10;
      step[0] = (j11 * r[0] - j01 * r[1]) / det;
      step[1] = (-j10 * r[0] + j00 * r[1]) / det;
    }
    double lambda = 1.0;
    Point trial = x0;
    Point rt{0.0, 0.0};
    double rest = 0.0;
    for (int ls = 0; ls < 30; ++ls) {
      for (int a = 0; a < dim; ++a) {
        const auto ua = static_cast<std::size_t>(a);
        trial[ua] = x0[ua] - lambda * step[ua];
      }
      rest = residual(trial, rt);
      if (rest < res || lambda < 1e-8) break;
      lambda *= 0.5;
    }
    x0 = trial;
    r = rt;
    res = residual(x0, r);
  }
  if (res > tol * scale) {
    throw NoConvergence("backward characteristic: Newton residual " + std::to_string(res), res, it);
  }
  for (int a = 0; a < dim; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    const double len = g.length(a);
    x0[ua] -= len * std::floor(x0[ua] / len);
  }
  return x0;
}

Point backward_characteristic(const Field& u0, double t, Point x, InterpKind kind) {
  CharacteristicMap map(u0, kind);
  map.require_preshock(t);
  return map.foot(t, x);
}

CgResult cg_solve(const LinearOperator& apply_A, std::span<const double> b, double tol, int max_iter) {
  const std::size_t n = b.size();
  CgResult res;
  res.x.assign(n, 0.0);
  const double bnorm = std::sqrt(dot(b, b));
  if (bnorm == 0.0) return res;
  std::vector<double> r(b.begin(), b.end()), p = r, ap(n);
  double rr = dot(r, r);
  for (int it = 0; it < max_iter; ++it) {
    if (std::sqrt(rr) <= tol * bnorm) {
      res.iterations = it;
      res.relative_residual = std::sqrt(rr) / bnorm;
      return res;
    }
    apply_A(p, ap);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) break;
    const double alpha = rr / pap;
    for (std::size_t i = 0; i < n; ++i) {
      res.x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    const double rr_new = dot(r, r);
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
  }
  // Recompute the true residual before deciding.
  apply_A(res.x, ap);
  double tr = 0.0;
  for (std::size_t i = 0; i < n; ++i) tr += (b[i] - ap[i]) * (b[i] - ap[i]);
  res.relative_residual = std::sqrt(tr) / bnorm;
  res.iterations = max_iter;
  if (res.relative_residual <= tol) return res;
  throw NoConvergence("cg_solve: relative residual " + std::to_string(res.relative_residual) +
                          " after " + std::to_string(max_iter) + " iterations",
                      res.relative_residual, max_iter);
}

Field cg_solve(const LinearOperator& apply_A, const Field& b, double tol, int max_iter) {
  CgResult r = cg_solve(apply_A, b.values(), tol, max_iter);
  return Field(b.grid(), b.ncomp(), std::move(r.x));
}

}  // namespace gauge_ot
