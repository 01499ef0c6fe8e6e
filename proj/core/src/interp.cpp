#include "gauge_ot/interp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gauge_ot/errors.hpp"

namespace gauge_ot {

namespace {

int wrap(int i, int n) { return ((i % n) + n) % n; }

struct AxisStencil {
  int idx[4] = {0, 0, 0, 0};
  double w[4] = {1.0, 0.0, 0.0, 0.0};
  double dw[4] = {0.0, 0.0, 0.0, 0.0};
  int width = 1;
};

AxisStencil catmull_rom_axis(double x, int n, double h) {
  AxisStencil s;
  const double pos = x / h - 0.5;
  const double fl = std::floor(pos);
  const double t = pos - fl;
  const int i = static_cast<int>(fl);
  const double t2 = t * t, t3 = t2 * t;
  s.width = 4;
  s.w[0] = 0.5 * (-t3 + 2.0 * t2 - t);
  s.w[1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0);
  s.w[2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + t);
  s.w[3] = 0.5 * (t3 - t2);
  s.dw[0] = 0.5 * (-3.0 * t2 + 4.0 * t - 1.0) / h;
  s.dw[1] = 0.5 * (9.0 * t2 - 10.0 * t) / h;
  s.dw[2] = 0.5 * (-9.0 * t2 + 8.0 * t + 1.0) / h;
  s.dw[3] = 0.5 * (3.0 * t2 - 2.0 * t) / h;
  for (int q = 0; q < 4; ++q) s.idx[q] = wrap(i - 1 + q, n);
  return s;
}

}  // namespace

CatmullRomInterpolant::CatmullRomInterpolant(const Field& f) : Interpolant(f.grid(), f.ncomp()), f_(f) {}

void CatmullRomInterpolant::value(Point x, std::span<double> out) const { eval(x, out, {}, false); }

void CatmullRomInterpolant::value_and_grad(Point x, std::span<double> out, std::span<double> grad) const {
  eval(x, out, grad, true);
}

void CatmullRomInterpolant::eval(Point x, std::span<double> out, std::span<double> grad, bool want_grad) const {
  const int nc = ncomp_;
  const int dim = grid_.dim();
  const AxisStencil s0 = catmull_rom_axis(x[0], grid_.size(0), grid_.spacing(0));
  const AxisStencil s1 = dim == 2 ? catmull_rom_axis(x[1], grid_.size(1), grid_.spacing(1)) : AxisStencil{};
  std::fill(out.begin(), out.end(), 0.0);
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
  for (int p = 0; p < s0.width; ++p) {
    for (int q = 0; q < s1.width; ++q) {
      const std::size_t cell = grid_.flat_index({s0.idx[p], s1.idx[q]});
      const double w = s0.w[p] * s1.w[q];
      const double g0 = s0.dw[p] * s1.w[q];
      const double g1 = s0.w[p] * s1.dw[q];
      for (int c = 0; c < nc; ++c) {
        const double v = f_(cell, c);
        out[static_cast<std::size_t>(c)] += w * v;
        if (want_grad) {
          grad[static_cast<std::size_t>(c)] += g0 * v;
          if (dim == 2) grad[static_cast<std::size_t>(nc + c)] += g1 * v;
        }
      }
    }
  }
}

TrigInterpolant::TrigInterpolant(const Field& f) : Interpolant(f.grid(), f.ncomp()) {
  using cd = std::complex<double>;
  const int dim = grid_.dim();
  const int n0 = grid_.size(0);
  const int n1 = dim == 2 ? grid_.size(1) : 1;
  const int nc = ncomp_;
  const double two_pi = 2.0 * std::numbers::pi;

  // Separable naive DFT: first along axis 1, then axis 0.
  auto twiddle = [&](int m, int j, int n) { return std::polar(1.0, -two_pi * m * j / n); };
  std::vector<cd> stage(static_cast<std::size_t>(n0 * n1 * nc));
  auto sidx = [&](int a, int b, int c) { return (static_cast<std::size_t>(a) * n1 + b) * nc + c; };
  const int lo1 = dim == 2 ? -n1 / 2 : 0;
  const int lo0 = -n0 / 2;
  for (int j0 = 0; j0 < n0; ++j0) {
    for (int mi = 0; mi < n1; ++mi) {
      const int m1 = lo1 + mi;
      for (int c = 0; c < nc; ++c) {
        cd acc = 0.0;
        for (int j1 = 0; j1 < n1; ++j1) acc += f(grid_.flat_index({j0, j1}), c) * twiddle(m1, j1, n1);
        stage[sidx(j0, mi, c)] = acc / static_cast<double>(n1);
      }
    }
  }
  std::vector<cd> full(stage.size());
  for (int mi0 = 0; mi0 < n0; ++mi0) {
    const int m0 = lo0 + mi0;
    for (int mi1 = 0; mi1 < n1; ++mi1) {
      for (int c = 0; c < nc; ++c) {
        cd acc = 0.0;
        for (int j0 = 0; j0 < n0; ++j0) acc += stage[sidx(j0, mi1, c)] * twiddle(m0, j0, n0);
        full[sidx(mi0, mi1, c)] = acc / static_cast<double>(n0);
      }
    }
  }
  double cmax = 0.0;
  for (const auto& z : full) cmax = std::max(cmax, std::abs(z));
  const double cut = 1e-15 * cmax;
  for (int mi0 = 0; mi0 < n0; ++mi0) {
    for (int mi1 = 0; mi1 < n1; ++mi1) {
      double mag = 0.0;
      for (int c = 0; c < nc; ++c) mag = std::max(mag, std::abs(full[sidx(mi0, mi1, c)]));
      if (mag <= cut || mag == 0.0) continue;
      modes_.push_back({lo0 + mi0, lo1 + mi1, coefs_.size()});
      for (int c = 0; c < nc; ++c) coefs_.push_back(full[sidx(mi0, mi1, c)]);
    }
  }
}

void TrigInterpolant::value(Point x, std::span<double> out) const { eval(x, out, {}, false); }

void TrigInterpolant::value_and_grad(Point x, std::span<double> out, std::span<double> grad) const {
  eval(x, out, grad, true);
}

void TrigInterpolant::eval(Point x, std::span<double> out, std::span<double> grad, bool want_grad) const {
  using cd = std::complex<double>;
  const int dim = grid_.dim();
  const int nc = ncomp_;
  const double pi = std::numbers::pi;

  // Per-axis basis phi_m(y) and d/dy, indexed by m + N/2. The Nyquist mode uses the
  // real cosine so the interpolant of real data stays real.
  struct AxisBasis {
    std::vector<cd> phi, dphi;
    int offset = 0;
  };
  auto build = [&](int axis) {
    AxisBasis b;
    if (axis >= dim) {
      b.phi = {cd(1.0)};
      b.dphi = {cd(0.0)};
      return b;
    }
    const int n = grid_.size(axis);
    const double len = grid_.length(axis);
    const double y = x[static_cast<std::size_t>(axis)] - 0.5 * grid_.spacing(axis);
    b.offset = n / 2;
    b.phi.resize(static_cast<std::size_t>(n));
    b.dphi.resize(static_cast<std::size_t>(n));
    for (int m = -n / 2; m < n / 2; ++m) {
      const auto k = static_cast<std::size_t>(m + n / 2);
      if (m == -n / 2) {
        const double arg = pi * n * y / len;
        b.phi[k] = cd(std::cos(arg), 0.0);
        b.dphi[k] = cd(-pi * n / len * std::sin(arg), 0.0);
      } else {
        const double om = 2.0 * pi * m / len;
        b.phi[k] = std::polar(1.0, om * y);
        b.dphi[k] = cd(0.0, om) * b.phi[k];
      }
    }
    return b;
  };
  const AxisBasis b0 = build(0);
  const AxisBasis b1 = build(1);

  std::fill(out.begin(), out.end(), 0.0);
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
  for (const Mode& md : modes_) {
    const auto k0 = static_cast<std::size_t>(md.m0 + b0.offset);
    const auto k1 = static_cast<std::size_t>(md.m1 + b1.offset);
    const cd e = b0.phi[k0] * b1.phi[k1];
    const cd d0 = b0.dphi[k0] * b1.phi[k1];
    const cd d1 = b0.phi[k0] * b1.dphi[k1];
    for (int c = 0; c < nc; ++c) {
      const cd cf = coefs_[md.coef + static_cast<std::size_t>(c)];
      out[static_cast<std::size_t>(c)] += (cf * e).real();
      if (want_grad) {
        grad[static_cast<std::size_t>(c)] += (cf * d0).real();
        if (dim == 2) grad[static_cast<std::size_t>(nc + c)] += (cf * d1).real();
      }
    }
  }
}

std::unique_ptr<Interpolant> make_interpolant(const Field& f, InterpKind kind) {
  switch (kind) {
    case InterpKind::CatmullRom:
      return std::make_unique<CatmullRomInterpolant>(f);
    case InterpKind::Trigonometric:
      return std::make_unique<TrigInterpolant>(f);
  }
  throw PreconditionViolation("make_interpolant: unknown kind");
}

}  // namespace gauge_ot
