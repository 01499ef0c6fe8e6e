#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "gauge_ot/calculus.hpp"
#include "gauge_ot/errors.hpp"
#include "gauge_ot/fiber.hpp"

using namespace gauge_ot;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Field sample(const PeriodicGrid& g, auto fn) {
  Field f(g, 1);
  for (std::size_t c = 0; c < g.cells(); ++c) f(c) = fn(g.center(c, 0), g.dim() == 2 ? g.center(c, 1) : 0.0);
  return f;
}

}  // namespace

TEST(Grid, RejectsOddOrTinySizes) {
  EXPECT_THROW(PeriodicGrid::line(5), PreconditionViolation);
  EXPECT_THROW(PeriodicGrid::line(2), PreconditionViolation);
  EXPECT_THROW(PeriodicGrid(3, {4, 4}), PreconditionViolation);
}

TEST(Grid, CentresAndRowMajorOrder) {
  auto g = PeriodicGrid(2, {4, 6}, {1.0, 3.0});
  EXPECT_DOUBLE_EQ(g.center(0, 0), 0.125);
  EXPECT_DOUBLE_EQ(g.center(1, 1), 0.75);
  EXPECT_EQ(g.flat_index({1, 2}), 8u);
  EXPECT_EQ(g.flat_index({-1, 6}), 18u);
}

TEST(Grad, ConstantIsZero) {
  auto g = PeriodicGrid::square(8);
  Field f(g, 3, 3.0);
  EXPECT_EQ(grad(f).max_abs(), 0.0);
}

TEST(Grad, HandStencil) {
  auto g = PeriodicGrid::line(4);
  Field f(g, 1, std::vector<double>{0, 1, 0, -1});
  Field d = grad(f);
  EXPECT_DOUBLE_EQ(d(0), 4.0);
  EXPECT_DOUBLE_EQ(d(1), 0.0);
  EXPECT_DOUBLE_EQ(d(2), -4.0);
  EXPECT_DOUBLE_EQ(d(3), 0.0);
}

TEST(Grad, SineDerivative) {
  auto g = PeriodicGrid::line(256);
  Field f = sample(g, [](double x, double) { return std::sin(kTwoPi * x); });
  Field d = grad(f);
  double err = 0.0;
  for (std::size_t c = 0; c < g.cells(); ++c) err = std::max(err, std::abs(d(c) - kTwoPi * std::cos(kTwoPi * g.center(c, 0))));
  EXPECT_LE(err, 1e-3);
}

TEST(Grad, SpectralIsExactOnResolvedModes) {
  auto g = PeriodicGrid::line(32, 1.0, DiffScheme::Spectral);
  Field f = sample(g, [](double x, double) { return std::sin(kTwoPi * 3 * x); });
  Field d = grad(f);
  double err = 0.0;
  for (std::size_t c = 0; c < g.cells(); ++c)
    err = std::max(err, std::abs(d(c) - 3 * kTwoPi * std::cos(kTwoPi * 3 * g.center(c, 0))));
  EXPECT_LE(err, 1e-11);
}

TEST(Div, SineInTwoD) {
  // The centered stencil maps sin(2 pi x) to sin(2 pi h)/h cos(2 pi x); at N=128 that is a
  // 2.5e-3 error, so the 1e-3 bound is checked with the spectral scheme.
  for (auto scheme : {DiffScheme::Centered, DiffScheme::Spectral}) {
    auto g = PeriodicGrid::square(128, 1.0, scheme);
    Field u(g, 2);
    for (std::size_t c = 0; c < g.cells(); ++c) u(c, 0) = std::sin(kTwoPi * g.center(c, 0));
    Field d = div(u);
    double err = 0.0;
    for (std::size_t c = 0; c < g.cells(); ++c)
      err = std::max(err, std::abs(d(c) - kTwoPi * std::cos(kTwoPi * g.center(c, 0))));
    if (scheme == DiffScheme::Spectral) {
      EXPECT_LE(err, 1e-3);
    } else {
      const double h = g.spacing(0);
      double want = 0.0;
      for (std::size_t c = 0; c < g.cells(); ++c)
        want = std::max(want, std::abs((kTwoPi - std::sin(kTwoPi * h) / h) * std::cos(kTwoPi * g.center(c, 0))));
      EXPECT_NEAR(err, want, 1e-10);
    }
    Field cst(g, 2, 1.5);
    EXPECT_LE(div(cst).max_abs(), 1e-10);
  }
}

TEST(Integrate, ClosedForms) {
  auto g = PeriodicGrid::line(64);
  EXPECT_NEAR(integrate(Field(g, 1, 1.0)), 1.0, 1e-15);
  Field s2 = sample(g, [](double x, double) { return std::pow(std::sin(kTwoPi * x), 2); });
  EXPECT_NEAR(integrate(s2), 0.5, 1e-15);
  Field a = random_band_limited(g, 1, 1), b = random_band_limited(g, 1, 2);
  Field lin = 2.0 * a;
  lin.axpy(-3.0, b);
  EXPECT_NEAR(integrate(lin), 2.0 * integrate(a) - 3.0 * integrate(b), 1e-14);
}

TEST(Calculus, SummationByParts) {
  for (auto scheme : {DiffScheme::Centered, DiffScheme::Spectral}) {
    auto g = PeriodicGrid::square(16, 1.0, scheme);
    Field f = random_band_limited(g, 1, 3), h = random_band_limited(g, 1, 4);
    for (int a = 0; a < 2; ++a) {
      Field df = diff(f, a), dh = diff(h, a);
      Field p(g, 1), q(g, 1);
      for (std::size_t c = 0; c < g.cells(); ++c) {
        p(c) = f(c) * dh(c);
        q(c) = h(c) * df(c);
      }
      EXPECT_NEAR(integrate(p), -integrate(q), 1e-14);
    }
  }
}

TEST(Calculus, DivGradMatchesLaplacianOperator) {
  auto g = PeriodicGrid::square(16);
  Field phi = random_band_limited(g, 1, 9);
  Field lap = div(grad(phi));
  Field expect = diff(diff(phi, 0), 0) + diff(diff(phi, 1), 1);
  EXPECT_EQ((lap - expect).max_abs(), 0.0);
}

TEST(Advect, ZeroVelocityIsIdentity) {
  auto g = PeriodicGrid::square(16);
  Field f = random_band_limited(g, 2, 5);
  Field u(g, 2);
  EXPECT_EQ((advect(f, u, 0.3) - f).max_abs(), 0.0);
}

TEST(Advect, ConstantTranslation) {
  auto g = PeriodicGrid::line(256);
  Field f = sample(g, [](double x, double) { return std::sin(kTwoPi * x); });
  Field u(g, 1, 0.7);
  const double dt = 0.004;
  Field r = advect(f, u, dt);
  double err = 0.0;
  for (std::size_t c = 0; c < g.cells(); ++c)
    err = std::max(err, std::abs(r(c) - std::sin(kTwoPi * (g.center(c, 0) - 0.7 * dt))));
  EXPECT_LE(err, 1e-4);
}

TEST(Advect, TwoHalfStepsMatchOneStep) {
  auto g = PeriodicGrid::line(128);
  Field f = random_band_limited(g, 1, 6);
  Field u(g, 1);
  for (std::size_t c = 0; c < g.cells(); ++c) u(c) = 0.2 + 0.1 * std::sin(kTwoPi * g.center(c, 0));
  double prev = 0.0;
  for (double dt : {0.02, 0.01}) {
    const double gap = (advect(advect(f, u, dt / 2), u, dt / 2) - advect(f, u, dt)).max_abs();
    if (prev > 0.0) EXPECT_GT(prev / gap, 3.0);
    prev = gap;
  }
}

TEST(Advect, RejectsCflViolation) {
  auto g = PeriodicGrid::line(16);
  Field u(g, 1, 1.0);
  Field f(g, 1, 1.0);
  EXPECT_THROW(advect(f, u, 0.1), CflViolation);
}

TEST(Characteristics, TrivialAndTranslation) {
  auto g = PeriodicGrid::line(64);
  Field zero(g, 1);
  auto x0 = backward_characteristic(zero, 0.7, {0.3, 0.0});
  EXPECT_DOUBLE_EQ(x0[0], 0.3);
  Field c(g, 1, 0.25);
  x0 = backward_characteristic(c, 2.0, {0.3, 0.0});
  EXPECT_NEAR(x0[0], 0.8, 1e-13);
}

TEST(Characteristics, ResidualOnSine) {
  auto g = PeriodicGrid::line(64);
  Field u0 = sample(g, [](double x, double) { return 0.1 * std::sin(kTwoPi * x); });
  for (auto kind : {InterpKind::CatmullRom, InterpKind::Trigonometric}) {
    CharacteristicMap map(u0, kind);
    map.require_preshock(0.5);
    std::vector<double> u(1), du(1);
    for (std::size_t c = 0; c < g.cells(); ++c) {
      const Point x{g.center(c, 0), 0.0};
      const Point x0 = map.foot(0.5, x);
      map.velocity(x0, u, du);
      double r = x0[0] + 0.5 * u[0] - x[0];
      r -= std::round(r);
      EXPECT_LE(std::abs(r), 1e-10);
    }
  }
}

TEST(Characteristics, ShockDetected) {
  auto g = PeriodicGrid::line(64);
  Field u0 = sample(g, [](double x, double) { return 0.5 * std::sin(kTwoPi * x); });
  EXPECT_THROW(backward_characteristic(u0, 0.5, {0.5, 0.0}), ShockTime);
}

TEST(Characteristics, TwoDimensionalResidual) {
  auto g = PeriodicGrid::square(32);
  Field u0 = random_band_limited(g, 2, 12, 3, 0.05);
  CharacteristicMap map(u0, InterpKind::Trigonometric);
  map.require_preshock(0.5);
  std::vector<double> u(2), du(4);
  for (std::size_t c = 0; c < g.cells(); c += 7) {
    const Point x{g.center(c, 0), g.center(c, 1)};
    const Point x0 = map.foot(0.5, x);
    map.velocity(x0, u, du);
    for (int a = 0; a < 2; ++a) {
      double r = x0[a] + 0.5 * u[a] - x[a];
      r -= std::round(r);
      EXPECT_LE(std::abs(r), 1e-10);
    }
  }
}

TEST(Interp, TrigReproducesNodesAndModes) {
  auto g = PeriodicGrid::square(16);
  Field f = random_band_limited(g, 2, 21);
  TrigInterpolant ti(f);
  std::vector<double> v(2), gr(4);
  for (std::size_t c = 0; c < g.cells(); ++c) {
    ti.value({g.center(c, 0), g.center(c, 1)}, v);
    EXPECT_NEAR(v[0], f(c, 0), 1e-13);
    EXPECT_NEAR(v[1], f(c, 1), 1e-13);
  }
  Field gf = grad(Field(g.with_scheme(DiffScheme::Spectral), 2, f.values()));
  for (std::size_t c = 0; c < g.cells(); c += 5) {
    ti.value_and_grad({g.center(c, 0), g.center(c, 1)}, v, gr);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(gr[i], gf(c, i), 1e-11);
  }
}

TEST(Cg, TrivialCases) {
  LinearOperator id = [](std::span<const double> x, std::span<double> y) { std::copy(x.begin(), x.end(), y.begin()); };
  std::vector<double> b{1.0, -2.0, 3.0};
  EXPECT_EQ(cg_solve(id, b, 1e-12, 10).x, b);
  std::vector<double> z(3, 0.0);
  EXPECT_EQ(cg_solve(id, z, 1e-12, 10).x, z);
}

TEST(Cg, MatchesPseudoInverseOnSingularSystem) {
  // Periodic 8-cell Laplacian-like PSD matrix with a constant kernel.
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(8, 8);
  for (int i = 0; i < 8; ++i) {
    A(i, i) = 2.0 + 0.1 * i;
    A(i, (i + 1) % 8) -= 1.0;
    A(i, (i + 7) % 8) -= 1.0;
  }
  A = 0.5 * (A + A.transpose()).eval();
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(8) / std::sqrt(8.0);
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(8, 8) - ones * ones.transpose();
  A = P * A * P;
  Eigen::VectorXd b(8);
  b << 1, -2, 0.5, 3, -1, 0.25, -0.75, 0;
  b = P * b;
  LinearOperator op = [&](std::span<const double> x, std::span<double> y) {
    Eigen::Map<Eigen::VectorXd>(y.data(), 8) = A * Eigen::Map<const Eigen::VectorXd>(x.data(), 8);
  };
  auto res = cg_solve(op, std::span<const double>(b.data(), 8), 1e-13, 100);
  Eigen::VectorXd ref = A.completeOrthogonalDecomposition().pseudoInverse() * b;
  for (int i = 0; i < 8; ++i) EXPECT_NEAR(res.x[i], ref(i), 1e-8);
}

TEST(Cg, ReportsNonConvergence) {
  LinearOperator diag = [](std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = (1.0 + i * i) * x[i];
  };
  std::vector<double> b(20, 1.0);
  try {
    cg_solve(diag, b, 1e-14, 2);
    FAIL();
  } catch (const NoConvergence& e) {
    EXPECT_GT(e.residual(), 1e-14);
  }
}
