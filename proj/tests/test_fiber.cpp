#include <cmath>

#include <gtest/gtest.h>

#include "gauge_ot/calculus.hpp"
#include "gauge_ot/errors.hpp"
#include "gauge_ot/fiber.hpp"

using namespace gauge_ot;

TEST(ProjectFlavor, SymmetricHasNoSkewPart) {
  Mat m(2, 2);
  m << 1, 2, 2, 5;
  EXPECT_EQ(project_flavor(m, Flavor::So).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ProjectFlavor, ConfKeepsDilation) {
  Mat m = Mat::Identity(2, 2);
  EXPECT_TRUE(project_flavor(m, Flavor::Conf).isApprox(m));
}

TEST(ProjectFlavor, PglHandValue) {
  Mat m(2, 2), s(2, 2), want(2, 2);
  m << 1, 2, 0, 1;
  s << 0.5, 0, 0, 0.5;
  want << 0, 2, 0, 0;
  EXPECT_LE((project_flavor(m, Flavor::Pgl, &s) - want).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(project_flavor(m, Flavor::Pgl), MissingCompanion);
}

TEST(ProjectFlavor, IdempotentAndCosetIndependent) {
  auto g = PeriodicGrid::square(8);
  const int k = 3;
  Field s(g, k * k);
  for (std::size_t c = 0; c < g.cells(); ++c) {
    Mat b = mat_at(random_band_limited(g, k * k, 4), c, k);
    Mat spd = b * b.transpose() + Mat::Identity(k, k);
    put_mat(s, c, spd / spd.trace());
  }
  Field m = random_band_limited(g, k * k, 5);
  for (auto fl : {Flavor::So, Flavor::Conf, Flavor::Gl, Flavor::Pgl}) {
    auto a = project_flavor(m, k, fl, &s);
    auto aa = project_flavor(a.values, k, fl, &s);
    EXPECT_LE((aa.values - a.values).max_abs(), 1e-14);
    EXPECT_LE(flavor_defect(a, &s), 1e-12);
  }
  Field shifted = m;
  for (std::size_t c = 0; c < g.cells(); ++c)
    for (int i = 0; i < k; ++i) shifted(c, i * k + i) += 0.37 * std::sin(c * 1.0);
  auto p1 = project_flavor(m, k, Flavor::Pgl, &s), p2 = project_flavor(shifted, k, Flavor::Pgl, &s);
  EXPECT_LE((p1.values - p2.values).max_abs(), 1e-12);
}

TEST(ProjectFlavor, SkewIsTraceOrthogonalToSymmetric) {
  auto g = PeriodicGrid::line(16);
  auto a = random_gauge_algebra(g, 3, Flavor::So, 7);
  Field sym = random_band_limited(g, 9, 8);
  for (std::size_t c = 0; c < g.cells(); ++c) {
    Mat sc = mat_at(sym, c, 3);
    sc = (sc + sc.transpose()).eval();
    EXPECT_LE(std::abs((a.at(c) * sc).trace()), 1e-14);
  }
}

TEST(Expm, ZeroAndRotation) {
  Mat z = Mat::Zero(3, 3);
  EXPECT_TRUE(expm(z).isIdentity(0.0));
  Mat a(2, 2);
  const double w = 1.3, t = 0.7;
  a << 0, -w, w, 0;
  Mat r = expm(a, t);
  EXPECT_NEAR(r(0, 0), std::cos(w * t), 1e-14);
  EXPECT_NEAR(r(0, 1), -std::sin(w * t), 1e-14);
  EXPECT_NEAR(r(1, 0), std::sin(w * t), 1e-14);
  EXPECT_NEAR(r(1, 1), std::cos(w * t), 1e-14);
}

TEST(Expm, GroupLawAndOrthogonality) {
  auto g = PeriodicGrid::line(8);
  auto a = random_gauge_algebra(g, 3, Flavor::So, 11, nullptr, 2.0);
  auto b = random_gauge_algebra(g, 3, Flavor::Gl, 12);
  for (std::size_t c = 0; c < g.cells(); ++c) {
    const Mat m = b.at(c);
    EXPECT_LE((expm(m, 0.9) - expm(m, 0.4) * expm(m, 0.5)).cwiseAbs().maxCoeff(), 1e-10);
    const Mat q = expm(a.at(c));
    EXPECT_LE((q.transpose() * q - Mat::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(q.determinant(), 1.0, 1e-10);
  }
}

TEST(Frobenius, IdentityAndOrthogonality) {
  auto g = PeriodicGrid::line(16);
  Field id(g, 9);
  for (std::size_t c = 0; c < g.cells(); ++c) put_mat(id, c, Mat::Identity(3, 3));
  EXPECT_NEAR(frobenius_pair(id, id, Field(g, 1, 1.0)), 3.0, 1e-14);
  auto skew = random_gauge_algebra(g, 3, Flavor::So, 1);
  Field m = random_band_limited(g, 9, 2);
  Field sym(g, 9);
  for (std::size_t c = 0; c < g.cells(); ++c) {
    Mat x = mat_at(m, c, 3);
    put_mat(sym, c, x + x.transpose());
  }
  Field wgt = random_band_limited(g, 1, 3);
  EXPECT_NEAR(frobenius_pair(skew.values, sym, wgt), 0.0, 1e-14);
}

TEST(Frobenius, BruteForce) {
  auto g = PeriodicGrid::line(4);
  Field a = random_band_limited(g, 4, 1), b = random_band_limited(g, 4, 2), w = random_band_limited(g, 1, 3);
  double s = 0.0;
  for (std::size_t c = 0; c < 4; ++c)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) s += a(c, i * 2 + j) * b(c, i * 2 + j) * w(c);
  EXPECT_NEAR(frobenius_pair(a, b, w), 0.25 * s, 1e-15);
}

TEST(RandomGauge, DeterministicAndConstrained) {
  auto g = PeriodicGrid::square(8);
  auto a1 = random_gauge_algebra(g, 3, Flavor::Conf, 42);
  auto a2 = random_gauge_algebra(g, 3, Flavor::Conf, 42);
  EXPECT_EQ(a1.values.values(), a2.values.values());
  EXPECT_LE(flavor_defect(a1), 1e-12);
  auto s = random_gauge_algebra(g, 2, Flavor::So, 3);
  EXPECT_EQ(flavor_defect(s), 0.0);
}
