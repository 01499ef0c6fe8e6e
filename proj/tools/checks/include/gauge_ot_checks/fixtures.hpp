#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

#include "gauge_ot/bvp.hpp"
#include "gauge_ot/calculus.hpp"
#include "gauge_ot/fiber.hpp"
#include "gauge_ot/grid.hpp"
#include "gauge_ot/matrix_transport.hpp"
#include "gauge_ot/vector_transport.hpp"

namespace fixtures {

// Band-limited half-density bounded away from zero: a fixed direction plus a small
// band-limited perturbation in every component.
inline gauge_ot::Field half_density(const gauge_ot::PeriodicGrid& g, int k, std::uint64_t seed, bool balanced = true,
                                    double amplitude = 0.3, int modes = 3) {
  gauge_ot::Field w = gauge_ot::random_band_limited(g, k, seed, modes, amplitude);
  for (std::size_t c = 0; c < g.cells(); ++c) w(c, 0) += 1.0;
  if (k > 1)
    for (std::size_t c = 0; c < g.cells(); ++c) w(c, 1) += 0.5;
  return balanced ? gauge_ot::normalize_mass(w) : w;
}

// Symmetric positive-definite matrix field, Sigma = B B^T + (0.5 + 0.1 b) I with band-limited B.
inline gauge_ot::Field spd_field(const gauge_ot::PeriodicGrid& g, int k, std::uint64_t seed, double amplitude = 0.3,
                                 int modes = 3) {
  using gauge_ot::Mat;
  const gauge_ot::Field b = gauge_ot::random_band_limited(g, k * k, seed, modes, amplitude);
  gauge_ot::Field s(g, k * k);
  for (std::size_t c = 0; c < g.cells(); ++c) {
    Mat m = gauge_ot::mat_at(b, c, k);
    m.diagonal().array() += 1.0;
    gauge_ot::put_mat(s, c, m * m.transpose());
  }
  return s;
}

// 1D density (1 - eps) c cos^{2p}(pi (x - x0)) + eps with unit mass; a trig polynomial of degree p.
inline gauge_ot::Field bump(const gauge_ot::PeriodicGrid& g, double x0, int p, double eps = 1e-6) {
  gauge_ot::Field r(g, 1);
  for (std::size_t c = 0; c < g.cells(); ++c) r(c) = std::pow(std::cos(std::numbers::pi * (g.center(c, 0) - x0)), 2 * p);
  r *= (1.0 - eps) / gauge_ot::integrate(r);
  for (double& v : r.values()) v += eps;
  return r;
}

// Localized band-limited density pairs for the 1D transport-vs-oracle checks: dilation,
// concentration and shifts combined with a change of width.
inline std::vector<std::pair<gauge_ot::Field, gauge_ot::Field>> oracle_pairs(const gauge_ot::PeriodicGrid& g) {
  std::vector<std::pair<gauge_ot::Field, gauge_ot::Field>> out;
  out.emplace_back(bump(g, 0.5, 8), bump(g, 0.5, 32));
  out.emplace_back(bump(g, 0.5, 40), bump(g, 0.5, 12));
  out.emplace_back(bump(g, 0.48, 12), bump(g, 0.52, 40));
  out.emplace_back(bump(g, 0.5, 16), bump(g, 0.5, 40));
  out.emplace_back(bump(g, 0.51, 32), bump(g, 0.49, 10));
  return out;
}

// Symmetric part of a band-limited k x k field.
inline gauge_ot::Field symmetric_field(const gauge_ot::PeriodicGrid& g, int k, std::uint64_t seed, int modes = 3,
                                       double amp = 1.0) {
  const gauge_ot::Field b = gauge_ot::random_band_limited(g, k * k, seed, modes, amp);
  gauge_ot::Field p(g, k * k);
  for (std::size_t c = 0; c < g.cells(); ++c) {
    const gauge_ot::Mat m = gauge_ot::mat_at(b, c, k);
    gauge_ot::put_mat(p, c, 0.5 * (m + m.transpose()));
  }
  return p;
}

inline gauge_ot::Field skew_field(const gauge_ot::PeriodicGrid& g, int k, std::uint64_t seed, int modes = 3,
                                  double amp = 1.0) {
  return gauge_ot::project_flavor(gauge_ot::random_band_limited(g, k * k, seed, modes, amp), k,
                                  gauge_ot::Flavor::So)
      .values;
}

// Random matrix geodesic state; for the balanced system a is projected to tr(aS) = 0.
inline gauge_ot::MatrixGeodesicState random_matrix_state(const gauge_ot::PeriodicGrid& g, int k, std::uint64_t seed,
                                                         gauge_ot::MatrixSystem sys, double amp = 0.3) {
  using namespace gauge_ot;
  const Factorized f = factorize(spd_field(g, k, seed, 0.3, 2));
  MatrixGeodesicState s{random_band_limited(g, g.dim(), seed + 1, 2, amp), random_band_limited(g, k * k, seed + 2, 2, amp),
                        f.S, f.rho, 0.0};
  if (sys == MatrixSystem::Balanced)
    for (std::size_t c = 0; c < g.cells(); ++c) {
      const Mat S = mat_at(s.S, c, k);
      put_mat(s.a, c, project_flavor(mat_at(s.a, c, k), Flavor::Pgl, &S));
    }
  return s;
}

// k = 1 half-density sqrt(rho) of a scalar density.
inline gauge_ot::Field sqrt_density(const gauge_ot::Field& rho) {
  gauge_ot::Field w = rho;
  for (double& v : w.values()) v = std::sqrt(v);
  return w;
}

// Smooth endpoint of the given space: unit-mass for the probability spaces.
inline gauge_ot::Field endpoint(gauge_ot::Space s, const gauge_ot::PeriodicGrid& g, int k, std::uint64_t seed) {
  using namespace gauge_ot;
  if (!is_matrix_space(s)) return half_density(g, k, seed, s == Space::VhProb, 0.2, 2);
  Field sigma = spd_field(g, k, seed, 0.2, 2);
  if (s == Space::MProb) sigma *= 1.0 / matrix_mass(sigma);
  return sigma;
}

// Endpoint pair joined by the geodesic from endpoint0 with a band-limited covector of amplitude
// amp; returns the problem and the generating cost.
inline std::pair<gauge_ot::BvpProblem, double> forward_instance(gauge_ot::Space s, const gauge_ot::PeriodicGrid& g,
                                                                int k, std::uint64_t seed, double amp,
                                                                const gauge_ot::BvpOptions& opt) {
  using namespace gauge_ot;
  BvpProblem p{s, endpoint(s, g, k, seed), Field(), opt};
  Field cov = gauge_ot::random_band_limited(g, is_matrix_space(s) ? k * k : k, seed + 100, 2, amp);
  if (is_matrix_space(s))
    for (std::size_t c = 0; c < g.cells(); ++c) {
      const Mat m = mat_at(cov, c, k);
      put_mat(cov, c, 0.5 * (m + m.transpose()));
    }
  p.endpoint1 = shoot_trajectory(p, cov, 0).back();
  // eulerian transport drifts the mass slightly; probability spaces need it exact
  if (s == Space::VhProb) p.endpoint1 = normalize_mass(p.endpoint1);
  if (s == Space::MProb) p.endpoint1 *= 1.0 / matrix_mass(p.endpoint1);
  return {p, shoot_energy(p, cov)};
}

}  // namespace fixtures
