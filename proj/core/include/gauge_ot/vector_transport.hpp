#pragma once

#include <cstdint>
#include <vector>

#include "gauge_ot/fiber.hpp"
#include "gauge_ot/grid.hpp"

namespace gauge_ot {

// Nonvanishing floor for |w|.
inline constexpr double kHalfDensityFloor = 1e-6;

// Coefficient field w of a vector half-density w sqrt(dx); ncomp == k.
struct VectorHalfDensity {
  Field w;
  bool balanced = true;
  int k() const { return w.ncomp(); }
};

// Validates the floor and, when balanced, the unit-mass normalization.
VectorHalfDensity make_vector_half_density(Field w, bool balanced);
// Rescales so integrate(|w|^2) == 1.
Field normalize_mass(const Field& w);
double vector_mass(const Field& w);
double min_norm(const Field& w);
void require_floor(const Field& w, const char* context);

struct Polar {
  Field v;    // unit fiber vectors
  Field rho;  // |w|^2
};
Polar polar_decompose(const Field& w);

// Spatial velocity u (ncomp dim) with a fiber gauge field a (ncomp k*k).
struct Generator {
  Field u;
  Field a;
};

// (u, a) . w = -L_u w + a w in skew-split coefficient form:
//   -1/2 [ (u.D) w + D.(u w) ] + a w
// which equals -(u.D)w - 1/2 div(u) w + a w up to the discrete product rule and keeps the
// transport part exactly antisymmetric.
Field infinitesimal_action(const Field& u, const Field& a, const Field& w);

double bures_energy(const Field& u, const Field& a, const Field& w);

// Dual pair (m, beta) in g*, paired with (u, a) by h^n sum (m.u + tr(beta a^T)).
struct Momentum {
  Field m;
  Field beta;
};

// Covector theta (ncomp k); the half-density pairing is against theta |w|.
// beta is the projection of theta|w| w^T onto the flavor's algebra (so or conf).
Momentum momentum_map_vector(const Field& w, const Field& theta, Flavor flavor = Flavor::So);

// Raises the momentum map with the Bures weight: (u, a) = 2 Phi(w, theta) / rho.
Generator horizontal_from_theta(const Field& theta, const Field& w, Flavor flavor = Flavor::So);

struct VectorLift {
  Field theta;
  int iterations = 0;
  double relative_residual = 0.0;
};

// Solves infinitesimal_action(horizontal_from_theta(theta, w), w) = wdot for theta.
VectorLift horizontal_lift(const Field& wdot, const Field& w, Flavor flavor = Flavor::So, double tol = 1e-11,
                           int max_iter = 20000);

struct SubmersionMetric {
  double bures = 0.0;         // integrate((|u|^2 + tr(a a^T)) rho)
  double theta_form = 0.0;    // integrate((|u|^2 + |theta|^2) rho)
  double lift_residual = 0.0;
};
SubmersionMetric submersion_metric(const Field& wdot, const Field& w, Flavor flavor = Flavor::So);

double pairing(const Momentum& mu, const Generator& xi);

// Exact discrete transpose of bracket(): <ad*_xi mu, eta> = <mu, [xi, eta]>.
Momentum ad_star_vector(const Field& u, const Field& a, const Field& m, const Field& beta);
// [(u1,a1),(u2,a2)] = ((u1.D)u2 - (u2.D)u1, (u1.D)a2 - (u2.D)a1)
Generator bracket(const Generator& x1, const Generator& x2);

// A pair (u_v, a_v) with infinitesimal_action(u_v, a_v, w) = 0, built from a random
// band-limited velocity projected onto the kernel of u -> w . L_u w.
Generator vertical_generator(const Field& w, std::uint64_t seed, double tol = 1e-13);

// Balanced flavor so, unbalanced flavor conf.
enum class VectorSystem { Balanced, Unbalanced };
enum class GeodesicMethod { Characteristics, Eulerian };
// Derived: signs obtained from the reduced Hamiltonian equations (energy conserving).
// Published: the unbalanced vector system with plain transport of u and a.
enum class SignConvention { Derived, Published };

struct VectorGeodesicState {
  Field u;
  Field a;
  Field w;
  double t = 0.0;
  int k() const { return w.ncomp(); }
  VectorGeodesicState& axpy(double s, const VectorGeodesicState& d);
};

struct VectorGeodesicOptions {
  VectorSystem system = VectorSystem::Balanced;
  GeodesicMethod method = GeodesicMethod::Characteristics;
  SignConvention convention = SignConvention::Derived;
  int substeps = 1;  // RK4 steps per output step (eulerian)
};

// Right-hand side of the geodesic system in (u, a, w) variables.
VectorGeodesicState vector_geodesic_rhs(const VectorGeodesicState& s, VectorSystem system,
                                        SignConvention convention = SignConvention::Derived);
// Same right-hand side assembled from ad*, the momentum map and the Hamiltonian's variational
// derivatives; converted back to (u, a, w) through rho du/dt = dm/dt - u drho/dt.
VectorGeodesicState vector_geodesic_rhs_reduced(const VectorGeodesicState& s, VectorSystem system);

std::vector<VectorGeodesicState> integrate_geodesic_vector(const VectorGeodesicState& s0, double T, int steps,
                                                           const VectorGeodesicOptions& opt = {});

// Characteristics solution at time t (exact up to interpolation).
VectorGeodesicState vector_characteristics_at(const VectorGeodesicState& s0, double t, VectorSystem system);

// Initial state for the geodesic through w with horizontal initial covector theta.
VectorGeodesicState vector_state_from_theta(const Field& w, const Field& theta, Flavor flavor);

}  // namespace gauge_ot
