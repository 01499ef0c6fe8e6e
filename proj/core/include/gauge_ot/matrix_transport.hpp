#pragma once

#include <vector>

#include "gauge_ot/fiber.hpp"
#include "gauge_ot/grid.hpp"
#include "gauge_ot/vector_transport.hpp"

namespace gauge_ot {

inline constexpr double kPositivityFloor = 1e-8;

// Coefficient Sigma (ncomp k*k) of a matrix density Sigma dx.
struct MatrixDensityField {
  Field sigma;
  int k = 1;
  bool normalized = false;
  bool semidefinite = false;  // rank-1 embeddings live on the boundary of the cone
};

MatrixDensityField make_matrix_density(Field sigma, bool normalized);
double min_eigenvalue(const Field& sigma);
double symmetry_defect(const Field& sigma);
void require_spd(const Field& sigma, const char* context);
double matrix_mass(const Field& sigma);  // integrate(tr Sigma)

struct Factorized {
  Field S;    // unit trace
  Field rho;  // tr Sigma
};
Factorized factorize(const Field& sigma);
Field assemble_sigma(const Field& S, const Field& rho);

// (u, a) . Sigma = -D.(u Sigma) + a Sigma + Sigma a^T
Field infinitesimal_action_matrix(const Field& u, const Field& a, const Field& sigma);

// (tr(Sigma D_alpha P), (P + P^T) Sigma), paired with (u, a) through pairing().
Momentum momentum_map_matrix(const Field& sigma, const Field& P);

double bures_energy_matrix(const Field& u, const Field& a, const Field& sigma);
// integrate(|u|^2 tr Sigma + tr(a Sigma a^T)), the alternative metric
double alternative_energy_matrix(const Field& u, const Field& a, const Field& sigma);

// (u, a) = (tr(S D P), (P + P^T) S)
Generator horizontal_from_P(const Field& P, const Field& sigma);

struct MatrixLift {
  Field P;
  int iterations = 0;
  double relative_residual = 0.0;
};
MatrixLift horizontal_lift_matrix(const Field& sigmadot, const Field& sigma, double tol = 1e-11,
                                  int max_iter = 20000);

// Sigma = w w^T, tagged semi-definite.
MatrixDensityField rank1_embed(const Field& w);
// Pointwise unit trace, then scaled so integrate(tr Sigma) = 1.
Field trace_normalize(const Field& sigma);

enum class MatrixSystem { Unbalanced, Balanced, Alternative };

struct MatrixGeodesicState {
  Field u;
  Field a;
  Field S;
  Field rho;
  double t = 0.0;
  int k() const { return fiber_dim_from_ncomp(S.ncomp()); }
  Field sigma() const { return assemble_sigma(S, rho); }
  MatrixGeodesicState& axpy(double s, const MatrixGeodesicState& d);
};

struct MatrixGeodesicOptions {
  MatrixSystem system = MatrixSystem::Unbalanced;
  // Derived: energy-consistent signs and, for the balanced system, the multiplier entering as
  // lambda S. Published: the signs and the lambda I multiplier as printed.
  SignConvention convention = SignConvention::Derived;
  int substeps = 1;
  // Skip the S positivity monitor (rank-1 embedded data); rho must still stay positive.
  bool semidefinite = false;
};

MatrixGeodesicState matrix_geodesic_rhs(const MatrixGeodesicState& s, MatrixSystem system,
                                        SignConvention convention = SignConvention::Derived);
// Assembled from ad*, the matrix momentum map and the Hamiltonian's variational derivatives.
MatrixGeodesicState matrix_geodesic_rhs_reduced(const MatrixGeodesicState& s, MatrixSystem system);

// Source terms of the alternative-metric velocity equation (everything but -(u.D)u).
Field alternative_velocity_source(const MatrixGeodesicState& s, SignConvention convention);

// Max pointwise |tr(a S)|.
double pgl_constraint_defect(const Field& a, const Field& S);
double max_trace_drift(const Field& S);

std::vector<MatrixGeodesicState> integrate_geodesic_matrix(const MatrixGeodesicState& s0, double T, int steps,
                                                           const MatrixGeodesicOptions& opt = {});
std::vector<MatrixGeodesicState> integrate_geodesic_matrix_unbalanced(const MatrixGeodesicState& s0, double T,
                                                                     int steps, int substeps = 1);
std::vector<MatrixGeodesicState> integrate_geodesic_matrix_balanced(const MatrixGeodesicState& s0, double T,
                                                                   int steps, int substeps = 1);
std::vector<MatrixGeodesicState> integrate_geodesic_matrix_alternative(const MatrixGeodesicState& s0, double T,
                                                                      int steps, int substeps = 1);

// Initial state with (u, a) = horizontal_from_P(P, Sigma); balanced projects a to tr(aS) = 0.
MatrixGeodesicState matrix_state_from_P(const Field& sigma, const Field& P, MatrixSystem system);

}  // namespace gauge_ot
