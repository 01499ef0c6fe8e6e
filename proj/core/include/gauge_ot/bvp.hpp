#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gauge_ot/fiber.hpp"
#include "gauge_ot/grid.hpp"

namespace gauge_ot {

// vhprob/vhdens: endpoints are half-density coefficients w (ncomp k).
// mprob/mdens: endpoints are matrix density coefficients Sigma (ncomp k*k).
enum class Space { VhProb, VhDens, MProb, MDens };

std::string to_string(Space s);
Space space_from_string(const std::string& s);
bool is_matrix_space(Space s);
// so, conf, pgl, gl
Flavor space_flavor(Space s);
int space_fiber_dim(Space s, const Field& endpoint);

struct BvpOptions {
  int steps = 32;              // time steps on [0, 1]
  int max_iterations = 2000;   // per penalty round (path_relax) or LM iterations (shoot)
  int penalty_rounds = 4;
  double penalty = 100.0;
  double penalty_growth = 10.0;
  double gradient_tol = 1e-10;
  double progress_tol = 1e-6;  // path_relax: relative objective decrease over 25 steps that ends a round
  double residual_tol = 1e-6;  // shoot convergence on the L2 endpoint mismatch
  int transport_substeps = 1;   // path_relax: minimum RK4 substeps per control step
  // path_relax: smoothing length (fraction of the domain) of the (1 - l^2 d^2)^-1 preconditioner;
  // 0 gives plain L2 gradients
  double precond_length = 0.3;
  int shoot_modes = 5;         // Fourier modes per axis for the initial covector
  // shoot: start from a covector fitted to a warm-start path_relax run (a third of max_seconds)
  // instead of blurred-mismatch shooting rounds from zero
  bool shoot_warm_relax = true;
  double max_seconds = 0.0;    // 0: no limit
  std::uint64_t seed = 0;      // nonzero: perturb the initial controls
  // Blur widths (fractions of the domain length) for warm-start rounds that match a Gaussian-blurred
  // endpoint mismatch before the plain L2 rounds. Separated supports give no L2 gradient at rest.
  std::vector<double> warm_start = {0.1, 0.05, 0.025};
  int warm_iterations = 150;  // per warm-start round
};

struct BvpProblem {
  Space space = Space::VhProb;
  Field endpoint0;
  Field endpoint1;
  BvpOptions options;
  int k() const { return space_fiber_dim(space, endpoint0); }
};

// Throws PreconditionViolation / DegenerateDensity / ShapeMismatch on invalid endpoints.
void validate_problem(const BvpProblem& p);

// Piecewise-constant controls, one (u, a) per time step. For vector spaces a is projected onto
// the flavor's algebra; for mprob the effective generator is a - tr(aS) I.
struct Controls {
  std::vector<Field> u;
  std::vector<Field> a;
  // minimum RK4 transport substeps per control step; doubled per step as the Courant number needs
  int substeps = 1;
  int steps() const { return static_cast<int>(u.size()); }
};
Controls zero_controls(const PeriodicGrid& g, int k, int steps, int substeps = 1);

struct ActionResult {
  double action = 0.0;
  Field terminal;
  std::vector<Field> path;  // states at t = n/steps
};

// RK4 transport of the endpoint under the controls on [0, 1]; the Bures energy of each step
// uses the average of the start and end densities.
ActionResult action_functional(const Controls& c, const Field& endpoint0, Space space);

struct RelaxObjective {
  double objective = 0.0;  // action + penalty * ||terminal - endpoint1||^2
  double action = 0.0;
  double mismatch_sq = 0.0;  // of the blurred mismatch when smoothing > 0
  Controls gradient;       // L2 representer (pointwise, cell volume divided out)
};
// Objective and its exact discrete gradient by a reverse sweep through the RK4 stages.
RelaxObjective relax_objective(const Controls& c, const Field& endpoint0, const Field& endpoint1, Space space,
                               double penalty, double smoothing = 0.0);

struct BvpSolution {
  double distance_sq = 0.0;
  std::vector<Field> trajectory;
  double endpoint_residual = 0.0;  // L2 norm of terminal - endpoint1
  bool converged = false;
  int iterations = 0;
  std::uint64_t seed = 0;
  std::string method;
  Controls controls;       // path_relax
  Field initial_covector;  // shoot: theta0 or P0
  // path_relax: objective after each accepted line-search step, one list per penalty round
  std::vector<std::vector<double>> objective_history;
};

BvpSolution path_relax(const BvpProblem& p);
BvpSolution shoot(const BvpProblem& p);

// Terminal state of the geodesic from endpoint0 with initial covector theta0 (vector) or P0
// (matrix, symmetric); `substeps` is the RK4 refinement for eulerian systems.
std::vector<Field> shoot_trajectory(const BvpProblem& p, const Field& covector, int substeps);
double shoot_energy(const BvpProblem& p, const Field& covector);

double l2_distance(const Field& a, const Field& b);

// W2^2 between two normalized densities on a 1D torus, unrolled at the emptiest cut point and
// computed by monotone rearrangement on a 10^4-point quantile grid.
double wasserstein_1d_oracle(const Field& rho0, const Field& rho1);

}  // namespace gauge_ot
