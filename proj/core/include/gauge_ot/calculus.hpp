#pragma once

#include <functional>
#include <span>
#include <vector>

#include "gauge_ot/grid.hpp"
#include "gauge_ot/interp.hpp"

namespace gauge_ot {

// Shock threshold for det(I + t Du0).
inline constexpr double kShockDelta = 0.1;

// Derivative of every component along one axis, using the grid's scheme.
Field diff(const Field& f, int axis);
// Gradient of every component; output ncomp = dim * f.ncomp(), layout [alpha * ncomp + c].
Field grad(const Field& f);
// Divergence of a spatial vector field (ncomp == dim).
Field div(const Field& u);
// (u . D) f, componentwise.
Field convect(const Field& u, const Field& f);
// sum_alpha D_alpha(u_alpha f), componentwise.
Field flux_div(const Field& u, const Field& f);
// h^n * sum over cells, pairwise-reduced. Scalar fields only.
double integrate(const Field& f);

// One backward semi-Lagrangian step: f(x - dt u(x)) by periodic Catmull-Rom.
// Throws CflViolation when max_alpha dt*max|u_alpha|/h_alpha > 1.
Field advect(const Field& f, const Field& u, double dt);
double courant_number(const Field& u, double dt);

// Inverts x0 + t u0(x0) = x for a fixed initial velocity field.
class CharacteristicMap {
 public:
  CharacteristicMap(const Field& u0, InterpKind kind = InterpKind::CatmullRom);
  // min over cell centres of det(I + t Du0)
  double min_jacobian_det(double t) const;
  // throws ShockTime when min_jacobian_det(t) <= kShockDelta
  void require_preshock(double t) const;
  // Foot point x0 (wrapped to [0,L)); throws NoConvergence.
  Point foot(double t, Point x, double tol = 1e-13) const;
  // u0 and Du0 at x; du layout [alpha * dim + beta] = d_alpha u_beta
  void velocity(Point x, std::span<double> u, std::span<double> du) const;
  const Interpolant& interpolant() const { return *interp_; }

 private:
  std::unique_ptr<Interpolant> interp_;
};

Point backward_characteristic(const Field& u0, double t, Point x, InterpKind kind = InterpKind::CatmullRom);

using LinearOperator = std::function<void(std::span<const double>, std::span<double>)>;

struct CgResult {
  std::vector<double> x;
  int iterations = 0;
  double relative_residual = 0.0;
};

// Conjugate gradients from a zero start, so on a PSD operator with b in its range the
// answer is the minimal-norm solution. Stops when ||Ax - b|| <= tol ||b||.
CgResult cg_solve(const LinearOperator& apply_A, std::span<const double> b, double tol, int max_iter);
Field cg_solve(const LinearOperator& apply_A, const Field& b, double tol, int max_iter);

}  // namespace gauge_ot
