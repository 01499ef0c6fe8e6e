#pragma once

#include "gauge_ot/grid.hpp"

namespace gauge_ot {

// Classical RK4. State must be copyable and provide axpy(double, const State&).
template <class State, class Rhs>
State rk4_step(const Rhs& rhs, const State& s, double dt) {
  const State k1 = rhs(s);
  State s2 = s;
  s2.axpy(0.5 * dt, k1);
  const State k2 = rhs(s2);
  State s3 = s;
  s3.axpy(0.5 * dt, k2);
  const State k3 = rhs(s3);
  State s4 = s;
  s4.axpy(dt, k3);
  const State k4 = rhs(s4);
  State out = s;
  out.axpy(dt / 6.0, k1);
  out.axpy(dt / 3.0, k2);
  out.axpy(dt / 3.0, k3);
  out.axpy(dt / 6.0, k4);
  return out;
}

// Courant number for explicit stepping on the grid's difference operator. The spectral
// operator's largest eigenvalue is pi times the centered one, so its number is scaled by pi.
double explicit_courant(const Field& u, double dt);
void require_explicit_cfl(const Field& u, double dt, const char* context);

}  // namespace gauge_ot
