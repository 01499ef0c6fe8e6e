#include "gauge_ot/integrators.hpp"

#include <numbers>
#include <string>

#include "gauge_ot/calculus.hpp"
#include "gauge_ot/errors.hpp"

namespace gauge_ot {

double explicit_courant(const Field& u, double dt) {
  const double c = courant_number(u, dt);
  return u.grid().scheme() == DiffScheme::Spectral ? std::numbers::pi * c : c;
}

void require_explicit_cfl(const Field& u, double dt, const char* context) {
  const double c = explicit_courant(u, dt);
  if (c > 1.0) {
    throw CflViolation(std::string(context) + ": Courant number " + std::to_string(c) + " exceeds 1", c);
  }
}

}  // namespace gauge_ot
