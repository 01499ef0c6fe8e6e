#pragma once

#include <stdexcept>
#include <string>

namespace gauge_ot {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class PreconditionViolation : public Error {
 public:
  using Error::Error;
};

// A density left the admissible set (vanishing half-density, loss of positivity).
class DegenerateDensity : public Error {
 public:
  using Error::Error;
};

class MissingCompanion : public Error {
 public:
  using Error::Error;
};

// Semi-Lagrangian or explicit step rejected by the CFL bound dt*max|u| <= h.
class CflViolation : public Error {
 public:
  CflViolation(const std::string& what, double courant)
      : Error(what), courant_(courant) {}
  double courant() const noexcept { return courant_; }

 private:
  double courant_;
};

// Characteristics crossed: det(I + t Du0) dropped below the shock threshold.
class ShockTime : public Error {
 public:
  ShockTime(const std::string& what, double time, double min_det)
      : Error(what), time_(time), min_det_(min_det) {}
  double time() const noexcept { return time_; }
  double min_det() const noexcept { return min_det_; }

 private:
  double time_;
  double min_det_;
};

class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}
  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

}  // namespace gauge_ot
