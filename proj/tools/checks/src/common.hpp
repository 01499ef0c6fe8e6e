#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "gauge_ot/calculus.hpp"
#include "gauge_ot/grid.hpp"
#include "gauge_ot_checks/checks.hpp"

namespace gauge_ot::checks::detail {

// pass iff measured <= tolerance (NaN fails)
inline Check make_check(int criterion, const std::string& suite, const std::string& name, double measured,
                        double tolerance, std::string detail = {}) {
  Check c;
  c.criterion = criterion;
  c.suite = suite;
  c.name = name;
  c.measured = measured;
  c.tolerance = tolerance;
  c.pass = measured <= tolerance;
  c.detail = std::move(detail);
  return c;
}

// pass iff measured >= tolerance
inline Check make_floor_check(int criterion, const std::string& suite, const std::string& name, double measured,
                              double floor, std::string detail = {}) {
  Check c = make_check(criterion, suite, name, measured, floor, std::move(detail));
  c.pass = measured >= floor;
  return c;
}

inline Check make_timing(int criterion, const std::string& suite, const std::string& name, double seconds,
                         double limit) {
  Check c = make_check(criterion, suite, name, seconds, limit);
  c.timing = true;
  return c;
}

// max that keeps NaN (a failed measurement must not vanish from the worst case)
inline double worse(double a, double b) { return std::isnan(a) || std::isnan(b) ? NAN : std::max(a, b); }
inline double worst(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = worse(m, x);
  return m;
}

inline double relative(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s > 0.0 ? std::abs(a - b) / s : 0.0;
}

// integrate(sum_i a_i b_i)
inline double field_dot(const Field& a, const Field& b) {
  Field e(a.grid(), 1);
  for (std::size_t c = 0; c < a.cells(); ++c) {
    double s = 0.0;
    for (int i = 0; i < a.ncomp(); ++i) s += a(c, i) * b(c, i);
    e(c) = s;
  }
  return integrate(e);
}

class Stopwatch {
 public:
  Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::vector<Check> duality_suite(std::uint64_t seed, Size size, int threads);
std::vector<Check> conservation_suite(std::uint64_t seed, Size size, int threads);
std::vector<Check> submersion_suite(std::uint64_t seed, Size size, int threads);
std::vector<Check> rank1_suite(std::uint64_t seed, Size size, int threads);
std::vector<Check> oracle_suite(std::uint64_t seed, Size size, int threads);
std::vector<Check> appendix_suite(std::uint64_t seed, Size size, int threads);

}  // namespace gauge_ot::checks::detail
