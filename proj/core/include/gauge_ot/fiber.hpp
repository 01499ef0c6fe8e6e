#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "gauge_ot/grid.hpp"

namespace gauge_ot {

inline constexpr int kMaxFiber = 8;

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor, kMaxFiber, kMaxFiber>;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxFiber, 1>;

enum class Flavor { So, Conf, Gl, Pgl };

std::string to_string(Flavor f);
Flavor flavor_from_string(const std::string& s);

// Per-cell k x k matrix with its algebra tag. values.ncomp() == k*k, row-major.
struct GaugeAlgebraField {
  Field values;
  int k = 1;
  Flavor flavor = Flavor::Gl;

  const PeriodicGrid& grid() const { return values.grid(); }
  Mat at(std::size_t cell) const;
};

// Per-cell invertible k x k matrix.
struct GaugeGroupField {
  Field values;
  int k = 1;
  Flavor flavor = Flavor::Gl;
};

int fiber_dim_from_ncomp(int ncomp);

Mat mat_at(const Field& f, std::size_t cell, int k);
void put_mat(Field& f, std::size_t cell, const Mat& m);
Vec vec_at(const Field& f, std::size_t cell);
void put_vec(Field& f, std::size_t cell, const Vec& v);

Mat project_flavor(const Mat& m, Flavor flavor, const Mat* S = nullptr);
// S must have unit trace pointwise when flavor == Pgl; throws MissingCompanion if absent.
GaugeAlgebraField project_flavor(const Field& m, int k, Flavor flavor, const Field* S = nullptr);

// Max pointwise violation of the flavor's algebraic constraint (0 for gl).
double flavor_defect(const GaugeAlgebraField& a, const Field* S = nullptr);

Mat expm(const Mat& a, double t = 1.0);

// integrate(tr(a b^T) * weight)
double frobenius_pair(const Field& a, const Field& b, const Field& weight);

// Band-limited random field: modes 0..modes-1 along axis 0 (and -(modes-1)..modes-1 along
// axis 1 in 2D), coefficients uniform in [-1,1] scaled by amplitude / (1 + |m|^2).
Field random_band_limited(const PeriodicGrid& grid, int ncomp, std::uint64_t seed, int modes = 3,
                          double amplitude = 1.0);

GaugeAlgebraField random_gauge_algebra(const PeriodicGrid& grid, int k, Flavor flavor, std::uint64_t seed,
                                       const Field* S = nullptr, double amplitude = 1.0);

}  // namespace gauge_ot
