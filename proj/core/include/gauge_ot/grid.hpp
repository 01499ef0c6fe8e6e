#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace gauge_ot {

// Spatial differentiation scheme. Both variants are antisymmetric
// matrices, so summation by parts holds exactly for either.
enum class DiffScheme { Centered, Spectral };

// Uniform cell-centred lattice on the flat torus T^n, n in {1, 2}.
// Storage is row-major over axes in declared order (last axis fastest).
class PeriodicGrid {
 public:
  PeriodicGrid() = default;
  PeriodicGrid(int dim, std::array<int, 2> sizes, std::array<double, 2> lengths = {1.0, 1.0},
               DiffScheme scheme = DiffScheme::Centered);

  static PeriodicGrid line(int n, double length = 1.0, DiffScheme scheme = DiffScheme::Centered);
  static PeriodicGrid square(int n, double length = 1.0, DiffScheme scheme = DiffScheme::Centered);

  int dim() const noexcept { return dim_; }
  int size(int axis) const { return sizes_.at(static_cast<std::size_t>(axis)); }
  double length(int axis) const { return lengths_.at(static_cast<std::size_t>(axis)); }
  double spacing(int axis) const { return lengths_.at(static_cast<std::size_t>(axis)) / size(axis); }
  double min_spacing() const;
  // Quadrature weight h_1 * ... * h_n.
  double cell_volume() const;
  std::size_t cells() const noexcept { return cells_; }
  DiffScheme scheme() const noexcept { return scheme_; }
  PeriodicGrid with_scheme(DiffScheme s) const;

  // Stride of `axis` in the flat cell index.
  std::size_t stride(int axis) const;
  // Cell-centre coordinate (i + 1/2) h along `axis` of the flat cell index.
  double center(std::size_t cell, int axis) const;
  std::array<int, 2> multi_index(std::size_t cell) const;
  std::size_t flat_index(std::array<int, 2> idx) const;

  bool same_shape(const PeriodicGrid& other) const;
  friend bool operator==(const PeriodicGrid& a, const PeriodicGrid& b) {
    return a.same_shape(b) && a.scheme_ == b.scheme_;
  }

 private:
  int dim_ = 1;
  std::array<int, 2> sizes_{4, 1};
  std::array<double, 2> lengths_{1.0, 1.0};
  DiffScheme scheme_ = DiffScheme::Centered;
  std::size_t cells_ = 4;
};

// Per-cell array of `ncomp` doubles, data[cell * ncomp + c]. Used for scalar,
// spatial-vector (ncomp = dim), fiber-vector (k) and fiber-matrix (k*k, row-major) fields.
class Field {
 public:
  Field() = default;
  Field(const PeriodicGrid& grid, int ncomp, double fill = 0.0);
  Field(const PeriodicGrid& grid, int ncomp, std::vector<double> values);

  const PeriodicGrid& grid() const noexcept { return grid_; }
  int ncomp() const noexcept { return ncomp_; }
  std::size_t cells() const noexcept { return grid_.cells(); }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t cell, int c = 0) { return data_[cell * ncomp_ + c]; }
  double operator()(std::size_t cell, int c = 0) const { return data_[cell * ncomp_ + c]; }
  std::span<double> at(std::size_t cell) { return {data_.data() + cell * ncomp_, static_cast<std::size_t>(ncomp_)}; }
  std::span<const double> at(std::size_t cell) const {
    return {data_.data() + cell * ncomp_, static_cast<std::size_t>(ncomp_)};
  }

  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  // Extract component c as a scalar field.
  Field component(int c) const;
  void set_component(int c, const Field& scalar);

  bool all_finite() const;
  double max_abs() const;

  Field& operator+=(const Field& o);
  Field& operator-=(const Field& o);
  Field& operator*=(double s);
  // this += s * o
  Field& axpy(double s, const Field& o);

  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(double s, Field a) { return a *= s; }

 private:
  PeriodicGrid grid_;
  int ncomp_ = 1;
  std::vector<double> data_;
};

// Throws ShapeMismatch unless the two fields share grid shape (and ncomp when requested).
void require_same_grid(const Field& a, const Field& b, const char* context);
void require_ncomp(const Field& f, int ncomp, const char* context);

// Pairwise (tree) summation in index order; result independent of threading.
double pairwise_sum(std::span<const double> v);

// Euclidean dot product of the raw values, pairwise-reduced.
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace gauge_ot
