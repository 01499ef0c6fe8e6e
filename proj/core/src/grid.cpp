#include "gauge_ot/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gauge_ot/errors.hpp"

namespace gauge_ot {

PeriodicGrid::PeriodicGrid(int dim, std::array<int, 2> sizes, std::array<double, 2> lengths,
                           DiffScheme scheme)
    : dim_(dim), sizes_(sizes), lengths_(lengths), scheme_(scheme) {
  if (dim != 1 && dim != 2) throw PreconditionViolation("PeriodicGrid: dim must be 1 or 2");
  if (dim == 1) {
    sizes_[1] = 1;
    lengths_[1] = 1.0;
  }
  cells_ = 1;
  for (int a = 0; a < dim_; ++a) {
    const int n = sizes_[static_cast<std::size_t>(a)];
    if (n < 4 || n % 2 != 0) {
      throw PreconditionViolation("PeriodicGrid: axis " + std::to_string(a) +
                                  " needs an even cell count >= 4, got " + std::to_string(n));
    }
    if (!(lengths_[static_cast<std::size_t>(a)] > 0.0)) {
      throw PreconditionViolation("PeriodicGrid: period must be positive");
    }
    cells_ *= static_cast<std::size_t>(n);
  }
}

PeriodicGrid PeriodicGrid::line(int n, double length, DiffScheme scheme) {
  return PeriodicGrid(1, {n, 1}, {length, 1.0}, scheme);
}

PeriodicGrid PeriodicGrid::square(int n, double length, DiffScheme scheme) {
  return PeriodicGrid(2, {n, n}, {length, length}, scheme);
}

double PeriodicGrid::min_spacing() const {
  double h = spacing(0);
  if (dim_ == 2) h = std::min(h, spacing(1));
  return h;
}

double PeriodicGrid::cell_volume() const {
  double v = 1.0;
  for (int a = 0; a < dim_; ++a) v *= spacing(a);
  return v;
}

PeriodicGrid PeriodicGrid::with_scheme(DiffScheme s) const {
  PeriodicGrid g = *this;
  g.scheme_ = s;
  return g;
}

std::size_t PeriodicGrid::stride(int axis) const {
  if (dim_ == 1 || axis == 1) return 1;
  return static_cast<std::size_t>(sizes_[1]);
}

std::array<int, 2> PeriodicGrid::multi_index(std::size_t cell) const {
  if (dim_ == 1) return {static_cast<int>(cell), 0};
  return {static_cast<int>(cell / static_cast<std::size_t>(sizes_[1])),
          static_cast<int>(cell % static_cast<std::size_t>(sizes_[1]))};
}

std::size_t PeriodicGrid::flat_index(std::array<int, 2> idx) const {
  auto wrap = [](int i, int n) { return ((i % n) + n) % n; };
  if (dim_ == 1) return static_cast<std::size_t>(wrap(idx[0], sizes_[0]));
  return static_cast<std::size_t>(wrap(idx[0], sizes_[0])) * static_cast<std::size_t>(sizes_[1]) +
         static_cast<std::size_t>(wrap(idx[1], sizes_[1]));
}

double PeriodicGrid::center(std::size_t cell, int axis) const {
  const auto idx = multi_index(cell);
  return (idx[static_cast<std::size_t>(axis)] + 0.5) * spacing(axis);
}

bool PeriodicGrid::same_shape(const PeriodicGrid& o) const {
  if (dim_ != o.dim_) return false;
  for (int a = 0; a < dim_; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    if (sizes_[ua] != o.sizes_[ua] || lengths_[ua] != o.lengths_[ua]) return false;
  }
  return true;
}

Field::Field(const PeriodicGrid& grid, int ncomp, double fill)
    : grid_(grid), ncomp_(ncomp), data_(grid.cells() * static_cast<std::size_t>(ncomp), fill) {
  if (ncomp < 1) throw PreconditionViolation("Field: ncomp must be positive");
}

Field::Field(const PeriodicGrid& grid, int ncomp, std::vector<double> values)
    : grid_(grid), ncomp_(ncomp), data_(std::move(values)) {
  if (ncomp < 1) throw PreconditionViolation("Field: ncomp must be positive");
  if (data_.size() != grid.cells() * static_cast<std::size_t>(ncomp)) {
    throw ShapeMismatch("Field: expected " + std::to_string(grid.cells() * static_cast<std::size_t>(ncomp)) +
                        " values, got " + std::to_string(data_.size()));
  }
}

Field Field::component(int c) const {
  Field out(grid_, 1);
  for (std::size_t i = 0; i < cells(); ++i) out(i) = (*this)(i, c);
  return out;
}

void Field::set_component(int c, const Field& scalar) {
  for (std::size_t i = 0; i < cells(); ++i) (*this)(i, c) = scalar(i);
}

bool Field::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

double Field::max_abs() const {
  double m = 0.0;
  for (double x : data_) m = std::max(m, std::abs(x));
  return m;
}

Field& Field::operator+=(const Field& o) {
  require_same_grid(*this, o, "Field::operator+=");
  require_ncomp(o, ncomp_, "Field::operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Field& Field::operator-=(const Field& o) {
  require_same_grid(*this, o, "Field::operator-=");
  require_ncomp(o, ncomp_, "Field::operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Field& Field::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

Field& Field::axpy(double s, const Field& o) {
  require_same_grid(*this, o, "Field::axpy");
  require_ncomp(o, ncomp_, "Field::axpy");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * o.data_[i];
  return *this;
}

void require_same_grid(const Field& a, const Field& b, const char* context) {
  if (!a.grid().same_shape(b.grid())) throw ShapeMismatch(std::string(context) + ": grid mismatch");
}

void require_ncomp(const Field& f, int ncomp, const char* context) {
  if (f.ncomp() != ncomp) {
    throw ShapeMismatch(std::string(context) + ": expected " + std::to_string(ncomp) +
                        " components, got " + std::to_string(f.ncomp()));
  }
}

namespace {

double pairwise_rec(const double* p, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += p[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_rec(p, half) + pairwise_rec(p + half, n - half);
}

}  // namespace

double pairwise_sum(std::span<const double> v) { return pairwise_rec(v.data(), v.size()); }

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeMismatch("dot: length mismatch");
  std::vector<double> prod(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) prod[i] = a[i] * b[i];
  return pairwise_sum(prod);
}

}  // namespace gauge_ot
