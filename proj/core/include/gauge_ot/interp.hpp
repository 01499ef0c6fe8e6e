#pragma once

#include <array>
#include <complex>
#include <memory>
#include <span>
#include <vector>

#include "gauge_ot/grid.hpp"

namespace gauge_ot {

using Point = std::array<double, 2>;

enum class InterpKind {
  CatmullRom,  // periodic cubic, tensor product
  Trigonometric  // band-limited DFT interpolant, exact on resolved modes
};

// Continuous periodic reconstruction of a multi-component Field.
class Interpolant {
 public:
  virtual ~Interpolant() = default;
  virtual void value(Point x, std::span<double> out) const = 0;
  // grad layout: [alpha * ncomp + c]
  virtual void value_and_grad(Point x, std::span<double> out, std::span<double> grad) const = 0;
  int ncomp() const noexcept { return ncomp_; }
  const PeriodicGrid& grid() const noexcept { return grid_; }

 protected:
  Interpolant(const PeriodicGrid& g, int ncomp) : grid_(g), ncomp_(ncomp) {}
  PeriodicGrid grid_;
  int ncomp_;
};

class CatmullRomInterpolant final : public Interpolant {
 public:
  explicit CatmullRomInterpolant(const Field& f);
  void value(Point x, std::span<double> out) const override;
  void value_and_grad(Point x, std::span<double> out, std::span<double> grad) const override;

 private:
  void eval(Point x, std::span<double> out, std::span<double> grad, bool want_grad) const;
  Field f_;
};

class TrigInterpolant final : public Interpolant {
 public:
  explicit TrigInterpolant(const Field& f);
  void value(Point x, std::span<double> out) const override;
  void value_and_grad(Point x, std::span<double> out, std::span<double> grad) const override;
  std::size_t active_modes() const noexcept { return modes_.size(); }

 private:
  struct Mode {
    int m0, m1;                 // signed wavenumbers
    std::size_t coef;           // offset into coefs_ (ncomp entries)
  };
  void eval(Point x, std::span<double> out, std::span<double> grad, bool want_grad) const;
  std::vector<Mode> modes_;
  std::vector<std::complex<double>> coefs_;
};

std::unique_ptr<Interpolant> make_interpolant(const Field& f, InterpKind kind);

}  // namespace gauge_ot
