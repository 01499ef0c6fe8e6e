#include "gauge_ot/fiber.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "gauge_ot/calculus.hpp"
#include "gauge_ot/errors.hpp"

namespace gauge_ot {

std::string to_string(Flavor f) {
  switch (f) {
    case Flavor::So: return "so";
    case Flavor::Conf: return "conf";
    case Flavor::Gl: return "gl";
    case Flavor::Pgl: return "pgl";
  }
  return "gl";
}

Flavor flavor_from_string(const std::string& s) {
  if (s == "so") return Flavor::So;
  if (s == "conf") return Flavor::Conf;
  if (s == "gl") return Flavor::Gl;
  if (s == "pgl") return Flavor::Pgl;
  throw PreconditionViolation("unknown flavor '" + s + "'");
}

int fiber_dim_from_ncomp(int ncomp) {
  const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(ncomp))));
  if (k * k != ncomp) throw ShapeMismatch("matrix field needs k*k components, got " + std::to_string(ncomp));
  if (k > kMaxFiber) throw PreconditionViolation("fiber dimension above " + std::to_string(kMaxFiber));
  return k;
}

Mat mat_at(const Field& f, std::size_t cell, int k) {
  Mat m(k, k);
  const auto v = f.at(cell);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) m(i, j) = v[static_cast<std::size_t>(i * k + j)];
  return m;
}

void put_mat(Field& f, std::size_t cell, const Mat& m) {
  auto v = f.at(cell);
  const auto k = m.rows();
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) v[static_cast<std::size_t>(i * k + j)] = m(i, j);
}

Vec vec_at(const Field& f, std::size_t cell) {
  Vec x(f.ncomp());
  const auto v = f.at(cell);
  for (int i = 0; i < f.ncomp(); ++i) x(i) = v[static_cast<std::size_t>(i)];
  return x;
}

void put_vec(Field& f, std::size_t cell, const Vec& x) {
  auto v = f.at(cell);
  for (Eigen::Index i = 0; i < x.size(); ++i) v[static_cast<std::size_t>(i)] = x(i);
}

Mat GaugeAlgebraField::at(std::size_t cell) const { return mat_at(values, cell, k); }

Mat project_flavor(const Mat& m, Flavor flavor, const Mat* S) {
  const auto k = m.rows();
  switch (flavor) {
    case Flavor::So:
      return 0.5 * (m - m.transpose());
    case Flavor::Conf: {
      Mat r = 0.5 * (m - m.transpose());
      r.diagonal().array() += m.trace() / static_cast<double>(k);
      return r;
    }
    case Flavor::Gl:
      return m;
    case Flavor::Pgl: {
      if (S == nullptr) throw MissingCompanion("project_flavor: pgl needs the companion S field");
      // (m + cI) S has zero trace when c = -tr(mS)/tr(S); tr S = 1 on admissible data.
      const double c = -(m * (*S)).trace() / S->trace();
      Mat r = m;
      r.diagonal().array() += c;
      return r;
    }
  }
  return m;
}

GaugeAlgebraField project_flavor(const Field& m, int k, Flavor flavor, const Field* S) {
  require_ncomp(m, k * k, "project_flavor");
  if (flavor == Flavor::Pgl) {
    if (S == nullptr) throw MissingCompanion("project_flavor: pgl needs the companion S field");
    require_same_grid(m, *S, "project_flavor");
    require_ncomp(*S, k * k, "project_flavor");
  }
  GaugeAlgebraField out{Field(m.grid(), k * k), k, flavor};
  for (std::size_t cell = 0; cell < m.cells(); ++cell) {
    const Mat mc = mat_at(m, cell, k);
    if (flavor == Flavor::Pgl) {
      const Mat sc = mat_at(*S, cell, k);
      put_mat(out.values, cell, project_flavor(mc, flavor, &sc));
    } else {
      put_mat(out.values, cell, project_flavor(mc, flavor));
    }
  }
  return out;
}

double flavor_defect(const GaugeAlgebraField& a, const Field* S) {
  double worst = 0.0;
  const int k = a.k;
  for (std::size_t cell = 0; cell < a.values.cells(); ++cell) {
    const Mat m = a.at(cell);
    double d = 0.0;
    switch (a.flavor) {
      case Flavor::So:
        d = (m + m.transpose()).cwiseAbs().maxCoeff();
        break;
      case Flavor::Conf: {
        Mat e = m + m.transpose();
        e.diagonal().array() -= 2.0 * m.trace() / k;
        d = e.cwiseAbs().maxCoeff();
        break;
      }
      case Flavor::Gl:
        break;
      case Flavor::Pgl:
        if (S == nullptr) throw MissingCompanion("flavor_defect: pgl needs the companion S field");
        d = std::abs((m * mat_at(*S, cell, k)).trace());
        break;
    }
    worst = std::max(worst, d);
  }
  return worst;
}

Mat expm(const Mat& a, double t) {
  const Eigen::MatrixXd ta = t * Eigen::MatrixXd(a);
  return Mat(ta.exp());
}

double frobenius_pair(const Field& a, const Field& b, const Field& weight) {
  require_same_grid(a, b, "frobenius_pair");
  require_same_grid(a, weight, "frobenius_pair");
  require_ncomp(b, a.ncomp(), "frobenius_pair");
  require_ncomp(weight, 1, "frobenius_pair");
  Field integrand(a.grid(), 1);
  for (std::size_t cell = 0; cell < a.cells(); ++cell) {
    const auto x = a.at(cell), y = b.at(cell);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    integrand(cell) = s * weight(cell);
  }
  return integrate(integrand);
}

Field random_band_limited(const PeriodicGrid& grid, int ncomp, std::uint64_t seed, int modes, double amplitude) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const int dim = grid.dim();
  const int lo1 = dim == 2 ? -(modes - 1) : 0;
  const int hi1 = dim == 2 ? modes - 1 : 0;
  struct Term {
    int m0, m1;
    double c, s;
  };
  std::vector<Term> terms;
  for (int c = 0; c < ncomp; ++c) {
    for (int m0 = 0; m0 < modes; ++m0) {
      for (int m1 = lo1; m1 <= hi1; ++m1) {
        if (m0 == 0 && m1 < 0) continue;
        const double scale = amplitude / (1.0 + m0 * m0 + m1 * m1);
        terms.push_back({m0, m1, scale * uni(rng), scale * uni(rng)});
      }
    }
  }
  Field f(grid, ncomp);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t cell = 0; cell < grid.cells(); ++cell) {
    const double x0 = grid.center(cell, 0) / grid.length(0);
    const double x1 = dim == 2 ? grid.center(cell, 1) / grid.length(1) : 0.0;
    std::size_t t = 0;
    for (int c = 0; c < ncomp; ++c) {
      double v = 0.0;
      for (int m0 = 0; m0 < modes; ++m0) {
        for (int m1 = lo1; m1 <= hi1; ++m1) {
          if (m0 == 0 && m1 < 0) continue;
          const Term& tm = terms[t++];
          const double ph = two_pi * (m0 * x0 + m1 * x1);
          v += tm.c * std::cos(ph) + tm.s * std::sin(ph);
        }
      }
      f(cell, c) = v;
    }
  }
  return f;
}

GaugeAlgebraField random_gauge_algebra(const PeriodicGrid& grid, int k, Flavor flavor, std::uint64_t seed,
                                       const Field* S, double amplitude) {
  const Field m = random_band_limited(grid, k * k, seed, 3, amplitude);
  return project_flavor(m, k, flavor, S);
}

}  // namespace gauge_ot
