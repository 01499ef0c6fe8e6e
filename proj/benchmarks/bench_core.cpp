#include <benchmark/benchmark.h>

#include "gauge_ot/bvp.hpp"
#include "gauge_ot/calculus.hpp"
#include "gauge_ot/matrix_transport.hpp"
#include "gauge_ot/vector_transport.hpp"
#include "gauge_ot_checks/fixtures.hpp"

using namespace gauge_ot;

namespace {

// one objective + adjoint gradient evaluation of path_relax (k = 1, N cells, 32 steps)
void BM_RelaxObjective(benchmark::State& state) {
  const auto g = PeriodicGrid::line(static_cast<int>(state.range(0)));
  const Field w0 = fixtures::sqrt_density(fixtures::bump(g, 0.5, 8));
  const Field w1 = fixtures::sqrt_density(fixtures::bump(g, 0.5, 32));
  Controls c = zero_controls(g, 1, 32);
  for (std::size_t n = 0; n < c.u.size(); ++n) c.u[n] = random_band_limited(g, 1, n, 3, 0.05);
  for (auto _ : state) benchmark::DoNotOptimize(relax_objective(c, w0, w1, Space::VhProb, 100.0));
}
BENCHMARK(BM_RelaxObjective)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Oracle(benchmark::State& state) {
  const auto g = PeriodicGrid::line(static_cast<int>(state.range(0)));
  const Field r0 = fixtures::bump(g, 0.48, 12), r1 = fixtures::bump(g, 0.52, 40);
  for (auto _ : state) benchmark::DoNotOptimize(wasserstein_1d_oracle(r0, r1));
}
BENCHMARK(BM_Oracle)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_VectorGeodesicRhs(benchmark::State& state) {
  const auto g = PeriodicGrid::square(static_cast<int>(state.range(0)), 1.0, DiffScheme::Spectral);
  const VectorGeodesicState s =
      vector_state_from_theta(fixtures::half_density(g, 2, 1), random_band_limited(g, 2, 2, 3, 0.1), Flavor::So);
  for (auto _ : state) benchmark::DoNotOptimize(vector_geodesic_rhs(s, VectorSystem::Balanced));
}
BENCHMARK(BM_VectorGeodesicRhs)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_VectorCharacteristics(benchmark::State& state) {
  const auto g = PeriodicGrid::line(static_cast<int>(state.range(0)));
  const VectorGeodesicState s =
      vector_state_from_theta(fixtures::half_density(g, 2, 1), random_band_limited(g, 2, 2, 3, 0.02), Flavor::So);
  for (auto _ : state) benchmark::DoNotOptimize(vector_characteristics_at(s, 0.5, VectorSystem::Balanced));
}
BENCHMARK(BM_VectorCharacteristics)->Arg(128)->Arg(512)->Unit(benchmark::kMicrosecond);

void BM_MatrixGeodesicRhs(benchmark::State& state) {
  const auto g = PeriodicGrid::square(static_cast<int>(state.range(0)), 1.0, DiffScheme::Spectral);
  const MatrixGeodesicState s = fixtures::random_matrix_state(g, 2, 3, MatrixSystem::Balanced, 0.2);
  for (auto _ : state) benchmark::DoNotOptimize(matrix_geodesic_rhs(s, MatrixSystem::Balanced));
}
BENCHMARK(BM_MatrixGeodesicRhs)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_HorizontalLift(benchmark::State& state) {
  const auto g = PeriodicGrid::square(static_cast<int>(state.range(0)));
  const Field w = fixtures::half_density(g, 2, 4);
  const Generator xi = horizontal_from_theta(random_band_limited(g, 2, 5, 3, 0.2), w);
  const Field wdot = infinitesimal_action(xi.u, xi.a, w);
  for (auto _ : state) benchmark::DoNotOptimize(horizontal_lift(wdot, w));
}
BENCHMARK(BM_HorizontalLift)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
