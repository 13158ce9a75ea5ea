#include "vsr/energy.hpp"
#include "vsr/raytrace.hpp"
#include "vsr/solver.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace vsr;

namespace {

SourceDensity one() {
  return [](const Direction&) { return 1.0; };
}

}  // namespace

TEST_CASE("single target takes every ray") {
  const Refractor r = make_refractor({Vec3(0.1, 0.0, 1.0)}, {5.0}, 0.1);
  const ApertureGrid grid = build_grid(r.aperture(), 64, one());
  const TraceReport rep = monte_carlo_verify(r, grid, std::nullopt, 20000, 3);
  CHECK(rep.counts[0] == 20000);
  CHECK(rep.rays_hit_target == 20000);
  CHECK(rep.tie_rays == 0);
  CHECK(rep.max_focal_miss <= 1e-9);
  CHECK(rep.sampled_mass == doctest::Approx(grid.total_mass()));
  CHECK(rep.max_z_quadrature == 0.0);
}

TEST_CASE("axial ray goes straight to the focus") {
  const Refractor r = make_refractor({Vec3(0, 0, 2.0)}, {4.0}, 0.1);
  const RayTrace t = trace_one(r, Direction::from(Vec3::UnitZ()));
  CHECK(t.winner == 0);
  CHECK_FALSE(t.tie);
  CHECK((t.refracted.vec() - Vec3::UnitZ()).norm() <= 1e-12);
  CHECK(t.focal_miss <= 1e-12);
  CHECK(t.hit.norm() == doctest::Approx(polar_radius(2.0, 4.0, 1.0)));
}

TEST_CASE("refracted rays pass through the winner's focus") {
  const std::vector<Vec3> x{Vec3(0.05, 0, 1), Vec3(-0.03, 0.04, 1.05), Vec3(0, -0.05, 1.1)};
  const Refractor r = make_refractor(x, {6.3, 9.4, 13.7}, 0.1);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  int traced = 0;
  for (int i = 0; i < 2000; ++i) {
    const Direction m = Direction::from(Vec3(0.1 * n(rng), 0.1 * n(rng), 1.0));
    if (!r.aperture().contains(m)) continue;
    const RayTrace t = trace_one(r, m);
    ++traced;
    // independent check: the line from the hit along the refracted direction
    const Vec3& xi = x[static_cast<std::size_t>(t.winner)];
    const Vec3 to = xi - t.hit;
    const double along = to.dot(t.refracted.vec());
    CHECK(along > 0.0);
    CHECK((to - along * t.refracted.vec()).norm() <= 1e-9 * xi.norm());
    CHECK(t.winner == map_winner(r, m));
  }
  CHECK(traced > 100);
}

TEST_CASE("bisector rays of a mirror pair are ties") {
  const Refractor r = make_refractor({Vec3(0.1, 0, 1), Vec3(-0.1, 0, 1)}, {6.0, 6.0}, 0.1);
  const RayTrace t = trace_one(r, Direction::from(Vec3(0.0, 0.03, 1.0)));
  CHECK(t.tie);
  CHECK(t.winner == 0);
  CHECK_FALSE(trace_one(r, Direction::from(Vec3(0.02, 0.03, 1.0))).tie);
}

TEST_CASE("mirror pair splits evenly") {
  const Refractor r = make_refractor({Vec3(0.1, 0, 1), Vec3(-0.1, 0, 1)}, {6.0, 6.0}, 0.1);
  const ApertureGrid grid = build_grid(r.aperture(), 256, one());
  const std::int64_t n = 1000000;
  const TraceReport rep = monte_carlo_verify(r, grid, std::nullopt, n, 42);
  const double p = static_cast<double>(rep.counts[0]) / static_cast<double>(n);
  const double sigma = std::sqrt(0.25 / static_cast<double>(n));
  CHECK(std::abs(p - 0.5) <= 3.0 * sigma);
  CHECK(rep.counts[0] + rep.counts[1] == n);
  CHECK(rep.max_focal_miss <= 1e-9);
}

TEST_CASE("solved scene: sampled energies match quadrature and prescription") {
  const std::vector<Vec3> x{Vec3(0.05, 0, 1), Vec3(-0.03, 0.04, 1.05), Vec3(0, -0.05, 1.1)};
  const std::vector<double> f{0.3, 0.3, 0.4};
  SolveConfig cfg;
  cfg.grid_resolution = 256;
  cfg.masses_are_fractions = true;
  const DiscreteSolution s = solve_discrete(x, f, one(), cfg);
  std::vector<double> prescribed;
  for (double fi : f) prescribed.push_back(fi * s.grid.total_mass());
  const TraceReport rep = monte_carlo_verify(s.refractor, s.grid, prescribed, 1000000, 5);
  CHECK(rep.max_z_quadrature <= 3.0);
  CHECK(rep.rays_hit_target == rep.rays_total - rep.tie_rays);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(rep.per_target_energy[i] - prescribed[i]) <=
          3.0 * rep.standard_error[i] + cfg.tolerance * s.grid.total_mass());
  }
}

TEST_CASE("report is deterministic and validates its input") {
  const Refractor r = make_refractor({Vec3(0.1, 0, 1), Vec3(-0.1, 0, 1.1)}, {6.0, 9.0}, 0.1);
  const ApertureGrid grid = build_grid(r.aperture(), 64, one());
  const std::string a = to_json(monte_carlo_verify(r, grid, std::nullopt, 150000, 9));
  const std::string b = to_json(monte_carlo_verify(r, grid, std::nullopt, 150000, 9));
  CHECK(a == b);
  CHECK(a != to_json(monte_carlo_verify(r, grid, std::nullopt, 150000, 10)));
  CHECK(a.find("vsr.verify/1") != std::string::npos);
  CHECK_THROWS_AS(monte_carlo_verify(r, grid, std::nullopt, 0, 1), Error);
}
