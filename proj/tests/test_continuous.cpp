#include "vsr/solver.hpp"

#include <doctest.h>

using namespace vsr;

namespace {

SourceDensity one() {
  return [](const Direction&) { return 1.0; };
}

TargetDensity flat() {
  return [](const Vec3&) { return 1.0; };
}

const CapTargetRegion kRegion{Direction::from(Vec3::UnitZ()), 1e-6, 1.0, 1.1};

SolveConfig config(int res) {
  SolveConfig c;
  c.grid_resolution = res;
  return c;
}

}  // namespace

TEST_CASE("partition cells respect the diameter and carry the mass") {
  for (double d : {0.2, 0.05, 0.02}) {
    const auto cells = partition_region(kRegion, flat(), d, RepresentativeRule::CentroidProjected);
    REQUIRE_FALSE(cells.empty());
    double total = 0.0;
    for (const PartitionCell& c : cells) {
      CHECK(c.diameter <= d * (1 + 1e-12));
      CHECK(c.mass >= 0.0);
      CHECK(kRegion.contains(c.representative));
      total += c.mass;
    }
    // thin shell: volume of the cap sector between radii w and W
    const double vol = 2.0 * std::numbers::pi * kRegion.xi * (1.1 * 1.1 * 1.1 - 1.0) / 3.0;
    CHECK(total == doctest::Approx(vol).epsilon(1e-9));
  }
  CHECK_THROWS_AS(partition_region(kRegion, flat(), 0.0, RepresentativeRule::FirstPoint), Error);
}

TEST_CASE("one cell reduces to a single target") {
  PartitionConfig p;
  p.cell_diameter = 10.0;
  p.levels = 1;
  const ContinuousSolution s = solve_continuous(kRegion, flat(), one(), p, config(128));
  REQUIRE(s.refractor);
  CHECK(s.refractor->size() == 1);
  CHECK(s.levels[0].nonempty == 1);
  CHECK(s.energy.per_target[0].energy == doctest::Approx(s.energy.total));
  CHECK(s.levels[0].max_residual <= 1e-12 * s.energy.total);
}

TEST_CASE("density concentrated in one cell") {
  // Only the outer shell layer carries mass; at diameter 0.1 that is one cell.
  const TargetDensity outer = [](const Vec3& x) { return x.norm() > 1.05 ? 1.0 : 0.0; };
  PartitionConfig p;
  p.cell_diameter = 0.1;
  p.levels = 1;
  const ContinuousSolution s = solve_continuous(kRegion, outer, one(), p, config(128));
  REQUIRE(s.refractor);
  CHECK(s.levels[0].cells == 2);
  CHECK(s.levels[0].nonempty == 1);
  CHECK(s.refractor->size() == 1);
}

TEST_CASE("weak gap shrinks from 2 to 4 cells") {
  PartitionConfig p;
  p.cell_diameter = 0.1;
  p.levels = 2;
  // nearly collinear cells: latitude bands must be finer than the tolerance
  const ContinuousSolution s = solve_continuous(kRegion, flat(), one(), p, config(1024));
  REQUIRE(s.levels.size() == 2);
  CHECK(s.levels[0].nonempty == 2);
  CHECK(s.levels[1].nonempty == 4);
  CHECK(s.levels[1].gap < s.levels[0].gap);
}

TEST_CASE("representative rule changes the gap, not the residuals") {
  PartitionConfig p;
  p.cell_diameter = 0.05;
  p.levels = 1;
  const SolveConfig cfg = config(512);
  const ContinuousSolution a = solve_continuous(kRegion, flat(), one(), p, cfg);
  p.rule = RepresentativeRule::FirstPoint;
  const ContinuousSolution b = solve_continuous(kRegion, flat(), one(), p, cfg);
  CHECK(a.levels[0].max_residual <= cfg.tolerance * a.energy.total);
  CHECK(b.levels[0].max_residual <= cfg.tolerance * b.energy.total);
  CHECK(a.levels[0].cells == b.levels[0].cells);
  CHECK(a.levels[0].gap != b.levels[0].gap);
}

TEST_CASE("zero density: trivial refractor with a warning") {
  const TargetDensity zero = [](const Vec3&) { return 0.0; };
  const ContinuousSolution s = solve_continuous(kRegion, zero, one(), PartitionConfig{}, config(64));
  CHECK_FALSE(s.refractor);
  REQUIRE(s.warnings.size() == 1);
  CHECK(s.warnings[0].find("zero") != std::string::npos);
}

TEST_CASE("region and config errors") {
  const CapTargetRegion wide{Direction::from(Vec3::UnitZ()), 0.5, 1.0, 1.1};
  CHECK_THROWS_AS(solve_continuous(wide, flat(), one(), PartitionConfig{}, config(64)), Error);
  PartitionConfig p;
  p.levels = 0;
  CHECK_THROWS_AS(solve_continuous(kRegion, flat(), one(), p, config(64)), Error);
  const TargetDensity negative = [](const Vec3&) { return -1.0; };
  CHECK_THROWS_AS(solve_continuous(kRegion, negative, one(), PartitionConfig{}, config(64)), Error);
}

TEST_CASE("continuous report json") {
  PartitionConfig p;
  p.cell_diameter = 0.1;
  p.levels = 1;
  const std::string j = to_json(solve_continuous(kRegion, flat(), one(), p, config(256)));
  for (const char* key : {"vsr.continuous/1", "weak-dict/1", "levels", "gap"}) {
    CHECK(j.find(key) != std::string::npos);
  }
}
