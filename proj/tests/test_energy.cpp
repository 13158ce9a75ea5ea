#include "vsr/energy.hpp"

#include <doctest.h>

#include <numbers>
#include <random>

using namespace vsr;

namespace {

const std::vector<Vec3> kThree{Vec3(0.05, 0, 1), Vec3(-0.03, 0.04, 1.05), Vec3(0, -0.05, 1.1)};
const std::vector<double> kEps{6.3, 9.4, 13.7};

SourceDensity one() {
  return [](const Direction&) { return 1.0; };
}

}  // namespace

TEST_CASE("mu_g basics") {
  const ApertureSpec cap({Cap(make_direction(0, 0, 1), 0.6)}, 0.6);
  const SourceDensity g = [](const Direction& m) { return 1.0 + m.vec().z(); };
  const ApertureGrid grid = build_grid(cap, 128, g);
  CHECK(mu_g(grid, [](Eigen::Index) { return true; }) == doctest::Approx(grid.total_mass()).epsilon(1e-15));
  CHECK(mu_g(grid, [](Eigen::Index) { return false; }) == 0.0);
  CHECK(mu_g(grid, std::span<const Eigen::Index>{}) == 0.0);
  // split by azimuth
  const Frame& f = grid.frame();
  auto upper = [&](Eigen::Index i) { return Vec3(grid.centers().col(i)).dot(f.e2) > 0.0; };
  const double a = mu_g(grid, upper);
  const double b = mu_g(grid, [&](Eigen::Index i) { return !upper(i); });
  CHECK(std::abs(a - 0.5 * grid.total_mass()) <= 1e-12 * grid.total_mass());
  CHECK(std::abs(a + b - grid.total_mass()) <= 1e-14 * grid.total_mass());
  // duplicates counted once, monotone in the subset
  std::vector<Eigen::Index> cells{0, 1, 2, 2, 1};
  CHECK(mu_g(grid, cells) == doctest::Approx(grid.masses()[0] + grid.masses()[1] + grid.masses()[2]));
  std::vector<Eigen::Index> more{0, 1, 2, 3};
  CHECK(mu_g(grid, more) >= mu_g(grid, cells));
}

TEST_CASE("single target takes everything; mirror pair splits evenly") {
  const Refractor single = make_refractor({Vec3(0.1, 0, 1)}, {3.0}, 0.1);
  const ApertureGrid g1 = build_grid(single.aperture(), 64, one());
  const EnergyReport r1 = energy_vector(single, g1);
  CHECK(r1.per_target[0].energy == doctest::Approx(g1.total_mass()).epsilon(1e-15));

  const Refractor pair = make_refractor({Vec3(0.1, 0, 1), Vec3(-0.1, 0, 1)}, {4.0, 4.0}, 0.1);
  const ApertureGrid g2 = build_grid(pair.aperture(), 256, one());
  const EnergyReport r2 = energy_vector(pair, g2);
  CHECK(std::abs(r2.per_target[0].energy - r2.per_target[1].energy) <= 1e-12 * g2.total_mass());
}

TEST_CASE("conservation, nonnegativity and prescriptions") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> eps;
    for (int i = 0; i < 3; ++i) eps.push_back(2.0 + 15.0 * u(rng));
    const Refractor r = make_refractor(kThree, eps, 0.1);
    const ApertureGrid grid = build_grid(r.aperture(), 96, [](const Direction& m) { return 1.0 + m.vec().x(); });
    const std::vector<double> f{1.0, 2.0, 3.0};
    const EnergyReport rep = energy_vector(r, grid, f);
    double sum = 0.0;
    for (const TargetEnergy& t : rep.per_target) {
      CHECK(t.energy >= 0.0);
      sum += t.energy;
    }
    CHECK(std::abs(rep.total - grid.total_mass()) <= 1e-12 * grid.total_mass());
    CHECK(std::abs(sum - grid.total_mass()) <= 1e-12 * grid.total_mass());
    for (int i = 0; i < 3; ++i) CHECK(rep.residual[static_cast<std::size_t>(i)] == rep.per_target[static_cast<std::size_t>(i)].energy - f[static_cast<std::size_t>(i)]);
  }
  const Refractor r = make_refractor(kThree, kEps, 0.1);
  const ApertureGrid grid = build_grid(r.aperture(), 32, one());
  const std::vector<double> wrong{1.0};
  CHECK_THROWS_AS(energy_vector(r, grid, wrong), Error);
}

TEST_CASE("energy is monotone in each eccentricity") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> eps;
    for (int i = 0; i < 3; ++i) eps.push_back(2.0 + 15.0 * u(rng));
    const Refractor r = make_refractor(kThree, eps, 0.1);
    const ApertureGrid grid = build_grid(r.aperture(), 128, one());
    const Eigen::VectorXd base = energy_vector(r, grid).energies();
    for (int i = 0; i < 3; ++i) {
      std::vector<double> up = eps;
      up[static_cast<std::size_t>(i)] *= 1.0 + 0.2 * u(rng);
      const Eigen::VectorXd e = energy_vector(r.with_eccentricities(up), grid).energies();
      for (int j = 0; j < 3; ++j) {
        if (j == i) CHECK(e[j] <= base[j]);
        else CHECK(e[j] >= base[j]);
      }
    }
  }
}

TEST_CASE("energies are additive over target subsets") {
  const Refractor r = make_refractor(kThree, kEps, 0.1);
  const ApertureGrid grid = build_grid(r.aperture(), 128, one());
  const CellAssignment a = visibility_cells(r, grid);
  const Eigen::VectorXd e = energy_vector(r, grid).energies();
  std::vector<Eigen::Index> u01(a.cells_of[0].begin(), a.cells_of[0].end());
  u01.insert(u01.end(), a.cells_of[1].begin(), a.cells_of[1].end());
  CHECK(mu_g(grid, u01) == doctest::Approx(e[0] + e[1]).epsilon(1e-13));
}

TEST_CASE("quadrature energies match continuous Monte Carlo") {
  // Rejection sampling of the aperture with brute-force argmax, independent
  // of the grid. Compares energy fractions.
  const Refractor r = make_refractor(kThree, kEps, 0.1);
  const ApertureGrid grid = build_grid(r.aperture(), 1024, one());
  const Eigen::VectorXd e = energy_vector(r, grid).energies() / grid.total_mass();

  const double zmin = std::cos(r.aperture().max_polar_angle());
  const Frame& f = r.aperture().frame();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const long n = 10000000;
  std::vector<long> counts(3, 0);
  long accepted = 0;
  for (long k = 0; k < n; ++k) {
    // uniform on the cap polar <= max_polar about the frame axis
    const double z = zmin + (1.0 - zmin) * u(rng);
    const double phi = 2.0 * std::numbers::pi * u(rng);
    const Direction m = Direction::from(f.point(std::acos(z), phi));
    if (!r.aperture().contains(m)) continue;
    ++accepted;
    double best = -1.0;
    int arg = 0;
    for (int i = 0; i < 3; ++i) {
      const double d = kThree[static_cast<std::size_t>(i)].norm();
      const double t = m.vec().dot(kThree[static_cast<std::size_t>(i)]) / d;
      const double ei = kEps[static_cast<std::size_t>(i)];
      if (!(t * ei > 1.0)) continue;
      const double h = d * (ei * ei - 1.0) / (2.0 * ei * (ei * t - 1.0));
      if (h > best) {
        best = h;
        arg = i;
      }
    }
    ++counts[static_cast<std::size_t>(arg)];
  }
  for (int i = 0; i < 3; ++i) {
    const double p = static_cast<double>(counts[static_cast<std::size_t>(i)]) / accepted;
    const double se = std::sqrt(p * (1.0 - p) / accepted);
    CHECK(std::abs(p - e[i]) <= 3.0 * se);
  }
}

TEST_CASE("energy report json") {
  const Refractor r = make_refractor(kThree, kEps, 0.1);
  const ApertureGrid grid = build_grid(r.aperture(), 32, one());
  const std::vector<double> f{1, 1, 1};
  const std::string j = to_json(energy_vector(r, grid, f));
  CHECK(j.find("\"schema\": \"vsr.energy/1\"") != std::string::npos);
  CHECK(j.find("max_abs_residual") != std::string::npos);
}
