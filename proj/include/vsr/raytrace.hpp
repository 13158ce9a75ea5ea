#pragma once

#include "vsr/refractor.hpp"
#include "vsr/sphere.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vsr {

struct RayTrace {
  Vec3 hit;
  int winner;
  bool tie;
  Direction refracted;
  /// Distance from the winner's focus to the refracted line, over |x|.
  double focal_miss;
};

/// Hits the refractor along m and refracts with c_f = -1 at the winner's
/// analytic normal.
RayTrace trace_one(const Refractor& r, const Direction& m);

struct TraceReport {
  std::int64_t rays_total = 0;
  std::int64_t rays_hit_target = 0;
  std::int64_t tie_rays = 0;
  std::uint64_t seed = 0;
  double hit_tolerance = 1e-9;
  double sampled_mass = 0.0;
  double max_focal_miss = 0.0;
  std::vector<std::int64_t> counts;
  std::vector<double> per_target_energy;
  /// Binomial standard error of each energy estimate.
  std::vector<double> standard_error;
  /// Quadrature energies on the same grid, for comparison.
  std::vector<double> quadrature_energy;
  std::vector<double> prescribed;
  /// max_i |estimate_i - quadrature_i| / se_i.
  double max_z_quadrature = 0.0;
  double max_z_prescribed = 0.0;
};

/// Samples cells with probability proportional to g * area, a uniform point
/// inside each sampled cell, and traces it. Rays run in fixed-size batches
/// seeded from (seed, batch), so results do not depend on scheduling.
TraceReport monte_carlo_verify(const Refractor& r, const ApertureGrid& grid,
                               std::optional<std::span<const double>> f,
                               std::int64_t n_rays, std::uint64_t seed);

std::string to_json(const TraceReport& report);

}  // namespace vsr
