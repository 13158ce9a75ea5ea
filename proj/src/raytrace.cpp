#include "vsr/raytrace.hpp"

#include "vsr/energy.hpp"

#include <json.hpp>

#include <algorithm>
#include <limits>
#include <random>

namespace vsr {

RayTrace trace_one(const Refractor& r, const Direction& m) {
  const std::vector<int> ties = map_point(r, m);
  const int w = ties.front();
  const Hyperboloidd member = r.member(w);
  const SurfacePoint<double> sp = surface_point_and_normal(member, m);
  const Direction out = refract(m, sp.normal, -1.0);
  const Vec3& x = r.targets()[static_cast<std::size_t>(w)];
  return {sp.point, w, ties.size() > 1, out,
          line_point_distance(sp.point, out, x) / x.norm()};
}

TraceReport monte_carlo_verify(const Refractor& r, const ApertureGrid& grid,
                               std::optional<std::span<const double>> f,
                               std::int64_t n_rays, std::uint64_t seed) {
  if (n_rays < 1) {
    throw Error(ErrorKind::InvalidArgument, "verify: n_rays must be >= 1");
  }
  const auto k = static_cast<std::size_t>(r.size());
  TraceReport rep;
  rep.rays_total = n_rays;
  rep.seed = seed;
  rep.counts.assign(k, 0);

  // Inverse CDF over cell masses.
  const Eigen::VectorXd& masses = grid.masses();
  std::vector<double> cdf(static_cast<std::size_t>(masses.size()));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < masses.size(); ++i) {
    acc += masses[i];
    cdf[static_cast<std::size_t>(i)] = acc;
  }
  const double total = grid.total_mass();

  constexpr std::int64_t kBatch = 1 << 16;
  for (std::int64_t start = 0; start < n_rays; start += kBatch) {
    const auto batch = static_cast<std::uint32_t>(start / kBatch);
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32), batch};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::int64_t end = std::min(n_rays, start + kBatch);
    for (std::int64_t i = start; i < end; ++i) {
      const double u = unit(rng) * acc;
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      if (it == cdf.end()) --it;
      const auto cell = static_cast<Eigen::Index>(it - cdf.begin());
      const double u1 = unit(rng), u2 = unit(rng);
      Direction m = grid.sample_in_cell(cell, u1, u2);
      if (!grid.aperture().contains(m)) m = grid.center(cell);

      const RayTrace t = trace_one(r, m);
      ++rep.counts[static_cast<std::size_t>(t.winner)];
      if (t.tie) {
        ++rep.tie_rays;
        continue;
      }
      rep.max_focal_miss = std::max(rep.max_focal_miss, t.focal_miss);
      if (t.focal_miss <= rep.hit_tolerance) ++rep.rays_hit_target;
    }
  }

  const auto n = static_cast<double>(n_rays);
  const Eigen::VectorXd quad = energy_vector(r, grid).energies();
  auto z_of = [](double diff, double se) {
    if (se > 0.0) return std::abs(diff) / se;
    return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  };
  for (std::size_t i = 0; i < k; ++i) {
    const double p = static_cast<double>(rep.counts[i]) / n;
    const double est = total * p;
    const double se = total * std::sqrt(p * (1.0 - p) / n);
    rep.per_target_energy.push_back(est);
    rep.standard_error.push_back(se);
    rep.sampled_mass += est;
    rep.quadrature_energy.push_back(quad[static_cast<Eigen::Index>(i)]);
    rep.max_z_quadrature = std::max(
        rep.max_z_quadrature, z_of(est - quad[static_cast<Eigen::Index>(i)], se));
    if (f) {
      const double fi = (*f)[i];
      rep.prescribed.push_back(fi);
      rep.max_z_prescribed = std::max(rep.max_z_prescribed, z_of(est - fi, se));
    }
  }
  return rep;
}

std::string to_json(const TraceReport& r) {
  nlohmann::json j;
  j["schema"] = "vsr.verify/1";
  j["rays_total"] = r.rays_total;
  j["rays_hit_target"] = r.rays_hit_target;
  j["tie_rays"] = r.tie_rays;
  j["seed"] = r.seed;
  j["hit_tolerance"] = r.hit_tolerance;
  j["sampled_mass"] = r.sampled_mass;
  j["max_focal_miss"] = r.max_focal_miss;
  j["counts"] = r.counts;
  j["per_target_energy"] = r.per_target_energy;
  j["standard_error"] = r.standard_error;
  j["quadrature_energy"] = r.quadrature_energy;
  j["max_z_quadrature"] = r.max_z_quadrature;
  if (!r.prescribed.empty()) {
    j["prescribed"] = r.prescribed;
    j["max_z_prescribed"] = r.max_z_prescribed;
  }
  return j.dump(2);
}

}  // namespace vsr
