#include "vsr/solver.hpp"

#include "solver_detail.hpp"

#include <json.hpp>

#include <algorithm>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace vsr {

namespace {

double simpson(const std::function<double(double)>& f, double a, double b,
               double fa, double fm, double fb, double whole, double tol,
               int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol) {
  if (b <= a) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson(f, a, b, fa, fm, fb, whole, tol, 40);
}

}  // namespace

double cap_mass(const Direction& axis, const SourceDensity& g, double polar) {
  const Frame fr = Frame::about(axis);
  auto integrand = [&](double th) {
    return g(Direction::from(fr.point(th, 0.0))) * std::sin(th);
  };
  return 2.0 * std::numbers::pi * integrate(integrand, 0.0, polar, 1e-15);
}

RotsymSolution solve_rotsym_collinear(const Direction& axis,
                                      std::span<const double> distances,
                                      std::span<const double> masses,
                                      const SourceDensity& g,
                                      const SolveConfig& cfg) {
  const std::size_t n = distances.size();
  if (n == 0 || masses.size() != n) {
    throw Error(ErrorKind::InvalidArgument,
                "rotsym: need one mass per distance");
  }
  std::vector<Vec3> points;
  for (double d : distances) {
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw Error(ErrorKind::InvalidArgument, "rotsym: distances must be > 0");
    }
    points.push_back(d * axis.vec());
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return distances[a] > distances[b]; });
  for (std::size_t i = 1; i < n; ++i) {
    if (distances[order[i]] == distances[order[i - 1]]) {
      throw Error(ErrorKind::InvalidArgument, "rotsym: repeated distance");
    }
  }

  RotsymSolution s;
  s.axis = axis;
  s.distances.assign(distances.begin(), distances.end());
  const TargetStats stats = target_stats(points);
  s.eps_upper = collinear_eps_upper(stats);
  s.eps0 = epsilon0(stats);
  s.eps_lower = s.eps0 + cfg.gamma;
  if (!(s.eps_lower < s.eps_upper)) {
    std::ostringstream os;
    os << "rotsym: eccentricity window (eps0 + gamma, 1/(K-1)) = ("
       << s.eps_lower << ", " << s.eps_upper << ") is empty";
    throw Error(ErrorKind::Infeasible, os.str());
  }
  s.eps_max = cfg.eps_max.value_or(detail::default_eps_max(stats, s.eps_lower));
  if (!(s.eps_max > s.eps_lower)) {
    throw Error(ErrorKind::InvalidArgument, "rotsym: eps_max must exceed eps0 + gamma");
  }

  const double rim = std::acos(1.0 / s.eps_lower);
  s.total_mass = cap_mass(axis, g, rim);
  SolveTrace balance;
  const std::vector<double> f =
      detail::balanced_masses(masses, s.total_mass, cfg, balance);
  if (balance.renormalization != 1.0) {
    std::ostringstream os;
    os << "masses rescaled by " << balance.renormalization;
    s.notes.push_back(os.str());
  }

  // Band edges by inverting the cumulative cap mass, farthest target first.
  s.band_edges.assign(n + 1, 0.0);
  s.band_edges[n] = rim;
  double cum = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    cum += f[order[i]];
    double lo = s.band_edges[i], hi = rim;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
      const double mid = 0.5 * (lo + hi);
      (cap_mass(axis, g, mid) < cum ? lo : hi) = mid;
    }
    s.band_edges[i + 1] = 0.5 * (lo + hi);
  }
  for (std::size_t i = 0; i < n; ++i) s.band_owner.push_back(static_cast<int>(order[i]));

  // Farthest at eps_max; each nearer target meets its inner neighbour at
  // the shared edge.
  s.eccentricities.assign(n, 0.0);
  s.eccentricities[order[0]] = s.eps_max;
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t inner = order[i - 1], outer = order[i];
    const double t = std::cos(s.band_edges[i]);
    const double r = polar_radius(distances[inner], s.eccentricities[inner], t);
    const double e = eccentricity_through(distances[outer], t, r);
    if (!(e > s.eps_lower) || !std::isfinite(e)) {
      std::ostringstream os;
      os << "rotsym: eccentricity " << outer << " = " << e
         << " leaves the window (" << s.eps_lower << ", " << s.eps_max
         << "]; 1/(K-1) = " << s.eps_upper;
      throw Error(ErrorKind::Infeasible, os.str());
    }
    s.eccentricities[outer] = e;
  }
  for (std::size_t i = 0; i < n; ++i) s.zero_mass.push_back(f[i] == 0.0);
  if (s.eps_max >= s.eps_upper) {
    s.notes.push_back("eps_max is not below 1/(K-1); band structure checked numerically");
  }

  // Confirm that each band is really owned by its target.
  constexpr int kProbe = 4096;
  for (int p = 0; p < kProbe; ++p) {
    const double th = (p + 0.5) * rim / kProbe;
    const double t = std::cos(th);
    std::size_t band = 0;
    while (band + 1 < n && th >= s.band_edges[band + 1]) ++band;
    const double edge_gap = std::min(th - s.band_edges[band], s.band_edges[band + 1] - th);
    if (edge_gap < 1e-9) continue;
    std::size_t best = 0;
    double best_h = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double h = polar_radius(distances[i], s.eccentricities[i], t);
      if (h > best_h) {
        best_h = h;
        best = i;
      }
    }
    if (best != order[band] && !s.zero_mass[order[band]]) {
      std::ostringstream os;
      os << "rotsym: polar angle " << th << " is taken by target " << best
         << " instead of band owner " << order[band];
      throw Error(ErrorKind::Infeasible, os.str());
    }
  }
  return s;
}

// Cone and k-gon.

void ConeSpec::validate() const {
  if (distances.empty() || masses.size() != distances.size()) {
    throw Error(ErrorKind::InvalidArgument, "cone: need one mass per distance");
  }
  for (double d : distances) {
    if (!(d > 0.0)) throw Error(ErrorKind::InvalidArgument, "cone: distances must be > 0");
  }
  for (double m : masses) {
    if (!(m >= 0.0)) throw Error(ErrorKind::InvalidArgument, "cone: masses must be >= 0");
  }
  const auto [lo, hi] = std::minmax_element(distances.begin(), distances.end());
  CapTargetRegion region{axis, xi, *lo, *hi};
  region.validate();
}

std::vector<Vec3> kgon_targets(const ConeSpec& cone, int k) {
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "kgon: k must be >= 1");
  const Frame fr = Frame::about(cone.axis, cone.reference);
  const double rho = cone.ring_polar();
  std::vector<Vec3> out;
  for (int j = 0; j < k; ++j) {
    const Vec3 m = fr.point(rho, 2.0 * std::numbers::pi * j / k);
    for (double d : cone.distances) out.push_back(d * m);
  }
  return out;
}

double cone_eps0(const ConeSpec& cone) {
  const auto [lo, hi] = std::minmax_element(cone.distances.begin(), cone.distances.end());
  return epsilon0(cone_target_stats(cone.ring_polar(), *lo, *hi));
}

ApertureSpec cone_aperture_for(const ConeSpec& cone, double gamma) {
  if (!(gamma > 0.0)) throw Error(ErrorKind::InvalidArgument, "cone: gamma must be > 0");
  return cone_aperture(cone.axis, cone.ring_polar(), 1.0 / (cone_eps0(cone) + gamma),
                       cone.reference);
}

Refractor compose_kgon(const ConeSpec& cone,
                       std::span<const double> eps_per_distance, int k,
                       double gamma) {
  cone.validate();
  if (k < 2) throw Error(ErrorKind::InvalidArgument, "kgon: k must be >= 2");
  if (eps_per_distance.size() != cone.distances.size()) {
    throw Error(ErrorKind::InvalidArgument,
                "kgon: need one eccentricity per distance");
  }
  std::vector<double> eccs;
  for (int j = 0; j < k; ++j) {
    eccs.insert(eccs.end(), eps_per_distance.begin(), eps_per_distance.end());
  }
  return Refractor(kgon_targets(cone, k), std::move(eccs), gamma, cone_eps0(cone),
                   cone_aperture_for(cone, gamma));
}

KgonSolution solve_kgon(const ConeSpec& cone, int k, const ApertureGrid& grid,
                        const SolveConfig& cfg) {
  cone.validate();
  if (k < 2) throw Error(ErrorKind::InvalidArgument, "kgon: k must be >= 2");
  const std::size_t nq = cone.distances.size();
  GroupedProblem p;
  p.targets = kgon_targets(cone, k);
  p.gamma = cfg.gamma;
  p.eps0 = cone_eps0(cone);
  SolveTrace balance;
  p.masses = detail::balanced_masses(cone.masses, grid.total_mass(), cfg, balance);
  p.groups.resize(nq);
  for (int j = 0; j < k; ++j) {
    for (std::size_t q = 0; q < nq; ++q) {
      p.groups[q].push_back(static_cast<int>(j * nq + q));
    }
  }
  GroupedSolution gs = solve_grouped(p, grid, cfg);
  gs.trace.renormalization = balance.renormalization;

  KgonSolution out{k, gs.eccentricities,
                   compose_kgon(cone, gs.eccentricities, k, cfg.gamma), {},
                   std::move(gs.trace)};
  std::vector<double> per_target;
  for (int j = 0; j < k; ++j) {
    for (std::size_t q = 0; q < nq; ++q) per_target.push_back(p.masses[q] / k);
  }
  out.energy = energy_vector(out.refractor, grid, per_target);
  return out;
}

ConeSolution solve_cone(const ConeSpec& cone, const SourceDensity& g,
                        std::span<const int> k_schedule,
                        const SolveConfig& cfg) {
  cone.validate();
  if (k_schedule.empty()) {
    throw Error(ErrorKind::InvalidArgument, "cone: empty k schedule");
  }
  // Cell centres must avoid the sector boundaries of every k.
  long period = 2;
  for (int k : k_schedule) {
    if (k < 2) throw Error(ErrorKind::InvalidArgument, "cone: every k must be >= 2");
    period = std::lcm(period, 2L * k);
  }
  const long n_az = ((cfg.grid_resolution + period - 1) / period) * period;
  const ApertureGrid grid = build_grid(cone_aperture_for(cone, cfg.gamma),
                                       cfg.grid_resolution, g, static_cast<int>(n_az));
  ConeSolution s;
  for (int k : k_schedule) s.levels.push_back(solve_kgon(cone, k, grid, cfg));
  for (std::size_t i = 1; i < s.levels.size(); ++i) {
    double diff = 0.0;
    for (std::size_t q = 0; q < cone.distances.size(); ++q) {
      diff = std::max(diff, std::abs(s.levels[i].eps_per_distance[q] -
                                     s.levels[i - 1].eps_per_distance[q]));
    }
    if (!s.profile_differences.empty() &&
        diff > s.profile_differences.back() + 1e-12) {
      s.nonincreasing = false;
    }
    s.profile_differences.push_back(diff);
  }
  return s;
}

std::string to_json(const ConeSolution& s) {
  nlohmann::json j;
  j["schema"] = "vsr.cone/1";
  j["levels"] = nlohmann::json::array();
  for (const KgonSolution& l : s.levels) {
    j["levels"].push_back({{"k", l.k},
                           {"eps_per_distance", l.eps_per_distance},
                           {"sweeps", l.trace.sweeps},
                           {"max_abs_residual", l.energy.max_abs_residual()}});
  }
  j["profile_differences"] = s.profile_differences;
  j["nonincreasing"] = s.nonincreasing;
  return j.dump(2);
}

}  // namespace vsr
