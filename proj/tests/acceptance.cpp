// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include "vsr/energy.hpp"
#include "vsr/hyperboloid.hpp"
#include "vsr/hypotheses.hpp"
#include "vsr/raytrace.hpp"
#include "vsr/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

using namespace vsr;
using std::numbers::pi;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Line {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

SourceDensity one() {
  return [](const Direction&) { return 1.0; };
}

// A point set in a small cap about +z with random masses.
struct Problem {
  std::vector<Vec3> targets;
  std::vector<double> fractions;
};

Problem random_problem(int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Problem p;
  double sum = 0.0;
  for (int i = 0; i < k; ++i) {
    const double a = 0.08 * std::sqrt(u(rng)), phi = 2 * pi * u(rng);
    const double d = 1.0 + 0.25 * u(rng);
    p.targets.push_back(d * Vec3(std::sin(a) * std::cos(phi), std::sin(a) * std::sin(phi), std::cos(a)));
    p.fractions.push_back(0.3 + u(rng));
    sum += p.fractions.back();
  }
  for (double& f : p.fractions) f /= sum;
  return p;
}

// Owners by brute force over the radial functions at the cell centres,
// lowest index on ties.
std::vector<int> oracle_owners(const std::vector<Vec3>& x, const Eigen::VectorXd& eps,
                               const ApertureGrid& grid) {
  std::vector<int> owner(static_cast<std::size_t>(grid.centers().cols()), -1);
  for (Eigen::Index n = 0; n < grid.centers().cols(); ++n) {
    const Vec3 m = grid.centers().col(n);
    int best = -1;
    double br = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i].norm();
      const double t = m.dot(x[i]) / d;
      const double e = eps[static_cast<Eigen::Index>(i)];
      if (!(t * e > 1.0)) continue;
      const double r = d * (e * e - 1.0) / (2.0 * e * (e * t - 1.0));
      if (r > br) {
        br = r;
        best = static_cast<int>(i);
      }
    }
    owner[static_cast<std::size_t>(n)] = best;
  }
  return owner;
}

Eigen::VectorXd oracle_energies(const std::vector<Vec3>& x, const Eigen::VectorXd& eps,
                                const ApertureGrid& grid) {
  Eigen::VectorXd G = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(x.size()));
  const std::vector<int> owner = oracle_owners(x, eps, grid);
  for (std::size_t n = 0; n < owner.size(); ++n) {
    if (owner[n] >= 0) G[owner[n]] += grid.masses()[static_cast<Eigen::Index>(n)];
  }
  return G;
}

std::vector<std::string> conservation_log;
double worst_conservation = 0.0;

void record_conservation(const std::string& name, const EnergyReport& e, double mu) {
  const double dev = std::abs(e.total - mu) / mu;
  worst_conservation = std::max(worst_conservation, dev);
  conservation_log.push_back(name);
}

// 1
Line focal_property() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n;
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 x = (0.5 + 4.5 * u(rng)) * Vec3(n(rng), n(rng), n(rng)).normalized();
    const double eps = 1.0 + std::pow(10.0, -3.0 + 4.7 * u(rng));
    const Hyperboloidd h(x, eps);
    // direction with <m, k_x> in (1/eps, 1]
    const double t = 1.0 / eps + (1.0 - 1.0 / eps) * (0.001 + 0.999 * u(rng));
    const Vec3 kx = x.normalized();
    Vec3 w = Vec3(n(rng), n(rng), n(rng));
    w = (w - w.dot(kx) * kx).normalized();
    const Direction m = Direction::from(t * kx + std::sqrt(1 - t * t) * w);
    const SurfacePoint<double> sp = surface_point_and_normal(h, m);
    const Direction out = refract(m, sp.normal, -1.0);
    const Vec3 to = x - sp.point;
    const double miss = (to - to.dot(out.vec()) * out.vec()).norm() / x.norm();
    worst = std::max(worst, miss);
  }
  const double s = seconds_since(t0);
  return {worst <= 1e-9 && s < 5.0, fmt("max miss/|x| = %.2e over 1e4 triples, %.2f s", worst, s)};
}

// 2
Line audit() {
  const auto t0 = Clock::now();
  const AuditReport r = audit_h1_h2(100000, 2);
  const double s = seconds_since(t0);
  return {r.samples >= 100000 && r.eps0_below_one == 0 && r.joint_h2 == 0 && s < 5.0,
          fmt("%lld samples: eps0 < 1 in %lld, joint H2 in %lld, min eps0 = %.6f, %.2f s",
              static_cast<long long>(r.samples), static_cast<long long>(r.eps0_below_one),
              static_cast<long long>(r.joint_h2), r.min_eps0, s)};
}

// 3
Line vertex_and_derivative() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double wv = 0.0, wd = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double d = 0.1 + 10.0 * u(rng);
    const double eps = 1.0 + std::pow(10.0, -2.0 + 4.0 * u(rng));
    const double v = d * (1.0 + eps) / (2.0 * eps);
    wv = std::max(wv, std::abs(polar_radius(d, eps, 1.0) - v) / v);
    const double t = 1.0 / eps + (1.0 - 1.0 / eps) * (0.05 + 0.95 * u(rng));
    // step well inside the distance to the pole at eps = 1/t
    const long double hstep = 1e-4L * std::min(eps - 1.0, eps - 1.0 / t);
    auto h = [&](long double e) {
      return static_cast<long double>(d) * (e * e - 1) / (2 * e * (e * t - 1));
    };
    const long double fd = (h(eps + hstep) - h(eps - hstep)) / (2 * hstep);
    const double an = d_radius_d_eccentricity(d, eps, t);
    wd = std::max(wd, static_cast<double>(std::abs(an - fd) / std::abs(fd)));
  }
  return {wv <= 1e-12 && wd <= 1e-6,
          fmt("vertex rel err %.2e, derivative rel err %.2e over 1e3 cases", wv, wd)};
}

// 4
Line plane_limit() {
  const double d = 1.7;
  double prev = std::numeric_limits<double>::infinity(), last = 0.0;
  bool mono = true;
  std::string devs;
  for (double eps : {10.0, 1e2, 1e3, 1e4}) {
    double sup = 0.0;
    for (int i = 0; i <= 2000; ++i) {
      const double t = 0.9 + 0.1 * i / 2000.0;
      sup = std::max(sup, std::abs(polar_radius(d, eps, t) - d / (2 * t)));
    }
    mono = mono && sup < prev;
    prev = last = sup;
    devs += fmt(" %.2e", sup / d);
  }
  return {mono && last <= 1e-3 * d, "sup deviation/|x| for eps = 1e1..1e4:" + devs};
}

struct SolvedScene {
  std::string name;
  Problem p;
  DiscreteSolution s;
  double seconds;
};

}  // namespace

int main() {
  std::vector<Line> lines(13);
  lines[1] = focal_property();
  lines[2] = audit();
  lines[3] = vertex_and_derivative();
  lines[4] = plane_limit();

  // 6: golden discrete scenes
  std::vector<SolvedScene> golden;
  {
    bool ok = true;
    std::string detail;
    int n = 0;
    for (int k : {2, 3, 5, 7, 10}) {
      const Problem p = random_problem(k, 600 + static_cast<std::uint64_t>(k));
      SolveConfig cfg;
      cfg.grid_resolution = 512;
      cfg.tolerance = 1e-3;
      cfg.max_sweeps = 200;
      cfg.masses_are_fractions = true;
      const auto t0 = Clock::now();
      std::optional<DiscreteSolution> sol;
      try {
        sol = solve_discrete(p.targets, p.fractions, one(), cfg);
      } catch (const Error& e) {
        ok = false;
        detail += fmt(" k=%d threw: %s;", k, e.what());
        continue;
      }
      SolvedScene sc{fmt("k%d", k), p, std::move(*sol), seconds_since(t0)};
      const double total = sc.s.grid.total_mass();
      const Eigen::VectorXd G = oracle_energies(sc.p.targets, sc.s.refractor.eccentricities(), sc.s.grid);
      double res = 0.0;
      for (int i = 0; i < k; ++i) res = std::max(res, std::abs(G[i] - sc.p.fractions[static_cast<std::size_t>(i)] * total));
      const bool good = sc.s.trace.converged && sc.s.trace.sweeps <= 200 && sc.seconds <= 60.0 &&
                        res <= 1e-3 * total;
      ok = ok && good;
      detail += fmt(" k=%d: %d sweeps, %.2f s, residual %.1e;", k, sc.s.trace.sweeps, sc.seconds, res / total);
      record_conservation(sc.name, sc.s.energy, total);
      golden.push_back(std::move(sc));
      ++n;
    }
    lines[6] = {ok && n == 5, "res 512, tol 1e-3:" + detail};
  }

  // 7: restarts from different starts
  {
    bool ok = !golden.empty();
    double worst = 0.0;
    std::string detail;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const SolvedScene& sc : golden) {
      const Eigen::VectorXd& e = sc.s.refractor.eccentricities();
      SolveConfig cfg;
      cfg.grid_resolution = 512;
      cfg.masses_are_fractions = true;
      std::vector<double> init;
      for (Eigen::Index i = 0; i < e.size(); ++i) {
        init.push_back(e[i] + (0.1 + 0.9 * u(rng)) * (sc.s.trace.eps_max - e[i]));
      }
      cfg.initial = init;
      try {
        const DiscreteSolution b = solve_discrete(sc.p.targets, sc.p.fractions, one(), cfg);
        const Eigen::VectorXd& eb = b.refractor.eccentricities();
        double diff = 0.0;
        bool below = false, above = false;
        for (Eigen::Index i = 0; i < e.size(); ++i) {
          diff = std::max(diff, std::abs(e[i] - eb[i]));
          below = below || e[i] < eb[i] - 1e-4;
          above = above || e[i] > eb[i] + 1e-4;
        }
        const UniquenessVerdict v = check_uniqueness(sc.s.refractor, b.refractor, sc.s.grid);
        worst = std::max(worst, diff);
        ok = ok && diff <= 1e-4 && !(below && above) && !v.violation;
        record_conservation(sc.name + " restart", b.energy, b.grid.total_mass());
      } catch (const Error& ex) {
        ok = false;
        detail += fmt(" %s threw: %s;", sc.name.c_str(), ex.what());
      }
    }
    lines[7] = {ok, fmt("max |eps_a - eps_b| = %.2e over %zu scenes, no mixed ordering", worst, golden.size()) + detail};
  }

  // 8: +1% perturbation
  {
    bool ok = true;
    int checked = 0;
    double worst_rise = 0.0, worst_drop = 0.0;
    long bad_cells = 0;
    for (int s = 0; s < 10; ++s) {
      const int k = 2 + s % 6;
      const Problem p = random_problem(k, 800 + static_cast<std::uint64_t>(s));
      SolveConfig cfg;
      cfg.grid_resolution = 256;
      cfg.masses_are_fractions = true;
      std::optional<DiscreteSolution> solved;
      try {
        solved = solve_discrete(p.targets, p.fractions, one(), cfg);
      } catch (const Error&) {
        ok = false;
        continue;
      }
      const DiscreteSolution& sol = *solved;
      record_conservation(fmt("perturb%d", s), sol.energy, sol.grid.total_mass());
      const Eigen::VectorXd& e = sol.refractor.eccentricities();
      const std::vector<int> own = oracle_owners(p.targets, e, sol.grid);
      const EnergyReport base = energy_vector(sol.refractor, sol.grid);
      const double total = sol.grid.total_mass();
      for (int i = 0; i < k; ++i) {
        Eigen::VectorXd e2 = e;
        e2[i] *= 1.01;
        // cellwise: i may only lose cells, and only to others
        const std::vector<int> own2 = oracle_owners(p.targets, e2, sol.grid);
        for (std::size_t n = 0; n < own.size(); ++n) {
          if (own2[n] != own[n] && (own[n] != i || own2[n] == i)) ++bad_cells;
        }
        const EnergyReport lib = energy_vector(sol.refractor.with_eccentricities(
                                                   std::vector<double>(e2.data(), e2.data() + e2.size())),
                                               sol.grid);
        for (std::size_t j = 0; j < static_cast<std::size_t>(k); ++j) {
          const double d = (lib.per_target[j].energy - base.per_target[j].energy) / total;
          if (static_cast<int>(j) == i) {
            worst_rise = std::max(worst_rise, d);
          } else {
            worst_drop = std::max(worst_drop, -d);
          }
        }
        ++checked;
      }
    }
    // energies are sums in different orders; allow rounding
    ok = ok && bad_cells == 0 && worst_rise <= 1e-12 && worst_drop <= 1e-12;
    lines[8] = {ok, fmt("%d perturbations over 10 scenes: %ld cells moved the wrong way, "
                        "max rise of G_i %.1e, max drop of G_j %.1e (of total)",
                        checked, bad_cells, worst_rise, worst_drop)};
  }

  // 9: symmetry
  std::vector<SolvedScene> extra;
  {
    bool ok = true;
    std::string detail;
    const Problem mp{{Vec3(0.1, 0, 1), Vec3(-0.1, 0, 1)}, {0.5, 0.5}};
    SolveConfig cfg;
    cfg.grid_resolution = 512;
    cfg.masses_are_fractions = true;
    SolvedScene pair{"mirror", mp, solve_discrete(mp.targets, mp.fractions, one(), cfg), 0.0};
    const Eigen::VectorXd& e = pair.s.refractor.eccentricities();
    const double de = std::abs(e[0] - e[1]);
    ok = ok && de <= 1e-6;
    detail += fmt("mirror |eps1 - eps2| = %.1e;", de);
    record_conservation("mirror", pair.s.energy, pair.s.grid.total_mass());
    extra.push_back(std::move(pair));

    const ConeSpec cone{Direction::from(Vec3::UnitZ()), Vec3::UnitX(), 0.02, {1.0, 1.15}, {0.55, 0.45}};
    double rot = 0.0;
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n;
    for (int k : {2, 3, 4, 8, 16}) {
      const Refractor r = compose_kgon(cone, std::vector<double>{7.0, 20.0}, k, 0.1);
      for (int i = 0; i < 1000; ++i) {
        const Vec3 v(0.2 * n(rng), 0.2 * n(rng), 1.0);
        const Vec3 w = Eigen::AngleAxisd(2 * pi / k, Vec3::UnitZ()) * v;
        const double a = radial(r, Direction::from(v)), b = radial(r, Direction::from(w));
        rot = std::max(rot, std::abs(a - b) / a);
      }
    }
    ok = ok && rot <= 1e-10;
    detail += fmt(" k-gon rotation rel err %.1e;", rot);

    SolveConfig ccfg;
    ccfg.grid_resolution = 512;
    ccfg.masses_are_fractions = true;
    const ApertureGrid grid = build_grid(cone_aperture_for(cone, 0.1), 512, one(), 512);
    const KgonSolution ks = solve_kgon(cone, 8, grid, ccfg);
    record_conservation("kgon8", ks.energy, grid.total_mass());
    double spread = 0.0;
    for (std::size_t q = 0; q < 2; ++q) {
      double lo = 1e300, hi = -1e300;
      for (std::size_t j = 0; j < 8; ++j) {
        lo = std::min(lo, ks.energy.per_target[j * 2 + q].energy);
        hi = std::max(hi, ks.energy.per_target[j * 2 + q].energy);
      }
      spread = std::max(spread, (hi - lo) / grid.total_mass());
    }
    // sectors hold identical cell sets, so agreement is to rounding
    ok = ok && spread <= 1e-12;
    detail += fmt(" k=8 sector energy spread %.1e of total", spread);
    lines[9] = {ok, detail};
  }

  // 10: cone schedule
  {
    const ConeSpec cone{Direction::from(Vec3::UnitZ()), Vec3::UnitX(), 0.02, {1.0, 1.1, 1.2}, {0.3, 0.4, 0.3}};
    SolveConfig cfg;
    cfg.grid_resolution = 512;
    cfg.masses_are_fractions = true;
    const std::vector<int> ks{4, 8, 16};
    try {
      const ConeSolution cs = solve_cone(cone, one(), ks, cfg);
      std::vector<double> diffs;
      for (std::size_t i = 1; i < cs.levels.size(); ++i) {
        double d = 0.0;
        for (std::size_t q = 0; q < 3; ++q) {
          d = std::max(d, std::abs(cs.levels[i].eps_per_distance[q] - cs.levels[i - 1].eps_per_distance[q]));
        }
        diffs.push_back(d);
      }
      for (const KgonSolution& l : cs.levels) record_conservation(fmt("cone k%d", l.k), l.energy, l.energy.total);
      lines[10] = {diffs.size() == 2 && diffs[1] <= diffs[0],
                   fmt("profile differences |8-4| = %.3e, |16-8| = %.3e", diffs[0], diffs[1])};
    } catch (const Error& e) {
      lines[10] = {false, std::string("threw: ") + e.what()};
    }
  }

  // 11: weak-* gap
  {
    const CapTargetRegion region{Direction::from(Vec3::UnitZ()), 1e-6, 1.0, 1.1};
    PartitionConfig p;
    p.cell_diameter = 0.2;
    p.levels = 3;
    SolveConfig cfg;
    cfg.grid_resolution = 1024;
    cfg.tolerance = 1e-3;
    try {
      const auto t0 = Clock::now();
      const ContinuousSolution cs =
          solve_continuous(region, [](const Vec3&) { return 1.0; }, one(), p, cfg);
      int run = 0, best = 0;
      std::string gaps;
      for (std::size_t i = 0; i < cs.levels.size(); ++i) {
        gaps += fmt(" %.3e (%d cells)", cs.levels[i].gap, cs.levels[i].nonempty);
        if (i > 0) {
          run = cs.levels[i].gap < cs.levels[i - 1].gap ? run + 1 : 0;
          best = std::max(best, run);
        }
      }
      lines[11] = {best >= 2, "gaps:" + gaps + fmt(", %.1f s", seconds_since(t0))};
    } catch (const Error& e) {
      lines[11] = {false, std::string("threw: ") + e.what()};
    }
  }

  // 12: Monte Carlo against quadrature on the golden scenes
  {
    bool ok = true;
    double worst = 0.0;
    int scenes = 0;
    std::string detail;
    auto check = [&](const SolvedScene& sc, std::uint64_t seed) {
      const TraceReport a = monte_carlo_verify(sc.s.refractor, sc.s.grid, std::nullopt, 1000000, seed);
      const TraceReport b = monte_carlo_verify(sc.s.refractor, sc.s.grid, std::nullopt, 1000000, seed);
      // independent z from the counts
      const double total = sc.s.grid.total_mass();
      for (std::size_t i = 0; i < a.counts.size(); ++i) {
        const double p = static_cast<double>(a.counts[i]) / 1e6;
        const double se = total * std::sqrt(p * (1 - p) / 1e6);
        const double q = sc.s.energy.per_target[i].energy;
        const double z = se > 0 ? std::abs(total * p - q) / se : (total * p == q ? 0.0 : 1e300);
        worst = std::max(worst, z);
        ok = ok && z <= 3.0;
      }
      ok = ok && to_json(a) == to_json(b) && a.rays_hit_target == a.rays_total - a.tie_rays;
      ++scenes;
    };
    for (const SolvedScene& sc : golden) check(sc, 1200 + static_cast<std::uint64_t>(scenes));
    for (const SolvedScene& sc : extra) check(sc, 1200 + static_cast<std::uint64_t>(scenes));
    lines[12] = {ok && scenes > 0, fmt("1e6 rays on %d scenes: max |z| = %.2f, reruns bit-identical", scenes, worst)};
  }

  lines[5] = {worst_conservation <= 1e-12 && !conservation_log.empty(),
              fmt("max |sum G - mu|/mu = %.1e over %zu solved scenes", worst_conservation,
                  conservation_log.size())};

  static const char* names[] = {"",
                                "focal property",
                                "hypothesis audit",
                                "vertex identity and derivative",
                                "plane limit",
                                "conservation",
                                "discrete solve",
                                "uniqueness",
                                "energy monotonicity",
                                "symmetry",
                                "cone convergence",
                                "weak-* diagnostic",
                                "estimator cross-validation"};
  int failed = 0;
  for (int i = 1; i <= 12; ++i) {
    std::printf("%s %2d %s: %s\n", lines[static_cast<std::size_t>(i)].pass ? "PASS" : "FAIL", i, names[i],
                lines[static_cast<std::size_t>(i)].detail.c_str());
    failed += lines[static_cast<std::size_t>(i)].pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
