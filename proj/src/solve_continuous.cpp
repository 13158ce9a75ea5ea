#include "vsr/solver.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace vsr {

namespace {

struct Rule {
  std::vector<double> x, w;  // on [-1, 1]
};

Rule gauss_legendre(int n) {
  Rule r;
  r.x.resize(static_cast<std::size_t>(n));
  r.w.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    r.x[static_cast<std::size_t>(i)] = z;
    r.w[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return r;
}

const Rule& rule5() {
  static const Rule r = gauss_legendre(5);
  return r;
}

struct Box {
  double r0, r1, p0, p1, a0, a1;
};

/// Integral of u * f * r^2 sin(polar) over a spherical box, tensor
/// Gauss-Legendre with `rule` in each coordinate.
template <typename F>
void box_quadrature(const Frame& fr, const Box& b, const Rule& rule, F&& visit) {
  const double hr = 0.5 * (b.r1 - b.r0), cr = 0.5 * (b.r1 + b.r0);
  const double hp = 0.5 * (b.p1 - b.p0), cp = 0.5 * (b.p1 + b.p0);
  const double ha = 0.5 * (b.a1 - b.a0), ca = 0.5 * (b.a1 + b.a0);
  for (std::size_t i = 0; i < rule.x.size(); ++i) {
    const double r = cr + hr * rule.x[i];
    for (std::size_t j = 0; j < rule.x.size(); ++j) {
      const double p = cp + hp * rule.x[j];
      const double jac = r * r * std::sin(p) * hr * hp * ha * rule.w[i] * rule.w[j];
      for (std::size_t k = 0; k < rule.x.size(); ++k) {
        const double a = ca + ha * rule.x[k];
        visit(Vec3(r * fr.point(p, a)), jac * rule.w[k]);
      }
    }
  }
}

struct Counts {
  int r = 1, polar = 1, azimuth = 1;
};

/// Fewest boxes per coordinate with |r u - r' u'|^2 <= dr^2 + W^2 theta^2
/// at most cell_diameter^2, theta the angular diameter of a box.
Counts counts_for(const CapTargetRegion& region, double cell_diameter) {
  const double rho = region.polar_half_angle();
  const double part = cell_diameter / std::sqrt(2.0);
  const double span = region.W - region.w;
  const double theta = part / region.W;
  Counts c;
  c.r = span > 0.0 ? std::max(1, static_cast<int>(std::ceil(span / part))) : 1;
  if (2.0 * rho > theta) {
    // theta <= dp + sin(rho) da with each term at most theta / 2.
    c.polar = static_cast<int>(std::ceil(rho / (0.5 * theta)));
    c.azimuth = static_cast<int>(
        std::ceil(2.0 * std::numbers::pi * std::sin(rho) / (0.5 * theta)));
  }
  return c;
}

int round_up_to_multiple(int n, int base) { return ((n + base - 1) / base) * base; }

std::vector<Box> boxes_for(const CapTargetRegion& region, const Counts& c,
                           std::vector<double>* diameters) {
  const double rho = region.polar_half_angle();
  const double span = region.W - region.w;
  const double dr = span / c.r, dp = rho / c.polar;
  const double da = 2.0 * std::numbers::pi / c.azimuth;
  std::vector<Box> out;
  for (int i = 0; i < c.r; ++i) {
    for (int j = 0; j < c.polar; ++j) {
      const double p1 = (j + 1) * dp;
      const double ang = std::min(dp + std::sin(p1) * da, 2.0 * p1);
      for (int k = 0; k < c.azimuth; ++k) {
        out.push_back({region.w + i * dr, region.w + (i + 1) * dr, j * dp, p1,
                       k * da, (k + 1) * da});
        if (diameters) {
          diameters->push_back(std::sqrt(dr * dr + region.W * region.W * ang * ang));
        }
      }
    }
  }
  return out;
}

std::vector<PartitionCell> partition_boxes(const CapTargetRegion& region,
                                           const TargetDensity& f,
                                           const Counts& counts,
                                           RepresentativeRule rule);

}  // namespace

std::vector<PartitionCell> partition_region(const CapTargetRegion& region,
                                            const TargetDensity& f,
                                            double cell_diameter,
                                            RepresentativeRule rule) {
  region.validate();
  if (!(cell_diameter > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "partition: cell_diameter must be > 0");
  }
  return partition_boxes(region, f, counts_for(region, cell_diameter), rule);
}

namespace {

std::vector<PartitionCell> partition_boxes(const CapTargetRegion& region,
                                           const TargetDensity& f,
                                           const Counts& counts,
                                           RepresentativeRule rule) {
  const Frame fr = Frame::about(region.axis);
  std::vector<double> diam;
  const std::vector<Box> boxes = boxes_for(region, counts, &diam);
  std::vector<PartitionCell> cells;
  cells.reserve(boxes.size());
  for (std::size_t c = 0; c < boxes.size(); ++c) {
    const Box& b = boxes[c];
    CompensatedSum mass;
    Vec3 moment = Vec3::Zero();
    Vec3 first = Vec3::Zero();
    bool have_first = false;
    box_quadrature(fr, b, rule5(), [&](const Vec3& x, double w) {
      const double fx = f(x);
      if (!(fx >= 0.0) || !std::isfinite(fx)) {
        throw Error(ErrorKind::InvalidArgument,
                    "partition: target density must be finite and nonnegative");
      }
      if (!have_first) {
        first = x;
        have_first = true;
      }
      mass.add(fx * w);
      moment += fx * w * x;
    });
    PartitionCell cell{b.r0, b.r1, b.p0, b.p1, b.a0, b.a1, first, mass.value(), diam[c]};
    if (rule == RepresentativeRule::CentroidProjected && cell.mass > 0.0) {
      // Back into the box in spherical coordinates.
      const Vec3 m = moment / cell.mass;
      const double r = std::clamp(m.norm(), b.r0, b.r1);
      const Vec3 u = m.normalized();
      double polar = std::acos(std::clamp(u.dot(fr.e3), -1.0, 1.0));
      double az = std::atan2(u.dot(fr.e2), u.dot(fr.e1));
      if (az < 0.0) az += 2.0 * std::numbers::pi;
      polar = std::clamp(polar, b.p0, b.p1);
      if (b.a1 - b.a0 < 2.0 * std::numbers::pi) az = std::clamp(az, b.a0, b.a1);
      cell.representative = r * fr.point(polar, az);
    }
    cells.push_back(cell);
  }
  return cells;
}

}  // namespace

WeakDictionary WeakDictionary::standard(const CapTargetRegion& region) {
  WeakDictionary d;
  const Frame fr = Frame::about(region.axis);
  const Vec3 axes[3] = {fr.e1, fr.e2, fr.e3};
  const char* coord[3] = {"coord_1", "coord_2", "coord_3"};
  for (int i = 0; i < 3; ++i) {
    const Vec3 a = axes[i];
    d.names.push_back(coord[i]);
    d.functions.push_back([a](const Vec3& x) { return x.dot(a); });
  }
  d.names.push_back("radius");
  d.functions.push_back([](const Vec3& x) { return x.norm(); });
  const double span = region.W - region.w;
  const double width = std::max(span, 1e-12) / 8.0;
  for (double q : {0.25, 0.5, 0.75}) {
    const double c = region.w + q * span;
    std::ostringstream os;
    os << "radial_step_" << q;
    d.names.push_back(os.str());
    d.functions.push_back(
        [c, width](const Vec3& x) { return 1.0 / (1.0 + std::exp(-(x.norm() - c) / width)); });
  }
  return d;
}

namespace {

/// Reference integrals of every dictionary function against f dλ, on a
/// fixed fine tensor rule independent of the partition.
std::vector<double> reference_moments(const CapTargetRegion& region,
                                      const TargetDensity& f,
                                      const WeakDictionary& dict, double& total) {
  const Frame fr = Frame::about(region.axis);
  static const Rule fine = gauss_legendre(8);
  const double rho = region.polar_half_angle();
  constexpr int kR = 8, kP = 8, kA = 32;
  std::vector<CompensatedSum> sums(dict.functions.size());
  CompensatedSum mass;
  for (int i = 0; i < kR; ++i) {
    for (int j = 0; j < kP; ++j) {
      for (int k = 0; k < kA; ++k) {
        const Box b{region.w + (region.W - region.w) * i / kR,
                    region.w + (region.W - region.w) * (i + 1) / kR,
                    rho * j / kP, rho * (j + 1) / kP,
                    2.0 * std::numbers::pi * k / kA,
                    2.0 * std::numbers::pi * (k + 1) / kA};
        box_quadrature(fr, b, fine, [&](const Vec3& x, double w) {
          const double fx = f(x);
          if (!(fx >= 0.0) || !std::isfinite(fx)) {
            throw Error(ErrorKind::InvalidArgument,
                        "continuous: target density must be finite and nonnegative");
          }
          const double fw = fx * w;
          mass.add(fw);
          for (std::size_t u = 0; u < sums.size(); ++u) {
            sums[u].add(dict.functions[u](x) * fw);
          }
        });
      }
    }
  }
  total = mass.value();
  std::vector<double> out;
  for (const CompensatedSum& s : sums) out.push_back(s.value());
  return out;
}

}  // namespace

ContinuousSolution solve_continuous(const CapTargetRegion& region,
                                    const TargetDensity& f,
                                    const SourceDensity& g,
                                    const PartitionConfig& pcfg,
                                    const SolveConfig& cfg) {
  region.validate();
  if (!(pcfg.cell_diameter > 0.0) || pcfg.levels < 1) {
    throw Error(ErrorKind::InvalidArgument,
                "continuous: need cell_diameter > 0 and levels >= 1");
  }
  const double eps0 = epsilon0(region.stats());
  const ApertureSpec ap = cone_aperture(region.axis, region.polar_half_angle(),
                                        1.0 / (eps0 + cfg.gamma));
  const ApertureGrid grid = build_grid(ap, cfg.grid_resolution, g);
  const double mu = grid.total_mass();

  ContinuousSolution out;
  SolveConfig local = cfg;
  if (!local.eps_max) {
    // Nearly collinear cells need room up to the collinear scale 1/(K-1).
    const double K = region.W / region.w;
    double ref = eps0 + cfg.gamma;
    if (K > 1.0) ref = std::max(ref, 1.0 / (K - 1.0));
    local.eps_max = 10.0 * ref;
  }
  out.eps_max = *local.eps_max;
  const WeakDictionary dict = WeakDictionary::standard(region);
  double f_total = 0.0;
  const std::vector<double> ref = reference_moments(region, f, dict, f_total);
  out.total_mass = f_total;
  if (!(f_total > 0.0)) {
    out.warnings.push_back("target density has zero total mass; trivial refractor");
    return out;
  }

  // Each level refines the previous one: counts are rounded up to multiples
  // of the coarser counts, so every cell splits into whole children.
  double d = pcfg.cell_diameter;
  Counts counts = counts_for(region, d);
  for (int level = 0; level < pcfg.levels; ++level, d *= 0.5) {
    if (level > 0) {
      const Counts want = counts_for(region, d);
      counts = {round_up_to_multiple(want.r, counts.r),
                round_up_to_multiple(want.polar, counts.polar),
                round_up_to_multiple(want.azimuth, counts.azimuth)};
    }
    std::vector<PartitionCell> cells = partition_boxes(region, f, counts, pcfg.rule);
    WeakLevel wl;
    wl.cell_diameter = d;
    wl.cells = static_cast<int>(cells.size());
    std::erase_if(cells, [](const PartitionCell& c) { return !(c.mass > 0.0); });
    wl.nonempty = static_cast<int>(cells.size());

    CompensatedSum part_total;
    for (const PartitionCell& c : cells) part_total.add(c.mass);
    const double scale = mu / part_total.value();
    GroupedProblem p;
    p.gamma = cfg.gamma;
    p.eps0 = eps0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      p.targets.push_back(cells[i].representative);
      p.masses.push_back(cells[i].mass * scale);
      p.groups.push_back({static_cast<int>(i)});
    }
    const GroupedSolution gs = solve_grouped(p, grid, local);
    Refractor r(p.targets, gs.eccentricities, cfg.gamma, eps0, ap);
    EnergyReport energy = energy_vector(r, grid, p.masses);
    wl.max_residual = energy.max_abs_residual();

    // Both sides normalised to unit total mass.
    for (std::size_t u = 0; u < dict.functions.size(); ++u) {
      CompensatedSum lhs;
      for (std::size_t i = 0; i < cells.size(); ++i) {
        lhs.add(dict.functions[u](p.targets[i]) * energy.per_target[i].energy);
      }
      const double gap = std::abs(lhs.value() / mu - ref[u] / f_total);
      wl.per_function.push_back(gap);
      wl.gap = std::max(wl.gap, gap);
    }
    out.levels.push_back(wl);
    out.refractor = std::move(r);
    out.energy = std::move(energy);
  }
  return out;
}

std::string to_json(const ContinuousSolution& s) {
  nlohmann::json j;
  j["schema"] = "vsr.continuous/1";
  j["dictionary"] = WeakDictionary::kVersion;
  j["total_mass"] = s.total_mass;
  j["eps_max"] = s.eps_max;
  j["warnings"] = s.warnings;
  j["levels"] = nlohmann::json::array();
  for (const WeakLevel& l : s.levels) {
    j["levels"].push_back({{"cell_diameter", l.cell_diameter},
                           {"cells", l.cells},
                           {"nonempty", l.nonempty},
                           {"gap", l.gap},
                           {"per_function", l.per_function},
                           {"max_residual", l.max_residual}});
  }
  if (s.refractor) {
    const Eigen::VectorXd& e = s.refractor->eccentricities();
    j["eccentricities"] = std::vector<double>(e.data(), e.data() + e.size());
  }
  return j.dump(2);
}

}  // namespace vsr
