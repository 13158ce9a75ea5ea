#include "vsr/sphere.hpp"

#include "vsr/hypotheses.hpp"

#include <algorithm>
#include <numbers>
#include <sstream>

namespace vsr {

Frame Frame::about(const Direction& axis, const std::optional<Vec3>& reference) {
  const Vec3 e3 = axis.vec();
  Vec3 ref;
  bool usable = false;
  if (reference) {
    ref = *reference - reference->dot(e3) * e3;
    usable = ref.norm() > 1e-12 * std::max(1.0, reference->norm());
  }
  if (!usable) {
    Eigen::Index i = 0;
    e3.cwiseAbs().minCoeff(&i);
    const Vec3 basis = Vec3::Unit(i);
    ref = basis - basis.dot(e3) * e3;
  }
  Frame f;
  f.e3 = e3;
  f.e1 = ref.normalized();
  f.e2 = f.e3.cross(f.e1);
  return f;
}

Cap::Cap(const Direction& axis_in, double delta_in)
    : axis(axis_in), delta(delta_in) {
  if (!(delta > -1.0 && delta <= 1.0)) {
    std::ostringstream os;
    os << "cap: delta must lie in (-1, 1], got " << delta;
    throw Error(ErrorKind::InvalidArgument, os.str());
  }
}

double Cap::area() const { return 2.0 * std::numbers::pi * (1.0 - delta); }

namespace {

Direction central_axis_of(const std::vector<Cap>& caps) {
  if (caps.empty()) {
    throw Error(ErrorKind::InvalidArgument, "aperture: no caps");
  }
  Vec3 sum = Vec3::Zero();
  for (const Cap& c : caps) sum += c.axis.vec();
  if (sum.norm() < 1e-12) {
    throw Error(ErrorKind::Infeasible,
                "aperture: cap axes cancel, no central axis");
  }
  return Direction::from(sum);
}

}  // namespace

ApertureSpec::ApertureSpec(std::vector<Cap> caps, double delta_gamma,
                           std::optional<Vec3> reference)
    : caps_(std::move(caps)),
      delta_gamma_(delta_gamma),
      axis_(central_axis_of(caps_)),
      frame_(Frame::about(axis_, reference)),
      max_polar_(std::numbers::pi) {
  for (const Cap& c : caps_) {
    const double offset = std::acos(std::clamp(c.axis.dot(axis_), -1.0, 1.0));
    max_polar_ = std::min(max_polar_, offset + std::acos(c.delta));
  }
}

bool ApertureSpec::contains(const Direction& m) const {
  return std::all_of(caps_.begin(), caps_.end(),
                     [&](const Cap& c) { return c.contains_interior(m); });
}

double ApertureSpec::rim_polar_angle(double azimuth) const {
  const Vec3 radial =
      std::cos(azimuth) * frame_.e1 + std::sin(azimuth) * frame_.e2;
  double rim = std::numbers::pi;
  for (const Cap& c : caps_) {
    const double a = c.axis.dot(frame_.e3);
    const double b = c.axis.dot(radial);
    if (a <= c.delta) return 0.0;
    const double r = std::hypot(a, b);
    const double ratio = c.delta / r;
    if (ratio <= -1.0) continue;
    rim = std::min(rim, std::atan2(b, a) + std::acos(ratio));
  }
  return std::clamp(rim, 0.0, std::numbers::pi);
}

ApertureSpec aperture_for_targets(const std::vector<Vec3>& targets,
                                  double gamma) {
  if (!(gamma > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "aperture: gamma must be > 0");
  }
  const TargetStats stats = target_stats(targets);
  const double delta = 1.0 / (epsilon0(stats) + gamma);
  std::vector<Cap> caps;
  caps.reserve(targets.size());
  for (const Vec3& x : targets) caps.emplace_back(Direction::from(x), delta);
  return ApertureSpec(std::move(caps), delta);
}

ApertureSpec cone_aperture(const Direction& axis, double ring_polar,
                           double delta_gamma, std::optional<Vec3> reference) {
  const double opening = std::acos(std::clamp(delta_gamma, -1.0, 1.0));
  if (!(opening > ring_polar)) {
    std::ostringstream os;
    os << "cone aperture is empty: acos(delta_gamma) = " << opening
       << " <= ring polar angle " << ring_polar;
    throw Error(ErrorKind::Infeasible, os.str());
  }
  std::vector<Cap> caps{Cap(axis, std::cos(opening - ring_polar))};
  return ApertureSpec(std::move(caps), delta_gamma, reference);
}

double ApertureGrid::total_area() const {
  CompensatedSum s;
  for (Eigen::Index i = 0; i < areas_.size(); ++i) s.add(areas_[i]);
  return s.value();
}

ApertureGrid::CellBounds ApertureGrid::bounds(Eigen::Index i) const {
  const auto k = static_cast<std::size_t>(i);
  const double d_az = 2.0 * std::numbers::pi / n_azimuth_;
  return {band_[k] * d_polar_, (band_[k] + 1) * d_polar_, step_[k] * d_az,
          (step_[k] + 1) * d_az};
}

Direction ApertureGrid::sample_in_cell(Eigen::Index i, double u1,
                                       double u2) const {
  const CellBounds b = bounds(i);
  const double c0 = std::cos(b.polar0);
  const double c1 = std::cos(b.polar1);
  const double cz = c0 + u1 * (c1 - c0);
  const double az = b.azimuth0 + u2 * (b.azimuth1 - b.azimuth0);
  const double s = std::sqrt(std::max(0.0, 1.0 - cz * cz));
  const Frame& f = frame();
  return Direction::from(cz * f.e3 +
                         s * (std::cos(az) * f.e1 + std::sin(az) * f.e2));
}

ApertureGrid build_grid(const ApertureSpec& spec, int resolution,
                        const SourceDensity& g, int azimuth_steps) {
  if (resolution < 8) {
    throw Error(ErrorKind::InvalidArgument, "grid: resolution must be >= 8");
  }
  ApertureGrid grid(spec);
  grid.n_polar_ = resolution;
  grid.n_azimuth_ = azimuth_steps > 0 ? azimuth_steps : resolution;
  grid.d_polar_ = spec.max_polar_angle() / resolution;
  const double d_az = 2.0 * std::numbers::pi / grid.n_azimuth_;
  const Frame& f = spec.frame();

  std::vector<Vec3> centers;
  std::vector<double> areas;
  std::vector<double> gs;
  for (int b = 0; b < grid.n_polar_; ++b) {
    const double p0 = b * grid.d_polar_;
    const double p1 = (b + 1) * grid.d_polar_;
    const double pc = (b + 0.5) * grid.d_polar_;
    const double band_area = d_az * (std::cos(p0) - std::cos(p1));
    for (int s = 0; s < grid.n_azimuth_; ++s) {
      const Direction m = Direction::from(f.point(pc, (s + 0.5) * d_az));
      if (!spec.contains(m)) continue;
      const double gv = g(m);
      if (!(gv >= 0.0) || !std::isfinite(gv)) {
        throw Error(ErrorKind::InvalidArgument,
                    "grid: source density must be finite and nonnegative");
      }
      centers.push_back(m.vec());
      areas.push_back(band_area);
      gs.push_back(gv);
      grid.band_.push_back(b);
      grid.step_.push_back(s);
    }
  }
  if (centers.empty()) {
    throw Error(ErrorKind::Infeasible, "grid: aperture contains no cells");
  }
  const auto n = static_cast<Eigen::Index>(centers.size());
  grid.centers_.resize(3, n);
  grid.areas_.resize(n);
  grid.g_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    grid.centers_.col(i) = centers[k];
    grid.areas_[i] = areas[k];
    grid.g_[i] = gs[k];
  }
  grid.masses_ = grid.g_.cwiseProduct(grid.areas_);
  CompensatedSum total;
  for (Eigen::Index i = 0; i < n; ++i) total.add(grid.masses_[i]);
  grid.total_mass_ = total.value();
  return grid;
}

bool ConeRegion::contains(const Vec3& p) const {
  const Vec3 d = p - apex;
  if (d.norm() == 0.0) return false;
  return base.contains(Direction::from(d));
}

}  // namespace vsr
