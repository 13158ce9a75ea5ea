#pragma once

#include "vsr/common.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace vsr {

/// Unit vector on S^2. Construction normalizes; the zero vector is rejected.
template <typename Scalar>
class BasicDirection {
 public:
  static BasicDirection from(const Vector3<Scalar>& v) {
    const Scalar n = v.norm();
    if (!(n > Scalar(0)) || !std::isfinite(static_cast<double>(n))) {
      throw Error(ErrorKind::InvalidArgument,
                  "direction: cannot normalize a zero or non-finite vector");
    }
    return BasicDirection(v / n);
  }

  const Vector3<Scalar>& vec() const { return u_; }
  Scalar operator[](int i) const { return u_[i]; }
  Scalar dot(const BasicDirection& other) const { return u_.dot(other.u_); }
  Scalar dot(const Vector3<Scalar>& other) const { return u_.dot(other); }
  BasicDirection operator-() const { return BasicDirection(-u_); }

  template <typename Other>
  BasicDirection<Other> cast() const {
    return BasicDirection<Other>::from(u_.template cast<Other>());
  }

 private:
  explicit BasicDirection(const Vector3<Scalar>& unit) : u_(unit) {}
  Vector3<Scalar> u_;
};

using Direction = BasicDirection<double>;

template <typename Scalar>
BasicDirection<Scalar> make_direction(const Vector3<Scalar>& v) {
  return BasicDirection<Scalar>::from(v);
}

inline Direction make_direction(double x, double y, double z) {
  return Direction::from(Vec3(x, y, z));
}

/// Right-handed orthonormal frame whose third axis is `axis`.
struct Frame {
  Vec3 e1;
  Vec3 e2;
  Vec3 e3;

  /// `reference` fixes the azimuth origin; it is projected off the axis.
  static Frame about(const Direction& axis,
                     const std::optional<Vec3>& reference = std::nullopt);

  Vec3 point(double polar, double azimuth) const {
    const double s = std::sin(polar);
    return std::cos(polar) * e3 +
           s * (std::cos(azimuth) * e1 + std::sin(azimuth) * e2);
  }
};

/// Closed spherical cap {m : <m, axis> >= delta}.
struct Cap {
  Direction axis;
  double delta;

  Cap(const Direction& axis, double delta);

  bool contains(const Direction& m) const { return m.dot(axis) >= delta; }
  bool contains_interior(const Direction& m) const {
    return m.dot(axis) > delta;
  }
  /// Area 2*pi*(1 - delta).
  double area() const;
};

/// Interior of an intersection of caps. All caps built by
/// aperture_for_targets share the threshold delta_gamma.
class ApertureSpec {
 public:
  ApertureSpec(std::vector<Cap> caps, double delta_gamma,
               std::optional<Vec3> reference = std::nullopt);

  const std::vector<Cap>& caps() const { return caps_; }
  double delta_gamma() const { return delta_gamma_; }

  /// Axis used by grids and meshes: the normalized sum of the cap axes.
  const Direction& central_axis() const { return axis_; }
  const Frame& frame() const { return frame_; }

  bool contains(const Direction& m) const;

  /// Polar angle (about the central axis) of the aperture boundary along the
  /// meridian at `azimuth`.
  double rim_polar_angle(double azimuth) const;

  /// Upper bound on the polar angle of any aperture point.
  double max_polar_angle() const { return max_polar_; }

 private:
  std::vector<Cap> caps_;
  double delta_gamma_;
  Direction axis_;
  Frame frame_;
  double max_polar_;
};

/// D_T for a finite target set: caps of threshold 1/(eps0 + gamma) about
/// every target direction. Throws Infeasible when the targets violate H1.
ApertureSpec aperture_for_targets(const std::vector<Vec3>& targets,
                                  double gamma);

/// Aperture for a cone target ring: the single cap about `axis` of all
/// directions lying inside every cap of threshold delta_gamma centred on a
/// direction at polar angle `ring_polar` from the axis.
ApertureSpec cone_aperture(const Direction& axis, double ring_polar,
                           double delta_gamma,
                           std::optional<Vec3> reference = std::nullopt);

using SourceDensity = std::function<double(const Direction&)>;

/// Latitude/longitude quadrature over an aperture. Cells are kept when their
/// centre lies in the aperture; areas are exact spherical-rectangle areas.
class ApertureGrid {
 public:
  struct CellBounds {
    double polar0, polar1, azimuth0, azimuth1;
  };

  Eigen::Index size() const { return centers_.cols(); }
  const Eigen::Matrix3Xd& centers() const { return centers_; }
  const Eigen::VectorXd& areas() const { return areas_; }
  const Eigen::VectorXd& g_values() const { return g_; }
  /// g * area per cell.
  const Eigen::VectorXd& masses() const { return masses_; }
  double total_mass() const { return total_mass_; }
  double total_area() const;

  Direction center(Eigen::Index i) const {
    return Direction::from(centers_.col(i));
  }
  CellBounds bounds(Eigen::Index i) const;
  /// Area-uniform point in cell i from two uniforms in [0, 1).
  Direction sample_in_cell(Eigen::Index i, double u1, double u2) const;

  const ApertureSpec& aperture() const { return aperture_; }
  const Frame& frame() const { return aperture_.frame(); }
  int polar_bands() const { return n_polar_; }
  int azimuth_steps() const { return n_azimuth_; }
  double polar_step() const { return d_polar_; }

 private:
  friend ApertureGrid build_grid(const ApertureSpec&, int,
                                 const SourceDensity&, int);
  explicit ApertureGrid(ApertureSpec spec) : aperture_(std::move(spec)) {}

  ApertureSpec aperture_;
  int n_polar_ = 0;
  int n_azimuth_ = 0;
  double d_polar_ = 0.0;
  Eigen::Matrix3Xd centers_;
  Eigen::VectorXd areas_;
  Eigen::VectorXd g_;
  Eigen::VectorXd masses_;
  std::vector<int> band_;
  std::vector<int> step_;
  double total_mass_ = 0.0;
};

/// `resolution` polar bands over [0, max_polar_angle]; `azimuth_steps`
/// defaults to `resolution`.
ApertureGrid build_grid(const ApertureSpec& spec, int resolution,
                        const SourceDensity& g, int azimuth_steps = 0);

/// Union of rays from `apex` whose directions lie in `base`.
struct ConeRegion {
  Vec3 apex;
  ApertureSpec base;

  bool contains(const Vec3& p) const;
};

}  // namespace vsr
