#pragma once

#include "vsr/common.hpp"
#include "vsr/sphere.hpp"

#include <limits>
#include <sstream>

namespace vsr {

// Scalar kernels. `distance` is |x|, `eps` the eccentricity and `t` the
// cosine <m, k_x>. They do not validate; the Hyperboloid overloads below do.

/// Radial distance from the origin to the branch around x along a direction
/// with <m, k_x> = t. Valid for t > 1/eps.
template <typename Scalar>
Scalar polar_radius(Scalar distance, Scalar eps, Scalar t) {
  return distance * (eps * eps - Scalar(1)) /
         (Scalar(2) * eps * (eps * t - Scalar(1)));
}

template <typename Scalar>
Scalar d_radius_d_eccentricity(Scalar distance, Scalar eps, Scalar t) {
  const Scalar q = eps * (eps * t - Scalar(1));
  return -(distance / Scalar(2)) *
         (eps * eps - Scalar(2) * eps * t + Scalar(1)) / (q * q);
}

/// Radius of the directrix plane, the eps -> infinity limit.
template <typename Scalar>
Scalar plane_radius(Scalar distance, Scalar t) {
  return distance / (Scalar(2) * t);
}

template <typename Scalar>
Scalar vertex_radius(Scalar distance, Scalar eps) {
  return distance * (Scalar(1) + eps) / (Scalar(2) * eps);
}

/// Inverse of polar_radius in eps: the eccentricity whose branch passes at
/// `radius` along a direction with cosine t. Radius is decreasing in eps, so
/// for every eps below the returned value the branch lies farther out.
/// Returns +infinity when radius is at or inside the directrix plane.
template <typename Scalar>
Scalar eccentricity_through(Scalar distance, Scalar t, Scalar radius) {
  const Scalar a = Scalar(2) * radius * t - distance;
  if (!(a > Scalar(0))) {
    return std::numeric_limits<Scalar>::infinity();
  }
  // Larger root of a*eps^2 - 2*radius*eps + distance = 0.
  const Scalar disc = radius * radius - a * distance;
  using std::sqrt;
  const Scalar root = sqrt(disc > Scalar(0) ? disc : Scalar(0));
  return (radius + root) / a;
}

/// One sheet of a two-sheeted hyperboloid of revolution with foci at the
/// origin and at `focus`; the sheet enclosing `focus`.
template <typename Scalar>
class Hyperboloid {
 public:
  Hyperboloid(const Vector3<Scalar>& focus, Scalar eccentricity)
      : focus_(focus),
        distance_(focus.norm()),
        axis_(BasicDirection<Scalar>::from(focus)),
        eps_(eccentricity) {
    if (!(eccentricity > Scalar(1)) ||
        !std::isfinite(static_cast<double>(eccentricity))) {
      std::ostringstream os;
      os << "hyperboloid: eccentricity must be finite and > 1, got "
         << static_cast<double>(eccentricity);
      throw Error(ErrorKind::InvalidArgument, os.str());
    }
  }

  const Vector3<Scalar>& focus() const { return focus_; }
  Scalar focal_distance() const { return distance_; }
  const BasicDirection<Scalar>& focal_direction() const { return axis_; }
  Scalar eccentricity() const { return eps_; }

  Hyperboloid with_eccentricity(Scalar eps) const {
    return Hyperboloid(focus_, eps);
  }

 private:
  Vector3<Scalar> focus_;
  Scalar distance_;
  BasicDirection<Scalar> axis_;
  Scalar eps_;
};

using Hyperboloidd = Hyperboloid<double>;

/// m is in D_eps(x) iff <m, k_x> > 1/eps.
template <typename Scalar>
bool domain_contains(const Hyperboloid<Scalar>& h,
                     const BasicDirection<Scalar>& m) {
  return m.dot(h.focal_direction()) * h.eccentricity() > Scalar(1);
}

namespace detail {
template <typename Scalar>
Scalar checked_cosine(const Hyperboloid<Scalar>& h,
                      const BasicDirection<Scalar>& m) {
  const Scalar t = m.dot(h.focal_direction());
  if (!(t * h.eccentricity() > Scalar(1))) {
    std::ostringstream os;
    os << "hyperboloid: direction outside D_eps(x) (<m,k_x> = "
       << static_cast<double>(t)
       << ", 1/eps = " << static_cast<double>(Scalar(1) / h.eccentricity())
       << ")";
    throw Error(ErrorKind::Domain, os.str());
  }
  return t;
}
}  // namespace detail

template <typename Scalar>
Scalar polar_radius(const Hyperboloid<Scalar>& h,
                    const BasicDirection<Scalar>& m) {
  const Scalar t = detail::checked_cosine(h, m);
  return polar_radius(h.focal_distance(), h.eccentricity(), t);
}

template <typename Scalar>
Scalar d_radius_d_eccentricity(const Hyperboloid<Scalar>& h,
                               const BasicDirection<Scalar>& m) {
  const Scalar t = detail::checked_cosine(h, m);
  return d_radius_d_eccentricity(h.focal_distance(), h.eccentricity(), t);
}

template <typename Scalar>
struct SurfacePoint {
  Vector3<Scalar> point;
  BasicDirection<Scalar> normal;
};

/// Point m*h(m) and the unit normal from the two-focus gradient m - u,
/// u = (z - x)/|z - x|. Oriented so that <m, n> > 0.
template <typename Scalar>
SurfacePoint<Scalar> surface_point_and_normal(
    const Hyperboloid<Scalar>& h, const BasicDirection<Scalar>& m) {
  const Scalar r = polar_radius(h, m);
  const Vector3<Scalar> z = m.vec() * r;
  const Vector3<Scalar> to_focus = z - h.focus();
  const Scalar len = to_focus.norm();
  const Scalar tiny = Scalar(1e-14) * h.focal_distance();
  if (!(len > tiny)) {
    return {z, m};
  }
  const Vector3<Scalar> grad = m.vec() - to_focus / len;
  if (!(grad.norm() > Scalar(1e-14))) {
    return {z, m};
  }
  return {z, BasicDirection<Scalar>::from(grad)};
}

/// y = m - 2<m,n>n.
template <typename Scalar>
BasicDirection<Scalar> reflect(const BasicDirection<Scalar>& m,
                               const BasicDirection<Scalar>& n) {
  return BasicDirection<Scalar>::from(m.vec() -
                                      Scalar(2) * m.dot(n) * n.vec());
}

/// Snell refraction with index ratio c_f. c_f = -1 is the virtual-source
/// case and returns -reflect(m, n), which sends rays through the focus.
template <typename Scalar>
BasicDirection<Scalar> refract(const BasicDirection<Scalar>& m,
                               const BasicDirection<Scalar>& n, Scalar c_f) {
  const Scalar mn = m.dot(n);
  if (c_f == Scalar(-1)) {
    return -reflect(m, n);
  }
  const Scalar radicand = Scalar(1) - c_f * c_f * (Scalar(1) - mn * mn);
  if (radicand < Scalar(0)) {
    throw Error(ErrorKind::Domain, "refract: total internal reflection");
  }
  using std::sqrt;
  const Vector3<Scalar> y =
      c_f * m.vec() - (sqrt(radicand) - c_f * mn) * n.vec();
  return BasicDirection<Scalar>::from(y);
}

/// Distance from `point` to the line {origin + s*dir}.
template <typename Scalar>
Scalar line_point_distance(const Vector3<Scalar>& origin,
                           const BasicDirection<Scalar>& dir,
                           const Vector3<Scalar>& point) {
  const Vector3<Scalar> d = point - origin;
  return (d - d.dot(dir.vec()) * dir.vec()).norm();
}

}  // namespace vsr
