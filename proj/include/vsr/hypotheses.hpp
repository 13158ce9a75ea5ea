#pragma once

#include "vsr/common.hpp"
#include "vsr/sphere.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vsr {

/// Extremes of a target set: nearest and farthest distance and the smallest
/// pairwise cosine between target directions.
struct TargetStats {
  double ell = 0.0;
  double L = 0.0;
  double c = 1.0;
  /// L / ell.
  double ratio = 1.0;
};

TargetStats target_stats(const std::vector<Vec3>& points);

/// Stats of the ring-on-cone target {d * m : d in [dmin, dmax], m at polar
/// angle `ring_polar` about the axis}: c is the cosine of the opening angle.
TargetStats cone_target_stats(double ring_polar, double dmin, double dmax);

struct H1Verdict {
  bool pass = false;
  /// 2*ell*c > L with ell > 0 forces c > 0, hence a half-space.
  bool half_space_implied = false;
  std::string failed;  // empty on pass
  double lhs = 0.0;    // 2*ell*c
  double rhs = 0.0;    // L
};

H1Verdict check_h1(const TargetStats& s);

/// Minimal eccentricity scale
/// (ell + sqrt(ell^2 - 2 L ell c + L^2)) / (2 ell c - L).
/// Throws Infeasible when H1 fails.
double epsilon0(const TargetStats& s);

/// 1/(K-1) for collinear targets with K = L/ell; +infinity at K = 1.
/// Throws Infeasible for K >= 2.
double collinear_eps_upper(const TargetStats& s);

/// S(m*, xi) = {x : w <= |x| <= W, <k_x, m*> >= 1 - xi}.
struct CapTargetRegion {
  Direction axis;
  double xi;
  double w;
  double W;

  /// 1 - cos(acos(W / (2w)) / 2).
  static double xi_bound(double w, double W);

  /// Throws InvalidArgument naming the violated bound.
  void validate() const;
  bool contains(const Vec3& x) const;
  /// Polar half-angle acos(1 - xi).
  double polar_half_angle() const { return std::acos(1.0 - xi); }
  TargetStats stats() const;
};

/// The two H2 inequalities with ell = 1 and L = 1 + delta:
/// margin_positive is 2 - L*eps0 > 0, eps0_above_bound is
/// eps0 > (eps0 + sqrt(eps0^2 - 2 L eps0 + L^2 eps0^2)) / (2 - L*eps0).
struct H2Check {
  double eps0;
  bool margin_positive;
  bool eps0_above_bound;
};

H2Check evaluate_h2(double delta, double c);

struct AuditWitness {
  double delta;
  double c;
  double eps0;
  std::string kind;  // "eps0_below_one" or "joint_h2"
};

struct AuditReport {
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
  std::int64_t eps0_below_one = 0;
  std::int64_t joint_h2 = 0;
  std::int64_t margin_positive_true = 0;
  std::int64_t eps0_above_bound_true = 0;
  double min_eps0 = 0.0;
  std::vector<AuditWitness> witnesses;
  std::int64_t boundary_probes = 0;
  /// eps0 of a collinear pair with L/ell = 1.2; equals 1.5, not 1.
  double collinear_eps0_example = 0.0;
};

/// Samples ell = 1, delta ~ U[0, 1), c ~ U((1+delta)/2, 1], plus boundary
/// probes. Per-sample streams derive from the master seed.
AuditReport audit_h1_h2(std::int64_t samples, std::uint64_t seed);

std::string to_json(const AuditReport& report);

}  // namespace vsr
