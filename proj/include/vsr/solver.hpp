#pragma once

#include "vsr/energy.hpp"
#include "vsr/hypotheses.hpp"
#include "vsr/refractor.hpp"
#include "vsr/sphere.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vsr {

enum class AnchorPolicy {
  MaxRadius,  // farthest target
  MaxMass,
};

struct SolveConfig {
  int grid_resolution = 512;
  /// On max_i |G_i - f_i| / total mass.
  double tolerance = 1e-3;
  int max_sweeps = 200;
  /// Upper end of the eccentricity window; defaults to
  /// 10 * max(eps0 + gamma, 1/(K-1) when the targets are collinear).
  std::optional<double> eps_max;
  double gamma = 0.1;
  AnchorPolicy anchor_policy = AnchorPolicy::MaxRadius;
  /// Masses given as fractions of the aperture mass instead of absolute.
  bool masses_are_fractions = false;
  /// Starting eccentricities (one per unknown; the anchor entry is ignored).
  /// Defaults to eps_max for every non-anchor unknown.
  std::optional<std::vector<double>> initial;
  /// Keep sweeping past the tolerance until no eccentricity moves by more
  /// than eps_tolerance (bounded by max_sweeps).
  bool polish = true;
  double eps_tolerance = 1e-9;
};

struct SolveTrace {
  double eps0 = 0.0;
  double eps_lower = 0.0;
  double eps_max = 0.0;
  int anchor = -1;
  double anchor_eps = 0.0;
  double renormalization = 1.0;
  int lift_passes = 0;
  int sweeps = 0;
  bool converged = false;
  /// max_i |G_i - f_i| after initialisation and after each sweep.
  std::vector<double> residuals;
  std::vector<std::string> notes;
};

std::string to_json(const SolveTrace& trace);

/// A set of targets whose eccentricities are tied together in groups; a
/// plain discrete problem uses singleton groups.
struct GroupedProblem {
  std::vector<Vec3> targets;
  std::vector<std::vector<int>> groups;
  /// Absolute mass per group (after any renormalisation).
  std::vector<double> masses;
  double gamma = 0.0;
  double eps0 = 0.0;
};

struct GroupedSolution {
  std::vector<double> eccentricities;  // per group
  Eigen::VectorXd energies;            // per group
  SolveTrace trace;
};

/// Anchored monotone coordinate sweep. Each non-anchor group is set, in
/// turn, to the eccentricity that gives it the largest energy not exceeding
/// its mass; energies of the others only fall, so the anchor residual is
/// nonincreasing.
GroupedSolution solve_grouped(const GroupedProblem& problem,
                              const ApertureGrid& grid,
                              const SolveConfig& cfg);

struct DiscreteSolution {
  Refractor refractor;
  ApertureGrid grid;
  EnergyReport energy;
  SolveTrace trace;
};

/// Finds eccentricities whose visibility energies match `masses`.
/// Throws Infeasible (H1, window) or NotConverged.
DiscreteSolution solve_discrete(const std::vector<Vec3>& targets,
                                std::span<const double> masses,
                                const SourceDensity& g,
                                const SolveConfig& cfg);

/// Same, on a caller-supplied grid built over the targets' aperture.
DiscreteSolution solve_discrete(const std::vector<Vec3>& targets,
                                std::span<const double> masses,
                                const ApertureGrid& grid,
                                const SolveConfig& cfg);

enum class OrderingPattern { Equal, FirstBelow, FirstAbove, Mixed };

struct UniquenessVerdict {
  OrderingPattern pattern = OrderingPattern::Equal;
  /// Both refractors reproduce the same energies (within energy_tolerance).
  bool comparable = false;
  /// Comparable solutions with a mixed strict ordering.
  bool violation = false;
  double max_eps_difference = 0.0;
  std::string message;
};

const char* to_string(OrderingPattern p);

UniquenessVerdict check_uniqueness(const Refractor& a, const Refractor& b,
                                   const ApertureGrid& grid,
                                   double eps_tolerance = 1e-4,
                                   double energy_tolerance = 1e-3);

// Rotationally symmetric problems.

struct RotsymSolution {
  Direction axis = Direction::from(Vec3::UnitZ());
  std::vector<double> distances;       // input order
  std::vector<double> eccentricities;  // input order
  /// Polar band edges about the axis, farthest target innermost; size n + 1.
  std::vector<double> band_edges;
  std::vector<int> band_owner;  // input index per band
  std::vector<bool> zero_mass;  // input order
  double eps0 = 0.0;
  double eps_lower = 0.0;
  double eps_max = 0.0;
  double eps_upper = 0.0;  // 1/(K-1)
  double total_mass = 0.0;
  std::vector<std::string> notes;
};

/// Targets d*axis for d in `distances`, g symmetric about the axis. Band
/// edges come from inverting the cumulative polar mass. The farthest target
/// sits at eps_max and owns the innermost band; each nearer target's
/// eccentricity makes it meet its inner neighbour exactly at their edge.
RotsymSolution solve_rotsym_collinear(const Direction& axis,
                                      std::span<const double> distances,
                                      std::span<const double> masses,
                                      const SourceDensity& g,
                                      const SolveConfig& cfg);

/// 2*pi * integral over [0, polar] of g(theta) sin(theta), g sampled along
/// a meridian of `axis`.
double cap_mass(const Direction& axis, const SourceDensity& g, double polar);

/// Ring targets on a cone about `axis`; the ring polar angle is
/// acos(1 - xi).
struct ConeSpec {
  Direction axis;
  Vec3 reference;
  double xi;
  std::vector<double> distances;
  /// Mass per distance, shared evenly by all copies around the ring.
  std::vector<double> masses;

  double ring_polar() const { return std::acos(1.0 - xi); }
  /// Throws InvalidArgument if xi is outside the cap-region bound.
  void validate() const;
};

/// Targets d * m^j, j = 0..k-1; index j * |Q| + q.
std::vector<Vec3> kgon_targets(const ConeSpec& cone, int k);

/// eps0 of the full ring T_{inf,Q} and its aperture (a cap about the axis).
double cone_eps0(const ConeSpec& cone);
ApertureSpec cone_aperture_for(const ConeSpec& cone, double gamma);

Refractor compose_kgon(const ConeSpec& cone,
                       std::span<const double> eps_per_distance, int k,
                       double gamma);

struct KgonSolution {
  int k = 0;
  std::vector<double> eps_per_distance;
  Refractor refractor;
  EnergyReport energy;
  SolveTrace trace;
};

KgonSolution solve_kgon(const ConeSpec& cone, int k, const ApertureGrid& grid,
                        const SolveConfig& cfg);

struct ConeSolution {
  std::vector<KgonSolution> levels;
  /// max-norm of successive eps profile differences.
  std::vector<double> profile_differences;
  bool nonincreasing = true;
};

/// The grid is shared by every level; its azimuth count is a multiple of
/// every k in the schedule.
ConeSolution solve_cone(const ConeSpec& cone, const SourceDensity& g,
                        std::span<const int> k_schedule,
                        const SolveConfig& cfg);

std::string to_json(const ConeSolution& s);

// Continuous targets.

enum class RepresentativeRule { CentroidProjected, FirstPoint };

struct PartitionConfig {
  double cell_diameter = 0.1;
  RepresentativeRule rule = RepresentativeRule::CentroidProjected;
  /// Number of halvings reported in the weak-* diagnostic.
  int levels = 3;
};

using TargetDensity = std::function<double(const Vec3&)>;

struct PartitionCell {
  double r0, r1, polar0, polar1, azimuth0, azimuth1;
  Vec3 representative;
  double mass;
  double diameter;
};

/// Spherical-coordinate boxes about the region axis with diameter at most
/// `cell_diameter`; masses by Gauss-Legendre quadrature of f dλ.
std::vector<PartitionCell> partition_region(const CapTargetRegion& region,
                                            const TargetDensity& f,
                                            double cell_diameter,
                                            RepresentativeRule rule);

/// Fixed dictionary of test functions on the target region.
struct WeakDictionary {
  static constexpr const char* kVersion = "weak-dict/1";
  std::vector<std::string> names;
  std::vector<std::function<double(const Vec3&)>> functions;

  static WeakDictionary standard(const CapTargetRegion& region);
};

struct WeakLevel {
  double cell_diameter = 0.0;
  int cells = 0;
  int nonempty = 0;
  double gap = 0.0;  // normalised by F(T)
  std::vector<double> per_function;
  double max_residual = 0.0;
};

struct ContinuousSolution {
  std::optional<Refractor> refractor;  // finest level
  EnergyReport energy;
  std::vector<WeakLevel> levels;
  std::vector<std::string> warnings;
  double total_mass = 0.0;
  double eps_max = 0.0;
};

/// Partitions, reduces to Dirac masses at the representatives, solves the
/// discrete problem, and reports the weak-* gap for cell diameters
/// d, d/2, ..., d/2^(levels-1).
ContinuousSolution solve_continuous(const CapTargetRegion& region,
                                    const TargetDensity& f,
                                    const SourceDensity& g,
                                    const PartitionConfig& pcfg,
                                    const SolveConfig& cfg);

std::string to_json(const ContinuousSolution& s);

}  // namespace vsr
