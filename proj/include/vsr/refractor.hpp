#pragma once

#include "vsr/common.hpp"
#include "vsr/hyperboloid.hpp"
#include "vsr/sphere.hpp"

#include <filesystem>
#include <vector>

namespace vsr {

/// Relative tolerance under which two member radii are considered tied.
inline constexpr double kTieTolerance = 1e-12;

/// Boundary of the intersection of hyperboloid bodies, one per target. The
/// radial function over the aperture is the pointwise max of member radii.
class Refractor {
 public:
  /// Every eccentricity must exceed eps0 + gamma strictly. The aperture must
  /// lie inside D_T^{1/(eps0+gamma)}; callers other than make_refractor pass
  /// an explicit (possibly smaller) aperture.
  Refractor(std::vector<Vec3> targets, std::vector<double> eccentricities,
            double gamma, double eps0, ApertureSpec aperture);

  Eigen::Index size() const { return distances_.size(); }
  const std::vector<Vec3>& targets() const { return targets_; }
  const Eigen::Matrix3Xd& directions() const { return directions_; }
  const Eigen::VectorXd& distances() const { return distances_; }
  const Eigen::VectorXd& eccentricities() const { return eccentricities_; }
  double gamma() const { return gamma_; }
  double eps0() const { return eps0_; }
  /// eps0 + gamma; every member eccentricity is strictly above it.
  double eps_lower() const { return eps0_ + gamma_; }
  /// Smallest member eccentricity.
  double eps_floor() const { return eccentricities_.minCoeff(); }
  const ApertureSpec& aperture() const { return aperture_; }

  Hyperboloidd member(Eigen::Index i) const {
    return Hyperboloidd(targets_[static_cast<std::size_t>(i)],
                        eccentricities_[i]);
  }

  Refractor with_eccentricities(const std::vector<double>& eps) const;

 private:
  std::vector<Vec3> targets_;
  Eigen::Matrix3Xd directions_;
  Eigen::VectorXd distances_;
  Eigen::VectorXd eccentricities_;
  double gamma_;
  double eps0_;
  ApertureSpec aperture_;
};

/// Validates H1, computes eps0 and the aperture D_T^{delta_gamma}.
Refractor make_refractor(const std::vector<Vec3>& targets,
                         const std::vector<double>& eccentricities,
                         double gamma);

/// Member radii along m; members whose domain misses m get -infinity.
Eigen::VectorXd member_radii(const Refractor& r, const Direction& m);

double radial(const Refractor& r, const Direction& m);

/// Indices whose radius is within tie_tolerance * max of the max.
std::vector<int> map_point(const Refractor& r, const Direction& m,
                           double tie_tolerance = kTieTolerance);

/// Lowest index of map_point.
int map_winner(const Refractor& r, const Direction& m,
               double tie_tolerance = kTieTolerance);

/// Member radii at every grid cell centre: rows are cells, columns members.
Eigen::MatrixXd radii_on_grid(const Refractor& r, const ApertureGrid& grid);

struct CellAssignment {
  /// Lowest tied index per cell; used for energy accounting.
  std::vector<int> owner;
  /// Full tie set for cells with more than one candidate.
  std::vector<std::pair<Eigen::Index, std::vector<int>>> ties;
  /// Cells whose tie set contains target i (ties listed under every member).
  std::vector<std::vector<Eigen::Index>> cells_of;
  double tie_tolerance = kTieTolerance;
};

CellAssignment visibility_cells(const Refractor& r, const ApertureGrid& grid,
                                double tie_tolerance = kTieTolerance);

/// Owner per row of a radii matrix, lowest index on ties.
std::vector<int> owners_from_radii(const Eigen::MatrixXd& radii,
                                   double tie_tolerance = kTieTolerance);

/// max over targets and the closed aperture of h_{x, eps_floor}(m); bounds
/// the radial function from above.
double bounding_radius(const Refractor& r, int rim_samples = 720);

struct TriangleMesh {
  Eigen::Matrix3Xd vertices;
  Eigen::Matrix3Xi faces;  // 0-based
};

/// Polar mesh of {m r(m)} over the aperture: a centre vertex plus
/// (resolution - 1) rings of max(4, resolution) vertices. Each quad is split
/// along the diagonal that keeps the surface locally convex.
TriangleMesh build_mesh(const Refractor& r, int resolution);

/// ASCII `v x y z` / `f a b c` (1-based) records.
void write_mesh(const TriangleMesh& mesh, const std::filesystem::path& path);

void export_mesh(const Refractor& r, int resolution,
                 const std::filesystem::path& path);

}  // namespace vsr
