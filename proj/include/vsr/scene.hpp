#pragma once

#include "vsr/raytrace.hpp"
#include "vsr/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vsr {

inline constexpr const char* kSceneSchema = "vsr.scene/1";
inline constexpr const char* kSolutionSchema = "vsr.solution/1";

struct SourceSpec {
  enum class Kind { Constant, CosinePower, Tabulated };
  Kind kind = Kind::Constant;
  double value = 1.0;  // constant value, or scale for cosine_power
  Vec3 axis = Vec3::UnitZ();
  double power = 1.0;
  std::vector<double> polar;  // tabulated nodes, increasing
  std::vector<double> values;

  /// Tabulated densities interpolate linearly in the polar angle about
  /// `axis` and clamp outside the nodes.
  SourceDensity density() const;
};

struct DensitySpec {
  enum class Kind { Constant, RadialPower };
  Kind kind = Kind::Constant;
  double value = 1.0;
  double power = 0.0;  // f = value * |x|^power

  TargetDensity density() const;
};

enum class SceneKind { Discrete, Cone, Continuous };

struct DiscreteBlock {
  std::vector<Vec3> points;
  std::vector<double> masses;
  bool rotsym = false;  // collinear points, band solver
};

struct ConeBlock {
  ConeSpec spec{Direction::from(Vec3::UnitZ()), Vec3::UnitX(), 0.0, {}, {}};
  std::vector<int> k_schedule{4, 8, 16};
};

struct ContinuousBlock {
  CapTargetRegion region{Direction::from(Vec3::UnitZ()), 0.0, 1.0, 1.0};
  DensitySpec density;
  PartitionConfig partition;
};

struct Scene {
  std::string unit = "1";
  SceneKind kind = SceneKind::Discrete;
  DiscreteBlock discrete;
  ConeBlock cone;
  ContinuousBlock continuous;
  SourceSpec source;
  SolveConfig solver;
  std::uint64_t seed = 0;
  /// Document the scene was parsed from; solutions embed it verbatim so a
  /// reload rebuilds bit-identical directions.
  nlohmann::json raw;
};

/// Throws Error(Parse) with the offending field path.
Scene parse_scene(const nlohmann::json& j);
Scene load_scene(const std::filesystem::path& path);
nlohmann::json scene_to_json(const Scene& s);

const char* to_string(SceneKind k);

// Feasibility report for a scene before solving.
struct CheckReport {
  bool pass = true;
  std::vector<std::string> failures;  // each names the violated bound
  TargetStats stats;
  H1Verdict h1;
  double eps0 = 0.0;
  double gamma = 0.0;
  double delta_gamma = 0.0;
  bool collinear = false;
  double collinear_eps_upper = 0.0;  // 1/(K-1), infinite when K = 1
  std::optional<double> xi_bound;
};

CheckReport check_scene(const Scene& s);
nlohmann::json to_json(const CheckReport& r);

// A solved refractor together with everything needed to rebuild its grid.
struct StoredSolution {
  Scene scene;
  std::vector<Vec3> targets;
  std::vector<double> eccentricities;
  std::vector<double> prescribed;  // per target, absolute
  double gamma = 0.0;
  double eps0 = 0.0;
  int grid_resolution = 0;
  int azimuth_steps = 0;
  bool converged = false;

  /// Rebuilt from the scene for cone and continuous kinds, from the
  /// targets otherwise.
  ApertureSpec aperture() const;
  Refractor refractor() const;
  ApertureGrid grid() const;
};

nlohmann::json solution_to_json(const StoredSolution& s);
StoredSolution parse_solution(const nlohmann::json& j);
StoredSolution load_solution(const std::filesystem::path& path);

// Result of running the scene's solver.
struct SceneSolve {
  StoredSolution solution;
  EnergyReport energy;
  nlohmann::json trace;
};

SceneSolve solve_scene(const Scene& s);

nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace vsr
