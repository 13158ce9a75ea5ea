#include "vsr/cli.hpp"

#include "vsr/energy.hpp"
#include "vsr/hypotheses.hpp"
#include "vsr/raytrace.hpp"
#include "vsr/refractor.hpp"
#include "vsr/scene.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace vsr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string scene;
  std::string out;
  std::string solution;
  std::optional<int> grid_res;
  std::optional<double> tol;
  std::int64_t rays = 1000000;
  std::optional<std::uint64_t> seed;
  std::int64_t samples = 100000;
  int resolution = 64;
};

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::Infeasible:
    case ErrorKind::InvalidArgument:
    case ErrorKind::Domain:
      return kInfeasible;
    case ErrorKind::NotConverged:
      return kNotConverged;
    case ErrorKind::Io:
    case ErrorKind::Parse:
      return kIo;
  }
  return kUsage;
}

json failure_json(ErrorKind k, const std::string& message) {
  std::string reason = to_string(k);
  if (message.rfind("collinear bound", 0) == 0 ||
      message.find("collinear bound") != std::string::npos) {
    reason = "collinear bound";
  } else if (message.find("xi bound") != std::string::npos) {
    reason = "xi bound";
  }
  return {{"schema", "vsr.error/1"}, {"error", to_string(k)},
          {"reason", reason}, {"message", message}};
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
}

Scene scene_with_overrides(const Options& o) {
  if (o.scene.empty()) throw Error(ErrorKind::Io, "--scene is required");
  Scene s = load_scene(o.scene);
  if (o.grid_res) {
    if (*o.grid_res < 2) throw Error(ErrorKind::InvalidArgument, "--grid-res must be >= 2");
    s.solver.grid_resolution = *o.grid_res;
  }
  if (o.tol) {
    if (!(*o.tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "--tol must be > 0");
    s.solver.tolerance = *o.tol;
  }
  return s;
}

fs::path solution_path(const Options& o) {
  if (!o.solution.empty()) return o.solution;
  if (!o.out.empty()) return fs::path(o.out) / "solution.json";
  throw Error(ErrorKind::Io, "need --solution or --out holding solution.json");
}

fs::path report_dir(const Options& o) {
  if (!o.out.empty()) return o.out;
  return solution_path(o).parent_path();
}

int cmd_check(const Options& o, std::ostream& out) {
  const CheckReport r = check_scene(scene_with_overrides(o));
  out << to_json(r).dump(2) << '\n';
  return r.pass ? kOk : kInfeasible;
}

int cmd_solve(const Options& o, std::ostream& out) {
  if (o.out.empty()) throw Error(ErrorKind::Io, "--out is required");
  const Scene s = scene_with_overrides(o);
  const fs::path dir = o.out;
  ensure_dir(dir);
  SceneSolve r;
  try {
    r = solve_scene(s);
  } catch (const Error& e) {
    write_text(dir / "failure.json", failure_json(e.kind(), e.what()).dump(2));
    throw;
  }
  write_text(dir / "solution.json", solution_to_json(r.solution).dump(2));
  write_text(dir / "energy.json", to_json(r.energy));
  write_text(dir / "trace.json", r.trace.dump(2));
  json summary{{"schema", "vsr.solve/1"},
               {"kind", to_string(s.kind)},
               {"converged", r.solution.converged},
               {"eccentricities", r.solution.eccentricities},
               {"max_abs_residual", r.energy.max_abs_residual()},
               {"out", dir.string()}};
  out << summary.dump(2) << '\n';
  return r.solution.converged ? kOk : kNotConverged;
}

int cmd_verify(const Options& o, std::ostream& out) {
  const StoredSolution st = load_solution(solution_path(o));
  const std::uint64_t seed = o.seed.value_or(st.scene.seed);
  const TraceReport rep = monte_carlo_verify(st.refractor(), st.grid(), st.prescribed,
                                             o.rays, seed);
  json j = json::parse(to_json(rep));
  const std::int64_t focal_rays = rep.rays_total - rep.tie_rays;
  j["within_3se"] = rep.max_z_quadrature <= 3.0;
  j["pass"] = rep.max_z_quadrature <= 3.0 && rep.rays_hit_target == focal_rays;
  const fs::path dir = report_dir(o);
  if (!dir.empty()) write_text(dir / "verify.json", j.dump(2));
  out << j.dump(2) << '\n';
  return kOk;
}

int cmd_mesh(const Options& o, std::ostream& out) {
  if (o.resolution < 4) throw Error(ErrorKind::InvalidArgument, "--resolution must be >= 4");
  const StoredSolution st = load_solution(solution_path(o));
  const Refractor r = st.refractor();
  const TriangleMesh mesh = build_mesh(r, o.resolution);
  fs::path dir = report_dir(o);
  if (dir.empty()) dir = ".";
  const fs::path path = dir / "refractor.obj";
  write_mesh(mesh, path);

  // |z| - |z - x| = |x|/eps on the owning sheet.
  double worst = 0.0;
  for (Eigen::Index v = 0; v < mesh.vertices.cols(); ++v) {
    const Vec3 z = mesh.vertices.col(v);
    if (!(z.norm() > 0.0)) continue;
    const int w = map_winner(r, Direction::from(z));
    const Vec3& x = r.targets()[static_cast<std::size_t>(w)];
    const double lhs = z.norm() - (z - x).norm();
    const double rhs = x.norm() / r.eccentricities()[w];
    worst = std::max(worst, std::abs(lhs - rhs) / x.norm());
  }
  json j{{"schema", "vsr.mesh/1"},
         {"path", path.string()},
         {"vertices", mesh.vertices.cols()},
         {"faces", mesh.faces.cols()},
         {"max_identity_residual", worst}};
  out << j.dump(2) << '\n';
  return kOk;
}

int cmd_audit(const Options& o, std::ostream& out) {
  const AuditReport rep = audit_h1_h2(o.samples, o.seed.value_or(0));
  const std::string text = to_json(rep);
  if (!o.out.empty()) {
    ensure_dir(o.out);
    write_text(fs::path(o.out) / "audit.json", text);
  }
  out << text << '\n';
  return kOk;
}

// Search for a solution with every eccentricity inside the window
// (eps0 + gamma, 1/(K-1)). Experimental, no guarantee.
int cmd_probe(const Options& o, std::ostream& out) {
  Scene s = scene_with_overrides(o);
  if (s.kind != SceneKind::Discrete) {
    throw Error(ErrorKind::InvalidArgument, "probe-conjecture: needs a discrete scene");
  }
  s.discrete.rotsym = false;
  const TargetStats stats = target_stats(s.discrete.points);
  const H1Verdict h1 = check_h1(stats);
  json j{{"schema", "vsr.probe/1"}, {"experimental", true}, {"h1", h1.pass}};
  if (!h1.pass) {
    j["found"] = false;
    j["reason"] = h1.failed;
    out << j.dump(2) << '\n';
    return kInfeasible;
  }
  const double lower = epsilon0(stats) + s.solver.gamma;
  const double K = stats.ratio;
  const double upper = K > 1.0 ? 1.0 / (K - 1.0) : std::numeric_limits<double>::infinity();
  j["window"] = {lower, std::isfinite(upper) ? json(upper) : json(nullptr)};
  if (!(lower < upper)) {
    j["found"] = false;
    j["reason"] = "empty window";
    out << j.dump(2) << '\n';
    return kInfeasible;
  }
  if (std::isfinite(upper)) {
    const double cap = lower + (upper - lower) * (1.0 - 1e-9);
    s.solver.eps_max = s.solver.eps_max ? std::min(*s.solver.eps_max, cap) : cap;
  }
  try {
    const SceneSolve r = solve_scene(s);
    double top = 0.0;
    for (double e : r.solution.eccentricities) top = std::max(top, e);
    j["found"] = r.solution.converged && top < upper;
    j["eccentricities"] = r.solution.eccentricities;
    j["max_abs_residual"] = r.energy.max_abs_residual();
  } catch (const Error& e) {
    j["found"] = false;
    j["reason"] = e.what();
  }
  out << j.dump(2) << '\n';
  return j["found"].get<bool>() ? kOk : kNotConverged;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Refractor design for point, cone and continuous targets", "vsr"};
  app.require_subcommand(1);
  Options o;

  auto add_scene = [&](CLI::App* c) {
    c->add_option("--scene", o.scene, "scene file (JSON)");
  };
  auto add_solution = [&](CLI::App* c) {
    c->add_option("--solution", o.solution, "solution file (default <out>/solution.json)");
  };
  auto add_solver = [&](CLI::App* c) {
    c->add_option("--grid-res", o.grid_res, "aperture grid resolution");
    c->add_option("--tol", o.tol, "relative energy tolerance");
  };

  CLI::App* check = app.add_subcommand("check", "feasibility report for a scene");
  add_scene(check);
  CLI::App* solve = app.add_subcommand("solve", "solve a scene and write results");
  add_scene(solve);
  solve->add_option("--out", o.out, "output directory");
  add_solver(solve);
  CLI::App* verify = app.add_subcommand("verify", "Monte Carlo ray trace of a solution");
  add_solution(verify);
  verify->add_option("--out", o.out, "directory holding solution.json");
  verify->add_option("--rays", o.rays, "number of rays")->check(CLI::Range(std::int64_t{1}, std::int64_t{1} << 40));
  verify->add_option("--seed", o.seed, "random seed (default: scene seed)");
  CLI::App* mesh = app.add_subcommand("mesh", "export a triangle mesh of a solution");
  add_solution(mesh);
  mesh->add_option("--out", o.out, "directory holding solution.json");
  mesh->add_option("--resolution", o.resolution, "rings and azimuth steps");
  CLI::App* audit = app.add_subcommand("audit", "sample the hypothesis inequalities");
  audit->add_option("--samples", o.samples, "number of samples")->check(CLI::PositiveNumber);
  audit->add_option("--seed", o.seed, "random seed");
  audit->add_option("--out", o.out, "directory for audit.json");
  CLI::App* probe = app.add_subcommand(
      "probe-conjecture", "experimental: look for a solution inside the collinear window");
  add_scene(probe);
  add_solver(probe);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*check) return cmd_check(o, out);
    if (*solve) return cmd_solve(o, out);
    if (*verify) return cmd_verify(o, out);
    if (*mesh) return cmd_mesh(o, out);
    if (*audit) return cmd_audit(o, out);
    if (*probe) return cmd_probe(o, out);
  } catch (const Error& e) {
    err << failure_json(e.kind(), e.what()).dump() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << failure_json(ErrorKind::Io, e.what()).dump() << '\n';
    return kIo;
  }
  return kUsage;
}

}  // namespace vsr::cli
