#include "vsr/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace vsr {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::Parse, where + ": " + what);
}

const json& field(const json& j, const std::string& where, const char* key) {
  if (!j.is_object()) fail(where, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(where + "." + key, "missing");
  return *it;
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(where, "must be finite");
  return v;
}

double number_or(const json& j, const std::string& where, const char* key,
                 double fallback) {
  if (!j.contains(key)) return fallback;
  return number(j.at(key), where + "." + key);
}

int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) fail(where, "expected an integer");
  return j.get<int>();
}

std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "expected a string");
  return j.get<std::string>();
}

std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

Vec3 vec3(const json& j, const std::string& where) {
  const std::vector<double> v = numbers(j, where);
  if (v.size() != 3) fail(where, "expected 3 components");
  return {v[0], v[1], v[2]};
}

Direction direction(const json& j, const std::string& where) {
  const Vec3 v = vec3(j, where);
  if (!(v.norm() > 0.0)) fail(where, "zero vector is not a direction");
  return Direction::from(v);
}

std::vector<double> masses(const json& j, const std::string& where) {
  std::vector<double> m = numbers(j, where);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] < 0.0) fail(where + "[" + std::to_string(i) + "]", "must be >= 0");
  }
  return m;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

SourceSpec parse_source(const json& j, const std::string& where) {
  SourceSpec s;
  const std::string kind = text(field(j, where, "kind"), where + ".kind");
  if (kind == "constant") {
    s.kind = SourceSpec::Kind::Constant;
    s.value = number_or(j, where, "value", 1.0);
    if (!(s.value > 0.0)) fail(where + ".value", "must be > 0");
  } else if (kind == "cosine_power") {
    s.kind = SourceSpec::Kind::CosinePower;
    s.value = number_or(j, where, "scale", 1.0);
    s.power = number_or(j, where, "power", 1.0);
    if (j.contains("axis")) s.axis = direction(j["axis"], where + ".axis").vec();
    if (!(s.value > 0.0)) fail(where + ".scale", "must be > 0");
    if (s.power < 0.0) fail(where + ".power", "must be >= 0");
  } else if (kind == "tabulated") {
    s.kind = SourceSpec::Kind::Tabulated;
    if (j.contains("axis")) s.axis = direction(j["axis"], where + ".axis").vec();
    s.polar = numbers(field(j, where, "polar"), where + ".polar");
    s.values = masses(field(j, where, "values"), where + ".values");
    if (s.polar.size() < 2 || s.polar.size() != s.values.size()) {
      fail(where, "polar and values need equal length >= 2");
    }
    if (!std::is_sorted(s.polar.begin(), s.polar.end()) ||
        std::adjacent_find(s.polar.begin(), s.polar.end()) != s.polar.end()) {
      fail(where + ".polar", "must be strictly increasing");
    }
  } else {
    fail(where + ".kind", "unknown source kind '" + kind + "'");
  }
  return s;
}

json source_json(const SourceSpec& s) {
  switch (s.kind) {
    case SourceSpec::Kind::Constant:
      return {{"kind", "constant"}, {"value", s.value}};
    case SourceSpec::Kind::CosinePower:
      return {{"kind", "cosine_power"}, {"scale", s.value}, {"power", s.power},
              {"axis", vec_json(s.axis)}};
    case SourceSpec::Kind::Tabulated:
      return {{"kind", "tabulated"}, {"axis", vec_json(s.axis)},
              {"polar", s.polar}, {"values", s.values}};
  }
  return {};
}

void parse_solver(const json& j, const std::string& where, SolveConfig& c) {
  if (!j.is_object()) fail(where, "expected an object");
  if (j.contains("grid_resolution")) {
    c.grid_resolution = integer(j["grid_resolution"], where + ".grid_resolution");
    if (c.grid_resolution < 2) fail(where + ".grid_resolution", "must be >= 2");
  }
  c.tolerance = number_or(j, where, "tolerance", c.tolerance);
  if (!(c.tolerance > 0.0)) fail(where + ".tolerance", "must be > 0");
  if (j.contains("max_sweeps")) {
    c.max_sweeps = integer(j["max_sweeps"], where + ".max_sweeps");
  }
  if (j.contains("eps_max")) c.eps_max = number(j["eps_max"], where + ".eps_max");
  if (j.contains("anchor")) {
    const std::string a = text(j["anchor"], where + ".anchor");
    if (a == "max_radius") c.anchor_policy = AnchorPolicy::MaxRadius;
    else if (a == "max_mass") c.anchor_policy = AnchorPolicy::MaxMass;
    else fail(where + ".anchor", "expected max_radius or max_mass");
  }
  if (j.contains("masses_are_fractions")) {
    if (!j["masses_are_fractions"].is_boolean()) {
      fail(where + ".masses_are_fractions", "expected a boolean");
    }
    c.masses_are_fractions = j["masses_are_fractions"].get<bool>();
  }
}

}  // namespace

SourceDensity SourceSpec::density() const {
  switch (kind) {
    case Kind::Constant: {
      const double v = value;
      return [v](const Direction&) { return v; };
    }
    case Kind::CosinePower: {
      const Vec3 a = axis.normalized();
      const double s = value, p = power;
      return [a, s, p](const Direction& m) {
        return s * std::pow(std::max(0.0, m.dot(a)), p);
      };
    }
    case Kind::Tabulated: {
      const Vec3 a = axis.normalized();
      const std::vector<double> xs = polar, ys = values;
      return [a, xs, ys](const Direction& m) {
        const double t = std::acos(std::clamp(m.dot(a), -1.0, 1.0));
        if (t <= xs.front()) return ys.front();
        if (t >= xs.back()) return ys.back();
        const auto i = static_cast<std::size_t>(
            std::upper_bound(xs.begin(), xs.end(), t) - xs.begin());
        const double s = (t - xs[i - 1]) / (xs[i] - xs[i - 1]);
        return ys[i - 1] + s * (ys[i] - ys[i - 1]);
      };
    }
  }
  throw Error(ErrorKind::InvalidArgument, "source: unknown kind");
}

TargetDensity DensitySpec::density() const {
  const double v = value, p = power;
  if (kind == Kind::Constant) return [v](const Vec3&) { return v; };
  return [v, p](const Vec3& x) { return v * std::pow(x.norm(), p); };
}

const char* to_string(SceneKind k) {
  switch (k) {
    case SceneKind::Discrete: return "discrete";
    case SceneKind::Cone: return "cone";
    case SceneKind::Continuous: return "continuous";
  }
  return "unknown";
}

Scene parse_scene(const json& j) {
  const std::string root = "scene";
  if (!j.is_object()) fail(root, "expected an object");
  const std::string schema = text(field(j, root, "schema"), root + ".schema");
  if (schema != kSceneSchema) {
    fail(root + ".schema", "unsupported schema '" + schema + "', expected " + kSceneSchema);
  }
  Scene s;
  if (j.contains("unit")) s.unit = text(j["unit"], root + ".unit");
  if (j.contains("seed")) {
    const json& sd = j["seed"];
    if (!sd.is_number_unsigned() && !(sd.is_number_integer() && sd.get<std::int64_t>() >= 0)) {
      fail(root + ".seed", "expected an unsigned integer");
    }
    s.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("source")) s.source = parse_source(j["source"], root + ".source");
  if (j.contains("solver")) parse_solver(j["solver"], root + ".solver", s.solver);
  s.solver.gamma = number(field(j, root, "gamma"), root + ".gamma");
  if (!(s.solver.gamma > 0.0)) fail(root + ".gamma", "must be > 0");

  int blocks = 0;
  for (const char* b : {"discrete", "cone", "continuous"}) blocks += j.contains(b) ? 1 : 0;
  if (blocks != 1) fail(root, "need exactly one of discrete, cone, continuous");

  if (j.contains("discrete")) {
    const std::string w = root + ".discrete";
    const json& d = j["discrete"];
    s.kind = SceneKind::Discrete;
    const json& pts = field(d, w, "points");
    if (!pts.is_array() || pts.empty()) fail(w + ".points", "expected a non-empty array");
    for (std::size_t i = 0; i < pts.size(); ++i) {
      s.discrete.points.push_back(vec3(pts[i], w + ".points[" + std::to_string(i) + "]"));
    }
    s.discrete.masses = masses(field(d, w, "masses"), w + ".masses");
    if (s.discrete.masses.size() != s.discrete.points.size()) {
      fail(w + ".masses", "need one mass per point");
    }
    if (d.contains("method")) {
      const std::string m = text(d["method"], w + ".method");
      if (m == "rotsym") s.discrete.rotsym = true;
      else if (m != "grid") fail(w + ".method", "expected grid or rotsym");
    }
  } else if (j.contains("cone")) {
    const std::string w = root + ".cone";
    const json& c = j["cone"];
    s.kind = SceneKind::Cone;
    ConeSpec& cs = s.cone.spec;
    cs.axis = direction(field(c, w, "axis"), w + ".axis");
    cs.reference = c.contains("reference") ? vec3(c["reference"], w + ".reference")
                                           : Frame::about(cs.axis).e1;
    cs.xi = number(field(c, w, "xi"), w + ".xi");
    cs.distances = numbers(field(c, w, "distances"), w + ".distances");
    cs.masses = masses(field(c, w, "masses"), w + ".masses");
    if (cs.distances.empty() || cs.masses.size() != cs.distances.size()) {
      fail(w + ".masses", "need one mass per distance");
    }
    if (c.contains("k")) {
      s.cone.k_schedule.clear();
      const json& ks = c["k"];
      if (!ks.is_array() || ks.empty()) fail(w + ".k", "expected a non-empty array");
      for (std::size_t i = 0; i < ks.size(); ++i) {
        s.cone.k_schedule.push_back(integer(ks[i], w + ".k[" + std::to_string(i) + "]"));
      }
    }
  } else {
    const std::string w = root + ".continuous";
    const json& c = j["continuous"];
    s.kind = SceneKind::Continuous;
    CapTargetRegion& r = s.continuous.region;
    r.axis = direction(field(c, w, "axis"), w + ".axis");
    r.xi = number(field(c, w, "xi"), w + ".xi");
    r.w = number(field(c, w, "w"), w + ".w");
    r.W = number(field(c, w, "W"), w + ".W");
    if (c.contains("density")) {
      const json& d = c["density"];
      const std::string dw = w + ".density";
      const std::string kind = text(field(d, dw, "kind"), dw + ".kind");
      DensitySpec& ds = s.continuous.density;
      if (kind == "constant") ds.kind = DensitySpec::Kind::Constant;
      else if (kind == "radial_power") ds.kind = DensitySpec::Kind::RadialPower;
      else fail(dw + ".kind", "expected constant or radial_power");
      ds.value = number_or(d, dw, "value", 1.0);
      ds.power = number_or(d, dw, "power", 0.0);
      if (ds.value < 0.0) fail(dw + ".value", "must be >= 0");
    }
    PartitionConfig& p = s.continuous.partition;
    p.cell_diameter = number_or(c, w, "cell_diameter", p.cell_diameter);
    if (c.contains("levels")) p.levels = integer(c["levels"], w + ".levels");
    if (c.contains("rule")) {
      const std::string rule = text(c["rule"], w + ".rule");
      if (rule == "centroid_projected") p.rule = RepresentativeRule::CentroidProjected;
      else if (rule == "first_point") p.rule = RepresentativeRule::FirstPoint;
      else fail(w + ".rule", "expected centroid_projected or first_point");
    }
  }
  s.raw = j;
  return s;
}

json scene_to_json(const Scene& s) {
  json j;
  j["schema"] = kSceneSchema;
  j["unit"] = s.unit;
  j["seed"] = s.seed;
  j["gamma"] = s.solver.gamma;
  j["source"] = source_json(s.source);
  json solver{{"grid_resolution", s.solver.grid_resolution},
              {"tolerance", s.solver.tolerance},
              {"max_sweeps", s.solver.max_sweeps},
              {"anchor", s.solver.anchor_policy == AnchorPolicy::MaxRadius ? "max_radius"
                                                                           : "max_mass"},
              {"masses_are_fractions", s.solver.masses_are_fractions}};
  if (s.solver.eps_max) solver["eps_max"] = *s.solver.eps_max;
  j["solver"] = solver;
  switch (s.kind) {
    case SceneKind::Discrete: {
      json pts = json::array();
      for (const Vec3& p : s.discrete.points) pts.push_back(vec_json(p));
      j["discrete"] = {{"points", pts}, {"masses", s.discrete.masses},
                       {"method", s.discrete.rotsym ? "rotsym" : "grid"}};
      break;
    }
    case SceneKind::Cone: {
      const ConeSpec& c = s.cone.spec;
      j["cone"] = {{"axis", vec_json(c.axis.vec())}, {"reference", vec_json(c.reference)},
                   {"xi", c.xi}, {"distances", c.distances}, {"masses", c.masses},
                   {"k", s.cone.k_schedule}};
      break;
    }
    case SceneKind::Continuous: {
      const CapTargetRegion& r = s.continuous.region;
      const DensitySpec& d = s.continuous.density;
      const PartitionConfig& p = s.continuous.partition;
      j["continuous"] = {
          {"axis", vec_json(r.axis.vec())}, {"xi", r.xi}, {"w", r.w}, {"W", r.W},
          {"density", {{"kind", d.kind == DensitySpec::Kind::Constant ? "constant"
                                                                      : "radial_power"},
                       {"value", d.value}, {"power", d.power}}},
          {"cell_diameter", p.cell_diameter}, {"levels", p.levels},
          {"rule", p.rule == RepresentativeRule::CentroidProjected ? "centroid_projected"
                                                                   : "first_point"}};
      break;
    }
  }
  return j;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text << '\n';
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

Scene load_scene(const std::filesystem::path& path) {
  return parse_scene(read_json(path));
}

CheckReport check_scene(const Scene& s) {
  CheckReport r;
  r.gamma = s.solver.gamma;
  auto record = [&r](const std::string& why) {
    r.pass = false;
    r.failures.push_back(why);
  };
  try {
    switch (s.kind) {
      case SceneKind::Discrete:
        r.stats = target_stats(s.discrete.points);
        break;
      case SceneKind::Cone: {
        const ConeSpec& c = s.cone.spec;
        const auto [lo, hi] = std::minmax_element(c.distances.begin(), c.distances.end());
        r.xi_bound = CapTargetRegion::xi_bound(*lo, *hi);
        c.validate();
        r.stats = cone_target_stats(c.ring_polar(), *lo, *hi);
        break;
      }
      case SceneKind::Continuous: {
        const CapTargetRegion& g = s.continuous.region;
        r.xi_bound = CapTargetRegion::xi_bound(g.w, g.W);
        g.validate();
        r.stats = g.stats();
        break;
      }
    }
  } catch (const Error& e) {
    record(e.what());
    return r;
  }

  r.h1 = check_h1(r.stats);
  if (!r.h1.pass) record(r.h1.failed);
  r.collinear = s.kind == SceneKind::Discrete && r.stats.c >= 1.0 - 1e-12;
  if (r.collinear) {
    const double K = r.stats.ratio;
    r.collinear_eps_upper = K > 1.0 ? 1.0 / (K - 1.0)
                                    : std::numeric_limits<double>::infinity();
  }
  if (r.h1.pass) {
    r.eps0 = epsilon0(r.stats);
    r.delta_gamma = 1.0 / (r.eps0 + r.gamma);
  }
  if (r.collinear && !(r.eps0 + r.gamma < r.collinear_eps_upper && r.h1.pass)) {
    std::ostringstream os;
    os << "collinear bound: need eps0 + gamma < 1/(K-1) = " << r.collinear_eps_upper
       << " with K = L/ell = " << r.stats.ratio;
    record(os.str());
  }
  if (s.kind == SceneKind::Discrete && s.discrete.rotsym && !r.collinear) {
    record("rotsym method needs targets on one ray from the origin");
  }
  return r;
}

json to_json(const CheckReport& r) {
  auto finite_or_null = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j{{"schema", "vsr.check/1"},
         {"pass", r.pass},
         {"failures", r.failures},
         {"h1", {{"pass", r.h1.pass}, {"lhs_2_ell_c", r.h1.lhs}, {"rhs_L", r.h1.rhs},
                 {"half_space", r.h1.half_space_implied}}},
         {"ell", r.stats.ell},
         {"L", r.stats.L},
         {"c", r.stats.c},
         {"eps0", r.eps0},
         {"gamma", r.gamma},
         {"delta_gamma", r.delta_gamma},
         {"collinear", r.collinear}};
  if (r.collinear) j["collinear_eps_upper"] = finite_or_null(r.collinear_eps_upper);
  if (r.xi_bound) j["xi_bound"] = *r.xi_bound;
  return j;
}

ApertureSpec StoredSolution::aperture() const {
  switch (scene.kind) {
    case SceneKind::Cone:
      return cone_aperture_for(scene.cone.spec, gamma);
    case SceneKind::Continuous: {
      const CapTargetRegion& g = scene.continuous.region;
      return cone_aperture(g.axis, g.polar_half_angle(), 1.0 / (eps0 + gamma));
    }
    case SceneKind::Discrete:
      break;
  }
  return aperture_for_targets(targets, gamma);
}

Refractor StoredSolution::refractor() const {
  return Refractor(targets, eccentricities, gamma, eps0, aperture());
}

ApertureGrid StoredSolution::grid() const {
  return build_grid(aperture(), grid_resolution, scene.source.density(), azimuth_steps);
}

json solution_to_json(const StoredSolution& s) {
  json t = json::array();
  for (const Vec3& x : s.targets) t.push_back(vec_json(x));
  return {{"schema", kSolutionSchema},
          {"scene", s.scene.raw.is_null() ? scene_to_json(s.scene) : s.scene.raw},
          {"kind", to_string(s.scene.kind)},
          {"targets", t},
          {"eccentricities", s.eccentricities},
          {"prescribed", s.prescribed},
          {"gamma", s.gamma},
          {"eps0", s.eps0},
          {"grid", {{"resolution", s.grid_resolution}, {"azimuth_steps", s.azimuth_steps}}},
          {"converged", s.converged}};
}

StoredSolution parse_solution(const json& j) {
  const std::string root = "solution";
  const std::string schema = text(field(j, root, "schema"), root + ".schema");
  if (schema != kSolutionSchema) {
    fail(root + ".schema", "unsupported schema '" + schema + "', expected " + kSolutionSchema);
  }
  StoredSolution s;
  s.scene = parse_scene(field(j, root, "scene"));
  const json& t = field(j, root, "targets");
  if (!t.is_array() || t.empty()) fail(root + ".targets", "expected a non-empty array");
  for (std::size_t i = 0; i < t.size(); ++i) {
    s.targets.push_back(vec3(t[i], root + ".targets[" + std::to_string(i) + "]"));
  }
  s.eccentricities = numbers(field(j, root, "eccentricities"), root + ".eccentricities");
  s.prescribed = numbers(field(j, root, "prescribed"), root + ".prescribed");
  if (s.eccentricities.size() != s.targets.size() ||
      s.prescribed.size() != s.targets.size()) {
    fail(root, "targets, eccentricities and prescribed differ in length");
  }
  s.gamma = number(field(j, root, "gamma"), root + ".gamma");
  s.eps0 = number(field(j, root, "eps0"), root + ".eps0");
  const json& g = field(j, root, "grid");
  s.grid_resolution = integer(field(g, root + ".grid", "resolution"), root + ".grid.resolution");
  s.azimuth_steps = integer(field(g, root + ".grid", "azimuth_steps"),
                            root + ".grid.azimuth_steps");
  if (j.contains("converged") && j["converged"].is_boolean()) {
    s.converged = j["converged"].get<bool>();
  }
  return s;
}

StoredSolution load_solution(const std::filesystem::path& path) {
  return parse_solution(read_json(path));
}

SceneSolve solve_scene(const Scene& s) {
  const CheckReport check = check_scene(s);
  if (!check.pass) {
    std::string why;
    for (const std::string& f : check.failures) why += (why.empty() ? "" : "; ") + f;
    throw Error(ErrorKind::Infeasible, why);
  }
  const SourceDensity g = s.source.density();
  const SolveConfig& cfg = s.solver;

  SceneSolve out;
  StoredSolution& st = out.solution;
  st.scene = s;
  st.gamma = cfg.gamma;
  st.grid_resolution = cfg.grid_resolution;
  st.azimuth_steps = cfg.grid_resolution;
  st.converged = true;
  EnergyReport first;  // solver's own report; residuals give the prescription

  switch (s.kind) {
    case SceneKind::Discrete: {
      st.targets = s.discrete.points;
      if (s.discrete.rotsym) {
        std::vector<double> d;
        for (const Vec3& p : st.targets) d.push_back(p.norm());
        const RotsymSolution rs = solve_rotsym_collinear(
            Direction::from(st.targets.front()), d, s.discrete.masses, g, cfg);
        st.eccentricities = rs.eccentricities;
        st.eps0 = rs.eps0;
        const ApertureGrid grid = st.grid();
        // Balance the prescription against the grid's own total mass.
        CompensatedSum fsum;
        for (double f : s.discrete.masses) fsum.add(f);
        const double scale = grid.total_mass() / fsum.value();
        for (double f : s.discrete.masses) st.prescribed.push_back(f * scale);
        json trace{{"schema", "vsr.trace/1"}, {"solver", "rotsym"},
                   {"band_edges", rs.band_edges},
                   {"band_owner", rs.band_owner},
                   {"eps_lower", rs.eps_lower},
                   {"eps_max", rs.eps_max},
                   {"eps_upper", std::isfinite(rs.eps_upper) ? json(rs.eps_upper) : json(nullptr)},
                   {"cap_mass", rs.total_mass},
                   {"notes", rs.notes}};
        out.trace = trace;
      } else {
        const DiscreteSolution ds = solve_discrete(st.targets, s.discrete.masses, g, cfg);
        const Eigen::VectorXd& e = ds.refractor.eccentricities();
        st.eccentricities.assign(e.data(), e.data() + e.size());
        st.eps0 = ds.refractor.eps0();
        first = ds.energy;
        st.converged = ds.trace.converged;
        out.trace = json::parse(to_json(ds.trace));
      }
      break;
    }
    case SceneKind::Cone: {
      const ConeSolution cs = solve_cone(s.cone.spec, g, s.cone.k_schedule, cfg);
      long period = 2;
      for (int k : s.cone.k_schedule) period = std::lcm(period, 2L * k);
      st.azimuth_steps = static_cast<int>(((cfg.grid_resolution + period - 1) / period) * period);
      const KgonSolution& fine = cs.levels.back();
      st.targets = fine.refractor.targets();
      const Eigen::VectorXd& e = fine.refractor.eccentricities();
      st.eccentricities.assign(e.data(), e.data() + e.size());
      st.eps0 = fine.refractor.eps0();
      first = fine.energy;
      out.trace = json::parse(to_json(cs));
      break;
    }
    case SceneKind::Continuous: {
      const ContinuousSolution csol =
          solve_continuous(s.continuous.region, s.continuous.density.density(), g,
                           s.continuous.partition, cfg);
      if (!csol.refractor) {
        throw Error(ErrorKind::InvalidArgument,
                    "continuous: target density has zero mass, nothing to solve");
      }
      st.targets = csol.refractor->targets();
      const Eigen::VectorXd& e = csol.refractor->eccentricities();
      st.eccentricities.assign(e.data(), e.data() + e.size());
      st.eps0 = csol.refractor->eps0();
      first = csol.energy;
      out.trace = json::parse(to_json(csol));
      break;
    }
  }
  if (st.prescribed.empty()) {
    for (std::size_t i = 0; i < first.per_target.size(); ++i) {
      st.prescribed.push_back(first.per_target[i].energy - first.residual[i]);
    }
  }
  // Report from the stored form so a reload reproduces it exactly.
  out.energy = energy_vector(st.refractor(), st.grid(), st.prescribed);
  return out;
}

}  // namespace vsr
