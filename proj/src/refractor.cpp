#include "vsr/refractor.hpp"

#include "vsr/hypotheses.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

namespace vsr {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

Refractor::Refractor(std::vector<Vec3> targets,
                     std::vector<double> eccentricities, double gamma,
                     double eps0, ApertureSpec aperture)
    : targets_(std::move(targets)),
      gamma_(gamma),
      eps0_(eps0),
      aperture_(std::move(aperture)) {
  if (targets_.empty()) {
    throw Error(ErrorKind::InvalidArgument, "refractor: no targets");
  }
  if (eccentricities.size() != targets_.size()) {
    throw Error(ErrorKind::InvalidArgument,
                "refractor: one eccentricity per target required");
  }
  if (!(gamma_ > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "refractor: gamma must be > 0");
  }
  const auto k = static_cast<Eigen::Index>(targets_.size());
  directions_.resize(3, k);
  distances_.resize(k);
  eccentricities_.resize(k);
  const double lower = eps0_ + gamma_;
  for (Eigen::Index i = 0; i < k; ++i) {
    const Vec3& x = targets_[static_cast<std::size_t>(i)];
    const double d = x.norm();
    if (!(d > 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "refractor: target at origin");
    }
    const double e = eccentricities[static_cast<std::size_t>(i)];
    if (!(e > lower) || !std::isfinite(e)) {
      std::ostringstream os;
      os << "refractor: eccentricity " << i << " = " << e
         << " must exceed eps0 + gamma = " << lower;
      throw Error(ErrorKind::Infeasible, os.str());
    }
    directions_.col(i) = x / d;
    distances_[i] = d;
    eccentricities_[i] = e;
  }
}

Refractor Refractor::with_eccentricities(const std::vector<double>& eps) const {
  return Refractor(targets_, eps, gamma_, eps0_, aperture_);
}

Refractor make_refractor(const std::vector<Vec3>& targets,
                         const std::vector<double>& eccentricities,
                         double gamma) {
  const TargetStats stats = target_stats(targets);
  const double eps0 = epsilon0(stats);
  return Refractor(targets, eccentricities, gamma, eps0,
                   aperture_for_targets(targets, gamma));
}

Eigen::VectorXd member_radii(const Refractor& r, const Direction& m) {
  const Eigen::VectorXd t = r.directions().transpose() * m.vec();
  Eigen::VectorXd h(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double e = r.eccentricities()[i];
    h[i] = t[i] * e > 1.0 ? polar_radius(r.distances()[i], e, t[i]) : kNegInf;
  }
  return h;
}

double radial(const Refractor& r, const Direction& m) {
  const double best = member_radii(r, m).maxCoeff();
  if (best == kNegInf) {
    throw Error(ErrorKind::Domain,
                "radial: direction outside every member domain");
  }
  return best;
}

namespace {

std::vector<int> tie_set(const Eigen::VectorXd& h, double tol) {
  const double best = h.maxCoeff();
  if (best == kNegInf) {
    throw Error(ErrorKind::Domain,
                "refractor map: direction outside every member domain");
  }
  std::vector<int> out;
  const double cut = best - tol * best;
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    if (h[i] >= cut) out.push_back(static_cast<int>(i));
  }
  return out;
}

}  // namespace

std::vector<int> map_point(const Refractor& r, const Direction& m,
                           double tie_tolerance) {
  return tie_set(member_radii(r, m), tie_tolerance);
}

int map_winner(const Refractor& r, const Direction& m, double tie_tolerance) {
  return map_point(r, m, tie_tolerance).front();
}

Eigen::MatrixXd radii_on_grid(const Refractor& r, const ApertureGrid& grid) {
  const Eigen::MatrixXd t = grid.centers().transpose() * r.directions();
  Eigen::MatrixXd h(t.rows(), t.cols());
  for (Eigen::Index i = 0; i < t.cols(); ++i) {
    const double e = r.eccentricities()[i];
    const double d = r.distances()[i];
    for (Eigen::Index n = 0; n < t.rows(); ++n) {
      const double tn = t(n, i);
      h(n, i) = tn * e > 1.0 ? polar_radius(d, e, tn) : kNegInf;
    }
  }
  return h;
}

std::vector<int> owners_from_radii(const Eigen::MatrixXd& radii,
                                   double tie_tolerance) {
  std::vector<int> owner(static_cast<std::size_t>(radii.rows()));
  for (Eigen::Index n = 0; n < radii.rows(); ++n) {
    const double best = radii.row(n).maxCoeff();
    if (best == kNegInf) {
      throw Error(ErrorKind::Domain,
                  "grid cell outside every member domain");
    }
    const double cut = best - tie_tolerance * best;
    Eigen::Index i = 0;
    while (radii(n, i) < cut) ++i;
    owner[static_cast<std::size_t>(n)] = static_cast<int>(i);
  }
  return owner;
}

CellAssignment visibility_cells(const Refractor& r, const ApertureGrid& grid,
                                double tie_tolerance) {
  const Eigen::MatrixXd h = radii_on_grid(r, grid);
  CellAssignment a;
  a.tie_tolerance = tie_tolerance;
  a.owner = owners_from_radii(h, tie_tolerance);
  a.cells_of.resize(static_cast<std::size_t>(r.size()));
  for (Eigen::Index n = 0; n < h.rows(); ++n) {
    const std::vector<int> ties = tie_set(h.row(n).transpose(), tie_tolerance);
    for (int i : ties) a.cells_of[static_cast<std::size_t>(i)].push_back(n);
    if (ties.size() > 1) a.ties.emplace_back(n, ties);
  }
  return a;
}

double bounding_radius(const Refractor& r, int rim_samples) {
  const ApertureSpec& ap = r.aperture();
  const Frame& f = ap.frame();
  const double eps = r.eps_floor();
  rim_samples = std::max(rim_samples, 16);

  auto point_at = [&](double az) {
    return Direction::from(f.point(ap.rim_polar_angle(az), az));
  };
  auto h_at = [&](Eigen::Index i, const Direction& m) {
    const double t = m.dot(Vec3(r.directions().col(i)));
    if (!(t * eps > 1.0)) return std::numeric_limits<double>::infinity();
    return polar_radius(r.distances()[i], eps, t);
  };

  double b = 0.0;
  const double step = 2.0 * std::numbers::pi / rim_samples;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    std::vector<double> vals(static_cast<std::size_t>(rim_samples));
    for (int s = 0; s < rim_samples; ++s) {
      vals[static_cast<std::size_t>(s)] = h_at(i, point_at(s * step));
    }
    for (int s = 0; s < rim_samples; ++s) {
      const double prev = vals[static_cast<std::size_t>((s + rim_samples - 1) % rim_samples)];
      const double next = vals[static_cast<std::size_t>((s + 1) % rim_samples)];
      const double here = vals[static_cast<std::size_t>(s)];
      b = std::max(b, here);
      if (here < prev || here < next) continue;
      // Golden-section refinement around a sampled local maximum.
      double lo = (s - 1) * step;
      double hi = (s + 1) * step;
      const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
      for (int it = 0; it < 60; ++it) {
        const double a1 = hi - phi * (hi - lo);
        const double a2 = lo + phi * (hi - lo);
        if (h_at(i, point_at(a1)) < h_at(i, point_at(a2))) {
          lo = a1;
        } else {
          hi = a2;
        }
      }
      b = std::max(b, h_at(i, point_at(0.5 * (lo + hi))));
    }
    const Direction vertex = Direction::from(Vec3(r.directions().col(i)));
    if (ap.contains(vertex)) b = std::max(b, h_at(i, vertex));
    b = std::max(b, h_at(i, ap.central_axis()));
  }
  return b;
}

namespace {

// Lawson-style pass: flip interior edges whose neighbours fold outward, so
// creases between members that cut across mesh lines stay convex.
template <typename Orient>
void flip_reflex_edges(const Eigen::Matrix3Xd& V, std::vector<Eigen::Vector3i>& faces,
                       const Orient& oriented) {
  double scale = 0.0;
  for (Eigen::Index i = 0; i < V.cols(); ++i) scale = std::max(scale, V.col(i).norm());
  const double tol = 1e-12 * scale;
  auto normal = [&](const Eigen::Vector3i& f) {
    return Vec3((V.col(f[1]) - V.col(f[0])).cross(V.col(f[2]) - V.col(f[0])));
  };
  auto height = [&](const Eigen::Vector3i& f, int p) {
    const Vec3 n = normal(f);
    const double len = n.norm();
    return len == 0.0 ? 0.0 : (V.col(p) - V.col(f[0])).dot(n) / len;
  };
  auto other = [](const Eigen::Vector3i& f, int a, int b) {
    for (int k = 0; k < 3; ++k) {
      if (f[k] != a && f[k] != b) return f[k];
    }
    return -1;
  };
  using Key = std::pair<int, int>;
  for (int pass = 0; pass < 64; ++pass) {
    std::map<Key, std::vector<int>> edges;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      for (int e = 0; e < 3; ++e) {
        const int a = faces[f][e], b = faces[f][(e + 1) % 3];
        edges[{std::min(a, b), std::max(a, b)}].push_back(static_cast<int>(f));
      }
    }
    std::vector<char> touched(faces.size(), 0);
    int flips = 0;
    for (const auto& [e, fs] : edges) {
      if (fs.size() != 2 || touched[fs[0]] || touched[fs[1]]) continue;
      const Eigen::Vector3i f0 = faces[fs[0]], f1 = faces[fs[1]];
      const int q = other(f0, e.first, e.second), p = other(f1, e.first, e.second);
      if (std::max(height(f0, p), height(f1, q)) <= tol) continue;
      if (edges.count({std::min(p, q), std::max(p, q)})) continue;
      const Eigen::Vector3i g0 = oriented(p, q, e.first), g1 = oriented(p, q, e.second);
      if (normal(g0).norm() == 0.0 || normal(g1).norm() == 0.0) continue;
      if (std::max(height(g0, e.second), height(g1, e.first)) > tol) continue;
      faces[fs[0]] = g0;
      faces[fs[1]] = g1;
      touched[fs[0]] = touched[fs[1]] = 1;
      ++flips;
    }
    if (flips == 0) break;
  }
}

}  // namespace

TriangleMesh build_mesh(const Refractor& r, int resolution) {
  if (resolution < 2) {
    throw Error(ErrorKind::InvalidArgument, "mesh: resolution must be >= 2");
  }
  const ApertureSpec& ap = r.aperture();
  if (!ap.contains(ap.central_axis())) {
    throw Error(ErrorKind::Domain, "mesh: aperture does not contain its axis");
  }
  const Frame& f = ap.frame();
  const int rings = resolution - 1;
  const int n_az = std::max(4, resolution);
  const Eigen::Index n_vertices = 1 + static_cast<Eigen::Index>(rings) * n_az;

  TriangleMesh mesh;
  mesh.vertices.resize(3, n_vertices);
  auto surface = [&](const Direction& m) { return Vec3(m.vec() * radial(r, m)); };
  mesh.vertices.col(0) = surface(ap.central_axis());
  for (int s = 0; s < n_az; ++s) {
    const double az = 2.0 * std::numbers::pi * s / n_az;
    const double rim = ap.rim_polar_angle(az) * (1.0 - 1e-9);
    for (int j = 1; j <= rings; ++j) {
      const double polar = rim * j / rings;
      mesh.vertices.col(1 + static_cast<Eigen::Index>(j - 1) * n_az + s) =
          surface(Direction::from(f.point(polar, az)));
    }
  }
  auto vid = [&](int ring, int s) {
    return ring == 0 ? 0 : 1 + (ring - 1) * n_az + ((s % n_az) + n_az) % n_az;
  };

  std::vector<Eigen::Vector3i> faces;
  const auto& V = mesh.vertices;
  // Orient each triangle so its right-hand normal points toward the origin,
  // i.e. out of the body.
  auto oriented = [&](int a, int b, int c) {
    const Vec3 n = (V.col(b) - V.col(a)).cross(V.col(c) - V.col(a));
    const Vec3 centroid = (V.col(a) + V.col(b) + V.col(c)) / 3.0;
    return n.dot(centroid) <= 0.0 ? Eigen::Vector3i(a, b, c)
                                  : Eigen::Vector3i(a, c, b);
  };
  // Height of p above the plane of (a, b, c) along the outward normal.
  auto excess = [&](int a, int b, int c, int p) {
    const Eigen::Vector3i t = oriented(a, b, c);
    const Vec3 n = (V.col(t[1]) - V.col(t[0])).cross(V.col(t[2]) - V.col(t[0]));
    const double len = n.norm();
    if (len == 0.0) return 0.0;
    return (V.col(p) - V.col(t[0])).dot(n) / len;
  };

  for (int s = 0; s < n_az; ++s) {
    faces.push_back(oriented(vid(0, 0), vid(1, s), vid(1, s + 1)));
  }
  for (int j = 1; j < rings; ++j) {
    for (int s = 0; s < n_az; ++s) {
      const int a = vid(j, s), b = vid(j, s + 1);
      const int c = vid(j + 1, s + 1), d = vid(j + 1, s);
      const double split_ac =
          std::max(excess(a, b, c, d), excess(a, c, d, b));
      const double split_bd =
          std::max(excess(a, b, d, c), excess(b, c, d, a));
      if (split_ac <= split_bd) {
        faces.push_back(oriented(a, b, c));
        faces.push_back(oriented(a, c, d));
      } else {
        faces.push_back(oriented(a, b, d));
        faces.push_back(oriented(b, c, d));
      }
    }
  }
  flip_reflex_edges(V, faces, oriented);
  mesh.faces.resize(3, static_cast<Eigen::Index>(faces.size()));
  for (std::size_t i = 0; i < faces.size(); ++i) {
    mesh.faces.col(static_cast<Eigen::Index>(i)) = faces[i];
  }
  return mesh;
}

void write_mesh(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorKind::Io, "mesh: cannot open " + path.string());
  }
  char buf[128];
  for (Eigen::Index i = 0; i < mesh.vertices.cols(); ++i) {
    std::snprintf(buf, sizeof buf, "v %.15g %.15g %.15g\n", mesh.vertices(0, i),
                  mesh.vertices(1, i), mesh.vertices(2, i));
    out << buf;
  }
  for (Eigen::Index i = 0; i < mesh.faces.cols(); ++i) {
    out << "f " << mesh.faces(0, i) + 1 << ' ' << mesh.faces(1, i) + 1 << ' '
        << mesh.faces(2, i) + 1 << '\n';
  }
  if (!out) {
    throw Error(ErrorKind::Io, "mesh: write failed for " + path.string());
  }
}

void export_mesh(const Refractor& r, int resolution,
                 const std::filesystem::path& path) {
  write_mesh(build_mesh(r, resolution), path);
}

}  // namespace vsr
