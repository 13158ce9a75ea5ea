#include "vsr/hypotheses.hpp"

#include <json.hpp>

#include <algorithm>
#include <limits>
#include <random>
#include <sstream>

namespace vsr {

TargetStats target_stats(const std::vector<Vec3>& points) {
  if (points.empty()) {
    throw Error(ErrorKind::InvalidArgument, "target set is empty");
  }
  TargetStats s;
  s.ell = std::numeric_limits<double>::infinity();
  s.L = 0.0;
  std::vector<Vec3> dirs;
  dirs.reserve(points.size());
  for (const Vec3& p : points) {
    const double d = p.norm();
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw Error(ErrorKind::InvalidArgument,
                  "target at the origin or non-finite");
    }
    s.ell = std::min(s.ell, d);
    s.L = std::max(s.L, d);
    dirs.push_back(p / d);
  }
  s.c = 1.0;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    for (std::size_t j = i + 1; j < dirs.size(); ++j) {
      s.c = std::min(s.c, dirs[i].dot(dirs[j]));
    }
  }
  s.c = std::min(s.c, 1.0);
  s.ratio = s.L / s.ell;
  return s;
}

TargetStats cone_target_stats(double ring_polar, double dmin, double dmax) {
  if (!(dmin > 0.0) || !(dmax >= dmin)) {
    throw Error(ErrorKind::InvalidArgument,
                "cone targets need 0 < dmin <= dmax");
  }
  TargetStats s;
  s.ell = dmin;
  s.L = dmax;
  s.c = std::cos(2.0 * ring_polar);
  s.ratio = dmax / dmin;
  return s;
}

H1Verdict check_h1(const TargetStats& s) {
  H1Verdict v;
  v.lhs = 2.0 * s.ell * s.c;
  v.rhs = s.L;
  if (!(s.ell > 0.0)) {
    v.failed = "ell > 0";
    return v;
  }
  if (!(v.lhs > v.rhs)) {
    std::ostringstream os;
    os << "2*ell*c > L (2*ell*c = " << v.lhs << ", L = " << v.rhs << ")";
    if (s.c >= 1.0) os << "; collinear bound L/ell < 2 violated";
    v.failed = os.str();
    return v;
  }
  v.pass = true;
  v.half_space_implied = s.c > 0.0;
  return v;
}

double epsilon0(const TargetStats& s) {
  const H1Verdict v = check_h1(s);
  if (!v.pass) {
    throw Error(ErrorKind::Infeasible, "hypothesis H1 fails: " + v.failed);
  }
  const double l = s.ell;
  const double radicand = std::max(0.0, l * l - 2.0 * s.L * l * s.c + s.L * s.L);
  return (l + std::sqrt(radicand)) / (2.0 * l * s.c - s.L);
}

double collinear_eps_upper(const TargetStats& s) {
  if (!(s.ratio < 2.0)) {
    std::ostringstream os;
    os << "collinear bound: K = L/ell = " << s.ratio << " >= 2";
    throw Error(ErrorKind::Infeasible, os.str());
  }
  if (s.ratio <= 1.0) return std::numeric_limits<double>::infinity();
  return 1.0 / (s.ratio - 1.0);
}

double CapTargetRegion::xi_bound(double w, double W) {
  return 1.0 - std::cos(0.5 * std::acos(W / (2.0 * w)));
}

void CapTargetRegion::validate() const {
  if (!(w > 0.0) || !(W >= w)) {
    throw Error(ErrorKind::InvalidArgument,
                "cap target region needs 0 < w <= W");
  }
  if (!(w > W / 2.0)) {
    throw Error(ErrorKind::InvalidArgument,
                "cap target region needs w > W/2");
  }
  const double bound = xi_bound(w, W);
  if (!(xi > 0.0 && xi < bound)) {
    std::ostringstream os;
    os << "xi bound: need 0 < xi < 1 - cos(acos(W/(2w))/2) = " << bound
       << ", got xi = " << xi;
    throw Error(ErrorKind::InvalidArgument, os.str());
  }
}

bool CapTargetRegion::contains(const Vec3& x) const {
  const double d = x.norm();
  if (!(d >= w && d <= W)) return false;
  return x.dot(axis.vec()) / d >= 1.0 - xi;
}

TargetStats CapTargetRegion::stats() const {
  return cone_target_stats(polar_half_angle(), w, W);
}

H2Check evaluate_h2(double delta, double c) {
  TargetStats s;
  s.ell = 1.0;
  s.L = 1.0 + delta;
  s.c = c;
  s.ratio = s.L;
  H2Check h;
  h.eps0 = epsilon0(s);
  const double e = h.eps0;
  const double L = s.L;
  const double denom = 2.0 - L * e;
  h.margin_positive = denom > 0.0;
  const double radicand = e * e - 2.0 * L * e + L * L * e * e;
  const double rhs = (e + std::sqrt(std::max(0.0, radicand))) / denom;
  // The bound only has its stated meaning with a positive denominator; with
  // a nonpositive margin the joint event is false regardless.
  h.eps0_above_bound = std::isfinite(rhs) && e > rhs && denom != 0.0;
  return h;
}

AuditReport audit_h1_h2(std::int64_t samples, std::uint64_t seed) {
  if (samples < 1) {
    throw Error(ErrorKind::InvalidArgument, "audit: samples must be >= 1");
  }
  AuditReport report;
  report.samples = samples;
  report.seed = seed;
  report.min_eps0 = std::numeric_limits<double>::infinity();

  auto record = [&](double delta, double c) {
    const H2Check h = evaluate_h2(delta, c);
    report.min_eps0 = std::min(report.min_eps0, h.eps0);
    if (h.margin_positive) ++report.margin_positive_true;
    if (h.eps0_above_bound) ++report.eps0_above_bound_true;
    if (h.eps0 < 1.0) {
      ++report.eps0_below_one;
      report.witnesses.push_back({delta, c, h.eps0, "eps0_below_one"});
    }
    if (h.margin_positive && h.eps0_above_bound) {
      ++report.joint_h2;
      report.witnesses.push_back({delta, c, h.eps0, "joint_h2"});
    }
  };

  constexpr std::int64_t kBlock = 4096;
  for (std::int64_t start = 0; start < samples; start += kBlock) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(start / kBlock)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::int64_t end = std::min(samples, start + kBlock);
    for (std::int64_t i = start; i < end; ++i) {
      const double delta = unit(rng);
      const double lo = 0.5 * (1.0 + delta);
      // c in (lo, 1]: 1 - u*(1 - lo) with u in [0, 1).
      const double c = 1.0 - unit(rng) * (1.0 - lo);
      if (!(c > lo)) continue;
      record(delta, c);
    }
  }

  for (double delta : {0.0, 1e-9}) {
    for (double c : {1.0, 1.0 - 1e-9}) {
      record(delta, c);
      ++report.boundary_probes;
    }
  }

  TargetStats collinear;
  collinear.ell = 1.0;
  collinear.L = 1.2;
  collinear.c = 1.0;
  collinear.ratio = 1.2;
  report.collinear_eps0_example = epsilon0(collinear);
  return report;
}

std::string to_json(const AuditReport& r) {
  nlohmann::json j;
  j["schema"] = "vsr.audit/1";
  j["samples"] = r.samples;
  j["seed"] = r.seed;
  j["boundary_probes"] = r.boundary_probes;
  j["eps0_below_one"] = r.eps0_below_one;
  j["joint_h2"] = r.joint_h2;
  j["margin_positive_true"] = r.margin_positive_true;
  j["eps0_above_bound_true"] = r.eps0_above_bound_true;
  j["min_eps0"] = r.min_eps0;
  j["witnesses"] = nlohmann::json::array();
  for (const AuditWitness& w : r.witnesses) {
    j["witnesses"].push_back(
        {{"kind", w.kind}, {"delta", w.delta}, {"c", w.c}, {"eps0", w.eps0}});
  }
  j["collinear_note"] = {
      {"ell", 1.0},
      {"L", 1.2},
      {"c", 1.0},
      {"eps0", r.collinear_eps0_example},
      {"remark",
       "for collinear targets eps0 = L/(2*ell - L), which exceeds 1 when "
       "L > ell"}};
  return j.dump(2);
}

}  // namespace vsr
