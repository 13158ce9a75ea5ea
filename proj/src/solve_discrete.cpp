#include "vsr/solver.hpp"

#include "solver_detail.hpp"

#include <json.hpp>

#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>

namespace vsr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Selection {
  double eps;
  /// Every cell the group could ever win is already included.
  bool saturated;
  double reachable;
  /// Upper end of the selected interval.
  double upper;
};

class Engine {
 public:
  Engine(const GroupedProblem& p, const ApertureGrid& grid, double floor,
         double eps_max)
      : p_(p), grid_(grid), floor_(floor), eps_max_(eps_max) {
    const auto k = static_cast<Eigen::Index>(p.targets.size());
    Eigen::Matrix3Xd dirs(3, k);
    dist_.resize(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      const Vec3& x = p.targets[static_cast<std::size_t>(j)];
      dist_[j] = x.norm();
      dirs.col(j) = x / dist_[j];
    }
    T_ = grid.centers().transpose() * dirs;
    H_.resize(T_.rows(), k);
    eps_.assign(p.groups.size(), eps_max);
    for (Eigen::Index j = 0; j < k; ++j) fill_column(j, eps_max);
    const auto N = static_cast<std::size_t>(T_.rows());
    best_.resize(N);
    second_.resize(N);
    best_g_.resize(N);
    second_g_.resize(N);
    rebuild();
    total_ = grid.total_mass();
    slack_ = 1e-12 * total_;
  }

  std::size_t groups() const { return eps_.size(); }
  double eps(std::size_t g) const { return eps_[g]; }
  const std::vector<double>& eps_all() const { return eps_; }
  double total() const { return total_; }

  /// Sets every group at once.
  void set_all(const std::vector<double>& eps) {
    eps_ = eps;
    for (std::size_t g = 0; g < groups(); ++g) {
      for (int j : p_.groups[g]) fill_column(j, eps_[g]);
    }
    rebuild();
  }

  void set(std::size_t g, double e) {
    const bool grows = e < eps_[g];
    eps_[g] = e;
    for (int j : p_.groups[g]) fill_column(j, e);
    if (!grows) {
      rebuild();
      return;
    }
    // Radii of g only went up: patch the per-cell leaders in place.
    const int gi = static_cast<int>(g);
    for (std::size_t n = 0; n < best_.size(); ++n) {
      const double v = group_radius(n, g);
      if (best_g_[n] == gi) {
        best_[n] = v;
      } else if (v > best_[n]) {
        second_[n] = best_[n];
        second_g_[n] = best_g_[n];
        best_[n] = v;
        best_g_[n] = gi;
      } else if (second_g_[n] == gi || v > second_[n]) {
        second_[n] = v;
        second_g_[n] = gi;
      }
    }
  }

  Eigen::VectorXd energies() const {
    std::vector<CompensatedSum> sums(groups());
    for (std::size_t n = 0; n < best_g_.size(); ++n) {
      sums[static_cast<std::size_t>(best_g_[n])].add(
          grid_.masses()[static_cast<Eigen::Index>(n)]);
    }
    Eigen::VectorXd e(static_cast<Eigen::Index>(groups()));
    for (std::size_t g = 0; g < groups(); ++g) {
      e[static_cast<Eigen::Index>(g)] = sums[g].value();
    }
    return e;
  }

  /// Smallest eccentricity in the window at which group g's energy does not
  /// exceed f, others held fixed. Each cell has a threshold below which the
  /// group takes it; thresholds above the current eccentricity are cells the
  /// group already owns, the rest are drawn from a heap in descending order.
  Selection select(std::size_t g, double f) const {
    const auto& members = p_.groups[g];
    const int gi = static_cast<int>(g);
    const double cur = eps_[g];
    heap_.clear();
    double owned = 0.0, owned_min = kInf, reachable = 0.0;
    std::size_t owned_count = 0;
    for (std::size_t n = 0; n < best_.size(); ++n) {
      const double others = best_g_[n] == gi ? second_[n] : best_[n];
      double e = kInf;
      if (others > -kInf) {
        e = -kInf;
        for (int j : members) {
          e = std::max(e, eccentricity_through(
                              dist_[j], T_(static_cast<Eigen::Index>(n), j), others));
        }
      }
      if (!(e > floor_)) continue;
      const double mass = grid_.masses()[static_cast<Eigen::Index>(n)];
      reachable += mass;
      if (e > cur) {
        owned += mass;
        owned_min = std::min(owned_min, e);
        ++owned_count;
      }
      heap_.emplace_back(e, mass);
    }
    const double budget = f + slack_;
    double cum = 0.0, hi = kInf;
    if (owned <= budget) {
      // Keep the owned cells; only thresholds at or below cur remain.
      std::erase_if(heap_, [&](const auto& c) { return c.first > cur; });
      cum = owned;
      if (owned_count > 0) hi = owned_min;
    }
    std::make_heap(heap_.begin(), heap_.end());

    bool found = false, all_in = false, none = false;
    double best_lo = floor_, best_hi = eps_max_;
    auto consider = [&]() {
      const double lo = heap_.empty() ? floor_ : heap_.front().first;
      const double upper = std::min(hi, eps_max_);
      const double lower = std::max(lo, floor_);
      if (lower < upper) {
        found = true;
        all_in = heap_.empty();
        none = std::isinf(hi);
        best_lo = lower;
        best_hi = upper;
      }
    };
    consider();
    while (!heap_.empty()) {
      // Thresholds equal up to rounding (symmetric copies) go in one batch.
      const double v = heap_.front().first;
      double add = 0.0, vmin = v;
      while (!heap_.empty() && v - heap_.front().first <= 1e-12 * std::abs(v)) {
        vmin = heap_.front().first;
        std::pop_heap(heap_.begin(), heap_.end());
        add += heap_.back().second;
        heap_.pop_back();
      }
      if (cum + add > budget) break;
      cum += add;
      hi = vmin;
      consider();
    }
    if (!found) {
      // Even eps_max takes too much; stay at the ceiling.
      return {eps_max_, false, reachable, eps_max_};
    }
    // With no cell needed, stay invisible at the ceiling.
    // Already inside the selected interval: stay.
    if (cur > best_lo && cur <= best_hi) return {cur, all_in, reachable, best_hi};
    const double e = none ? eps_max_ : 0.5 * (best_lo + best_hi);
    return {e, all_in, reachable, best_hi};
  }

 private:
  void fill_column(Eigen::Index j, double e) {
    const double d = dist_[j];
    for (Eigen::Index n = 0; n < T_.rows(); ++n) {
      const double t = T_(n, j);
      H_(n, j) = t * e > 1.0 ? polar_radius(d, e, t) : -kInf;
    }
  }

  double group_radius(std::size_t n, std::size_t g) const {
    double v = -kInf;
    for (int j : p_.groups[g]) v = std::max(v, H_(static_cast<Eigen::Index>(n), j));
    return v;
  }

  void rebuild() {
    for (std::size_t n = 0; n < best_.size(); ++n) {
      best_[n] = second_[n] = -kInf;
      best_g_[n] = second_g_[n] = 0;
      for (std::size_t g = 0; g < groups(); ++g) {
        const double v = group_radius(n, g);
        const int gi = static_cast<int>(g);
        if (v > best_[n] || g == 0) {
          second_[n] = best_[n];
          second_g_[n] = best_g_[n];
          best_[n] = v;
          best_g_[n] = gi;
        } else if (v > second_[n] || second_g_[n] == best_g_[n]) {
          second_[n] = v;
          second_g_[n] = gi;
        }
      }
      if (groups() == 1) second_[n] = -kInf;
    }
  }

  const GroupedProblem& p_;
  const ApertureGrid& grid_;
  double floor_, eps_max_;
  Eigen::VectorXd dist_;
  Eigen::MatrixXd T_, H_;
  std::vector<double> eps_;
  /// Largest and runner-up group radius per cell, with their groups.
  std::vector<double> best_, second_;
  std::vector<int> best_g_, second_g_;
  double total_ = 0.0, slack_ = 0.0;
  mutable std::vector<std::pair<double, double>> heap_;
};

std::string vec_str(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os << '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ']';
  return os.str();
}

double residual_of(const Eigen::VectorXd& G, const std::vector<double>& f) {
  double r = 0.0;
  for (Eigen::Index i = 0; i < G.size(); ++i) {
    r = std::max(r, std::abs(G[i] - f[static_cast<std::size_t>(i)]));
  }
  return r;
}

}  // namespace

std::string to_json(const SolveTrace& t) {
  nlohmann::json j;
  j["schema"] = "vsr.trace/1";
  j["eps0"] = t.eps0;
  j["window"] = {t.eps_lower, t.eps_max};
  j["anchor"] = t.anchor;
  j["anchor_eps"] = t.anchor_eps;
  j["renormalization"] = t.renormalization;
  j["lift_passes"] = t.lift_passes;
  j["sweeps"] = t.sweeps;
  j["converged"] = t.converged;
  j["residuals"] = t.residuals;
  j["notes"] = t.notes;
  return j.dump(2);
}

GroupedSolution solve_grouped(const GroupedProblem& problem,
                              const ApertureGrid& grid,
                              const SolveConfig& cfg) {
  const std::size_t G = problem.groups.size();
  if (G == 0 || problem.masses.size() != G) {
    throw Error(ErrorKind::InvalidArgument,
                "solver: need one mass per eccentricity group");
  }
  if (!(cfg.tolerance > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "solver: tolerance must be > 0");
  }
  const double floor = problem.eps0 + problem.gamma;
  const double eps_max = cfg.eps_max.value_or(10.0 * floor);
  if (!(eps_max > floor) || !std::isfinite(eps_max)) {
    std::ostringstream os;
    os << "solver: eps_max = " << eps_max << " must exceed eps0 + gamma = "
       << floor;
    throw Error(ErrorKind::InvalidArgument, os.str());
  }

  GroupedSolution out;
  SolveTrace& trace = out.trace;
  trace.eps0 = problem.eps0;
  trace.eps_lower = floor;
  trace.eps_max = eps_max;
  const std::vector<double>& f = problem.masses;

  // Anchor.
  std::size_t anchor = 0;
  if (cfg.anchor_policy == AnchorPolicy::MaxMass) {
    anchor = static_cast<std::size_t>(
        std::max_element(f.begin(), f.end()) - f.begin());
  } else {
    double far = -1.0;
    for (std::size_t g = 0; g < G; ++g) {
      for (int j : problem.groups[g]) {
        const double d = problem.targets[static_cast<std::size_t>(j)].norm();
        if (d > far) {
          far = d;
          anchor = g;
        }
      }
    }
  }
  if (!(f[anchor] > 0.0)) {
    throw Error(ErrorKind::InvalidArgument,
                "solver: the anchor target must have positive mass");
  }
  trace.anchor = static_cast<int>(anchor);

  Engine eng(problem, grid, floor, eps_max);
  const double total = eng.total();
  const double slack = 1e-12 * total;

  // Sets group g to e; if rounding in the thresholds left it over budget,
  // walks toward the top of the selected interval, then falls back.
  auto settle = [&](std::size_t g, double e, double upper, double fallback) {
    eng.set(g, e);
    for (int fix = 0; fix < 50; ++fix) {
      if (eng.energies()[static_cast<Eigen::Index>(g)] <= f[g] + slack) return;
      e = 0.5 * (e + upper);
      eng.set(g, e);
    }
    if (eng.energies()[static_cast<Eigen::Index>(g)] > f[g] + slack) {
      eng.set(g, fallback);
    }
  };

  auto overfull = [&](const Eigen::VectorXd& E) {
    for (std::size_t g = 0; g < G; ++g) {
      if (g != anchor && E[static_cast<Eigen::Index>(g)] > f[g] + slack) return true;
    }
    return false;
  };

  // Lower the anchor until no other group takes more than its mass.
  if (overfull(eng.energies())) {
    double lo = floor + 1e-9 * (eps_max - floor);
    double hi = eps_max;
    eng.set(anchor, lo);
    if (overfull(eng.energies())) {
      throw Error(ErrorKind::Infeasible,
                  "solver: eccentricity window too narrow; the anchor cannot "
                  "dominate even at eps0 + gamma (raise eps_max)");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      eng.set(anchor, mid);
      (overfull(eng.energies()) ? hi : lo) = mid;
    }
    eng.set(anchor, lo);
    trace.notes.push_back("anchor eccentricity lowered from eps_max by bisection");
  }
  trace.anchor_eps = eng.eps(anchor);

  // Custom start: place the other groups, then lift any that take too much.
  if (cfg.initial) {
    if (cfg.initial->size() != G) {
      throw Error(ErrorKind::InvalidArgument,
                  "solver: initial eccentricities need one entry per unknown");
    }
    for (std::size_t g = 0; g < G; ++g) {
      if (g == anchor) continue;
      const double e = (*cfg.initial)[g];
      if (!(e > floor && e <= eps_max)) {
        std::ostringstream os;
        os << "solver: initial eccentricity " << g << " = " << e
           << " outside (" << floor << ", " << eps_max << "]";
        throw Error(ErrorKind::InvalidArgument, os.str());
      }
      eng.set(g, e);
    }
    for (int pass = 0;; ++pass) {
      const Eigen::VectorXd E = eng.energies();
      if (!overfull(E)) break;
      if (pass >= 10000) {
        throw Error(ErrorKind::NotConverged, "solver: lift phase did not settle");
      }
      for (std::size_t g = 0; g < G; ++g) {
        if (g == anchor) continue;
        const Eigen::VectorXd Eg = eng.energies();
        if (Eg[static_cast<Eigen::Index>(g)] > f[g] + slack) {
          const Selection sel = eng.select(g, f[g]);
          const double up = std::max(eng.eps(g), sel.eps);
          settle(g, up, std::max(up, sel.upper), 0.5 * (up + eps_max));
        }
      }
      ++trace.lift_passes;
    }
  }

  Eigen::VectorXd E = eng.energies();
  double residual = residual_of(E, f);
  trace.residuals.push_back(residual);
  const double target = cfg.tolerance * total;

  double omega = 1.0;
  // After the tolerance is met, keep sweeping until the eccentricities stop
  // moving so restarts land on the same point.
  bool polishing = false;
  int stalled = 0;
  auto moved = [&](const std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t g = 0; g < G; ++g) {
      if (std::abs(a[g] - b[g]) > cfg.eps_tolerance) return true;
    }
    return false;
  };
  while (trace.sweeps < cfg.max_sweeps) {
    if (residual <= target) {
      if (!cfg.polish) break;
      polishing = true;
    }
    const std::vector<double> before_sweep = eng.eps_all();
    std::vector<std::size_t> at_floor;
    for (std::size_t g = 0; g < G; ++g) {
      if (g == anchor) continue;
      const Selection s = eng.select(g, f[g]);
      const double before = eng.eps(g);
      const double next = std::min(before, s.eps);
      if (next < before) settle(g, next, s.upper, before);
      if (s.saturated && s.reachable < f[g] - target) {
        std::ostringstream os;
        os << "solver: eccentricity window (" << floor << ", " << eps_max
           << "] cannot deliver mass " << f[g] << " to unknown " << g
           << " (at most " << s.reachable << " reachable)";
        throw Error(ErrorKind::Infeasible, os.str());
      }
      if (s.saturated) at_floor.push_back(g);
    }
    // Extrapolate along the sweep while every other group stays within its
    // mass; the anchor then only loses cells, so the residual still falls.
    const std::vector<double> swept = eng.eps_all();
    bool accepted = false;
    if (swept != before_sweep) {
      std::vector<double> trial = swept;
      for (std::size_t g = 0; g < G; ++g) {
        const double step = omega * (before_sweep[g] - swept[g]);
        // Stay well inside the window.
        trial[g] = std::max(swept[g] - step, 0.5 * (swept[g] + floor));
      }
      eng.set_all(trial);
      // Groups pushed over their mass go back to the swept value, which
      // only hands cells to the rest; repeat until none is over.
      for (std::size_t pass = 0; pass <= G; ++pass) {
        const Eigen::VectorXd Et = eng.energies();
        bool changed = false;
        for (std::size_t g = 0; g < G; ++g) {
          if (g != anchor && Et[static_cast<Eigen::Index>(g)] > f[g] + slack &&
              trial[g] != swept[g]) {
            trial[g] = swept[g];
            changed = true;
          }
        }
        if (!changed) break;
        eng.set_all(trial);
      }
      accepted = !overfull(eng.energies()) && trial != swept;
      // Once converged, a jump must pay for itself.
      if (accepted && polishing) {
        eng.set_all(swept);
        const double at_swept = residual_of(eng.energies(), f);
        eng.set_all(trial);
        accepted = residual_of(eng.energies(), f) < at_swept - slack;
      }
      if (!accepted) {
        eng.set_all(swept);
        omega = std::max(1.0, 0.5 * omega);
      } else {
        omega = std::min(2.0 * omega, 64.0);
      }
    }
    ++trace.sweeps;
    E = eng.energies();
    const double next = residual_of(E, f);
    trace.residuals.push_back(next);
    if (polishing) {
      if (next > residual + slack) {
        // keep the last converged point
        eng.set_all(before_sweep);
        E = eng.energies();
        trace.residuals.back() = residual;
        break;
      }
      stalled = next < residual - slack ? 0 : stalled + 1;
      residual = next;
      if (!moved(before_sweep, eng.eps_all()) || stalled >= 8) break;
      continue;
    }
    if (next > residual + slack) {
      std::ostringstream os;
      os << "solver: monotonicity violation, residual rose from " << residual
         << " to " << next << " at sweep " << trace.sweeps;
      throw Error(ErrorKind::NotConverged, os.str());
    }
    if (next >= residual && next > target && !at_floor.empty()) {
      std::ostringstream os;
      os << "solver: eccentricity window (" << floor << ", " << eps_max
         << "] too narrow: " << at_floor.size()
         << " unknown(s) already take every reachable cell and the residual "
         << next << " stays above " << target << " (raise eps_max)";
      throw Error(ErrorKind::Infeasible, os.str());
    }
    if (next >= residual && next > target) {
      std::ostringstream os;
      os << "solver: sweep " << trace.sweeps
         << " made no progress; residual " << next << " above tolerance "
         << target << " (grid too coarse for these masses?)";
      throw Error(ErrorKind::NotConverged, os.str());
    }
    residual = next;
  }
  trace.converged = residual <= target;
  if (!trace.converged) {
    std::ostringstream os;
    os << "solver: not converged after " << trace.sweeps
       << " sweeps; residual " << residual << " > " << target
       << "; energies " << vec_str(E);
    throw Error(ErrorKind::NotConverged, os.str());
  }
  out.eccentricities = eng.eps_all();
  out.energies = E;
  return out;
}

std::vector<double> detail::balanced_masses(std::span<const double> masses,
                                    double mu, const SolveConfig& cfg,
                                    SolveTrace& trace) {
  std::vector<double> f(masses.begin(), masses.end());
  for (double v : f) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorKind::InvalidArgument,
                  "solver: masses must be finite and nonnegative");
    }
  }
  if (cfg.masses_are_fractions) {
    for (double& v : f) v *= mu;
  }
  double sum = 0.0;
  for (double v : f) sum += v;
  if (std::abs(sum - mu) > 1e-6 * mu) {
    std::ostringstream os;
    os << "solver: masses sum to " << sum << " but the aperture carries "
       << mu << " (mismatch above 1e-6 relative)";
    throw Error(ErrorKind::InvalidArgument, os.str());
  }
  trace.renormalization = mu / sum;
  for (double& v : f) v *= trace.renormalization;
  return f;
}

double detail::default_eps_max(const TargetStats& stats, double floor) {
  double ref = floor;
  if (stats.c >= 1.0) {
    const double up = collinear_eps_upper(stats);
    if (std::isfinite(up)) ref = std::max(ref, up);
  }
  return 10.0 * ref;
}


DiscreteSolution solve_discrete(const std::vector<Vec3>& targets,
                                std::span<const double> masses,
                                const SourceDensity& g,
                                const SolveConfig& cfg) {
  const ApertureSpec ap = aperture_for_targets(targets, cfg.gamma);
  return solve_discrete(targets, masses,
                        build_grid(ap, cfg.grid_resolution, g), cfg);
}

DiscreteSolution solve_discrete(const std::vector<Vec3>& targets,
                                std::span<const double> masses,
                                const ApertureGrid& grid,
                                const SolveConfig& cfg) {
  if (masses.size() != targets.size()) {
    throw Error(ErrorKind::InvalidArgument,
                "solver: one mass per target required");
  }
  const TargetStats stats = target_stats(targets);
  const double eps0 = epsilon0(stats);
  const double floor = eps0 + cfg.gamma;

  SolveTrace pre;
  GroupedProblem p;
  p.targets = targets;
  p.gamma = cfg.gamma;
  p.eps0 = eps0;
  p.masses = detail::balanced_masses(masses, grid.total_mass(), cfg, pre);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    p.groups.push_back({static_cast<int>(i)});
  }
  SolveConfig local = cfg;
  if (!local.eps_max) local.eps_max = detail::default_eps_max(stats, floor);

  GroupedSolution gs = solve_grouped(p, grid, local);
  gs.trace.renormalization = pre.renormalization;
  if (pre.renormalization != 1.0) {
    std::ostringstream os;
    os << "masses rescaled by " << pre.renormalization;
    gs.trace.notes.push_back(os.str());
  }
  Refractor r(targets, gs.eccentricities, cfg.gamma, eps0, grid.aperture());
  EnergyReport energy = energy_vector(r, grid, p.masses);
  if (energy.max_abs_residual() > cfg.tolerance * grid.total_mass()) {
    throw Error(ErrorKind::NotConverged,
                "solver: independent energy check disagrees with the sweep");
  }
  return {std::move(r), grid, std::move(energy), std::move(gs.trace)};
}

const char* to_string(OrderingPattern p) {
  switch (p) {
    case OrderingPattern::Equal: return "equal";
    case OrderingPattern::FirstBelow: return "first_below";
    case OrderingPattern::FirstAbove: return "first_above";
    case OrderingPattern::Mixed: return "mixed";
  }
  return "?";
}

UniquenessVerdict check_uniqueness(const Refractor& a, const Refractor& b,
                                   const ApertureGrid& grid,
                                   double eps_tolerance,
                                   double energy_tolerance) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::InvalidArgument,
                "uniqueness: refractors have different target counts");
  }
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if ((a.targets()[static_cast<std::size_t>(i)] -
         b.targets()[static_cast<std::size_t>(i)]).norm() > 0.0) {
      throw Error(ErrorKind::InvalidArgument,
                  "uniqueness: refractors have different targets");
    }
  }
  UniquenessVerdict v;
  const Eigen::VectorXd ga = energy_vector(a, grid).energies();
  const Eigen::VectorXd gb = energy_vector(b, grid).energies();
  const double gap = (ga - gb).cwiseAbs().maxCoeff();
  v.comparable = gap <= energy_tolerance * grid.total_mass();

  const Eigen::VectorXd d = a.eccentricities() - b.eccentricities();
  v.max_eps_difference = d.cwiseAbs().maxCoeff();
  const bool below = (d.array() < -eps_tolerance).any();
  const bool above = (d.array() > eps_tolerance).any();
  v.pattern = below && above ? OrderingPattern::Mixed
              : below        ? OrderingPattern::FirstBelow
              : above        ? OrderingPattern::FirstAbove
                             : OrderingPattern::Equal;
  std::ostringstream os;
  if (!v.comparable) {
    os << "not comparable solutions: energies differ by " << gap;
  } else if (v.pattern == OrderingPattern::Mixed) {
    v.violation = true;
    os << "monotonicity violation: mixed ordering with equal energies";
  } else {
    os << "ordering " << to_string(v.pattern) << ", max |eps_a - eps_b| = "
       << v.max_eps_difference;
  }
  v.message = os.str();
  return v;
}

}  // namespace vsr
