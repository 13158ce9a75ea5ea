#include "vsr/energy.hpp"

#include <json.hpp>

#include <algorithm>

namespace vsr {

double mu_g(const ApertureGrid& grid,
            const std::function<bool(Eigen::Index)>& in_subset) {
  CompensatedSum s;
  const Eigen::VectorXd& m = grid.masses();
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (in_subset(i)) s.add(m[i]);
  }
  return s.value();
}

double mu_g(const ApertureGrid& grid, std::span<const Eigen::Index> cells) {
  std::vector<Eigen::Index> sorted(cells.begin(), cells.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  CompensatedSum s;
  for (Eigen::Index i : sorted) s.add(grid.masses()[i]);
  return s.value();
}

Eigen::VectorXd EnergyReport::energies() const {
  Eigen::VectorXd e(static_cast<Eigen::Index>(per_target.size()));
  for (std::size_t i = 0; i < per_target.size(); ++i) {
    e[static_cast<Eigen::Index>(i)] = per_target[i].energy;
  }
  return e;
}

double EnergyReport::max_abs_residual() const {
  double m = 0.0;
  for (double r : residual) m = std::max(m, std::abs(r));
  return m;
}

Eigen::VectorXd energies_from_owners(const std::vector<int>& owners,
                                     const Eigen::VectorXd& masses,
                                     Eigen::Index targets) {
  std::vector<CompensatedSum> sums(static_cast<std::size_t>(targets));
  for (std::size_t n = 0; n < owners.size(); ++n) {
    sums[static_cast<std::size_t>(owners[n])].add(
        masses[static_cast<Eigen::Index>(n)]);
  }
  Eigen::VectorXd e(targets);
  for (Eigen::Index i = 0; i < targets; ++i) {
    e[i] = sums[static_cast<std::size_t>(i)].value();
  }
  return e;
}

EnergyReport energy_vector(const Refractor& r, const ApertureGrid& grid,
                           std::optional<std::span<const double>> prescribed) {
  const std::vector<int> owners = owners_from_radii(radii_on_grid(r, grid));
  const Eigen::VectorXd e = energies_from_owners(owners, grid.masses(), r.size());
  std::vector<Eigen::Index> cells(static_cast<std::size_t>(r.size()), 0);
  for (int o : owners) ++cells[static_cast<std::size_t>(o)];

  EnergyReport rep;
  CompensatedSum total;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    rep.per_target.push_back(
        {static_cast<int>(i), e[i], cells[static_cast<std::size_t>(i)]});
    total.add(e[i]);
  }
  rep.total = total.value();
  rep.aperture_mass = grid.total_mass();
  if (prescribed) {
    if (static_cast<Eigen::Index>(prescribed->size()) != r.size()) {
      throw Error(ErrorKind::InvalidArgument,
                  "energy: prescribed masses do not match the target count");
    }
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      rep.residual.push_back(e[i] - (*prescribed)[static_cast<std::size_t>(i)]);
    }
  }
  return rep;
}

std::string to_json(const EnergyReport& report) {
  nlohmann::json j;
  j["schema"] = "vsr.energy/1";
  j["total"] = report.total;
  j["aperture_mass"] = report.aperture_mass;
  j["targets"] = nlohmann::json::array();
  for (std::size_t i = 0; i < report.per_target.size(); ++i) {
    const TargetEnergy& t = report.per_target[i];
    nlohmann::json row{{"index", t.index}, {"energy", t.energy}, {"cells", t.cells}};
    if (!report.residual.empty()) row["residual"] = report.residual[i];
    j["targets"].push_back(row);
  }
  if (!report.residual.empty()) j["max_abs_residual"] = report.max_abs_residual();
  return j.dump(2);
}

}  // namespace vsr
