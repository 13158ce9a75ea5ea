#pragma once

#include "vsr/refractor.hpp"
#include "vsr/sphere.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vsr {

/// Sum of g * area over the cells selected by `in_subset`, in cell order.
double mu_g(const ApertureGrid& grid,
            const std::function<bool(Eigen::Index)>& in_subset);

double mu_g(const ApertureGrid& grid, std::span<const Eigen::Index> cells);

struct TargetEnergy {
  int index;
  double energy;
  Eigen::Index cells;
};

struct EnergyReport {
  std::vector<TargetEnergy> per_target;
  double total = 0.0;
  double aperture_mass = 0.0;
  /// G_i - f_i; empty when no prescription was given.
  std::vector<double> residual;

  Eigen::VectorXd energies() const;
  double max_abs_residual() const;
};

/// Energy per target from an owner assignment (ties already broken).
Eigen::VectorXd energies_from_owners(const std::vector<int>& owners,
                                     const Eigen::VectorXd& masses,
                                     Eigen::Index targets);

EnergyReport energy_vector(
    const Refractor& r, const ApertureGrid& grid,
    std::optional<std::span<const double>> prescribed = std::nullopt);

std::string to_json(const EnergyReport& report);

}  // namespace vsr
