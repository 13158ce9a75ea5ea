#pragma once

#include "vsr/solver.hpp"

namespace vsr::detail {

/// Applies the fraction flag and the 1e-6 relative balance rule against mu;
/// records the rescale factor in trace.renormalization.
std::vector<double> balanced_masses(std::span<const double> masses, double mu,
                                    const SolveConfig& cfg, SolveTrace& trace);

double default_eps_max(const TargetStats& stats, double floor);

}  // namespace vsr::detail
