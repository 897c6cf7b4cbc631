#pragma once

#include <vector>

#include "pdg/types.hpp"

namespace pdg {

/// Final time plus N node states and controls on the uniform scaled-time
/// grid tau_k = k / (N - 1), k = 0..N-1. Serves both as the linearization
/// reference for the convex subproblem and as the generator output.
struct ReferenceTrajectory {
    double tf{0.0};
    std::vector<State> xs;
    std::vector<Control> us;

    int n() const { return static_cast<int>(xs.size()); }
    double tau(int k) const { return static_cast<double>(k) / (n() - 1); }
};

}  // namespace pdg
