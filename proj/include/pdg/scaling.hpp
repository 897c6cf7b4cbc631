#pragma once

#include "pdg/dynamics.hpp"
#include "pdg/trajectory.hpp"
#include "pdg/types.hpp"

namespace pdg {

/// Scaling units for nondimensionalization: mass by m0, length by ||r0||,
/// time by 1 s. Only mass, position, velocity and thrust change numerically;
/// the quaternion and the angular rate are left unscaled.
struct ScalingUnits {
    double mass{1.0};    // kg
    double length{1.0};  // m
    double time{1.0};    // s

    double force() const { return mass * length / (time * time); }
    double velocity() const { return length / time; }

    /// Units derived from the problem's initial state. Throws ScalingError
    /// when ||r0|| = 0.
    static ScalingUnits from_initial_state(const State& x0);
};

State nondimensionalize(const State& x, const ScalingUnits& u);
State redimensionalize(const State& x, const ScalingUnits& u);

Control nondimensionalize_control(const Control& t, const ScalingUnits& u);
Control redimensionalize_control(const Control& t, const ScalingUnits& u);

VehicleParams nondimensionalize(const VehicleParams& p, const ScalingUnits& u);
ProblemBounds nondimensionalize(const ProblemBounds& b, const ScalingUnits& u);
BoundaryConditions nondimensionalize(const BoundaryConditions& b, const ScalingUnits& u);

ReferenceTrajectory nondimensionalize(const ReferenceTrajectory& t, const ScalingUnits& u);
ReferenceTrajectory redimensionalize(const ReferenceTrajectory& t, const ScalingUnits& u);

}  // namespace pdg
