#include "pdg/scaling.hpp"

#include "pdg/errors.hpp"

namespace pdg {

ScalingUnits ScalingUnits::from_initial_state(const State& x0) {
    ScalingUnits u;
    u.mass = x0.m;
    u.length = x0.r.norm();
    u.time = 1.0;
    if (u.mass <= 0.0) throw ScalingError("scaling: initial mass must be positive");
    if (u.length <= 0.0) throw ScalingError("scaling: ||r0|| = 0 gives a degenerate length unit");
    return u;
}

State nondimensionalize(const State& x, const ScalingUnits& u) {
    State s = x;
    s.m = x.m / u.mass;
    s.r = x.r / u.length;
    s.v = x.v / u.velocity();
    s.w = x.w * u.time;
    return s;
}

State redimensionalize(const State& x, const ScalingUnits& u) {
    State s = x;
    s.m = x.m * u.mass;
    s.r = x.r * u.length;
    s.v = x.v * u.velocity();
    s.w = x.w / u.time;
    return s;
}

Control nondimensionalize_control(const Control& t, const ScalingUnits& u) {
    return t / u.force();
}

Control redimensionalize_control(const Control& t, const ScalingUnits& u) {
    return t * u.force();
}

VehicleParams nondimensionalize(const VehicleParams& p, const ScalingUnits& u) {
    VehicleParams s = p;
    // alpha: s/m, beta: kg/s, rho: kg/m^3, areas: m^2, inertia: kg m^2,
    // lever arms: m, gravity: m/s^2.
    s.alpha = p.alpha * u.length / u.time;
    s.beta = p.beta * u.time / u.mass;
    s.rho = p.rho * u.length * u.length * u.length / u.mass;
    s.s_a = p.s_a / (u.length * u.length);
    s.s_ne = p.s_ne / (u.length * u.length);
    s.j_b = p.j_b / (u.mass * u.length * u.length);
    s.j_b_inv = s.j_b.inverse();
    s.d_t = p.d_t / u.length;
    s.d_a = p.d_a / u.length;
    s.g_vec = p.g_vec * u.time * u.time / u.length;
    return s;
}

ProblemBounds nondimensionalize(const ProblemBounds& b, const ScalingUnits& u) {
    ProblemBounds s = b;
    s.m_min = b.m_min / u.mass;
    s.t_min = b.t_min / u.force();
    s.t_max = b.t_max / u.force();
    s.omega_max = b.omega_max * u.time;
    s.t_b0 = b.t_b0 / u.force();
    return s;
}

BoundaryConditions nondimensionalize(const BoundaryConditions& b, const ScalingUnits& u) {
    return BoundaryConditions{nondimensionalize(b.x0, u)};
}

ReferenceTrajectory nondimensionalize(const ReferenceTrajectory& t, const ScalingUnits& u) {
    ReferenceTrajectory s;
    s.tf = t.tf / u.time;
    s.xs.reserve(t.xs.size());
    s.us.reserve(t.us.size());
    for (const auto& x : t.xs) s.xs.push_back(nondimensionalize(x, u));
    for (const auto& c : t.us) s.us.push_back(nondimensionalize_control(c, u));
    return s;
}

ReferenceTrajectory redimensionalize(const ReferenceTrajectory& t, const ScalingUnits& u) {
    ReferenceTrajectory s;
    s.tf = t.tf * u.time;
    s.xs.reserve(t.xs.size());
    s.us.reserve(t.us.size());
    for (const auto& x : t.xs) s.xs.push_back(redimensionalize(x, u));
    for (const auto& c : t.us) s.us.push_back(redimensionalize_control(c, u));
    return s;
}

}  // namespace pdg
