#pragma once

#include <string_view>
#include <vector>

#include "pdg/types.hpp"

namespace pdg {

enum class AeroFrame {
    inertial,  // drag coefficients applied to the inertial velocity (default)
    body       // drag coefficients applied in body axes
};

/// Physical vehicle parameters. alpha and beta are derived from the engine
/// constants; call update_derived() after changing isp/g0/p_atm/s_ne.
struct VehicleParams {
    double g0{9.81};                 // standard gravity, m/s^2
    double isp{282.0};               // vacuum specific impulse, s
    double p_atm{0.0};               // ambient pressure, Pa
    double s_ne{0.0};                // nozzle exit area, m^2
    double rho{1.225};               // atmospheric density, kg/m^3
    double s_a{10.0};                // aerodynamic reference area, m^2
    Mat3 c_a{Mat3::Zero()};          // diagonal aero coefficient matrix
    Mat3 j_b{Mat3::Identity()};      // inertia, kg m^2, symmetric positive definite
    Vec3 d_t{Vec3::Zero()};          // gimbal pivot position in F_B, m
    Vec3 d_a{Vec3::Zero()};          // center of pressure position in F_B, m
    Vec3 g_vec{0.0, 0.0, -9.81};     // gravitational acceleration in F_I, m/s^2
    AeroFrame aero_frame{AeroFrame::inertial};

    double alpha{0.0};               // 1 / (isp * g0), s/m
    double beta{0.0};                // alpha * p_atm * s_ne, kg/s
    Mat3 j_b_inv{Mat3::Identity()};

    void update_derived();
    void validate() const;
};

/// Problem limits from the mission definition.
struct ProblemBounds {
    double m_min{0.0};               // minimum mass, kg
    double t_min{0.0};               // thrust magnitude lower bound, N
    double t_max{0.0};               // thrust magnitude upper bound, N
    double gamma_c{0.0};             // glideslope angle from horizontal, rad
    double theta_max{0.0};           // maximum tilt, rad
    double omega_max{0.0};           // maximum angular rate, rad/s
    double vartheta_max{0.0};        // maximum gimbal angle, rad
    Control t_b0{Vec3::Zero()};      // fixed ignition thrust vector, N

    void validate() const;
};

/// Initial state; the terminal state is fixed by the problem: r_f = v_f = 0,
/// q_f = identity, w_f = 0.
struct BoundaryConditions {
    State x0;
};

struct Jacobians {
    Eigen::Matrix<double, kStateDim, kStateDim> a;
    Eigen::Matrix<double, kStateDim, kControlDim> b;
    StateVec s;
};

struct ConstraintResidual {
    std::string_view name;
    double value;  // <= 0 means satisfied
};

/// Aerodynamic force in the inertial frame, A = -1/2 rho |v| S_A C_A v
/// (with the body-frame variant rotating C_A through c_ib when configured).
Vec3 aero_force(const Vec3& v, const VehicleParams& p, const Mat3& c_ib);

/// Continuous-time state derivative of Eqs. of motion:
/// mass depletion, translation, quaternion kinematics, Euler rotation.
/// Throws SingularStateError for m <= 0.
StateVec dynamics(const State& x, const Control& u, const VehicleParams& p);

/// Time-scaled dynamics F = tf * dynamics(x, u). Throws InvalidInputError
/// for tf <= 0.
StateVec scaled_dynamics(const State& x, const Control& u, double tf, const VehicleParams& p);

/// Exact partial derivatives of the time-scaled dynamics:
/// a = dF/dx, b = dF/du, s = dF/dtf = dynamics(x, u).
Jacobians jacobians(const State& x, const Control& u, double tf, const VehicleParams& p);

/// Signed residuals (satisfied iff <= 0) for: mass floor, glideslope cone,
/// tilt, rate infinity-norm, gimbal cone, thrust upper and lower magnitude.
std::vector<ConstraintResidual> constraint_residuals(const State& x, const Control& u,
                                                     const ProblemBounds& b);

}  // namespace pdg
