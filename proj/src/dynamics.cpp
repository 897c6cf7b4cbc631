#include "pdg/dynamics.hpp"

#include <cmath>

#include "pdg/errors.hpp"
#include "pdg/quaternion.hpp"

namespace pdg {

void VehicleParams::update_derived() {
    if (isp <= 0.0 || g0 <= 0.0) {
        throw InvalidInputError("VehicleParams: isp and g0 must be positive");
    }
    alpha = 1.0 / (isp * g0);
    beta = alpha * p_atm * s_ne;
    j_b_inv = j_b.inverse();
}

void VehicleParams::validate() const {
    if (isp <= 0.0) throw InvalidInputError("VehicleParams: isp must be positive");
    if (!j_b.isApprox(j_b.transpose(), 1e-9)) {
        throw InvalidInputError("VehicleParams: inertia must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es(j_b);
    if (es.eigenvalues().minCoeff() <= 0.0) {
        throw InvalidInputError("VehicleParams: inertia must be positive definite");
    }
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            if (i != j && c_a(i, j) != 0.0) {
                throw InvalidInputError("VehicleParams: c_a must be diagonal");
            }
        }
        if (c_a(i, i) < 0.0) throw InvalidInputError("VehicleParams: c_a must be nonnegative");
    }
}

void ProblemBounds::validate() const {
    if (!(0.0 < t_min && t_min < t_max)) {
        throw InvalidInputError("ProblemBounds: need 0 < t_min < t_max");
    }
    if (!(gamma_c >= 0.0 && gamma_c < M_PI / 2.0)) {
        throw InvalidInputError("ProblemBounds: gamma_c outside [0, pi/2)");
    }
    if (!(theta_max > 0.0 && theta_max <= M_PI / 2.0)) {
        throw InvalidInputError("ProblemBounds: theta_max outside (0, pi/2]");
    }
    if (!(vartheta_max > 0.0 && vartheta_max < M_PI / 2.0)) {
        throw InvalidInputError("ProblemBounds: vartheta_max outside (0, pi/2)");
    }
}

Vec3 aero_force(const Vec3& v, const VehicleParams& p, const Mat3& c_ib) {
    const double kappa = 0.5 * p.rho * p.s_a;
    if (p.aero_frame == AeroFrame::body) {
        return -kappa * v.norm() * (c_ib.transpose() * (p.c_a * (c_ib * v)));
    }
    return -kappa * v.norm() * (p.c_a * v);
}

namespace {

// d(aero_force)/dv, 3x3; zero at v = 0 (force is quadratic there).
Mat3 aero_force_jacobian_v(const Vec3& v, const VehicleParams& p, const Mat3& c_ib) {
    const double vn = v.norm();
    if (vn == 0.0) return Mat3::Zero();
    const double kappa = 0.5 * p.rho * p.s_a;
    const Mat3 eff = p.aero_frame == AeroFrame::body
                         ? Mat3(c_ib.transpose() * p.c_a * c_ib)
                         : p.c_a;
    return -kappa * (eff * v * (v.transpose() / vn) + vn * eff);
}

struct DynamicsEval {
    StateVec f;
    bool with_jac{false};
    Eigen::Matrix<double, kStateDim, kStateDim> dfdx;
    Eigen::Matrix<double, kStateDim, kControlDim> dfdu;
};

// Unscaled dynamics and (optionally) its exact Jacobians in one pass.
DynamicsEval eval_dynamics(const State& x, const Control& u, const VehicleParams& p,
                           bool with_jac) {
    if (x.m <= 0.0) {
        throw SingularStateError("dynamics: nonpositive mass");
    }
    DynamicsEval out;
    out.with_jac = with_jac;

    const Mat3 c_ib = dcm_from_quat_unchecked(x.q);
    const Mat3 c_bi = c_ib.transpose();
    const double un = u.norm();
    const Vec3 a_i = aero_force(x.v, p, c_ib);
    const Vec3 a_b = c_ib * a_i;
    const Vec3 torque = p.d_t.cross(u) + p.d_a.cross(a_b);

    // m' = -alpha ||T|| - beta ; r' = v ; v' = (C_BI T + A_I)/m + g
    // q' = 1/2 Omega(w) q    ; J w' = M - w x J w
    out.f(0) = -p.alpha * un - p.beta;
    out.f.segment<3>(1) = x.v;
    out.f.segment<3>(4) = (c_bi * u + a_i) / x.m + p.g_vec;
    out.f.segment<4>(7) = 0.5 * omega_matrix(x.w) * x.q;
    out.f.segment<3>(11) = p.j_b_inv * (torque - x.w.cross(p.j_b * x.w));

    if (!with_jac) return out;

    auto& a = out.dfdx;
    auto& b = out.dfdu;
    a.setZero();
    b.setZero();

    const auto d_bi = dcm_bi_jacobian(x.q);  // d(C_BI)/dq_j
    const Mat3 da_dv = aero_force_jacobian_v(x.v, p, c_ib);

    // mass row: only depends on u
    if (un > 0.0) {
        b.block<1, 3>(0, 0) = -p.alpha * u.transpose() / un;
    }

    // position rows
    a.block<3, 3>(1, 4) = Mat3::Identity();

    // velocity rows
    a.block<3, 1>(4, 0) = -(c_bi * u + a_i) / (x.m * x.m);
    a.block<3, 3>(4, 4) = da_dv / x.m;
    for (int j = 0; j < 4; ++j) {
        Vec3 dai_dqj = Vec3::Zero();
        if (p.aero_frame == AeroFrame::body) {
            const double kappa = 0.5 * p.rho * p.s_a;
            const Mat3 d_ib = d_bi[j].transpose();
            dai_dqj = -kappa * x.v.norm() *
                      (d_bi[j] * (p.c_a * (c_ib * x.v)) + c_bi * (p.c_a * (d_ib * x.v)));
        }
        a.block<3, 1>(4, 7 + j) = (d_bi[j] * u + dai_dqj) / x.m;

        // torque rows: A_B = C_IB A_I depends on q both directly and (in
        // body mode) through A_I.
        const Vec3 dab_dqj = d_bi[j].transpose() * a_i + c_ib * dai_dqj;
        a.block<3, 1>(11, 7 + j) = p.j_b_inv * p.d_a.cross(dab_dqj);
    }
    b.block<3, 3>(4, 0) = c_bi / x.m;

    // quaternion rows
    a.block<4, 4>(7, 7) = 0.5 * omega_matrix(x.w);
    a.block<4, 3>(7, 11) = 0.5 * omega_q_jacobian_w(x.q);

    // rate rows
    a.block<3, 3>(11, 4) = p.j_b_inv * skew(p.d_a) * (c_ib * da_dv);
    a.block<3, 3>(11, 11) = p.j_b_inv * (skew(p.j_b * x.w) - skew(x.w) * p.j_b);
    b.block<3, 3>(11, 0) = p.j_b_inv * skew(p.d_t);

    return out;
}

}  // namespace

StateVec dynamics(const State& x, const Control& u, const VehicleParams& p) {
    return eval_dynamics(x, u, p, false).f;
}

StateVec scaled_dynamics(const State& x, const Control& u, double tf, const VehicleParams& p) {
    if (tf <= 0.0) {
        throw InvalidInputError("scaled_dynamics: tf must be positive");
    }
    return tf * dynamics(x, u, p);
}

Jacobians jacobians(const State& x, const Control& u, double tf, const VehicleParams& p) {
    if (tf <= 0.0) {
        throw InvalidInputError("jacobians: tf must be positive");
    }
    const DynamicsEval e = eval_dynamics(x, u, p, true);
    Jacobians j;
    j.a = tf * e.dfdx;
    j.b = tf * e.dfdu;
    j.s = e.f;
    return j;
}

std::vector<ConstraintResidual> constraint_residuals(const State& x, const Control& u,
                                                     const ProblemBounds& b) {
    std::vector<ConstraintResidual> res;
    res.reserve(7);
    res.push_back({"mass_floor", b.m_min - x.m});
    res.push_back({"glideslope",
                   x.r.head<2>().norm() - x.r(2) / std::tan(b.gamma_c)});
    res.push_back({"tilt",
                   2.0 * (x.q(1) * x.q(1) + x.q(2) * x.q(2)) - (1.0 - std::cos(b.theta_max))});
    res.push_back({"rate", x.w.cwiseAbs().maxCoeff() - b.omega_max});
    res.push_back({"gimbal", u.head<2>().norm() - std::tan(b.vartheta_max) * u(2)});
    res.push_back({"thrust_upper", u.norm() - b.t_max});
    res.push_back({"thrust_lower", b.t_min - u.norm()});
    return res;
}

}  // namespace pdg
