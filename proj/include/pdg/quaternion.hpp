#pragma once

#include <array>

#include "pdg/types.hpp"

namespace pdg {

// Quaternions are scalar-first [s, x, y, z] with the Hamilton product.
// q parameterizes the inertial-to-body transformation; the paired kinematics
// is q' = 0.5 * Omega(w) * q with body rates, which together with
// dcm_from_quat below conserves inertial angular momentum under torque-free
// motion (see tests).

Vec4 quat_identity();
Vec4 quat_multiply(const Vec4& a, const Vec4& b);
Vec4 quat_conjugate(const Vec4& q);
Vec4 quat_normalized(const Vec4& q);

/// Direction cosine matrix C_IB mapping inertial coordinates to body
/// coordinates. Requires ||q|| = 1 within 1e-6; throws InvalidInputError
/// otherwise. C_BI is its transpose.
Mat3 dcm_from_quat(const Vec4& q);

/// Same formula without the unit-norm gate, for integrator and derivative
/// code that evaluates at points slightly off the unit sphere.
Mat3 dcm_from_quat_unchecked(const Vec4& q);

/// Skew-symmetric cross-product matrix: skew(a) * b = a x b.
Mat3 skew(const Vec3& v);

/// 4x4 skew-symmetric matrix of the quaternion kinematics
/// q' = 0.5 * Omega(w) * q, i.e. q' = 0.5 * q (x) [0; w].
Eigen::Matrix4d omega_matrix(const Vec3& w);

/// Jacobian of Omega(w) * q with respect to w (4x3).
Eigen::Matrix<double, 4, 3> omega_q_jacobian_w(const Vec4& q);

/// Partial derivatives of C_BI(q) = dcm_from_quat(q)^T with respect to each
/// quaternion component.
std::array<Mat3, 4> dcm_bi_jacobian(const Vec4& q);

/// Intrinsic Z-Y-X rotation from [roll_x, pitch_y, yaw_z] in radians:
/// q = q_z(yaw) (x) q_y(pitch) (x) q_x(roll).
Vec4 quat_from_euler(const Vec3& rpy_rad);

}  // namespace pdg
