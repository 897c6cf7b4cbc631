#include "pdg/quaternion.hpp"

#include <cmath>

#include "pdg/errors.hpp"

namespace pdg {

Vec4 quat_identity() {
    return Vec4{1.0, 0.0, 0.0, 0.0};
}

Vec4 quat_multiply(const Vec4& a, const Vec4& b) {
    const double as = a(0);
    const Vec3 av = a.tail<3>();
    const double bs = b(0);
    const Vec3 bv = b.tail<3>();
    Vec4 out;
    out(0) = as * bs - av.dot(bv);
    out.tail<3>() = as * bv + bs * av + av.cross(bv);
    return out;
}

Vec4 quat_conjugate(const Vec4& q) {
    return Vec4{q(0), -q(1), -q(2), -q(3)};
}

Vec4 quat_normalized(const Vec4& q) {
    const double n = q.norm();
    if (n <= 0.0 || !std::isfinite(n)) {
        throw InvalidInputError("quat_normalized: zero or non-finite quaternion");
    }
    return q / n;
}

Mat3 dcm_from_quat_unchecked(const Vec4& q) {
    // Homogeneous quadratic form (s^2 - v.v) I + 2 v v^T - 2 s [v]x so that
    // derivative code sees the same polynomial the dynamics evaluate.
    const double s = q(0);
    const Vec3 v = q.tail<3>();
    return (s * s - v.squaredNorm()) * Mat3::Identity() + 2.0 * v * v.transpose() -
           2.0 * s * skew(v);
}

Mat3 dcm_from_quat(const Vec4& q) {
    if (std::abs(q.norm() - 1.0) > 1e-6) {
        throw InvalidInputError("dcm_from_quat: quaternion norm deviates from 1 by more than 1e-6");
    }
    return dcm_from_quat_unchecked(q);
}

Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0.0, -v(2), v(1),
         v(2), 0.0, -v(0),
         -v(1), v(0), 0.0;
    return m;
}

Eigen::Matrix4d omega_matrix(const Vec3& w) {
    Eigen::Matrix4d m;
    m(0, 0) = 0.0;
    m.block<1, 3>(0, 1) = -w.transpose();
    m.block<3, 1>(1, 0) = w;
    m.block<3, 3>(1, 1) = -skew(w);
    return m;
}

Eigen::Matrix<double, 4, 3> omega_q_jacobian_w(const Vec4& q) {
    // Omega(w) q = [-w.qv ; qs w - w x qv]
    Eigen::Matrix<double, 4, 3> j;
    const Vec3 qv = q.tail<3>();
    j.block<1, 3>(0, 0) = -qv.transpose();
    j.block<3, 3>(1, 0) = q(0) * Mat3::Identity() + skew(qv);
    return j;
}

std::array<Mat3, 4> dcm_bi_jacobian(const Vec4& q) {
    // C_BI(q) = (s^2 - v.v) I + 2 v v^T + 2 s [v]x
    const double s = q(0);
    const Vec3 v = q.tail<3>();
    std::array<Mat3, 4> d;
    d[0] = 2.0 * s * Mat3::Identity() + 2.0 * skew(v);
    for (int j = 0; j < 3; ++j) {
        const Vec3 e = Vec3::Unit(j);
        d[j + 1] = -2.0 * v(j) * Mat3::Identity() + 2.0 * (e * v.transpose() + v * e.transpose()) +
                   2.0 * s * skew(e);
    }
    return d;
}

Vec4 quat_from_euler(const Vec3& rpy_rad) {
    const auto axis_quat = [](int axis, double angle) {
        Vec4 q = Vec4::Zero();
        q(0) = std::cos(0.5 * angle);
        q(1 + axis) = std::sin(0.5 * angle);
        return q;
    };
    const Vec4 qx = axis_quat(0, rpy_rad(0));
    const Vec4 qy = axis_quat(1, rpy_rad(1));
    const Vec4 qz = axis_quat(2, rpy_rad(2));
    return quat_multiply(qz, quat_multiply(qy, qx));
}

}  // namespace pdg
