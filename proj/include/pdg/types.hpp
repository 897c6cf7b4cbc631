#pragma once

#include <Eigen/Dense>

namespace pdg {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

inline constexpr int kStateDim = 14;
inline constexpr int kControlDim = 3;
inline constexpr int kFrameDim = 17;

/// Packed state layout: [m, r(3), v(3), q(4), w(3)].
using StateVec = Eigen::Matrix<double, kStateDim, 1>;

/// Body-frame thrust vector in newtons.
using Control = Vec3;

/// 14-component vehicle state. The quaternion is scalar-first and
/// parameterizes the transformation from the inertial frame (east-north-up,
/// origin at the landing site) to the body frame.
struct State {
    double m{0.0};                  // mass, kg
    Vec3 r{Vec3::Zero()};           // inertial position, m
    Vec3 v{Vec3::Zero()};           // inertial velocity, m/s
    Vec4 q{1.0, 0.0, 0.0, 0.0};     // unit quaternion F_I -> F_B, scalar first
    Vec3 w{Vec3::Zero()};           // body angular rate, rad/s

    StateVec pack() const {
        StateVec x;
        x(0) = m;
        x.segment<3>(1) = r;
        x.segment<3>(4) = v;
        x.segment<4>(7) = q;
        x.segment<3>(11) = w;
        return x;
    }

    static State unpack(const StateVec& x) {
        State s;
        s.m = x(0);
        s.r = x.segment<3>(1);
        s.v = x.segment<3>(4);
        s.q = x.segment<4>(7);
        s.w = x.segment<3>(11);
        return s;
    }
};

}  // namespace pdg
