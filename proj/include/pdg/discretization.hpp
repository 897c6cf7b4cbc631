#pragma once

#include <functional>
#include <vector>

#include "pdg/dynamics.hpp"
#include "pdg/trajectory.hpp"
#include "pdg/types.hpp"

namespace pdg {

/// Discrete first-order-hold segment matrices of one subinterval, in
/// nondimensional units: x_{k+1} = a x_k + bhat u_k + b u_{k+1} + s tf + c.
struct LinearizedSegment {
    Eigen::Matrix<double, kStateDim, kStateDim> a;
    Eigen::Matrix<double, kStateDim, kControlDim> bhat;
    Eigen::Matrix<double, kStateDim, kControlDim> b;
    StateVec s;
    StateVec c;
};

struct DiscretizationConfig {
    int n_nodes{30};
    int n_substeps{10};  // RK4 substeps per segment
};

struct FohWeights {
    double eta_hat;
    double eta;
};

/// Affine interpolation weights of the first-order hold on [tau_k, tau_k1].
/// eta_hat + eta = 1. Throws InvalidInputError on a degenerate interval.
FohWeights foh_weights(double tau, double tau_k, double tau_k1);

/// A time-scaled ODE x' = tf * f(x, u) with exact Jacobians, in whatever
/// dimensions the caller chooses. eval fills f = f(x, u) and, when the
/// output pointers are non-null, a = df/dx and b = df/du.
struct OdeSystem {
    int nx{0};
    int nu{0};
    std::function<void(const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::VectorXd& f,
                       Eigen::MatrixXd* a, Eigen::MatrixXd* b)>
        eval;
};

struct GenericSegment {
    Eigen::MatrixXd a;
    Eigen::MatrixXd bhat;
    Eigen::MatrixXd b;
    Eigen::VectorXd s;
    Eigen::VectorXd c;
    Eigen::VectorXd x_end;  // nonlinear endpoint of the reference flow
};

/// Core of the multiple-shooting style discretization: integrates, over
/// [tau_k, tau_k1] with classic RK4, the reference flow started from x_k
/// under first-order-hold control, the state transition matrix Phi' = A Phi,
/// its inverse by d(Phi^-1) = -Phi^-1 A, and the four convolution integrals
/// that assemble the segment matrices.
GenericSegment propagate_segment_generic(const OdeSystem& sys, const Eigen::VectorXd& x_k,
                                         const Eigen::VectorXd& u_k, const Eigen::VectorXd& u_k1,
                                         double tf, double tau_k, double tau_k1, int substeps);

/// Vehicle-dynamics binding of the generic propagator for segment k
/// (0-based, k in [0, N-2]). The reference must be nondimensionalized.
LinearizedSegment propagate_segment(const ReferenceTrajectory& ref, int k,
                                    const DiscretizationConfig& cfg, const VehicleParams& p);

/// All N-1 segments of the reference. Segments are independent pure
/// functions of the reference and may be evaluated in any order.
std::vector<LinearizedSegment> discretize(const ReferenceTrajectory& ref,
                                          const DiscretizationConfig& cfg,
                                          const VehicleParams& p);

/// Nonlinear single-shooting endpoint of segment k under FOH reference
/// control, used for defect reporting.
StateVec segment_endpoint(const ReferenceTrajectory& ref, int k, int substeps,
                          const VehicleParams& p);

}  // namespace pdg
