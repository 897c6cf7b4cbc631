#pragma once

#include <string>
#include <vector>

#include "pdg/discretization.hpp"
#include "pdg/socp.hpp"
#include "pdg/trajectory.hpp"

namespace pdg {

struct ScpWeights {
    double w_tr{0.5};
    double w_vc{1e5};
    // Hard per-iteration bound on |tf - tf~|. The soft trust region lets the
    // first iterations extrapolate the linearization many seconds along the
    // time axis and settle on long-coast local optima; the box keeps each
    // step inside the linearization's validity in tf.
    double tf_step_max{2.0};
};

/// Variable layout of the convex subproblem over N nodes:
/// [tf | x_0..x_{N-1} | u_0..u_{N-1} | nu_0..nu_{N-2} | t_0..t_{N-2} |
///  sigma_0..sigma_{N-1} | sigma_tf]
/// where t are the |nu| slack variables and sigma_tf is the scalar trust
/// radius of the time variable.
struct SubproblemLayout {
    int n_nodes{0};

    explicit SubproblemLayout(int n) : n_nodes(n) {}
    int tf() const { return 0; }
    int x(int k) const { return 1 + kStateDim * k; }
    int u(int k) const { return 1 + kStateDim * n_nodes + kControlDim * k; }
    int nu(int k) const { return 1 + (kStateDim + kControlDim) * n_nodes + kStateDim * k; }
    int slack(int k) const { return nu(n_nodes - 1) + kStateDim * k; }
    int sigma(int k) const { return slack(n_nodes - 1) + k; }
    int sigma_tf() const { return sigma(n_nodes - 1) + 1; }
    int total() const { return sigma_tf() + 1; }
};

struct SubproblemSolution {
    double tf{0.0};
    std::vector<State> xs;                   // nondimensional
    std::vector<Control> us;                 // nondimensional
    std::vector<StateVec> virtual_control;   // N-1 values
    std::vector<double> sigmas;              // N trust-region radii
    double sigma_tf{0.0};                    // scalar tf trust radius
    double cost{0.0};                        // nondimensional objective
    double j_tr{0.0};                        // w_tr * ||sigma||_1
    double j_vc{0.0};                        // w_vc * ||V||_1
    socp::SolveStatus status{socp::SolveStatus::numerical_failure};
    std::string status_detail;
    int solver_iterations{0};
};

/// Assembles the convex subproblem about the given nondimensional reference:
/// min -m_N + w_tr ||sigma||_1 + w_vc ||V||_1 subject to the linearized FOH
/// dynamics with virtual control, boundary conditions, the convex state and
/// control constraints, the linearized thrust lower bound, and per-node
/// quadratic trust regions encoded as rotated cones.
/// Throws LinearizationError when a reference control is zero.
socp::ConicProgram build_subproblem(const std::vector<LinearizedSegment>& segments,
                                    const ReferenceTrajectory& ref, const ProblemBounds& bounds,
                                    const BoundaryConditions& bcs, const ScpWeights& weights);

/// Runs the backend on the assembled program and extracts the structured
/// solution. Backend statuses are surfaced verbatim in status/status_detail.
SubproblemSolution solve_subproblem(const socp::ConicProgram& prog, const SubproblemLayout& layout,
                                    const ScpWeights& weights, socp::SocpBackend& backend);

}  // namespace pdg
