#include "pdg/subproblem.hpp"

#include <cmath>

#include "pdg/errors.hpp"
#include "pdg/quaternion.hpp"

namespace pdg {

using socp::ConicProgram;
using socp::LinExpr;

socp::ConicProgram build_subproblem(const std::vector<LinearizedSegment>& segments,
                                    const ReferenceTrajectory& ref, const ProblemBounds& bounds,
                                    const BoundaryConditions& bcs, const ScpWeights& weights) {
    const int n = ref.n();
    if (static_cast<int>(segments.size()) != n - 1) {
        throw InvalidInputError("build_subproblem: segment count does not match the reference");
    }
    const SubproblemLayout lay(n);
    ConicProgram prog;
    prog.add_vars(lay.total());

    // cost: -m_N + w_tr sum(sigma) + w_vc sum(|nu|)
    prog.add_cost(lay.x(n - 1) + 0, -1.0);
    for (int k = 0; k < n; ++k) prog.add_cost(lay.sigma(k), weights.w_tr);
    prog.add_cost(lay.sigma_tf(), weights.w_tr);
    for (int k = 0; k < n - 1; ++k) {
        for (int i = 0; i < kStateDim; ++i) prog.add_cost(lay.slack(k) + i, weights.w_vc);
    }

    // initial boundary conditions, including the fixed ignition thrust
    const StateVec x0 = bcs.x0.pack();
    for (int i = 0; i < kStateDim; ++i) {
        prog.add_eq(LinExpr(-x0(i)).add(lay.x(0) + i, 1.0));
    }
    for (int i = 0; i < kControlDim; ++i) {
        prog.add_eq(LinExpr(-bounds.t_b0(i)).add(lay.u(0) + i, 1.0));
    }
    // terminal: r = v = 0, q = identity, w = 0 (mass is free)
    {
        StateVec xf = StateVec::Zero();
        xf.segment<4>(7) = quat_identity();
        for (int i = 1; i < kStateDim; ++i) {
            prog.add_eq(LinExpr(-xf(i)).add(lay.x(n - 1) + i, 1.0));
        }
    }

    // linearized FOH dynamics with virtual control:
    // x_{k+1} = A_k x_k + Bhat_k u_k + B_k u_{k+1} + s_k tf + c_k + nu_k
    for (int k = 0; k < n - 1; ++k) {
        const LinearizedSegment& seg = segments[k];
        for (int i = 0; i < kStateDim; ++i) {
            LinExpr row(-seg.c(i));
            row.add(lay.x(k + 1) + i, 1.0);
            // dense blocks keep the KKT sparsity pattern identical across
            // iterations, so the backend can reuse its symbolic analysis
            for (int j = 0; j < kStateDim; ++j) row.add(lay.x(k) + j, -seg.a(i, j));
            for (int j = 0; j < kControlDim; ++j) {
                row.add(lay.u(k) + j, -seg.bhat(i, j));
                row.add(lay.u(k + 1) + j, -seg.b(i, j));
            }
            row.add(lay.tf(), -seg.s(i));
            row.add(lay.nu(k) + i, -1.0);
            prog.add_eq(std::move(row));
        }
    }

    const double tilt_radius = std::sqrt(0.5 * (1.0 - std::cos(bounds.theta_max)));
    const double cot_gs = 1.0 / std::tan(bounds.gamma_c);
    const double tan_gimbal = std::tan(bounds.vartheta_max);

    for (int k = 0; k < n; ++k) {
        // mass floor
        prog.add_nonneg(LinExpr(-bounds.m_min).add(lay.x(k) + 0, 1.0));
        // angular rate box
        for (int i = 0; i < 3; ++i) {
            prog.add_nonneg(LinExpr(bounds.omega_max).add(lay.x(k) + 11 + i, -1.0));
            prog.add_nonneg(LinExpr(bounds.omega_max).add(lay.x(k) + 11 + i, 1.0));
        }
        // linearized thrust lower bound: (u~ / ||u~||) . u >= T_min
        const double un = ref.us[k].norm();
        if (un <= 0.0) {
            throw LinearizationError("build_subproblem: zero reference control at node " +
                                     std::to_string(k));
        }
        {
            LinExpr row(-bounds.t_min);
            for (int i = 0; i < 3; ++i) row.add(lay.u(k) + i, ref.us[k](i) / un);
            prog.add_nonneg(std::move(row));
        }
        // glideslope cone: ||(r_x, r_y)|| <= cot(gamma) r_z
        prog.add_soc({LinExpr::variable(lay.x(k) + 3, cot_gs), LinExpr::variable(lay.x(k) + 1),
                      LinExpr::variable(lay.x(k) + 2)});
        // tilt: ||(q_x, q_y)|| <= sqrt((1 - cos theta_max) / 2)
        prog.add_soc({LinExpr(tilt_radius), LinExpr::variable(lay.x(k) + 8),
                      LinExpr::variable(lay.x(k) + 9)});
        // gimbal cone: ||(T_x, T_y)|| <= tan(vartheta) T_z
        prog.add_soc({LinExpr::variable(lay.u(k) + 2, tan_gimbal),
                      LinExpr::variable(lay.u(k) + 0), LinExpr::variable(lay.u(k) + 1)});
        // thrust magnitude upper bound
        prog.add_soc({LinExpr(bounds.t_max), LinExpr::variable(lay.u(k) + 0),
                      LinExpr::variable(lay.u(k) + 1), LinExpr::variable(lay.u(k) + 2)});
        // trust region ||x - x~||^2 + ||u - u~||^2 <= sigma as a rotated cone
        {
            std::vector<LinExpr> rows;
            rows.reserve(2 + kStateDim + kControlDim);
            rows.push_back(LinExpr::variable(lay.sigma(k)));
            rows.push_back(LinExpr(0.5));
            const StateVec xr = ref.xs[k].pack();
            for (int i = 0; i < kStateDim; ++i) {
                rows.push_back(LinExpr(-xr(i)).add(lay.x(k) + i, 1.0));
            }
            for (int i = 0; i < kControlDim; ++i) {
                rows.push_back(LinExpr(-ref.us[k](i)).add(lay.u(k) + i, 1.0));
            }
            prog.add_rsoc(std::move(rows));
        }
    }

    // time-variable trust handling: a scalar rotated cone measuring the
    // squared tf move in J_tr, plus the hard per-iteration step box
    prog.add_rsoc({LinExpr::variable(lay.sigma_tf()), LinExpr(0.5),
                   LinExpr(-ref.tf).add(lay.tf(), 1.0)});
    prog.add_nonneg(LinExpr(weights.tf_step_max + ref.tf).add(lay.tf(), -1.0));
    prog.add_nonneg(
        LinExpr(std::min(weights.tf_step_max, ref.tf * 0.5) - ref.tf).add(lay.tf(), 1.0));

    // |nu| slacks: t >= nu, t >= -nu
    for (int k = 0; k < n - 1; ++k) {
        for (int i = 0; i < kStateDim; ++i) {
            prog.add_nonneg(LinExpr::variable(lay.slack(k) + i).add(lay.nu(k) + i, -1.0));
            prog.add_nonneg(LinExpr::variable(lay.slack(k) + i).add(lay.nu(k) + i, 1.0));
        }
    }
    return prog;
}

SubproblemSolution solve_subproblem(const socp::ConicProgram& prog, const SubproblemLayout& layout,
                                    const ScpWeights& weights, socp::SocpBackend& backend) {
    const socp::SocpSolution raw = backend.solve(prog);
    SubproblemSolution out;
    out.status = raw.status;
    out.status_detail = raw.detail;
    out.solver_iterations = raw.iterations;
    if (raw.status != socp::SolveStatus::optimal &&
        raw.status != socp::SolveStatus::near_optimal) {
        return out;
    }
    const int n = layout.n_nodes;
    out.tf = raw.x(layout.tf());
    out.cost = raw.objective;
    out.xs.resize(n);
    out.us.resize(n);
    out.sigmas.resize(n);
    for (int k = 0; k < n; ++k) {
        StateVec xv;
        for (int i = 0; i < kStateDim; ++i) xv(i) = raw.x(layout.x(k) + i);
        out.xs[k] = State::unpack(xv);
        for (int i = 0; i < kControlDim; ++i) out.us[k](i) = raw.x(layout.u(k) + i);
        out.sigmas[k] = raw.x(layout.sigma(k));
        out.j_tr += weights.w_tr * std::abs(out.sigmas[k]);
    }
    out.sigma_tf = raw.x(layout.sigma_tf());
    out.j_tr += weights.w_tr * std::abs(out.sigma_tf);
    out.virtual_control.resize(n - 1);
    for (int k = 0; k < n - 1; ++k) {
        for (int i = 0; i < kStateDim; ++i) {
            out.virtual_control[k](i) = raw.x(layout.nu(k) + i);
            out.j_vc += weights.w_vc * std::abs(out.virtual_control[k](i));
        }
    }
    return out;
}

}  // namespace pdg
