#include "pdg/scp.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "pdg/errors.hpp"
#include "pdg/quaternion.hpp"

namespace pdg {

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

}  // namespace

ReferenceTrajectory straight_line_init(const BoundaryConditions& bcs, const ProblemBounds& bounds,
                                       int n, double tf_guess) {
    if (n < 2) throw InvalidInputError("straight_line_init: need at least two nodes");
    StateVec x_ini = bcs.x0.pack();
    x_ini.segment<4>(7) = quat_identity();  // the blend starts from the identity attitude
    StateVec x_fin = StateVec::Zero();
    x_fin(0) = bounds.m_min;
    x_fin.segment<4>(7) = quat_identity();

    ReferenceTrajectory ref;
    ref.tf = tf_guess;
    ref.xs.reserve(n);
    ref.us.reserve(n);
    const Control u_mid(0.0, 0.0, 0.5 * (bounds.t_max - bounds.t_min));
    for (int k = 0; k < n; ++k) {
        const double a = static_cast<double>(k) / (n - 1);
        ref.xs.push_back(State::unpack((1.0 - a) * x_ini + a * x_fin));
        ref.us.push_back(u_mid);
    }
    return ref;
}

Convergence check_convergence(const SubproblemSolution& sol, const ReferenceTrajectory& ref,
                              const ScpConfig& cfg) {
    if (static_cast<int>(sol.xs.size()) != ref.n()) {
        throw InvalidInputError("check_convergence: solution and reference node counts differ");
    }
    if (cfg.criteria_mode == CriteriaMode::dataset) {
        const bool ok = sol.j_tr <= cfg.eps_tr && sol.j_vc <= cfg.eps_vc;
        char buf[160];
        std::snprintf(buf, sizeof(buf), "J_tr=%.3e (eps %.1e), J_vc=%.3e (eps %.1e)", sol.j_tr,
                      cfg.eps_tr, sol.j_vc, cfg.eps_vc);
        return {ok, buf};
    }
    // The reference vector includes the time variable, so its movement
    // counts toward the online criterion as well; otherwise the loop can
    // stop while tf is still sliding against its step bound.
    double max_diff = std::abs(sol.tf - ref.tf);
    for (int k = 0; k < ref.n(); ++k) {
        max_diff = std::max(
            max_diff, (sol.xs[k].pack() - ref.xs[k].pack()).cwiseAbs().maxCoeff());
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "max state diff %.3e (eps %.1e)", max_diff, cfg.eps_x);
    return {max_diff < cfg.eps_x, buf};
}

ScpResult run_scp(const GuidanceProblem& problem, const ReferenceTrajectory& init,
                  const ScpConfig& cfg, socp::SocpBackend* backend) {
    if (init.n() != problem.disc.n_nodes) {
        throw InvalidInputError("run_scp: initial trajectory node count differs from config");
    }
    socp::InteriorPointSolver owned(cfg.solver);
    socp::SocpBackend& solver = backend != nullptr ? *backend : owned;

    const ScalingUnits units = ScalingUnits::from_initial_state(problem.bcs.x0);
    const VehicleParams sp = nondimensionalize(problem.params, units);
    const ProblemBounds sb = nondimensionalize(problem.bounds, units);
    const BoundaryConditions sbc = nondimensionalize(problem.bcs, units);
    ReferenceTrajectory ref = nondimensionalize(init, units);
    const SubproblemLayout layout(ref.n());

    ScpResult result;
    bool converged = false;
    std::string reason = "max_iters exhausted";

    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        IterationRecord rec;
        rec.iter = iter;

        auto t0 = std::chrono::steady_clock::now();
        const auto segments = discretize(ref, problem.disc, sp);
        rec.discretize_ms = ms_since(t0);

        const auto prog = build_subproblem(segments, ref, sb, sbc, cfg.weights);
        if (!cfg.debug_dump_dir.empty()) {
            std::ofstream os(cfg.debug_dump_dir + "/subproblem_iter" + std::to_string(iter) +
                             ".txt");
            prog.dump(os);
        }

        t0 = std::chrono::steady_clock::now();
        const SubproblemSolution sol = solve_subproblem(prog, layout, cfg.weights, solver);
        rec.solve_ms = ms_since(t0);
        result.total_solve_ms += rec.solve_ms;

        rec.status = sol.status;
        rec.status_detail = sol.status_detail;
        if (sol.status != socp::SolveStatus::optimal &&
            sol.status != socp::SolveStatus::near_optimal) {
            result.log.push_back(rec);
            throw ScpAbortError("run_scp: backend reported '" +
                                    std::string(socp::to_string(sol.status)) + "' (" +
                                    sol.status_detail + ") at iteration " + std::to_string(iter),
                                std::move(result.log));
        }

        rec.j_tr = sol.j_tr;
        rec.j_vc = sol.j_vc;
        rec.tf = sol.tf;
        rec.cost = sol.cost;
        for (int k = 0; k < ref.n(); ++k) {
            rec.max_state_diff = std::max(
                rec.max_state_diff, (sol.xs[k].pack() - ref.xs[k].pack()).cwiseAbs().maxCoeff());
        }
        const Convergence conv = check_convergence(sol, ref, cfg);
        result.log.push_back(rec);

        // the next reference is the solution itself, verbatim
        ref.tf = sol.tf;
        ref.xs = sol.xs;
        ref.us = sol.us;
        result.iterations = iter;
        if (conv.converged) {
            converged = true;
            reason = conv.reason;
            break;
        }
        reason = conv.reason;
    }

    // shooting defect of the final iterate, for the log
    result.max_defect = 0.0;
    for (int k = 0; k < ref.n() - 1; ++k) {
        const StateVec end = segment_endpoint(ref, k, problem.disc.n_substeps, sp);
        result.max_defect = std::max(
            result.max_defect, (end - ref.xs[k + 1].pack()).cwiseAbs().maxCoeff());
    }

    result.converged = converged;
    result.reason = reason;
    result.trajectory = redimensionalize(ref, units);
    result.final_mass = result.trajectory.xs.back().m;
    return result;
}

}  // namespace pdg
