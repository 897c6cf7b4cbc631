#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pdg/discretization.hpp"
#include "pdg/errors.hpp"
#include "pdg/scaling.hpp"
#include "pdg/subproblem.hpp"
#include "pdg/trajectory.hpp"

namespace pdg {

enum class CriteriaMode {
    dataset,  // J_tr <= eps_tr and J_vc <= eps_vc
    online    // max_k ||x_k - x~_k||_inf < eps_x
};

struct ScpConfig {
    ScpWeights weights{};
    double eps_tr{5e-4};
    double eps_vc{5e-4};
    double eps_x{1e-2};
    CriteriaMode criteria_mode{CriteriaMode::online};
    int max_iters{20};
    double tf_guess{18.0};  // s
    socp::IpmSettings solver{};
    std::string debug_dump_dir;  // when set, each subproblem is dumped here
};

struct IterationRecord {
    int iter{0};
    double j_tr{0.0};
    double j_vc{0.0};
    double max_state_diff{0.0};
    double tf{0.0};
    double cost{0.0};
    socp::SolveStatus status{socp::SolveStatus::numerical_failure};
    std::string status_detail;
    double discretize_ms{0.0};
    double solve_ms{0.0};
};

struct ScpResult {
    ReferenceTrajectory trajectory;  // dimensional
    int iterations{0};
    bool converged{false};
    std::string reason;
    std::vector<IterationRecord> log;
    double final_mass{0.0};      // kg
    double max_defect{0.0};      // nondimensional shooting defect of the result
    double total_solve_ms{0.0};
};

/// Everything that defines one guidance problem, in dimensional units.
struct GuidanceProblem {
    VehicleParams params;
    ProblemBounds bounds;
    BoundaryConditions bcs;
    DiscretizationConfig disc;
};

/// Thrown when the conic backend reports a state the driver cannot iterate
/// past (infeasible or numerical failure); carries the iteration log.
struct ScpAbortError : SolverError {
    ScpAbortError(const std::string& msg, std::vector<IterationRecord> log_)
        : SolverError(msg), log(std::move(log_)) {}
    std::vector<IterationRecord> log;
};

/// Linear blend from [m0, r0, v0, q_i, w0] to [m_min, 0, 0, q_i, 0] with
/// constant mid-range vertical thrust, in dimensional units.
ReferenceTrajectory straight_line_init(const BoundaryConditions& bcs, const ProblemBounds& bounds,
                                       int n, double tf_guess);

struct Convergence {
    bool converged{false};
    std::string reason;
};

/// Applies the configured criterion to a subproblem solution against the
/// reference it was linearized about (both nondimensional).
Convergence check_convergence(const SubproblemSolution& sol, const ReferenceTrajectory& ref,
                              const ScpConfig& cfg);

/// The outer successive-convexification loop: nondimensionalize, then repeat
/// discretize / build / solve / test until converged or max_iters. Returns
/// the dimensional trajectory with the full per-iteration log. A null
/// backend uses an internally owned interior-point solver.
ScpResult run_scp(const GuidanceProblem& problem, const ReferenceTrajectory& init,
                  const ScpConfig& cfg, socp::SocpBackend* backend = nullptr);

}  // namespace pdg
