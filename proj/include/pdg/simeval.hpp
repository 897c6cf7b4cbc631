#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdg/dataset.hpp"
#include "pdg/mlp.hpp"
#include "pdg/scp.hpp"

namespace pdg {

/// Dense state history of an open-loop propagation over [0, tf].
struct PropagationResult {
    std::vector<double> times;   // s
    std::vector<State> states;

    const State& terminal() const { return states.back(); }
};

/// RK4 integration of the dimensional nonlinear dynamics under the
/// first-order-hold reconstruction of the node controls; the quaternion is
/// renormalized after every step. Throws PropagationError if the mass
/// reaches zero mid-flight.
PropagationResult propagate_open_loop(const State& x0, const std::vector<Control>& us, double tf,
                                      const VehicleParams& params, int substeps_per_segment);

/// 2-norms of the terminal state errors against the fixed landing target
/// (r = v = 0, q = identity, w = 0). The quaternion error aligns the sign
/// first (q and -q are the same attitude); the raw unaligned value is kept
/// alongside.
struct TerminalErrors {
    double r{0.0};
    double v{0.0};
    double q{0.0};
    double q_raw{0.0};
    double w{0.0};
};

TerminalErrors terminal_errors(const PropagationResult& result, const BoundaryConditions& bcs);

struct McCaseRecord {
    std::uint64_t case_id{0};
    std::uint64_t seed{0};
    std::string method;  // "straight" or "model"
    bool solver_ok{false};
    bool converged{false};
    bool generator_failed{false};
    int iterations{0};
    double tf{0.0};
    double final_mass{0.0};
    TerminalErrors errors;
    double gen_ms{0.0};
    double scp_ms{0.0};
    double propagate_ms{0.0};
    StateVec x0{StateVec::Zero()};
};

struct McAggregate {
    int cases{0};
    int converged{0};
    double median_iterations{0.0};
    double mean_iterations{0.0};
    double median_err_r{0.0};
    double median_err_v{0.0};
    double median_err_q{0.0};
    double median_err_w{0.0};
    double mean_scp_ms{0.0};
    double median_final_mass{0.0};
};

struct McSummary {
    std::vector<McCaseRecord> cases;  // paired: straight and model per case id
    McAggregate straight;
    McAggregate model;
};

/// Pure aggregation over the records of one method; medians/means are
/// computed over converged cases.
McAggregate aggregate_cases(const std::vector<McCaseRecord>& cases, const std::string& method);

struct McOptions {
    int n_cases{100};
    std::uint64_t seed{7};
    int jobs{1};  // 0 = hardware concurrency
    int propagate_substeps{30};
};

/// Paired Monte Carlo comparison: each sampled problem is solved once from
/// the straight-line initialization and once from the generator rollout
/// (falling back to the straight line if generation fails), then propagated
/// open loop. Per-case failures are recorded, never fatal.
McSummary run_monte_carlo(const GuidanceProblem& nominal, const PerturbationRanges& ranges,
                          const McOptions& opts, const ScpConfig& online_cfg,
                          const MlpModel& model);

}  // namespace pdg
