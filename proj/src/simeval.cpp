#include "pdg/simeval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "pdg/errors.hpp"
#include "pdg/quaternion.hpp"

namespace pdg {

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

}  // namespace

PropagationResult propagate_open_loop(const State& x0, const std::vector<Control>& us, double tf,
                                      const VehicleParams& params, int substeps_per_segment) {
    const int n = static_cast<int>(us.size());
    if (n < 2) throw InvalidInputError("propagate_open_loop: need at least two control nodes");
    if (tf <= 0.0) throw InvalidInputError("propagate_open_loop: tf must be positive");
    if (substeps_per_segment < 1) {
        throw InvalidInputError("propagate_open_loop: substeps must be >= 1");
    }

    // FOH control on the uniform scaled-time grid; clamped to the last node
    // if rounding lands past tau = 1.
    const auto control_at = [&](double tau) -> Control {
        if (tau >= 1.0) return us.back();
        const double pos = tau * (n - 1);
        const int k = std::min(static_cast<int>(pos), n - 2);
        const double eta = pos - k;
        return (1.0 - eta) * us[k] + eta * us[k + 1];
    };

    PropagationResult out;
    const int steps = (n - 1) * substeps_per_segment;
    const double h = tf / steps;
    StateVec x = x0.pack();
    out.times.reserve(steps + 1);
    out.states.reserve(steps + 1);
    out.times.push_back(0.0);
    out.states.push_back(x0);

    const auto f = [&](double t, const StateVec& s) -> StateVec {
        return dynamics(State::unpack(s), control_at(t / tf), params);
    };
    for (int i = 0; i < steps; ++i) {
        const double t = i * h;
        try {
            const StateVec k1 = f(t, x);
            const StateVec k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
            const StateVec k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
            const StateVec k4 = f(t + h, x + h * k3);
            x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        } catch (const SingularStateError&) {
            throw PropagationError("propagate_open_loop: mass reached zero at t = " +
                                   std::to_string(t));
        }
        if (x(0) <= 0.0) {
            throw PropagationError("propagate_open_loop: mass reached zero at t = " +
                                   std::to_string(t + h));
        }
        x.segment<4>(7) = x.segment<4>(7) / x.segment<4>(7).norm();
        out.times.push_back(t + h);
        out.states.push_back(State::unpack(x));
    }
    return out;
}

TerminalErrors terminal_errors(const PropagationResult& result, const BoundaryConditions&) {
    const State& xf = result.terminal();
    TerminalErrors e;
    e.r = xf.r.norm();
    e.v = xf.v.norm();
    const Vec4 qi = quat_identity();
    e.q_raw = (xf.q - qi).norm();
    const Vec4 aligned = xf.q(0) >= 0.0 ? xf.q : Vec4(-xf.q);
    e.q = (aligned - qi).norm();
    e.w = xf.w.norm();
    return e;
}

McAggregate aggregate_cases(const std::vector<McCaseRecord>& cases, const std::string& method) {
    McAggregate agg;
    std::vector<double> iters, err_r, err_v, err_q, err_w, mass;
    double scp_ms = 0.0;
    for (const auto& c : cases) {
        if (c.method != method) continue;
        ++agg.cases;
        if (!c.converged) continue;
        ++agg.converged;
        iters.push_back(c.iterations);
        err_r.push_back(c.errors.r);
        err_v.push_back(c.errors.v);
        err_q.push_back(c.errors.q);
        err_w.push_back(c.errors.w);
        mass.push_back(c.final_mass);
        scp_ms += c.scp_ms;
    }
    const auto median = [](std::vector<double> v) {
        if (v.empty()) return 0.0;
        std::sort(v.begin(), v.end());
        const std::size_t mid = v.size() / 2;
        return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
    };
    if (!iters.empty()) {
        agg.median_iterations = median(iters);
        double s = 0.0;
        for (const double it : iters) s += it;
        agg.mean_iterations = s / static_cast<double>(iters.size());
        agg.mean_scp_ms = scp_ms / static_cast<double>(iters.size());
    }
    agg.median_err_r = median(err_r);
    agg.median_err_v = median(err_v);
    agg.median_err_q = median(err_q);
    agg.median_err_w = median(err_w);
    agg.median_final_mass = median(mass);
    return agg;
}

McSummary run_monte_carlo(const GuidanceProblem& nominal, const PerturbationRanges& ranges,
                          const McOptions& opts, const ScpConfig& online_cfg,
                          const MlpModel& model) {
    if (online_cfg.criteria_mode != CriteriaMode::online) {
        throw InvalidInputError("run_monte_carlo: SCP must run with the online criterion");
    }
    const int n = nominal.disc.n_nodes;
    McSummary summary;
    summary.cases.resize(2 * opts.n_cases);
    std::atomic<int> next{0};

    const auto run_case = [&](int case_id) {
        const std::uint64_t seed = derive_seed(opts.seed, static_cast<std::uint64_t>(case_id));
        GuidanceProblem prob = nominal;
        prob.bcs.x0 = sample_initial_state(nominal.bcs.x0, ranges, seed);

        for (int variant = 0; variant < 2; ++variant) {
            McCaseRecord rec;
            rec.case_id = static_cast<std::uint64_t>(case_id);
            rec.seed = seed;
            rec.method = variant == 0 ? "straight" : "model";
            rec.x0 = prob.bcs.x0.pack();

            ReferenceTrajectory init;
            const auto t_gen = std::chrono::steady_clock::now();
            if (variant == 0) {
                init = straight_line_init(prob.bcs, prob.bounds, n, online_cfg.tf_guess);
            } else {
                try {
                    init = generate_trajectory(model, prob.bcs.x0, prob.bounds.t_b0, n);
                    init.tf = online_cfg.tf_guess;
                } catch (const GenerationError&) {
                    rec.generator_failed = true;
                    init = straight_line_init(prob.bcs, prob.bounds, n, online_cfg.tf_guess);
                }
            }
            rec.gen_ms = ms_since(t_gen);

            try {
                const auto t_scp = std::chrono::steady_clock::now();
                const ScpResult res = run_scp(prob, init, online_cfg);
                rec.scp_ms = ms_since(t_scp);
                rec.solver_ok = true;
                rec.converged = res.converged;
                rec.iterations = res.iterations;
                rec.tf = res.trajectory.tf;
                rec.final_mass = res.final_mass;
                if (res.converged) {
                    const auto t_prop = std::chrono::steady_clock::now();
                    const auto prop =
                        propagate_open_loop(prob.bcs.x0, res.trajectory.us, res.trajectory.tf,
                                            prob.params, opts.propagate_substeps);
                    rec.propagate_ms = ms_since(t_prop);
                    rec.errors = terminal_errors(prop, prob.bcs);
                }
            } catch (const Error&) {
                rec.solver_ok = false;
                rec.converged = false;
            }
            summary.cases[2 * case_id + variant] = std::move(rec);
        }
    };

    int jobs = opts.jobs > 0 ? opts.jobs
                             : static_cast<int>(std::thread::hardware_concurrency());
    jobs = std::max(1, std::min(jobs, opts.n_cases));
    const auto worker = [&]() {
        for (;;) {
            const int id = next.fetch_add(1);
            if (id >= opts.n_cases) return;
            run_case(id);
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    summary.straight = aggregate_cases(summary.cases, "straight");
    summary.model = aggregate_cases(summary.cases, "model");
    return summary;
}

}  // namespace pdg
