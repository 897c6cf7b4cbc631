#include <doctest.h>

#include "pdg/simeval.hpp"
#include "test_fixtures.hpp"

using namespace pdg;
using namespace pdg::testing;

TEST_CASE("free fall from rest follows the closed form") {
    VehicleParams p = baseline_params();
    p.rho = 0.0;  // no drag
    p.p_atm = 0.0;
    p.update_derived();
    State x0;
    x0.m = 30000.0;
    x0.r = Vec3(0.0, 0.0, 1000.0);
    std::vector<Control> us(5, Control::Zero());
    const auto res = propagate_open_loop(x0, us, 1.0, p, 10);

    CHECK(res.times.front() == 0.0);
    CHECK((res.states.front().pack() - x0.pack()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(res.times.back() == doctest::Approx(1.0).epsilon(1e-12));
    // r_z(1) = h - g/2, v_z(1) = -g
    CHECK(res.terminal().r(2) == doctest::Approx(1000.0 - 0.5 * 9.81).epsilon(1e-8));
    CHECK(res.terminal().v(2) == doctest::Approx(-9.81).epsilon(1e-10));

    SUBCASE("doubling the substeps barely moves the terminal state") {
        const auto res2 = propagate_open_loop(x0, us, 1.0, p, 20);
        CHECK((res2.terminal().pack() - res.terminal().pack()).cwiseAbs().maxCoeff() <
              1e-9 * 1000.0);
    }
}

TEST_CASE("terminal errors against hand cases") {
    PropagationResult res;
    res.times = {0.0};
    State xf;
    xf.m = 25000.0;

    SUBCASE("exact landing gives four zeros") {
        res.states = {xf};
        const auto e = terminal_errors(res, baseline_bcs());
        CHECK(e.r == 0.0);
        CHECK(e.v == 0.0);
        CHECK(e.q == 0.0);
        CHECK(e.w == 0.0);
    }
    SUBCASE("a unit position offset gives err_r = 1") {
        xf.r = Vec3(1.0, 0.0, 0.0);
        res.states = {xf};
        CHECK(terminal_errors(res, baseline_bcs()).r == doctest::Approx(1.0));
    }
    SUBCASE("the negated identity quaternion is the same attitude") {
        xf.q = -quat_identity();
        res.states = {xf};
        const auto e = terminal_errors(res, baseline_bcs());
        CHECK(e.q == 0.0);
        CHECK(e.q_raw == doctest::Approx(2.0));
    }
}

TEST_CASE("mass depletion to zero raises a propagation error") {
    VehicleParams p = baseline_params();
    State x0 = baseline_bcs().x0;
    x0.m = 50.0;  // nearly dry
    std::vector<Control> us(4, Control(0.0, 0.0, 800000.0));
    CHECK_THROWS_AS(propagate_open_loop(x0, us, 18.0, p, 10), PropagationError);
}

TEST_CASE("a converged solution propagates to a small terminal error") {
    GuidanceProblem prob{baseline_params(), mission_bounds(), mission2_bcs(),
                         DiscretizationConfig{30, 10}};
    ScpConfig cfg;
    cfg.criteria_mode = CriteriaMode::dataset;
    cfg.max_iters = 30;
    const auto init = straight_line_init(prob.bcs, prob.bounds, 30, cfg.tf_guess);
    const auto res = run_scp(prob, init, cfg);
    REQUIRE(res.converged);
    const auto prop =
        propagate_open_loop(prob.bcs.x0, res.trajectory.us, res.trajectory.tf, prob.params, 40);
    const auto err = terminal_errors(prop, prob.bcs);
    // the open-loop touchdown error is set by the shooting defect scale:
    // eps_vc / w_vc per node in nondimensional units, times N and the length
    // unit, gives centimeters-to-meters here
    CHECK(err.r < 5.0);
    CHECK(err.v < 1.0);
    CHECK(err.q < 0.05);
    CHECK(err.w < 0.05);
}

TEST_CASE("monte carlo with one zero-perturbation case reproduces run_scp") {
    GuidanceProblem prob{baseline_params(), baseline_bounds(), baseline_bcs(),
                         DiscretizationConfig{20, 10}};
    PerturbationRanges zero;
    zero.dr.setZero();
    zero.dv.setZero();
    zero.d_euler_deg.setZero();
    zero.dw_deg.setZero();
    ScpConfig online;
    online.criteria_mode = CriteriaMode::online;
    online.max_iters = 30;

    // an identity-ish model is irrelevant here: only the straight pipeline
    // must match the direct run bit for bit
    MlpModel model = MlpModel::initialized(1, 4, 3);
    std::vector<Frame> frames;
    std::mt19937_64 rng(4);
    for (int i = 0; i < 8; ++i) {
        Frame f;
        for (int j = 0; j < kFrameDim; ++j) f(j) = uniform(rng, -1.0, 1.0);
        frames.push_back(f);
    }
    model.stats = NormalizationStats::from_frames(frames);

    McOptions opts;
    opts.n_cases = 1;
    opts.seed = 31;
    opts.jobs = 1;
    const auto summary = run_monte_carlo(prob, zero, opts, online, model);
    REQUIRE(summary.cases.size() == 2);
    const auto& straight = summary.cases[0];
    CHECK(straight.method == "straight");
    REQUIRE(straight.converged);

    const auto init = straight_line_init(prob.bcs, prob.bounds, 20, online.tf_guess);
    const auto direct = run_scp(prob, init, online);
    CHECK(straight.iterations == direct.iterations);
    CHECK(straight.tf == direct.trajectory.tf);           // bitwise
    CHECK(straight.final_mass == direct.final_mass);      // bitwise

    SUBCASE("both methods saw the identical sampled problem") {
        CHECK((summary.cases[0].x0 - summary.cases[1].x0).cwiseAbs().maxCoeff() == 0.0);
        CHECK(summary.cases[0].seed == summary.cases[1].seed);
    }
}

TEST_CASE("aggregation is a pure function of the records") {
    std::vector<McCaseRecord> cases;
    for (int i = 0; i < 5; ++i) {
        McCaseRecord c;
        c.method = "straight";
        c.converged = true;
        c.iterations = i + 2;  // 2,3,4,5,6
        c.errors.r = 0.1 * (i + 1);
        c.final_mass = 26000.0 + i;
        cases.push_back(c);
    }
    McCaseRecord failed;
    failed.method = "straight";
    failed.converged = false;
    cases.push_back(failed);

    const auto agg = aggregate_cases(cases, "straight");
    CHECK(agg.cases == 6);
    CHECK(agg.converged == 5);
    CHECK(agg.median_iterations == 4.0);
    CHECK(agg.mean_iterations == doctest::Approx(4.0));
    CHECK(agg.median_err_r == doctest::Approx(0.3));
    CHECK(agg.median_final_mass == doctest::Approx(26002.0));
    // recomputing over the same records gives the same aggregate
    const auto agg2 = aggregate_cases(cases, "straight");
    CHECK(agg2.median_iterations == agg.median_iterations);
    CHECK(agg2.mean_iterations == agg.mean_iterations);
}

TEST_CASE("monte carlo requires the online criterion") {
    ScpConfig cfg;
    cfg.criteria_mode = CriteriaMode::dataset;
    MlpModel model = MlpModel::initialized(1, 2, 1);
    GuidanceProblem prob{baseline_params(), baseline_bounds(), baseline_bcs(),
                         DiscretizationConfig{20, 10}};
    CHECK_THROWS_AS(run_monte_carlo(prob, PerturbationRanges{}, McOptions{}, cfg, model),
                    InvalidInputError);
}
