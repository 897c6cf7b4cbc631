#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "pdg/dataset.hpp"
#include "pdg/errors.hpp"
#include "pdg/quaternion.hpp"
#include "test_fixtures.hpp"

using namespace pdg;
using namespace pdg::testing;

namespace {

GuidanceProblem small_problem() {
    // 20 nodes keep the per-record solve fast
    return GuidanceProblem{baseline_params(), baseline_bounds(), baseline_bcs(),
                           DiscretizationConfig{20, 10}};
}

ScpConfig dataset_cfg() {
    ScpConfig cfg;
    cfg.criteria_mode = CriteriaMode::dataset;
    cfg.max_iters = 30;
    return cfg;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)), {});
}

}  // namespace

TEST_CASE("zero perturbation reproduces the nominal initial state") {
    PerturbationRanges zero;
    zero.dr.setZero();
    zero.dv.setZero();
    zero.d_euler_deg.setZero();
    zero.dw_deg.setZero();
    const State x = sample_initial_state(baseline_bcs().x0, zero, 123);
    CHECK((x.pack() - baseline_bcs().x0.pack()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((x.q - quat_identity()).norm() == 0.0);
}

TEST_CASE("single-axis attitude draws convert as expected") {
    // a 30 degree roll maps to [cos15, sin15, 0, 0]
    const Vec4 q = quat_from_euler(Vec3(30.0 * kDeg, 0.0, 0.0));
    CHECK(q(0) == doctest::Approx(std::cos(15.0 * kDeg)).epsilon(1e-14));
    CHECK(q(1) == doctest::Approx(std::sin(15.0 * kDeg)).epsilon(1e-14));
    CHECK(q(2) == 0.0);
    CHECK(q(3) == 0.0);
}

TEST_CASE("sampled perturbations respect the boxes and center on the nominal") {
    const PerturbationRanges ranges;
    const State nominal = baseline_bcs().x0;
    Vec3 rmin = Vec3::Constant(1e30), rmax = -Vec3::Constant(1e30);
    Vec3 rsum = Vec3::Zero();
    Vec3 vsum = Vec3::Zero();
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const State x = sample_initial_state(nominal, ranges, derive_seed(42, i));
        CHECK(x.m == nominal.m);
        for (int j = 0; j < 3; ++j) {
            CHECK(std::abs(x.r(j) - nominal.r(j)) <= ranges.dr(j) + 1e-12);
            CHECK(std::abs(x.v(j) - nominal.v(j)) <= ranges.dv(j) + 1e-12);
            CHECK(std::abs(x.w(j) - nominal.w(j)) <= ranges.dw_deg(j) * kDeg + 1e-12);
        }
        CHECK(x.q.norm() == doctest::Approx(1.0).epsilon(1e-12));
        rmin = rmin.cwiseMin(x.r);
        rmax = rmax.cwiseMax(x.r);
        rsum += x.r;
        vsum += x.v;
    }
    // the x/y position draws fill most of the box and average near zero
    CHECK(rmin(0) < nominal.r(0) - 450.0);
    CHECK(rmax(0) > nominal.r(0) + 450.0);
    CHECK(rmin(2) == nominal.r(2));
    // mean within 3 sigma of the nominal (sigma = width / sqrt(12 n))
    const double sig_r = 500.0 / std::sqrt(3.0) / std::sqrt(double(n));
    CHECK(std::abs(rsum(0) / n - nominal.r(0)) < 3.0 * sig_r);
    const double sig_v = 40.0 / std::sqrt(3.0) / std::sqrt(double(n));
    CHECK(std::abs(vsum(0) / n - nominal.v(0)) < 3.0 * sig_v);
}

TEST_CASE("derived seeds are scheduling independent and distinct") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(5, 17) == derive_seed(5, 17));
}

TEST_CASE("dataset build, persistence, and training pairs") {
    const auto dir = std::filesystem::temp_directory_path() / "pdg_dataset_test";
    std::filesystem::create_directories(dir);
    const auto problem = small_problem();
    PerturbationRanges ranges;
    BuildDatasetOptions opts;
    opts.count = 4;
    opts.master_seed = 99;
    opts.split_fraction = 0.75;
    opts.jobs = 1;
    opts.config_hash = "testcfg";
    const auto cfg = dataset_cfg();
    const Dataset ds = build_dataset(problem, ranges, opts, cfg);

    REQUIRE(ds.records.size() >= 3);  // straight-line SCP is robust at this scale
    CHECK(ds.manifest.attempted == 4);
    CHECK(ds.manifest.n_nodes == 20);
    CHECK(ds.manifest.train_idx.size() + ds.manifest.test_idx.size() == ds.records.size());

    SUBCASE("records hold the dataset-mode convergence evidence") {
        for (const auto& r : ds.records) {
            CHECK(r.converged);
            CHECK(static_cast<int>(r.frames.size()) == 20);
            CHECK(r.j_tr <= cfg.eps_tr);
            CHECK(r.j_vc <= cfg.eps_vc);
            CHECK(r.final_mass > 22000.0);
            // frame 0 stores the perturbed initial state
            CHECK((r.frames[0].head<14>() - r.x0).cwiseAbs().maxCoeff() < 1e-9);
        }
    }

    SUBCASE("round trip through disk is bit-exact") {
        save_dataset(ds, dir / "ds");
        const Dataset r = load_dataset(dir / "ds");
        REQUIRE(r.records.size() == ds.records.size());
        for (std::size_t i = 0; i < ds.records.size(); ++i) {
            CHECK(r.records[i].seed == ds.records[i].seed);
            CHECK(r.records[i].tf == ds.records[i].tf);  // bitwise
            for (std::size_t k = 0; k < ds.records[i].frames.size(); ++k) {
                CHECK((r.records[i].frames[k] - ds.records[i].frames[k]).cwiseAbs().maxCoeff() ==
                      0.0);
            }
        }
        save_dataset(r, dir / "ds2");
        CHECK(slurp(dir / "ds.records.bin") == slurp(dir / "ds2.records.bin"));
    }

    SUBCASE("rebuild with the same master seed is identical regardless of jobs") {
        BuildDatasetOptions opts2 = opts;
        opts2.jobs = 3;
        const Dataset ds2 = build_dataset(problem, ranges, opts2, cfg);
        save_dataset(ds, dir / "a");
        save_dataset(ds2, dir / "b");
        CHECK(slurp(dir / "a.records.bin") == slurp(dir / "b.records.bin"));
    }

    SUBCASE("frame pairs iterate consecutively per record") {
        std::vector<std::uint32_t> first{0};
        const auto pairs = frame_pairs(ds, first);
        REQUIRE(pairs.size() == 19);  // N-1 pairs for a 20-node record
        CHECK((pairs[0].in - ds.records[0].frames[0]).cwiseAbs().maxCoeff() == 0.0);
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            CHECK((pairs[k].out - ds.records[0].frames[k + 1]).cwiseAbs().maxCoeff() == 0.0);
            if (k > 0) CHECK((pairs[k].in - pairs[k - 1].out).cwiseAbs().maxCoeff() == 0.0);
        }
    }

    SUBCASE("csv export is lossless") {
        export_dataset_csv(ds, dir / "ds.csv");
        std::ifstream is(dir / "ds.csv");
        std::string header;
        std::getline(is, header);
        CHECK(header.find("m_kg") != std::string::npos);
        std::string line;
        std::getline(is, line);
        // first frame row: parse back the mass column and compare bitwise
        std::size_t pos = 0;
        for (int c = 0; c < 3; ++c) pos = line.find(',', pos) + 1;
        const double m = std::stod(line.substr(pos));
        CHECK(m == ds.records[0].frames[0](0));
    }

    SUBCASE("corrupted record files are rejected") {
        save_dataset(ds, dir / "bad");
        auto bytes = slurp(dir / "bad.records.bin");
        bytes[bytes.size() / 3] ^= 0x10;
        std::ofstream os(dir / "bad.records.bin", std::ios::binary | std::ios::trunc);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        os.close();
        CHECK_THROWS_AS(load_dataset(dir / "bad"), IoError);
    }

    std::filesystem::remove_all(dir);
}

TEST_CASE("a zero-perturbation record matches a direct scp run") {
    auto problem = small_problem();
    PerturbationRanges zero;
    zero.dr.setZero();
    zero.dv.setZero();
    zero.d_euler_deg.setZero();
    zero.dw_deg.setZero();
    BuildDatasetOptions opts;
    opts.count = 1;
    opts.master_seed = 5;
    opts.jobs = 1;
    const auto cfg = dataset_cfg();
    const Dataset ds = build_dataset(problem, zero, opts, cfg);
    REQUIRE(ds.records.size() == 1);

    const auto init = straight_line_init(problem.bcs, problem.bounds, 20, cfg.tf_guess);
    const ScpResult direct = run_scp(problem, init, cfg);
    REQUIRE(direct.converged);
    CHECK(ds.records[0].tf == direct.trajectory.tf);  // bitwise agreement
    for (int k = 0; k < 20; ++k) {
        const Frame f = make_frame(direct.trajectory.xs[k], direct.trajectory.us[k]);
        CHECK((ds.records[0].frames[k] - f).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("dataset build rejects the online criteria mode") {
    ScpConfig cfg;
    cfg.criteria_mode = CriteriaMode::online;
    CHECK_THROWS_AS(
        build_dataset(small_problem(), PerturbationRanges{}, BuildDatasetOptions{}, cfg),
        InvalidInputError);
}
