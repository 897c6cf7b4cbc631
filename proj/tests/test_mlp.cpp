#include <doctest.h>

#include <zlib.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "pdg/errors.hpp"
#include "pdg/mlp.hpp"
#include "test_fixtures.hpp"

using namespace pdg;
using namespace pdg::testing;

namespace {

Frame random_frame(std::mt19937_64& rng, double scale = 1.0) {
    Frame f;
    for (int i = 0; i < kFrameDim; ++i) f(i) = scale * uniform(rng, -1.0, 1.0);
    return f;
}

// Tiny synthetic dataset: a fixed affine map with mild nonlinearity.
std::vector<FramePair> synthetic_pairs(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Eigen::Matrix<double, kFrameDim, kFrameDim> map;
    std::mt19937_64 mrng(7);
    for (int i = 0; i < kFrameDim; ++i) {
        for (int j = 0; j < kFrameDim; ++j) {
            map(i, j) = (i == j ? 0.9 : 0.0) + 0.02 * uniform(mrng, -1.0, 1.0);
        }
    }
    std::vector<FramePair> out;
    for (int k = 0; k < n; ++k) {
        FramePair pr;
        pr.in = random_frame(rng, 2.0);
        pr.out = map * pr.in;
        pr.out(0) += 0.1 * std::tanh(pr.in(1));
        out.push_back(pr);
    }
    return out;
}

}  // namespace

TEST_CASE("normalization statistics and z-scores") {
    // feature with values {1,2,3}: mean 2, population std sqrt(2/3)
    std::vector<Frame> frames;
    for (double v : {1.0, 2.0, 3.0}) {
        Frame f = Frame::Zero();
        f(0) = v;
        frames.push_back(f);
    }
    const auto stats = NormalizationStats::from_frames(frames);
    CHECK(stats.mean(0) == doctest::Approx(2.0));
    CHECK(stats.std(0) == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
    CHECK(stats.std(0) == doctest::Approx(0.8165).epsilon(1e-4));
    CHECK(normalize(frames[0], stats)(0) == doctest::Approx(-1.224745).epsilon(1e-6));
    CHECK(normalize(frames[1], stats)(0) == doctest::Approx(0.0));
    CHECK(normalize(frames[2], stats)(0) == doctest::Approx(1.224745).epsilon(1e-6));
    // constant features are floored to unit deviation
    CHECK(stats.std(5) == 1.0);
}

TEST_CASE("normalize and denormalize are exact inverses") {
    std::mt19937_64 rng(3);
    std::vector<Frame> frames;
    for (int i = 0; i < 40; ++i) frames.push_back(random_frame(rng, 100.0));
    const auto stats = NormalizationStats::from_frames(frames);
    for (const auto& f : frames) {
        CHECK((denormalize(normalize(f, stats), stats) - f).cwiseAbs().maxCoeff() <
              1e-12 * 100.0);
    }
    // a frame equal to the mean maps to zero
    CHECK(normalize(stats.mean, stats).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero network outputs the feature means") {
    MlpModel m = MlpModel::initialized(2, 8, 1);
    for (auto& w : m.weights) w.setZero();
    for (auto& b : m.biases) b.setZero();
    std::mt19937_64 rng(5);
    std::vector<Frame> frames;
    for (int i = 0; i < 10; ++i) frames.push_back(random_frame(rng, 3.0));
    m.stats = NormalizationStats::from_frames(frames);
    const Frame out = forward(m, frames[0]);
    CHECK((out - m.stats.mean).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("a relu-split identity network reproduces its input") {
    // hidden layer computes [relu(x); relu(-x)], output layer subtracts
    MlpModel m;
    Eigen::MatrixXd w1(2 * kFrameDim, kFrameDim);
    w1 << Eigen::MatrixXd::Identity(kFrameDim, kFrameDim),
        -Eigen::MatrixXd::Identity(kFrameDim, kFrameDim);
    Eigen::MatrixXd w2(kFrameDim, 2 * kFrameDim);
    w2 << Eigen::MatrixXd::Identity(kFrameDim, kFrameDim),
        -Eigen::MatrixXd::Identity(kFrameDim, kFrameDim);
    m.weights = {w1, w2};
    m.biases = {Eigen::VectorXd::Zero(2 * kFrameDim), Eigen::VectorXd::Zero(kFrameDim)};
    std::mt19937_64 rng(11);
    for (int i = 0; i < 20; ++i) {
        const Frame f = random_frame(rng, 5.0);
        CHECK((forward(m, f) - f).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("single weight perturbations respect the lipschitz bound") {
    MlpModel m = MlpModel::initialized(2, 6, 42);
    std::mt19937_64 rng(13);
    const Frame f = random_frame(rng);
    const double delta = 1e-4;
    // spectral norms of all layers
    std::vector<double> snorm;
    for (const auto& w : m.weights) {
        snorm.push_back(w.jacobiSvd().singularValues()(0));
    }
    const Eigen::VectorXd x = normalize(f, m.stats);
    for (int l = 0; l < m.layer_count(); ++l) {
        MlpModel pert = m;
        pert.weights[l](0, 0) += delta;
        double bound = delta * x.norm();
        for (int j = 0; j < m.layer_count(); ++j) {
            if (j != l) bound *= snorm[j];
        }
        const double change =
            (forward(pert, f) - forward(m, f)).cwiseQuotient(m.stats.std).norm();
        CHECK(change <= bound * (1.0 + 1e-9) + 1e-12);
    }
}

TEST_CASE("adam single step against the hand-evaluated update") {
    // objective w^2 at w=1: grad 2, lr 0.1
    AdamOptimizer adam;
    Eigen::MatrixXd w(1, 1);
    w(0, 0) = 1.0;
    Eigen::MatrixXd g(1, 1);
    g(0, 0) = 2.0;
    adam.step(w, g, 0.1);
    const double expected = 1.0 - 0.1 * (0.2 / 0.1) / (std::sqrt(0.004 / 0.001) + 1e-8);
    CHECK(std::abs(w(0, 0) - expected) < 1e-10);
    CHECK(w(0, 0) == doctest::Approx(0.9).epsilon(1e-7));
}

TEST_CASE("backprop gradients match central finite differences") {
    // two hidden units, batch of three, full loss including weight decay
    TrainConfig cfg;
    cfg.hidden_layers = 1;
    cfg.hidden_units = 2;
    cfg.weight_decay = 1e-3;
    const double lambda = cfg.weight_decay;

    std::mt19937_64 rng(2024);
    std::vector<Frame> frames;
    for (int i = 0; i < 6; ++i) frames.push_back(random_frame(rng));
    MlpModel m = MlpModel::initialized(1, 2, 99);
    m.stats = NormalizationStats::from_frames(frames);

    const int bs = 3;
    std::vector<Frame> xs(frames.begin(), frames.begin() + 3);
    std::vector<Frame> ys(frames.begin() + 3, frames.end());

    const auto loss_fn = [&](const MlpModel& model) {
        double sq = 0.0;
        for (int i = 0; i < bs; ++i) {
            Eigen::VectorXd a = normalize(xs[i], model.stats);
            for (int l = 0; l < model.layer_count(); ++l) {
                a = model.weights[l] * a + model.biases[l];
                if (l != model.layer_count() - 1) a = a.cwiseMax(0.0);
            }
            sq += (a - normalize(ys[i], model.stats)).squaredNorm();
        }
        double pen = 0.0;
        for (const auto& w : model.weights) pen += w.squaredNorm();
        return sq / (bs * kFrameDim) + 0.5 * lambda * pen;
    };

    // analytic gradients via the same batched expressions train() uses
    Eigen::MatrixXd xb(bs, kFrameDim), yb(bs, kFrameDim);
    for (int i = 0; i < bs; ++i) {
        xb.row(i) = normalize(xs[i], m.stats).transpose();
        yb.row(i) = normalize(ys[i], m.stats).transpose();
    }
    std::vector<Eigen::MatrixXd> acts{xb}, zs;
    for (int l = 0; l < m.layer_count(); ++l) {
        Eigen::MatrixXd z = acts.back() * m.weights[l].transpose();
        z.rowwise() += m.biases[l].transpose();
        zs.push_back(z);
        acts.push_back(l == m.layer_count() - 1 ? z : z.cwiseMax(0.0).eval());
    }
    Eigen::MatrixXd g = (2.0 / (bs * kFrameDim)) * (acts.back() - yb);
    std::vector<Eigen::MatrixXd> gws(m.layer_count());
    std::vector<Eigen::VectorXd> gbs(m.layer_count());
    for (int l = m.layer_count() - 1; l >= 0; --l) {
        gws[l] = g.transpose() * acts[l] + lambda * m.weights[l];
        gbs[l] = g.colwise().sum().transpose();
        if (l > 0) {
            g = (g * m.weights[l])
                    .cwiseProduct((zs[l - 1].array() > 0.0).cast<double>().matrix());
        }
    }

    const double h = 1e-6;
    for (int l = 0; l < m.layer_count(); ++l) {
        for (int i = 0; i < m.weights[l].rows(); ++i) {
            for (int j = 0; j < m.weights[l].cols(); ++j) {
                MlpModel mp = m, mm = m;
                mp.weights[l](i, j) += h;
                mm.weights[l](i, j) -= h;
                const double fd = (loss_fn(mp) - loss_fn(mm)) / (2.0 * h);
                CHECK(std::abs(gws[l](i, j) - fd) / std::max(1e-3, std::abs(fd)) < 1e-5);
            }
        }
        for (int i = 0; i < m.biases[l].size(); ++i) {
            MlpModel mp = m, mm = m;
            mp.biases[l](i) += h;
            mm.biases[l](i) -= h;
            const double fd = (loss_fn(mp) - loss_fn(mm)) / (2.0 * h);
            CHECK(std::abs(gbs[l](i) - fd) / std::max(1e-3, std::abs(fd)) < 1e-5);
        }
    }
}

TEST_CASE("training is bitwise deterministic for a fixed seed") {
    const auto pairs = synthetic_pairs(64, 555);
    const auto test = synthetic_pairs(16, 556);
    TrainConfig cfg;
    cfg.hidden_layers = 2;
    cfg.hidden_units = 16;
    cfg.epochs = 12;
    cfg.batch_size = 16;
    cfg.seed = 77;
    TrainReport r1, r2;
    const MlpModel m1 = train(pairs, test, cfg, &r1);
    const MlpModel m2 = train(pairs, test, cfg, &r2);
    REQUIRE(r1.train_loss.size() == r2.train_loss.size());
    for (std::size_t i = 0; i < r1.train_loss.size(); ++i) {
        CHECK(r1.train_loss[i] == r2.train_loss[i]);  // bitwise
        CHECK(r1.test_mse[i] == r2.test_mse[i]);
    }
    for (int l = 0; l < m1.layer_count(); ++l) {
        CHECK((m1.weights[l] - m2.weights[l]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("training a small net reduces the loss and generalizes") {
    const auto pairs = synthetic_pairs(512, 1234);
    const auto test = synthetic_pairs(128, 4321);
    TrainConfig cfg;
    cfg.hidden_layers = 2;
    cfg.hidden_units = 32;
    cfg.epochs = 120;
    cfg.batch_size = 64;
    cfg.learning_rate = 3e-3;
    cfg.weight_decay = 1e-6;
    cfg.seed = 9;
    TrainReport rep;
    train(pairs, test, cfg, &rep);
    CHECK(rep.train_mse.back() < 0.05 * rep.train_mse.front());
    CHECK(rep.test_mse.back() < 3.0 * std::max(rep.train_mse.back(), 1e-6));
}

TEST_CASE("weight decay zero reduces the loss to the plain mse") {
    const auto pairs = synthetic_pairs(32, 10);
    TrainConfig cfg;
    cfg.hidden_layers = 1;
    cfg.hidden_units = 4;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.weight_decay = 0.0;
    TrainReport rep;
    train(pairs, {}, cfg, &rep);
    for (std::size_t i = 0; i < rep.train_mse.size(); ++i) {
        CHECK(rep.train_loss[i] == rep.train_mse[i]);
    }
}

TEST_CASE("plateau schedule decays by tens down to the floor") {
    PlateauSchedule sched(1e-4, 25, 10.0, 1e-6);
    // 1 improvement, then a long plateau
    CHECK(sched.observe(1.0) == 1e-4);
    for (int i = 0; i < 24; ++i) CHECK(sched.observe(2.0) == 1e-4);
    CHECK(sched.observe(2.0) == doctest::Approx(1e-5));  // 25th stale epoch
    for (int i = 0; i < 24; ++i) CHECK(sched.observe(2.0) == doctest::Approx(1e-5));
    CHECK(sched.observe(2.0) == doctest::Approx(1e-6));
    for (int i = 0; i < 30; ++i) CHECK(sched.observe(2.0) >= 1e-6);  // floored
    // a new best resets the window
    PlateauSchedule s2(1e-4, 3, 10.0, 1e-6);
    s2.observe(1.0);
    s2.observe(2.0);
    s2.observe(2.0);
    CHECK(s2.observe(0.5) == 1e-4);
    CHECK(s2.lr() == 1e-4);
}

TEST_CASE("empty dataset is rejected") {
    CHECK_THROWS_AS(train({}, {}, TrainConfig{}), InvalidInputError);
}

TEST_CASE("generate trajectory seeds, rolls out, and renormalizes") {
    MlpModel m = MlpModel::initialized(1, 8, 3);
    std::mt19937_64 rng(8);
    std::vector<Frame> frames;
    for (int i = 0; i < 16; ++i) frames.push_back(random_frame(rng, 2.0));
    m.stats = NormalizationStats::from_frames(frames);
    State x0 = baseline_bcs().x0;
    const Control u0(0.0, 0.0, 320000.0);

    SUBCASE("a single-frame rollout returns only the seed") {
        const auto traj = generate_trajectory(m, x0, u0, 1);
        CHECK(traj.n() == 1);
        CHECK(traj.xs[0].m == x0.m);
        CHECK((traj.us[0] - u0).norm() == 0.0);
        CHECK(traj.tf == 0.0);
    }
    SUBCASE("rollout quaternions are unit after each step") {
        const auto traj = generate_trajectory(m, x0, u0, 8);
        REQUIRE(traj.n() == 8);
        for (const auto& x : traj.xs) {
            CHECK(x.q.norm() == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    SUBCASE("non-finite predictions raise a generation error") {
        MlpModel bad = m;
        bad.weights.back().setConstant(1e308);
        CHECK_THROWS_AS(generate_trajectory(bad, x0, u0, 4), GenerationError);
    }
}

TEST_CASE("model files round trip byte-exactly and reject corruption") {
    const auto dir = std::filesystem::temp_directory_path() / "pdg_mlp_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "model.bin";

    MlpModel m = MlpModel::initialized(2, 12, 77);
    std::mt19937_64 rng(21);
    std::vector<Frame> frames;
    for (int i = 0; i < 8; ++i) frames.push_back(random_frame(rng, 4.0));
    m.stats = NormalizationStats::from_frames(frames);
    m.config_hash = "cfg-hash-0123";
    m.dataset_id = "ds-42";
    save_model(m, path);
    const MlpModel r = load_model(path);

    SUBCASE("loaded model is functionally identical") {
        CHECK(r.config_hash == m.config_hash);
        CHECK(r.dataset_id == m.dataset_id);
        for (int i = 0; i < 100; ++i) {
            const Frame f = random_frame(rng, 3.0);
            CHECK((forward(r, f) - forward(m, f)).cwiseAbs().maxCoeff() == 0.0);
        }
    }
    SUBCASE("a second save produces identical bytes") {
        const auto path2 = dir / "model2.bin";
        save_model(r, path2);
        std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
        const std::string ba((std::istreambuf_iterator<char>(a)), {});
        const std::string bb((std::istreambuf_iterator<char>(b)), {});
        CHECK(ba == bb);
    }
    SUBCASE("flipping one payload byte fails the checksum") {
        std::ifstream is(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(is)), {});
        bytes[bytes.size() / 2] ^= 0x40;
        const auto bad = dir / "corrupt.bin";
        std::ofstream os(bad, std::ios::binary);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        os.close();
        CHECK_THROWS_AS(load_model(bad), IoError);
    }
    SUBCASE("a bumped version is rejected explicitly") {
        std::ifstream is(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(is)), {});
        bytes[8] = 9;  // version field follows the 8-byte magic
        // refresh the trailing checksum so only the version mismatches
        const auto crc = static_cast<std::uint32_t>(
            crc32(0L, reinterpret_cast<const unsigned char*>(bytes.data()),
                  static_cast<unsigned>(bytes.size() - 4)));
        std::memcpy(bytes.data() + bytes.size() - 4, &crc, 4);
        const auto bad = dir / "version.bin";
        std::ofstream os(bad, std::ios::binary);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        os.close();
        try {
            load_model(bad);
            FAIL("expected IoError");
        } catch (const IoError& e) {
            CHECK(std::string(e.what()).find("version") != std::string::npos);
        }
    }
    std::filesystem::remove_all(dir);
}
