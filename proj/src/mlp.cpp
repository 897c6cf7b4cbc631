#include "pdg/mlp.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "pdg/errors.hpp"

namespace pdg {

Frame make_frame(const State& x, const Control& u) {
    Frame f;
    f.head<kStateDim>() = x.pack();
    f.tail<kControlDim>() = u;
    return f;
}

State frame_state(const Frame& f) {
    return State::unpack(f.head<kStateDim>());
}

Control frame_control(const Frame& f) {
    return f.tail<kControlDim>();
}

NormalizationStats NormalizationStats::from_frames(const std::vector<Frame>& frames) {
    if (frames.empty()) throw InvalidInputError("NormalizationStats: no frames");
    NormalizationStats s;
    s.mean.setZero();
    for (const Frame& f : frames) s.mean += f;
    s.mean /= static_cast<double>(frames.size());
    Frame var = Frame::Zero();
    for (const Frame& f : frames) var += (f - s.mean).cwiseProduct(f - s.mean);
    var /= static_cast<double>(frames.size());
    s.std = var.cwiseSqrt();
    for (int i = 0; i < kFrameDim; ++i) {
        // constant features pass through unscaled
        if (s.std(i) < 1e-12) s.std(i) = 1.0;
    }
    return s;
}

Frame normalize(const Frame& f, const NormalizationStats& stats) {
    return (f - stats.mean).cwiseQuotient(stats.std);
}

Frame denormalize(const Frame& f, const NormalizationStats& stats) {
    return f.cwiseProduct(stats.std) + stats.mean;
}

std::vector<int> MlpModel::dims() const {
    std::vector<int> d;
    if (weights.empty()) return d;
    d.push_back(static_cast<int>(weights.front().cols()));
    for (const auto& w : weights) d.push_back(static_cast<int>(w.rows()));
    return d;
}

void MlpModel::validate() const {
    if (weights.empty() || weights.size() != biases.size()) {
        throw InvalidInputError("MlpModel: empty or mismatched layer lists");
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (biases[l].size() != weights[l].rows()) {
            throw InvalidInputError("MlpModel: bias length mismatch");
        }
        if (l > 0 && weights[l].cols() != weights[l - 1].rows()) {
            throw InvalidInputError("MlpModel: consecutive layer dimensions mismatch");
        }
    }
    if (weights.front().cols() != kFrameDim || weights.back().rows() != kFrameDim) {
        throw InvalidInputError("MlpModel: input/output must be 17-dimensional");
    }
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double uniform01(std::uint64_t& state) {
    return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
}

}  // namespace

MlpModel MlpModel::initialized(int hidden_layers, int hidden_units, std::uint64_t seed) {
    if (hidden_layers < 1 || hidden_units < 1) {
        throw InvalidInputError("MlpModel: need at least one hidden layer and unit");
    }
    std::vector<int> d;
    d.push_back(kFrameDim);
    for (int i = 0; i < hidden_layers; ++i) d.push_back(hidden_units);
    d.push_back(kFrameDim);

    MlpModel m;
    std::uint64_t rng = seed ^ 0xa02f9c5d8e31ULL;
    for (std::size_t l = 0; l + 1 < d.size(); ++l) {
        const int in = d[l];
        const int out = d[l + 1];
        const double limit = std::sqrt(6.0 / in);
        Eigen::MatrixXd w(out, in);
        for (int i = 0; i < out; ++i) {
            for (int j = 0; j < in; ++j) w(i, j) = (2.0 * uniform01(rng) - 1.0) * limit;
        }
        m.weights.push_back(std::move(w));
        m.biases.push_back(Eigen::VectorXd::Zero(out));
    }
    return m;
}

Frame forward(const MlpModel& m, const Frame& f) {
    Eigen::VectorXd a = normalize(f, m.stats);
    const int last = m.layer_count() - 1;
    for (int l = 0; l <= last; ++l) {
        a = m.weights[l] * a + m.biases[l];
        if (l != last) a = a.cwiseMax(0.0);
    }
    return denormalize(a, m.stats);
}

ReferenceTrajectory generate_trajectory(const MlpModel& m, const State& x0, const Control& u0,
                                        int n) {
    if (n < 1) throw InvalidInputError("generate_trajectory: need at least one frame");
    ReferenceTrajectory out;
    out.tf = 0.0;  // the caller supplies the time guess
    Frame f = make_frame(x0, u0);
    out.xs.push_back(frame_state(f));
    out.us.push_back(frame_control(f));
    for (int k = 1; k < n; ++k) {
        f = forward(m, f);
        if (!f.allFinite()) {
            throw GenerationError("generate_trajectory: non-finite prediction at frame " +
                                  std::to_string(k));
        }
        State x = frame_state(f);
        const double qn = x.q.norm();
        if (qn < 1e-9) {
            throw GenerationError("generate_trajectory: vanishing quaternion at frame " +
                                  std::to_string(k));
        }
        x.q /= qn;
        f.segment<4>(7) = x.q;
        out.xs.push_back(x);
        out.us.push_back(frame_control(f));
    }
    return out;
}

int AdamOptimizer::index_of(const void* key, const Eigen::MatrixXd& shape) {
    for (std::size_t i = 0; i < keys_.size(); ++i) {
        if (keys_[i] == key) return static_cast<int>(i);
    }
    keys_.push_back(key);
    m_.push_back(Eigen::MatrixXd::Zero(shape.rows(), shape.cols()));
    v_.push_back(Eigen::MatrixXd::Zero(shape.rows(), shape.cols()));
    return static_cast<int>(keys_.size()) - 1;
}

void AdamOptimizer::step(Eigen::Ref<Eigen::MatrixXd> param, const Eigen::MatrixXd& grad,
                         double lr) {
    const int i = index_of(param.data(), grad);
    if (i == 0) ++t_;  // one time step per sweep over the registered tensors
    auto& m = m_[i];
    auto& v = v_[i];
    m = beta1_ * m + (1.0 - beta1_) * grad;
    v = beta2_ * v + (1.0 - beta2_) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    param -= (lr * (m / bc1).array() / ((v / bc2).array().sqrt() + eps_)).matrix();
}

double PlateauSchedule::observe(double loss) {
    if (loss < best_) {
        best_ = loss;
        since_best_ = 0;
    } else if (++since_best_ >= patience_) {
        lr_ = std::max(lr_ / factor_, lr_min_);
        since_best_ = 0;
    }
    return lr_;
}

namespace {

struct BatchWorkspace {
    std::vector<Eigen::MatrixXd> acts;   // a_0 .. a_L (batch x width)
    std::vector<Eigen::MatrixXd> zs;     // z_1 .. z_L
};

// Forward pass on a batch; rows are samples.
void forward_batch(const MlpModel& m, const Eigen::MatrixXd& x, BatchWorkspace& ws) {
    const int layers = m.layer_count();
    if (ws.acts.size() != static_cast<std::size_t>(layers + 1)) {
        ws.acts.resize(layers + 1);
        ws.zs.resize(layers);
    }
    ws.acts[0] = x;
    for (int l = 0; l < layers; ++l) {
        ws.zs[l] = ws.acts[l] * m.weights[l].transpose();
        ws.zs[l].rowwise() += m.biases[l].transpose();
        ws.acts[l + 1] = l + 1 == layers ? ws.zs[l] : ws.zs[l].cwiseMax(0.0);
    }
}

double weight_penalty(const MlpModel& m, double lambda) {
    double sq = 0.0;
    for (const auto& w : m.weights) sq += w.squaredNorm();
    return 0.5 * lambda * sq;
}

}  // namespace

MlpModel train(const std::vector<FramePair>& train_pairs, const std::vector<FramePair>& test_pairs,
               const TrainConfig& cfg, TrainReport* report) {
    if (train_pairs.empty()) throw InvalidInputError("train: empty training set");

    // statistics from the training split only
    std::vector<Frame> stat_frames;
    stat_frames.reserve(2 * train_pairs.size());
    for (const auto& pr : train_pairs) {
        stat_frames.push_back(pr.in);
        stat_frames.push_back(pr.out);
    }
    MlpModel model = MlpModel::initialized(cfg.hidden_layers, cfg.hidden_units, cfg.seed);
    model.stats = NormalizationStats::from_frames(stat_frames);

    const int n = static_cast<int>(train_pairs.size());
    const int nt = static_cast<int>(test_pairs.size());
    Eigen::MatrixXd xtr(n, kFrameDim), ytr(n, kFrameDim);
    for (int i = 0; i < n; ++i) {
        xtr.row(i) = normalize(train_pairs[i].in, model.stats).transpose();
        ytr.row(i) = normalize(train_pairs[i].out, model.stats).transpose();
    }
    Eigen::MatrixXd xte(nt, kFrameDim), yte(nt, kFrameDim);
    for (int i = 0; i < nt; ++i) {
        xte.row(i) = normalize(test_pairs[i].in, model.stats).transpose();
        yte.row(i) = normalize(test_pairs[i].out, model.stats).transpose();
    }

    AdamOptimizer adam;
    PlateauSchedule schedule(cfg.learning_rate, cfg.plateau_patience, cfg.lr_decay_factor,
                             cfg.lr_min);
    double lr = cfg.learning_rate;
    std::uint64_t rng = cfg.seed ^ 0x5eedb01df00dULL;
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;

    const int layers = model.layer_count();
    BatchWorkspace ws;
    Eigen::MatrixXd xb, yb, g;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the project RNG keeps runs bitwise reproducible
        for (int i = n - 1; i > 0; --i) {
            const int j = static_cast<int>(splitmix64(rng) % static_cast<std::uint64_t>(i + 1));
            std::swap(order[i], order[j]);
        }
        double epoch_mse = 0.0;
        double epoch_loss = 0.0;
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int bs = std::min(cfg.batch_size, n - start);
            xb.resize(bs, kFrameDim);
            yb.resize(bs, kFrameDim);
            for (int i = 0; i < bs; ++i) {
                xb.row(i) = xtr.row(order[start + i]);
                yb.row(i) = ytr.row(order[start + i]);
            }
            forward_batch(model, xb, ws);
            const Eigen::MatrixXd diff = ws.acts[layers] - yb;
            const double denom = static_cast<double>(bs) * kFrameDim;
            const double mse = diff.squaredNorm() / denom;
            const double loss = mse + weight_penalty(model, cfg.weight_decay);
            epoch_mse += mse * bs;
            epoch_loss += loss * bs;

            g = (2.0 / denom) * diff;
            for (int l = layers - 1; l >= 0; --l) {
                const Eigen::MatrixXd gw =
                    g.transpose() * ws.acts[l] + cfg.weight_decay * model.weights[l];
                const Eigen::MatrixXd gb = g.colwise().sum().transpose();
                if (l > 0) {
                    g = (g * model.weights[l])
                            .cwiseProduct((ws.zs[l - 1].array() > 0.0).cast<double>().matrix());
                }
                adam.step(model.weights[l], gw, lr);
                Eigen::Map<Eigen::MatrixXd> bias_view(model.biases[l].data(),
                                                      model.biases[l].size(), 1);
                adam.step(bias_view, gb, lr);
            }
        }
        epoch_mse /= n;
        epoch_loss /= n;
        if (!std::isfinite(epoch_loss)) {
            throw Error("train: non-finite loss at epoch " + std::to_string(epoch));
        }

        double test_mse = 0.0;
        if (nt > 0) {
            forward_batch(model, xte, ws);
            test_mse = (ws.acts[layers] - yte).squaredNorm() /
                       (static_cast<double>(nt) * kFrameDim);
        }
        if (report != nullptr) {
            report->train_mse.push_back(epoch_mse);
            report->train_loss.push_back(epoch_loss);
            report->test_mse.push_back(test_mse);
            report->lr.push_back(lr);
        }
        lr = schedule.observe(epoch_loss);
    }
    return model;
}

namespace {

struct ByteSink {
    std::string bytes;
    template <typename T>
    void put(const T& v) {
        const char* p = reinterpret_cast<const char*>(&v);
        bytes.append(p, sizeof(T));
    }
    void put_string(const std::string& s) {
        put(static_cast<std::uint32_t>(s.size()));
        bytes.append(s);
    }
};

struct ByteSource {
    const std::string& bytes;
    std::size_t pos{0};
    template <typename T>
    T get() {
        if (pos + sizeof(T) > bytes.size()) throw IoError("model file truncated");
        T v;
        std::memcpy(&v, bytes.data() + pos, sizeof(T));
        pos += sizeof(T);
        return v;
    }
    std::string get_string() {
        const auto len = get<std::uint32_t>();
        if (pos + len > bytes.size()) throw IoError("model file truncated");
        std::string s = bytes.substr(pos, len);
        pos += len;
        return s;
    }
};

constexpr char kMagic[8] = {'P', 'D', 'G', 'M', 'O', 'D', 'E', 'L'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_model(const MlpModel& m, const std::filesystem::path& path) {
    m.validate();
    ByteSink sink;
    sink.bytes.append(kMagic, sizeof(kMagic));
    sink.put(kVersion);
    const auto dims = m.dims();
    sink.put(static_cast<std::uint32_t>(m.layer_count()));
    for (const int d : dims) sink.put(static_cast<std::uint32_t>(d));
    for (const auto& w : m.weights) {
        for (int i = 0; i < w.rows(); ++i) {
            for (int j = 0; j < w.cols(); ++j) sink.put(w(i, j));
        }
    }
    for (const auto& b : m.biases) {
        for (int i = 0; i < b.size(); ++i) sink.put(b(i));
    }
    for (int i = 0; i < kFrameDim; ++i) sink.put(m.stats.mean(i));
    for (int i = 0; i < kFrameDim; ++i) sink.put(m.stats.std(i));
    sink.put_string(m.config_hash);
    sink.put_string(m.dataset_id);

    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(sink.bytes.data()),
              static_cast<uInt>(sink.bytes.size())));
    sink.put(crc);

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("save_model: cannot open " + path.string());
    os.write(sink.bytes.data(), static_cast<std::streamsize>(sink.bytes.size()));
    if (!os) throw IoError("save_model: write failed for " + path.string());
}

MlpModel load_model(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("load_model: cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (bytes.size() < sizeof(kMagic) + 8) throw IoError("load_model: file too short");

    const std::string payload = bytes.substr(0, bytes.size() - 4);
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(payload.data()),
              static_cast<uInt>(payload.size())));
    if (crc != stored_crc) throw IoError("load_model: checksum mismatch");

    ByteSource src{payload};
    if (std::memcmp(payload.data(), kMagic, sizeof(kMagic)) != 0) {
        throw IoError("load_model: bad magic");
    }
    src.pos = sizeof(kMagic);
    const auto version = src.get<std::uint32_t>();
    if (version != kVersion) {
        throw IoError("load_model: unsupported version " + std::to_string(version));
    }
    const auto layers = src.get<std::uint32_t>();
    std::vector<int> dims(layers + 1);
    for (auto& d : dims) d = static_cast<int>(src.get<std::uint32_t>());

    MlpModel m;
    for (std::uint32_t l = 0; l < layers; ++l) {
        Eigen::MatrixXd w(dims[l + 1], dims[l]);
        for (int i = 0; i < w.rows(); ++i) {
            for (int j = 0; j < w.cols(); ++j) w(i, j) = src.get<double>();
        }
        m.weights.push_back(std::move(w));
    }
    for (std::uint32_t l = 0; l < layers; ++l) {
        Eigen::VectorXd b(dims[l + 1]);
        for (int i = 0; i < b.size(); ++i) b(i) = src.get<double>();
        m.biases.push_back(std::move(b));
    }
    for (int i = 0; i < kFrameDim; ++i) m.stats.mean(i) = src.get<double>();
    for (int i = 0; i < kFrameDim; ++i) m.stats.std(i) = src.get<double>();
    m.config_hash = src.get_string();
    m.dataset_id = src.get_string();
    m.validate();
    return m;
}

}  // namespace pdg
