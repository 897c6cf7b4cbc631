#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pdg/trajectory.hpp"
#include "pdg/types.hpp"

namespace pdg {

/// One trajectory frame: [m, r(3), v(3), q(4), w(3), T(3)] in dimensional units.
using Frame = Eigen::Matrix<double, kFrameDim, 1>;

Frame make_frame(const State& x, const Control& u);
State frame_state(const Frame& f);
Control frame_control(const Frame& f);

/// Per-feature mean and population standard deviation over the training
/// set. Features that are constant get their deviation floored to one so
/// normalization is a no-op on them.
struct NormalizationStats {
    Frame mean{Frame::Zero()};
    Frame std{Frame::Ones()};

    static NormalizationStats from_frames(const std::vector<Frame>& frames);
};

Frame normalize(const Frame& f, const NormalizationStats& stats);
Frame denormalize(const Frame& f, const NormalizationStats& stats);

/// Fully connected sequence model mapping one normalized frame to the next:
/// affine + ReLU hidden layers, affine output.
struct MlpModel {
    std::vector<Eigen::MatrixXd> weights;  // layer l: (out x in)
    std::vector<Eigen::VectorXd> biases;
    NormalizationStats stats;
    std::string config_hash;
    std::string dataset_id;

    int layer_count() const { return static_cast<int>(weights.size()); }
    std::vector<int> dims() const;
    void validate() const;

    /// He-uniform initialization over layer sizes [17, units x hidden, 17].
    static MlpModel initialized(int hidden_layers, int hidden_units, std::uint64_t seed);
};

/// One prediction step: normalize, run the network, denormalize.
Frame forward(const MlpModel& m, const Frame& f);

/// Recurrent rollout from the seed frame (x0, u0); quaternion components are
/// renormalized per frame. Returns n frames as a trajectory without tf
/// (tf = 0; the caller supplies its own guess). Throws GenerationError on a
/// non-finite prediction.
ReferenceTrajectory generate_trajectory(const MlpModel& m, const State& x0, const Control& u0,
                                        int n);

struct TrainConfig {
    double learning_rate{1e-4};
    int batch_size{128};
    int epochs{800};
    double weight_decay{1e-5};   // lambda in the L2 penalty (lambda/2)||w||^2
    int plateau_patience{25};    // epochs without a new best train loss
    double lr_decay_factor{10.0};
    double lr_min{1e-6};
    std::uint64_t seed{0};
    int hidden_layers{5};
    int hidden_units{256};
};

struct FramePair {
    Frame in;
    Frame out;
};

struct TrainReport {
    std::vector<double> train_mse;   // per epoch, averaged over samples
    std::vector<double> train_loss;  // mse + weight penalty
    std::vector<double> test_mse;
    std::vector<double> lr;
};

/// Adam with bias correction; weight decay enters through the gradient.
class AdamOptimizer {
  public:
    AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}
    void step(Eigen::Ref<Eigen::MatrixXd> param, const Eigen::MatrixXd& grad, double lr);

  private:
    double beta1_, beta2_, eps_;
    std::vector<Eigen::MatrixXd> m_, v_;
    std::vector<const void*> keys_;
    long t_{0};
    int index_of(const void* key, const Eigen::MatrixXd& shape);
};

/// Reduce-on-plateau schedule watching the training loss.
class PlateauSchedule {
  public:
    PlateauSchedule(double lr, int patience, double factor, double lr_min)
        : lr_(lr), patience_(patience), factor_(factor), lr_min_(lr_min) {}
    /// Feed one epoch's training loss; returns the rate for the next epoch.
    double observe(double loss);
    double lr() const { return lr_; }

  private:
    double lr_;
    int patience_;
    double factor_;
    double lr_min_;
    double best_{std::numeric_limits<double>::infinity()};
    int since_best_{0};
};

/// Minimizes MSE + (lambda/2)||W||^2 with Adam over shuffled mini-batches.
/// Normalization statistics come from the training pairs only. Deterministic
/// for a fixed (seed, dataset, config). Throws on an empty dataset and on a
/// non-finite loss (naming the epoch).
MlpModel train(const std::vector<FramePair>& train_pairs, const std::vector<FramePair>& test_pairs,
               const TrainConfig& cfg, TrainReport* report = nullptr);

/// Little-endian binary model file: magic, version, layer dims, row-major
/// weights, biases, normalization stats, metadata, CRC-32. Round trips are
/// byte-exact; version or checksum mismatches throw IoError.
void save_model(const MlpModel& m, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace pdg
