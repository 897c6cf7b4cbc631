#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pdg/mlp.hpp"
#include "pdg/scp.hpp"

namespace pdg {

/// Uniform perturbation boxes applied to the nominal initial state. Attitude
/// offsets are drawn as Euler angles and converted to the initial quaternion.
struct PerturbationRanges {
    Vec3 dr{500.0, 500.0, 0.0};        // m, +- box for x, y (z fixed)
    Vec3 dv{40.0, 40.0, 20.0};         // m/s
    Vec3 d_euler_deg{30.0, 30.0, 0.0}; // deg, roll/pitch (zero yaw)
    Vec3 dw_deg{20.0, 20.0, 0.0};      // deg/s
    double dm{0.0};                    // kg
};

/// One solved guidance problem: the perturbed start, convergence info, and
/// the N 17-component frames of the converged trajectory.
struct TrajectoryRecord {
    std::uint64_t id{0};
    std::uint64_t seed{0};
    StateVec x0{StateVec::Zero()};
    bool converged{false};
    double tf{0.0};
    std::uint32_t iterations{0};
    double final_mass{0.0};
    double j_tr{0.0};  // converged trust-region cost
    double j_vc{0.0};  // converged virtual-control cost
    std::vector<Frame> frames;
};

struct DatasetManifest {
    std::uint64_t record_count{0};
    std::vector<std::uint32_t> train_idx;
    std::vector<std::uint32_t> test_idx;
    std::string config_hash;
    std::uint64_t master_seed{0};
    std::uint64_t attempted{0};
    double acceptance_rate{0.0};
    int n_nodes{0};
    double median_tf{0.0};
    std::string euler_convention{"zyx-intrinsic"};
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<TrajectoryRecord> records;
};

/// Deterministic per-problem seed derived from the master seed and the
/// problem index, independent of scheduling.
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index);

/// Draws the perturbed initial state per the range boxes. The attitude draw
/// replaces the quaternion outright (Euler angles to quaternion, zero yaw).
State sample_initial_state(const State& nominal, const PerturbationRanges& ranges,
                           std::uint64_t seed);

struct BuildDatasetOptions {
    int count{2000};
    double split_fraction{0.93};  // share of stored records used for training
    std::uint64_t master_seed{1};
    int jobs{1};                  // 0 = hardware concurrency
    std::string config_hash;
};

/// Solves `count` perturbed problems with straight-line-initialized SCP in
/// dataset criteria mode and keeps the converged ones. Reproducible
/// record-for-record for a fixed master seed under any jobs setting.
Dataset build_dataset(const GuidanceProblem& nominal, const PerturbationRanges& ranges,
                      const BuildDatasetOptions& opts, const ScpConfig& scp_cfg);

/// Binary record file plus JSON manifest under `prefix` (.records.bin /
/// .manifest.json). Round trips are bit-exact.
void save_dataset(const Dataset& ds, const std::filesystem::path& prefix);
Dataset load_dataset(const std::filesystem::path& prefix);

/// Lossless plain-text export (one row per frame, %.17g).
void export_dataset_csv(const Dataset& ds, const std::filesystem::path& path);

/// Consecutive-frame training pairs of the selected records, in record order.
std::vector<FramePair> frame_pairs(const Dataset& ds, const std::vector<std::uint32_t>& indices);

}  // namespace pdg
