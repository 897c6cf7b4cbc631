#pragma once

#include <filesystem>
#include <string>

#include "pdg/dataset.hpp"
#include "pdg/mlp.hpp"
#include "pdg/scp.hpp"
#include "pdg/simeval.hpp"

namespace pdg {

/// One config document drives every pipeline stage. Keys carry their units
/// (angles in degrees, thrust in newtons); unknown keys are rejected.
struct RunConfig {
    VehicleParams vehicle;
    ProblemBounds bounds;
    BoundaryConditions mission;
    DiscretizationConfig disc;
    ScpConfig scp;

    PerturbationRanges ranges;
    int dataset_count{2000};
    double split_fraction{0.93};
    std::uint64_t dataset_seed{1};

    TrainConfig train;
    McOptions mc;

    std::string output_dir{"out"};
    std::string model_file{"out/model.bin"};
    std::string dataset_prefix{"out/dataset"};

    std::string config_hash;  // FNV-1a of the canonical document

    GuidanceProblem problem() const { return {vehicle, bounds, mission, disc}; }
};

/// Parses and validates a config file. Throws ConfigError on unknown keys,
/// malformed values, or violated invariants.
RunConfig load_config(const std::filesystem::path& path);

}  // namespace pdg
