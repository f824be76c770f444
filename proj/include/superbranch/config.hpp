#pragma once

#include <optional>
#include <string>
#include <vector>

#include "superbranch/functions.hpp"
#include "superbranch/mechanism.hpp"
#include "superbranch/motion.hpp"
#include "superbranch/skeleton.hpp"

namespace superbranch {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct SimulationBlock {
    double horizon = 1.0;
    std::vector<double> record_times;
    double epsilon = 0.05;
    int replicas = 1000;
    std::size_t atom_cap = 10'000'000;
    std::size_t particle_cap = 10'000'000;
};

struct TestBlock {
    double significance = 0.01;
    std::vector<TestFunction> functions;
    std::vector<double> bin_edges;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    BranchingMechanism mechanism = BranchingMechanism::constant(1.0, 1.0);
    MotionModel motion = inward_ou(1.0, 1);
    std::optional<ExampleId> spectral_example;
    std::optional<double> w_override;
    std::vector<WeightedAtom> initial_measure;
    SimulationBlock simulation;
    TestBlock tests;

    SpectralData spectral() const;
};

// Parses and schema-validates the experiment configuration; unknown keys are
// rejected with a path-to-key diagnostic.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);

}  // namespace superbranch
