#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "superbranch/config.hpp"

namespace superbranch {

// Runs body(replica) for replica in [0, n) over a worker pool. Each replica
// writes only into its own output slot, so results do not depend on the
// worker count or scheduling.
void parallel_replicas(std::size_t n, int workers, const std::function<void(std::size_t)>& body);

// Per-replica scalar table: rows are (replica, record time) pairs with a set
// of named value columns; merged aggregates are computed in replica order so
// outputs are byte-stable.
struct ReplicaTable {
    std::vector<std::string> value_columns;
    std::vector<double> record_times;
    // values[replica][record][column]
    std::vector<std::vector<std::vector<double>>> values;

    std::string per_replica_csv() const;
    std::string aggregate_csv() const;

    // Column samples at one record time, across replicas.
    std::vector<double> column(std::size_t record, std::size_t col) const;
};

struct ExperimentOutput {
    ReplicaTable table;
    std::size_t truncation_events = 0;
    double elapsed_ms = 0.0;   // reported on stderr/stdout, never in the CSVs
};

// Experiment drivers behind the CLI subcommands.
ExperimentOutput run_skeleton_experiment(const ExperimentConfig& cfg, int workers);
ExperimentOutput run_super_experiment(const ExperimentConfig& cfg, int workers);
ExperimentOutput run_dress_experiment(const ExperimentConfig& cfg, int workers);
ExperimentOutput run_spine_experiment(const ExperimentConfig& cfg, int workers);

}  // namespace superbranch
