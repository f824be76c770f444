#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "superbranch/config.hpp"
#include "superbranch/csv.hpp"
#include "superbranch/runner.hpp"
#include "superbranch/stats.hpp"

using namespace superbranch;

namespace {

const char* kConfig81 = R"json({
  "seed": 7,
  "mechanism": {"beta": 1.0, "alpha": 1.0},
  "motion": {"kind": "inward_ou", "c": 1.0, "d": 1},
  "spectral": {"example": "8.1"},
  "simulation": {"T": 2.0, "record_times": [1.0, 2.0], "epsilon": 0.1, "replicas": 64},
  "tests": {"alpha": 0.01,
            "functions": [{"name": "one", "kind": "constant", "value": 1.0},
                          {"name": "box1", "kind": "box", "center": [0.0], "half_width": 1.0}],
            "bin_edges": [-2.0, 0.0, 2.0]}
})json";

}  // namespace

TEST_CASE("config parsing") {
    const ExperimentConfig cfg = parse_config(kConfig81);
    CHECK(cfg.seed == 7);
    CHECK(cfg.mechanism.beta_const() == doctest::Approx(1.0));
    CHECK(cfg.motion.kind == MotionKind::InwardOu);
    CHECK(cfg.simulation.replicas == 64);
    CHECK(cfg.tests.functions.size() == 2);
    CHECK(cfg.tests.functions[1].name() == "box1");
    const SpectralData s = cfg.spectral();
    CHECK(s.lambda1 == doctest::Approx(-1.0));
    CHECK(s.w == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("config merges a tabulated jump density into the mechanism") {
    const ExperimentConfig cfg = parse_config(R"json({
      "mechanism": {"beta": 1.0, "alpha": 0.5,
                    "jump_atoms": [[2.0, 0.25]],
                    "jump_density_table": {"y": [0.5, 1.0, 1.5], "density": [0.4, 0.4, 0.4]}}
    })json");
    const JumpMeasure& pi = cfg.mechanism.jumps();
    CHECK(pi.atoms().size() == 4);
    // Trapezoid weights on {0.5, 1.0, 1.5} with flat density 0.4 carry total
    // mass 0.4 * 1.0 plus the explicit atom.
    CHECK(pi.total_mass() == doctest::Approx(0.4 + 0.25));
    CHECK(cfg.mechanism.psi0(0.0) == doctest::Approx(0.0));
    CHECK(cfg.mechanism.psi0(1.0) > 0.0);
}

TEST_CASE("config rejects unknown keys with a path diagnostic") {
    try {
        parse_config(R"({"mechanism": {"beta": 1.0, "alpha": 1.0, "gamma": 2.0}})");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("config.mechanism.gamma") != std::string::npos);
    }
}

TEST_CASE("config validates ranges") {
    CHECK_THROWS_AS(parse_config(R"({"simulation": {"T": -1.0}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"simulation": {"epsilon": 0.0}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"simulation": {"record_times": [9.0]}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"motion": {"kind": "levy"}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"mechanism": {"beta": 1.0, "alpha": 1.0,
                                     "jump_atoms": [[-1.0, 1.0]]}})"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config("not json"), ConfigError);
}

TEST_CASE("number formatting is byte-stable shortest round trip") {
    CHECK(format_number(1.0) == "1");
    CHECK(format_number(0.5) == "0.5");
    CHECK(format_number(-3.25) == "-3.25");
    const double v = 0.1 + 0.2;
    CHECK(std::stod(format_number(v)) == v);
}

TEST_CASE("parallel replicas fill every slot once, any worker count") {
    for (int workers : {1, 3, 7}) {
        std::vector<int> hits(257, 0);
        parallel_replicas(hits.size(), workers, [&](std::size_t i) { hits[i] += 1; });
        CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    }
}

TEST_CASE("experiment outputs are deterministic and worker-count independent") {
    const ExperimentConfig cfg = parse_config(kConfig81);
    const ExperimentOutput a = run_skeleton_experiment(cfg, 1);
    const ExperimentOutput b = run_skeleton_experiment(cfg, 4);
    CHECK(a.table.per_replica_csv() == b.table.per_replica_csv());
    CHECK(a.table.aggregate_csv() == b.table.aggregate_csv());

    const ExperimentOutput c = run_super_experiment(cfg, 1);
    const ExperimentOutput d = run_super_experiment(cfg, 3);
    CHECK(c.table.per_replica_csv() == d.table.per_replica_csv());

    ExperimentConfig small = cfg;
    small.simulation.replicas = 24;
    CHECK(run_dress_experiment(small, 1).table.per_replica_csv() ==
          run_dress_experiment(small, 3).table.per_replica_csv());
    CHECK(run_spine_experiment(small, 1).table.per_replica_csv() ==
          run_spine_experiment(small, 4).table.per_replica_csv());

    // Changing the seed changes the bytes.
    ExperimentConfig other = cfg;
    other.seed = 8;
    CHECK(run_skeleton_experiment(other, 1).table.per_replica_csv() !=
          a.table.per_replica_csv());
}

TEST_CASE("replicas = 1 aggregate equals the single report") {
    ExperimentConfig cfg = parse_config(kConfig81);
    cfg.simulation.replicas = 1;
    const ExperimentOutput out = run_super_experiment(cfg, 1);
    for (std::size_t ti = 0; ti < cfg.simulation.record_times.size(); ++ti) {
        for (std::size_t c = 0; c < out.table.value_columns.size(); ++c) {
            const Summary s = summarize(out.table.column(ti, c));
            CHECK(s.mean == doctest::Approx(out.table.values[0][ti][c]));
            CHECK(s.se == 0.0);
        }
    }
}

TEST_CASE("merge order independence of aggregates") {
    // Aggregation runs over replica-indexed slots; permuting the fill order
    // (different worker counts) must not change a single byte. Covered above
    // for workers in {1, 3, 4}; here permute explicitly.
    const ExperimentConfig cfg = parse_config(kConfig81);
    ExperimentOutput out = run_skeleton_experiment(cfg, 1);
    ReplicaTable shuffled = out.table;
    // Simulate out-of-order arrival by rebuilding from a permutation.
    std::vector<std::size_t> order(shuffled.values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::reverse(order.begin(), order.end());
    ReplicaTable rebuilt;
    rebuilt.value_columns = shuffled.value_columns;
    rebuilt.record_times = shuffled.record_times;
    rebuilt.values.resize(shuffled.values.size());
    for (std::size_t i : order) {
        rebuilt.values[i] = shuffled.values[i];
    }
    CHECK(rebuilt.aggregate_csv() == out.table.aggregate_csv());
}
