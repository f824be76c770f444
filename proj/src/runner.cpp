#include "superbranch/runner.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>

#include "superbranch/csv.hpp"
#include "superbranch/decompositions.hpp"
#include "superbranch/stats.hpp"
#include "superbranch/superfield.hpp"

namespace superbranch {

void parallel_replicas(std::size_t n, int workers, const std::function<void(std::size_t)>& body) {
    if (workers < 1) {
        workers = 1;
    }
    if (workers == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) {
                    return;
                }
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                    return;
                }
            }
        });
    }
    for (std::thread& t : pool) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

std::string ReplicaTable::per_replica_csv() const {
    std::vector<std::string> cols{"replica", "t"};
    cols.insert(cols.end(), value_columns.begin(), value_columns.end());
    CsvWriter csv(cols);
    for (std::size_t r = 0; r < values.size(); ++r) {
        for (std::size_t ti = 0; ti < record_times.size(); ++ti) {
            std::vector<double> row{static_cast<double>(r), record_times[ti]};
            row.insert(row.end(), values[r][ti].begin(), values[r][ti].end());
            csv.row(row);
        }
    }
    return csv.text();
}

std::string ReplicaTable::aggregate_csv() const {
    std::vector<std::string> cols{"t", "n"};
    for (const std::string& c : value_columns) {
        cols.push_back(c + "_n");
        cols.push_back(c + "_mean");
        cols.push_back(c + "_se");
    }
    CsvWriter csv(cols);
    for (std::size_t ti = 0; ti < record_times.size(); ++ti) {
        std::vector<double> row{record_times[ti], static_cast<double>(values.size())};
        for (std::size_t c = 0; c < value_columns.size(); ++c) {
            // Undefined entries (NaN, e.g. ratio statistics of an empty
            // population) are excluded; the per-column count says how many
            // replicas contributed.
            std::vector<double> defined;
            for (double v : column(ti, c)) {
                if (std::isfinite(v)) {
                    defined.push_back(v);
                }
            }
            const Summary s = summarize(defined);
            row.push_back(static_cast<double>(s.n));
            row.push_back(s.mean);
            row.push_back(s.se);
        }
        csv.row(row);
    }
    return csv.text();
}

std::vector<double> ReplicaTable::column(std::size_t record, std::size_t col) const {
    std::vector<double> out;
    out.reserve(values.size());
    for (const auto& rep : values) {
        out.push_back(rep[record][col]);
    }
    return out;
}

ExperimentOutput run_skeleton_experiment(const ExperimentConfig& cfg, int workers) {
    const auto start_time = std::chrono::steady_clock::now();
    const SpectralData spectral = cfg.spectral();
    const SkeletonLaw law = skeleton_law(cfg.mechanism, spectral.w, {});
    const MotionModel motion_w = w_transform(cfg.motion, cfg.mechanism, spectral.w);

    ExperimentOutput out;
    out.table.record_times = cfg.simulation.record_times;
    out.table.value_columns = {"count", "W"};
    for (const TestFunction& f : cfg.tests.functions) {
        out.table.value_columns.push_back("lln_" + f.name());
    }
    const std::size_t n = static_cast<std::size_t>(cfg.simulation.replicas);
    out.table.values.assign(n, {});
    std::atomic<std::size_t> truncations{0};

    parallel_replicas(n, workers, [&](std::size_t r) {
        Rng init_rng = make_stream(cfg.seed, r, stream_tag::kInit);
        const std::vector<double> init =
            init_poisson(cfg.initial_measure, Field(spectral.w), cfg.motion.dim, init_rng);
        SkeletonParams params;
        params.horizon = cfg.simulation.horizon;
        params.record_times = cfg.simulation.record_times;
        params.particle_cap = cfg.simulation.particle_cap;
        const SkeletonTree tree =
            simulate_skeleton(motion_w, SkeletonLawSpec::constant(law), init, params, cfg.seed, r);
        if (tree.truncated) {
            ++truncations;
        }
        auto& rows = out.table.values[r];
        rows.assign(cfg.simulation.record_times.size(), {});
        for (std::size_t ti = 0; ti < cfg.simulation.record_times.size(); ++ti) {
            const double t = cfg.simulation.record_times[ti];
            std::vector<double>& row = rows[ti];
            row.push_back(static_cast<double>(tree.snapshots[ti].size()));
            row.push_back(martingale_W(tree, t, spectral));
            for (const TestFunction& f : cfg.tests.functions) {
                const LlnStatistic s = lln_statistic(tree, f, t, spectral);
                row.push_back(s.defined ? s.value : std::nan(""));
            }
        }
    });
    out.truncation_events = truncations;
    out.elapsed_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - start_time)
                         .count();
    return out;
}

ExperimentOutput run_super_experiment(const ExperimentConfig& cfg, int workers) {
    const auto start_time = std::chrono::steady_clock::now();
    ExperimentOutput out;
    out.table.record_times = cfg.simulation.record_times;
    out.table.value_columns = {"count", "mass"};
    for (const TestFunction& f : cfg.tests.functions) {
        out.table.value_columns.push_back("f_" + f.name());
    }
    out.table.value_columns.push_back("extinct");
    const std::size_t n = static_cast<std::size_t>(cfg.simulation.replicas);
    out.table.values.assign(n, {});
    std::atomic<std::size_t> truncations{0};
    const std::vector<double> init =
        seed_atoms(cfg.initial_measure, cfg.simulation.epsilon, cfg.motion.dim);

    parallel_replicas(n, workers, [&](std::size_t r) {
        SuperParams params;
        params.epsilon = cfg.simulation.epsilon;
        params.horizon = cfg.simulation.horizon;
        params.record_times = cfg.simulation.record_times;
        params.atom_cap = cfg.simulation.atom_cap;
        const EnsemblePath path =
            simulate_superprocess(cfg.mechanism, cfg.motion, init, params, cfg.seed, r);
        if (path.truncated) {
            ++truncations;
        }
        auto& rows = out.table.values[r];
        rows.assign(cfg.simulation.record_times.size(), {});
        for (std::size_t ti = 0; ti < cfg.simulation.record_times.size(); ++ti) {
            std::vector<double>& row = rows[ti];
            row.push_back(static_cast<double>(path.count(ti)));
            row.push_back(path.total_mass(ti));
            for (const TestFunction& f : cfg.tests.functions) {
                row.push_back(ensemble_integral(path, ti, [&](std::span<const double> p) {
                    return f(p);
                }));
            }
            row.push_back(path.extinct_by_horizon() ? 1.0 : 0.0);
        }
    });
    out.truncation_events = truncations;
    out.elapsed_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - start_time)
                         .count();
    return out;
}

ExperimentOutput run_dress_experiment(const ExperimentConfig& cfg, int workers) {
    const auto start_time = std::chrono::steady_clock::now();
    const SpectralData spectral = cfg.spectral();
    ExperimentOutput out;
    out.table.record_times = cfg.simulation.record_times;
    out.table.value_columns = {"z_count", "w_skeleton", "xhat_mass", "xstar_mass", "w_hat"};
    for (const TestFunction& f : cfg.tests.functions) {
        out.table.value_columns.push_back("xhat_" + f.name());
    }
    const std::size_t nb = cfg.tests.bin_edges.empty() ? 0 : cfg.tests.bin_edges.size() - 1;
    for (std::size_t b = 0; b < nb; ++b) {
        out.table.value_columns.push_back("z_bin" + std::to_string(b));
        out.table.value_columns.push_back("xhat_bin" + std::to_string(b));
    }
    const std::size_t n = static_cast<std::size_t>(cfg.simulation.replicas);
    out.table.values.assign(n, {});
    std::atomic<std::size_t> truncations{0};

    DressOptions opts;
    opts.horizon = cfg.simulation.horizon;
    opts.record_times = cfg.simulation.record_times;
    opts.epsilon = cfg.simulation.epsilon;
    opts.atom_cap = cfg.simulation.atom_cap;
    opts.particle_cap = cfg.simulation.particle_cap;
    opts.fs = cfg.tests.functions;
    opts.bin_edges = cfg.tests.bin_edges;

    parallel_replicas(n, workers, [&](std::size_t r) {
        const DressRealization d = dress_replica(cfg.mechanism, spectral.w, cfg.motion, spectral,
                                                 cfg.initial_measure, opts, cfg.seed, r);
        if (d.truncated) {
            ++truncations;
        }
        auto& rows = out.table.values[r];
        rows.assign(cfg.simulation.record_times.size(), {});
        for (std::size_t ti = 0; ti < cfg.simulation.record_times.size(); ++ti) {
            std::vector<double>& row = rows[ti];
            row.push_back(d.z_count[ti]);
            row.push_back(d.w_skeleton[ti]);
            row.push_back(d.xhat_mass[ti]);
            row.push_back(d.xstar_mass[ti]);
            row.push_back(d.w_hat[ti]);
            for (std::size_t fi = 0; fi < cfg.tests.functions.size(); ++fi) {
                row.push_back(d.xhat_f[ti][fi]);
            }
            for (std::size_t b = 0; b < nb; ++b) {
                row.push_back(d.z_bin_count[ti][b]);
                row.push_back(d.xhat_bin_mass[ti][b]);
            }
        }
    });
    out.truncation_events = truncations;
    out.elapsed_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - start_time)
                         .count();
    return out;
}

ExperimentOutput run_spine_experiment(const ExperimentConfig& cfg, int workers) {
    const auto start_time = std::chrono::steady_clock::now();
    const SpectralData spectral = cfg.spectral();
    ExperimentOutput out;
    out.table.record_times = cfg.simulation.record_times;
    for (const TestFunction& f : cfg.tests.functions) {
        out.table.value_columns.push_back("gamma_" + f.name());
        out.table.value_columns.push_back("pred_" + f.name());
    }
    out.table.value_columns.push_back("w_mart");
    out.table.value_columns.push_back("n_dn");
    out.table.value_columns.push_back("n_dm");
    const std::size_t n = static_cast<std::size_t>(cfg.simulation.replicas);
    out.table.values.assign(n, {});

    SpineOptions opts;
    opts.horizon = cfg.simulation.horizon;
    opts.record_times = cfg.simulation.record_times;
    opts.epsilon = cfg.simulation.epsilon;
    opts.atom_cap = cfg.simulation.atom_cap;

    parallel_replicas(n, workers, [&](std::size_t r) {
        const SpineRealization s = spine_sample(cfg.mechanism, cfg.motion, spectral,
                                                cfg.initial_measure, cfg.tests.functions, opts,
                                                cfg.seed, r);
        auto& rows = out.table.values[r];
        rows.assign(cfg.simulation.record_times.size(), {});
        for (std::size_t ti = 0; ti < cfg.simulation.record_times.size(); ++ti) {
            std::vector<double>& row = rows[ti];
            for (std::size_t fi = 0; fi < cfg.tests.functions.size(); ++fi) {
                row.push_back(s.gamma[ti][fi]);
                row.push_back(s.predictor[ti][fi]);
            }
            row.push_back(s.w_mart[ti]);
            row.push_back(static_cast<double>(s.dn_times.size()));
            row.push_back(static_cast<double>(s.dm_times.size()));
        }
    });
    out.elapsed_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - start_time)
                         .count();
    return out;
}

}  // namespace superbranch
