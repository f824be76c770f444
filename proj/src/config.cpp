#include "superbranch/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace superbranch {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw ConfigError(path + ": " + message);
}

void require_keys(const json& obj, const std::string& path,
                  const std::set<std::string>& allowed) {
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key())) {
            fail(path + "." + item.key(), "unknown key");
        }
    }
}

double get_number(const json& obj, const std::string& path, const std::string& key,
                  double fallback, bool required = false) {
    if (!obj.contains(key)) {
        if (required) {
            fail(path + "." + key, "missing required key");
        }
        return fallback;
    }
    if (!obj[key].is_number()) {
        fail(path + "." + key, "expected a number");
    }
    return obj[key].get<double>();
}

std::vector<double> get_number_list(const json& obj, const std::string& path,
                                    const std::string& key) {
    std::vector<double> out;
    if (!obj.contains(key)) {
        return out;
    }
    if (!obj[key].is_array()) {
        fail(path + "." + key, "expected an array of numbers");
    }
    std::size_t i = 0;
    for (const auto& v : obj[key]) {
        if (!v.is_number()) {
            fail(path + "." + key + "[" + std::to_string(i) + "]", "expected a number");
        }
        out.push_back(v.get<double>());
        ++i;
    }
    return out;
}

BranchingMechanism parse_mechanism(const json& block, const std::string& path) {
    require_keys(block, path, {"beta", "alpha", "jump_atoms", "jump_density_table"});
    const double beta = get_number(block, path, "beta", 0.0, /*required=*/true);
    const double alpha = get_number(block, path, "alpha", 0.0, /*required=*/true);
    if (alpha < 0.0) {
        fail(path + ".alpha", "must be nonnegative");
    }
    std::vector<JumpAtom> atoms;
    if (block.contains("jump_atoms")) {
        if (!block["jump_atoms"].is_array()) {
            fail(path + ".jump_atoms", "expected an array of [y, mass] pairs");
        }
        std::size_t i = 0;
        for (const auto& pair : block["jump_atoms"]) {
            const std::string p = path + ".jump_atoms[" + std::to_string(i) + "]";
            if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() ||
                !pair[1].is_number()) {
                fail(p, "expected [y, mass]");
            }
            const double y = pair[0].get<double>();
            const double m = pair[1].get<double>();
            if (!(y > 0.0)) {
                fail(p, "location must be strictly positive");
            }
            if (m < 0.0) {
                fail(p, "mass must be nonnegative");
            }
            atoms.push_back({y, m});
            ++i;
        }
    }
    JumpMeasure pi = JumpMeasure::from_atoms(std::move(atoms));
    if (block.contains("jump_density_table")) {
        const json& tbl = block["jump_density_table"];
        const std::string p = path + ".jump_density_table";
        require_keys(tbl, p, {"y", "density"});
        const std::vector<double> y = get_number_list(tbl, p, "y");
        const std::vector<double> rho = get_number_list(tbl, p, "density");
        if (y.size() != rho.size() || y.size() < 2) {
            fail(p, "y and density must have equal length >= 2");
        }
        std::vector<JumpAtom> merged = pi.atoms();
        // Tabulated values become trapezoid quadrature atoms.
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (!(y[i] > 0.0) || (i > 0 && y[i] <= y[i - 1])) {
                fail(p + ".y[" + std::to_string(i) + "]", "must be positive and increasing");
            }
            if (rho[i] < 0.0) {
                fail(p + ".density[" + std::to_string(i) + "]", "must be nonnegative");
            }
            double dy = 0.0;
            if (i > 0) {
                dy += 0.5 * (y[i] - y[i - 1]);
            }
            if (i + 1 < y.size()) {
                dy += 0.5 * (y[i + 1] - y[i]);
            }
            if (rho[i] * dy > 0.0) {
                merged.push_back({y[i], rho[i] * dy});
            }
        }
        pi = JumpMeasure::from_atoms(std::move(merged));
    }
    return BranchingMechanism::constant(beta, alpha, std::move(pi));
}

MotionModel parse_motion(const json& block, const std::string& path) {
    require_keys(block, path, {"kind", "c", "d"});
    if (!block.contains("kind") || !block["kind"].is_string()) {
        fail(path + ".kind", "expected \"inward_ou\" or \"outward_ou\"");
    }
    const std::string kind = block["kind"].get<std::string>();
    const double c = get_number(block, path, "c", 1.0);
    const int d = static_cast<int>(get_number(block, path, "d", 1.0));
    if (!(c > 0.0)) {
        fail(path + ".c", "must be positive");
    }
    if (d < 1 || d > 16) {
        fail(path + ".d", "must lie in [1, 16]");
    }
    if (kind == "inward_ou") {
        return inward_ou(c, d);
    }
    if (kind == "outward_ou") {
        return outward_ou(c, d);
    }
    fail(path + ".kind", "unknown motion kind '" + kind + "'");
}

TestFunction parse_function(const json& block, const std::string& path) {
    require_keys(block, path, {"name", "kind", "value", "a", "center", "half_width"});
    if (!block.contains("kind") || !block["kind"].is_string()) {
        fail(path + ".kind", "expected \"constant\", \"gaussian\" or \"box\"");
    }
    const std::string kind = block["kind"].get<std::string>();
    std::vector<double> center = get_number_list(block, path, "center");
    TestFunction f = TestFunction::constant(1.0);
    if (kind == "constant") {
        f = TestFunction::constant(get_number(block, path, "value", 1.0));
    } else if (kind == "gaussian") {
        f = TestFunction::gaussian(get_number(block, path, "a", 1.0), std::move(center));
    } else if (kind == "box") {
        f = TestFunction::box(std::move(center), get_number(block, path, "half_width", 1.0));
    } else {
        fail(path + ".kind", "unknown function kind '" + kind + "'");
    }
    if (block.contains("name")) {
        if (!block["name"].is_string()) {
            fail(path + ".name", "expected a string");
        }
        f.set_name(block["name"].get<std::string>());
    }
    return f;
}

}  // namespace

SpectralData ExperimentConfig::spectral() const {
    if (!spectral_example) {
        throw ConfigError("spectral: no example selected in config");
    }
    SpectralData s = spectral_for_example(*spectral_example, motion.c, motion.dim, mechanism);
    if (w_override) {
        s.w = *w_override;
    }
    return s;
}

ExperimentConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!root.is_object()) {
        throw ConfigError("config: top level must be an object");
    }
    require_keys(root, "config",
                 {"seed", "mechanism", "motion", "spectral", "initial_measure", "simulation",
                  "tests"});
    ExperimentConfig cfg;
    if (root.contains("seed")) {
        if (!root["seed"].is_number_unsigned()) {
            throw ConfigError("config.seed: expected a nonnegative integer");
        }
        cfg.seed = root["seed"].get<std::uint64_t>();
    }
    if (root.contains("mechanism")) {
        cfg.mechanism = parse_mechanism(root["mechanism"], "config.mechanism");
    }
    if (root.contains("motion")) {
        cfg.motion = parse_motion(root["motion"], "config.motion");
    }
    if (root.contains("spectral")) {
        const json& sp = root["spectral"];
        require_keys(sp, "config.spectral", {"example", "w"});
        if (sp.contains("example")) {
            if (!sp["example"].is_string()) {
                throw ConfigError("config.spectral.example: expected \"8.1\" or \"8.2\"");
            }
            const std::string ex = sp["example"].get<std::string>();
            if (ex == "8.1") {
                cfg.spectral_example = ExampleId::InwardOuQuadratic;
            } else if (ex == "8.2") {
                cfg.spectral_example = ExampleId::OutwardOuGaussian;
            } else {
                throw ConfigError("config.spectral.example: unknown example '" + ex + "'");
            }
        }
        if (sp.contains("w")) {
            const double w = get_number(sp, "config.spectral", "w", 0.0);
            if (!(w > 0.0)) {
                throw ConfigError("config.spectral.w: must be positive");
            }
            cfg.w_override = w;
        }
    }
    if (root.contains("initial_measure")) {
        if (!root["initial_measure"].is_array()) {
            throw ConfigError("config.initial_measure: expected an array");
        }
        std::size_t i = 0;
        for (const auto& entry : root["initial_measure"]) {
            const std::string p = "config.initial_measure[" + std::to_string(i) + "]";
            require_keys(entry, p, {"position", "mass"});
            WeightedAtom atom;
            atom.position = get_number_list(entry, p, "position");
            atom.mass = get_number(entry, p, "mass", 1.0);
            if (atom.position.empty()) {
                fail(p + ".position", "must be a nonempty coordinate list");
            }
            if (atom.mass < 0.0) {
                fail(p + ".mass", "must be nonnegative");
            }
            cfg.initial_measure.push_back(std::move(atom));
            ++i;
        }
    } else {
        WeightedAtom origin;
        origin.position.assign(static_cast<std::size_t>(cfg.motion.dim), 0.0);
        origin.mass = 1.0;
        cfg.initial_measure.push_back(origin);
    }
    if (root.contains("simulation")) {
        const json& sim = root["simulation"];
        require_keys(sim, "config.simulation",
                     {"T", "record_times", "epsilon", "replicas", "atom_cap", "particle_cap"});
        cfg.simulation.horizon = get_number(sim, "config.simulation", "T", 1.0);
        if (!(cfg.simulation.horizon > 0.0)) {
            throw ConfigError("config.simulation.T: must be positive");
        }
        cfg.simulation.record_times = get_number_list(sim, "config.simulation", "record_times");
        for (double t : cfg.simulation.record_times) {
            if (t < 0.0 || t > cfg.simulation.horizon) {
                throw ConfigError("config.simulation.record_times: must lie in [0, T]");
            }
        }
        cfg.simulation.epsilon = get_number(sim, "config.simulation", "epsilon", 0.05);
        if (!(cfg.simulation.epsilon > 0.0) || cfg.simulation.epsilon > 1.0) {
            throw ConfigError("config.simulation.epsilon: must lie in (0, 1]");
        }
        cfg.simulation.replicas =
            static_cast<int>(get_number(sim, "config.simulation", "replicas", 1000.0));
        if (cfg.simulation.replicas < 1 ||
            static_cast<std::uint64_t>(cfg.simulation.replicas) >= kMaxReplicas) {
            throw ConfigError("config.simulation.replicas: out of range");
        }
        cfg.simulation.atom_cap = static_cast<std::size_t>(
            get_number(sim, "config.simulation", "atom_cap", 1e7));
        cfg.simulation.particle_cap = static_cast<std::size_t>(
            get_number(sim, "config.simulation", "particle_cap", 1e7));
    }
    if (cfg.simulation.record_times.empty()) {
        cfg.simulation.record_times.push_back(cfg.simulation.horizon);
    }
    if (root.contains("tests")) {
        const json& tests = root["tests"];
        require_keys(tests, "config.tests", {"alpha", "functions", "bin_edges"});
        cfg.tests.significance = get_number(tests, "config.tests", "alpha", 0.01);
        if (!(cfg.tests.significance > 0.0) || cfg.tests.significance >= 0.5) {
            throw ConfigError("config.tests.alpha: must lie in (0, 0.5)");
        }
        if (tests.contains("functions")) {
            if (!tests["functions"].is_array()) {
                throw ConfigError("config.tests.functions: expected an array");
            }
            std::size_t i = 0;
            for (const auto& fblock : tests["functions"]) {
                cfg.tests.functions.push_back(
                    parse_function(fblock, "config.tests.functions[" + std::to_string(i) + "]"));
                ++i;
            }
        }
        cfg.tests.bin_edges = get_number_list(tests, "config.tests", "bin_edges");
        if (!cfg.tests.bin_edges.empty() &&
            (!std::is_sorted(cfg.tests.bin_edges.begin(), cfg.tests.bin_edges.end()) ||
             cfg.tests.bin_edges.size() < 2)) {
            throw ConfigError("config.tests.bin_edges: expected a sorted list of >= 2 edges");
        }
    }
    if (cfg.tests.functions.empty()) {
        TestFunction one = TestFunction::constant(1.0);
        one.set_name("one");
        cfg.tests.functions.push_back(one);
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config: cannot open '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

}  // namespace superbranch
