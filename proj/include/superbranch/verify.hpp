#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace superbranch {

struct CheckResult {
    std::string preset;
    std::string name;
    double statistic = 0.0;    // the measured quantity the gate inspects
    double threshold = 0.0;    // gate boundary (meaning depends on the check)
    bool pass = false;
    std::string detail;
};

struct VerifyOutcome {
    std::vector<CheckResult> checks;

    bool all_pass() const {
        for (const CheckResult& c : checks) {
            if (!c.pass) {
                return false;
            }
        }
        return true;
    }
};

// Preset names: cb, skeleton-8.1, skeleton-8.2, super-moments, dressing,
// lln-8.1, all.
std::vector<std::string> verify_presets();

// Runs a verification preset. scale multiplies the replica budgets (>= 1 for
// the acceptance gates; smaller values give quick smoke runs). When out_dir
// is nonempty, writes <preset>_checks.csv plus any preset tables there.
VerifyOutcome run_verify(const std::string& preset, std::uint64_t seed, int workers,
                         double scale, const std::string& out_dir);

}  // namespace superbranch
