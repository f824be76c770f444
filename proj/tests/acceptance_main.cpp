// Acceptance suite: runs every statistical acceptance criterion at its stated
// tolerance and prints one pass/fail line per criterion. Exit code 0 iff all
// criteria pass.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "superbranch/verify.hpp"

namespace {

struct Criterion {
    std::string name;
    bool pass = true;
    std::string detail;
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

bool directories_byte_identical(const std::filesystem::path& a, const std::filesystem::path& b,
                                std::string& detail) {
    std::vector<std::filesystem::path> files_a;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(a)) {
        if (entry.is_regular_file()) {
            files_a.push_back(std::filesystem::relative(entry.path(), a));
        }
    }
    std::sort(files_a.begin(), files_a.end());
    std::size_t compared = 0;
    for (const auto& rel : files_a) {
        const auto pb = b / rel;
        if (!std::filesystem::exists(pb)) {
            detail = "missing " + rel.string();
            return false;
        }
        if (slurp(a / rel) != slurp(pb)) {
            detail = "differs: " + rel.string();
            return false;
        }
        ++compared;
    }
    detail = std::to_string(compared) + " files identical";
    return compared > 0;
}

}  // namespace

int main() {
    using superbranch::CheckResult;
    using superbranch::VerifyOutcome;

    const std::uint64_t seed = 7;
    const int workers = 4;
    const double scale = 1.0;

    const std::filesystem::path work =
        std::filesystem::temp_directory_path() / "superbranch-acceptance";
    std::filesystem::remove_all(work);

    // Criteria map onto named checks of the verification presets.
    std::vector<std::pair<std::string, std::vector<std::string>>> criteria{
        {"1 cumulant ODE vs closed form, rel err < 1e-8", {"cb/cumulant-riccati"}},
        {"2 CB Euler extinction at T in {1,2,10} and ultimate",
         {"cb/cb-extinct-T1", "cb/cb-extinct-T2", "cb/cb-extinct-T10", "cb/cb-extinct-ultimate"}},
        {"3 skeleton many-to-one, Example 8.1",
         {"skeleton-8.1/many-to-one-one-t1", "skeleton-8.1/many-to-one-one-t2",
          "skeleton-8.1/many-to-one-gauss-t1", "skeleton-8.1/many-to-one-gauss-t2"}},
        {"4 skeleton martingale flatness at t in {1,2,4,8}",
         {"skeleton-8.1/martingale-flat-t1", "skeleton-8.1/martingale-flat-t2",
          "skeleton-8.1/martingale-flat-t4", "skeleton-8.1/martingale-flat-t8"}},
        {"5 LLN concentration, Examples 8.1 and 8.2",
         {"lln-8.1/lln-mean-t8", "lln-8.1/lln-concentration", "skeleton-8.2/lln-mean-t8",
          "skeleton-8.2/lln-concentration"}},
        {"6 superfield first and second moments",
         {"super-moments/first-moment-t0.5", "super-moments/first-moment-t1",
          "super-moments/first-moment-t2", "super-moments/variance-t0.5",
          "super-moments/variance-t1"}},
        {"7 w-estimation brackets z_psi",
         {"super-moments/estimate-w-T5", "super-moments/estimate-w-T10"}},
        {"8 dressing equality in law (two-sample KS at 1%)", {"dressing/dressing-ks-mass-t1"}},
        {"9 Poisson thinning dispersion CI contains 1",
         {"dressing/thinning-dispersion-t1", "dressing/thinning-dispersion-t2"}},
        {"10 spine conditional mean (sd2) z-test",
         {"dressing/sd2-conditional-mean-one", "dressing/sd2-conditional-mean-gauss"}},
        {"11 mixing rate within 15% of lambda_h", {"skeleton-8.1/mixing-rate"}},
    };

    std::printf("running verification presets (seed %llu)...\n",
                static_cast<unsigned long long>(seed));
    const VerifyOutcome outcome =
        superbranch::run_verify("all", seed, workers, scale, (work / "run1").string());

    std::map<std::string, const CheckResult*> by_key;
    for (const CheckResult& c : outcome.checks) {
        by_key[c.preset + "/" + c.name] = &c;
    }

    int failures = 0;
    for (const auto& [label, keys] : criteria) {
        bool pass = true;
        std::string detail;
        for (const std::string& key : keys) {
            const auto it = by_key.find(key);
            if (it == by_key.end()) {
                pass = false;
                detail += key + " MISSING; ";
                continue;
            }
            if (!it->second->pass) {
                pass = false;
            }
            detail += key.substr(key.find('/') + 1) + "(" + it->second->detail + "); ";
        }
        std::printf("[%s] criterion %s\n", pass ? "PASS" : "FAIL", label.c_str());
        if (!pass) {
            std::printf("        %s\n", detail.c_str());
            ++failures;
        }
    }

    // Criterion 12: determinism. A second full verification run with the same
    // seed must produce byte-identical aggregate outputs.
    {
        const VerifyOutcome second =
            superbranch::run_verify("all", seed, workers, scale, (work / "run2").string());
        (void)second;
        std::string detail;
        const bool pass = directories_byte_identical(work / "run1", work / "run2", detail);
        std::printf("[%s] criterion 12 determinism: %s\n", pass ? "PASS" : "FAIL",
                    detail.c_str());
        if (!pass) {
            ++failures;
        }
    }

    // Every remaining preset check (invariants attached to the presets) must
    // also hold.
    {
        int extra_failures = 0;
        for (const CheckResult& c : outcome.checks) {
            if (!c.pass) {
                std::printf("[FAIL] preset check %s/%s: %s\n", c.preset.c_str(), c.name.c_str(),
                            c.detail.c_str());
                ++extra_failures;
            }
        }
        std::printf("[%s] preset invariant checks (%zu checks)\n",
                    extra_failures == 0 ? "PASS" : "FAIL", outcome.checks.size());
        failures += extra_failures;
    }

    std::printf("acceptance: %s\n", failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES PRESENT");
    return failures == 0 ? 0 : 1;
}
