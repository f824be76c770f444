#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace superbranch {

// Counter-based PRNG (Philox 4x32-10, Salmon et al. 2011).
//
// A generator is addressed by (seed, stream); draws within a stream walk a
// 64-bit block counter. Streams with distinct ids never share output blocks,
// so replica- and module-level stream separation is stable under refactors:
// adding draws to one stream cannot perturb any other stream.
class Rng {
  public:
    Rng() : Rng(0, 0) {}

    Rng(std::uint64_t seed, std::uint64_t stream)
        : key0_(static_cast<std::uint32_t>(seed)),
          key1_(static_cast<std::uint32_t>(seed >> 32)),
          stream_lo_(static_cast<std::uint32_t>(stream)),
          stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

    std::uint32_t next_u32() {
        if (index_ == 4) {
            generate_block();
        }
        return block_[index_++];
    }

    std::uint64_t next_u64() {
        const std::uint64_t lo = next_u32();
        const std::uint64_t hi = next_u32();
        return lo | (hi << 32);
    }

    // Uniform on the open interval (0,1).
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925287 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double exponential(double rate) {
        if (!(rate > 0.0)) {
            throw std::invalid_argument("Rng::exponential: rate must be positive");
        }
        return -std::log(uniform()) / rate;
    }

    // Counts unit-exponential spacings; O(mean), intended for moderate means.
    std::uint64_t poisson(double mean) {
        if (mean < 0.0 || !std::isfinite(mean)) {
            throw std::invalid_argument("Rng::poisson: mean must be finite and nonnegative");
        }
        if (mean > 1e6) {
            throw std::invalid_argument("Rng::poisson: mean too large for spacing sampler");
        }
        std::uint64_t k = 0;
        double acc = -std::log(uniform());
        while (acc < mean) {
            ++k;
            acc += -std::log(uniform());
        }
        return k;
    }

  private:
    void generate_block() {
        std::uint32_t c0 = static_cast<std::uint32_t>(counter_);
        std::uint32_t c1 = static_cast<std::uint32_t>(counter_ >> 32);
        std::uint32_t c2 = stream_lo_;
        std::uint32_t c3 = stream_hi_;
        std::uint32_t k0 = key0_;
        std::uint32_t k1 = key1_;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = 0xD2511F53ULL * c0;
            const std::uint64_t p1 = 0xCD9E8D57ULL * c2;
            const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            const std::uint32_t n0 = hi1 ^ c1 ^ k0;
            const std::uint32_t n1 = lo1;
            const std::uint32_t n2 = hi0 ^ c3 ^ k1;
            const std::uint32_t n3 = lo0;
            c0 = n0;
            c1 = n1;
            c2 = n2;
            c3 = n3;
            k0 += 0x9E3779B9U;
            k1 += 0xBB67AE85U;
        }
        block_[0] = c0;
        block_[1] = c1;
        block_[2] = c2;
        block_[3] = c3;
        ++counter_;
        index_ = 0;
    }

    std::uint32_t key0_;
    std::uint32_t key1_;
    std::uint32_t stream_lo_;
    std::uint32_t stream_hi_;
    std::uint64_t counter_ = 0;
    std::uint32_t block_[4] = {0, 0, 0, 0};
    int index_ = 4;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Stream id layout: replica (24 bits) | module tag (8 bits) | entity (32 bits).
// Entities are per-replica objects such as particles or immigrant lineages.
namespace stream_tag {
inline constexpr std::uint32_t kCbPath = 1;
inline constexpr std::uint32_t kMotionCheck = 2;
inline constexpr std::uint32_t kInit = 3;
inline constexpr std::uint32_t kTreeLife = 4;
inline constexpr std::uint32_t kTreeMotion = 5;
inline constexpr std::uint32_t kTreeMarks = 6;
inline constexpr std::uint32_t kAtomLife = 7;
inline constexpr std::uint32_t kAtomMotion = 8;
inline constexpr std::uint32_t kSpineMotion = 9;
inline constexpr std::uint32_t kSpineEvents = 10;
inline constexpr std::uint32_t kBootstrap = 11;
}  // namespace stream_tag

inline constexpr std::uint64_t kMaxReplicas = 1ULL << 24;

inline std::uint64_t stream_id(std::uint64_t replica, std::uint32_t tag, std::uint32_t entity = 0) {
    return (replica << 40) | (static_cast<std::uint64_t>(tag & 0xFFU) << 32) | entity;
}

inline Rng make_stream(std::uint64_t seed, std::uint64_t replica, std::uint32_t tag,
                       std::uint32_t entity = 0) {
    return Rng(seed, stream_id(replica, tag, entity));
}

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Fresh 64-bit seed for a nested simulation keyed by up to three indices;
// the child owns its whole stream space under the derived seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
    std::uint64_t h = mix64(seed ^ 0xA3EC4E9F00C1D147ULL);
    h = mix64(h ^ a);
    h = mix64(h ^ b);
    return mix64(h ^ c);
}

}  // namespace superbranch
