#pragma once

#include <cstdint>
#include <cmath>
#include <numbers>
#include <string_view>

namespace pel {

// splitmix64 finalizer. Used as the word mixer of the seed-derivation
// contract and to expand single seeds into generator state.
inline constexpr uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// FNV-1a 64-bit hash; scenario names and output files are identified by it.
inline constexpr uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline constexpr uint64_t fnv1a64(const void* data, size_t len) {
    uint64_t h = 0xcbf29ce484222325ull;
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

// Seed-derivation contract. The stream seed for sample i of task `task`
// in scenario `scenario` under a master seed is
//
//   mix(mix(mix(splitmix64(master), scenario), task), i)
//
// with mix(h, w) = splitmix64(h ^ (w + 0x9e3779b97f4a7c15)). Every stochastic
// operation derives its per-sample stream through this chain, so results are
// independent of worker count and batch partitioning. No global RNG exists.
inline constexpr uint64_t mix_word(uint64_t h, uint64_t w) {
    return splitmix64(h ^ (w + 0x9e3779b97f4a7c15ull));
}

inline constexpr uint64_t task_seed(uint64_t master, uint64_t scenario_id, uint64_t task_id) {
    return mix_word(mix_word(splitmix64(master), scenario_id), task_id);
}

inline constexpr uint64_t sample_stream(uint64_t task_seed_value, uint64_t sample_index) {
    return mix_word(task_seed_value, sample_index);
}

// Task ids of the derivation contract. Fixed constants, never reused across
// operations within one scenario run.
enum : uint64_t {
    kTaskSampleData = 1,   // draw X0
    kTaskDecode = 2,       // stochastic decode (cell-sampler)
    kTaskAddNoise = 3,     // forward noising
    kTaskSolver = 4,       // reverse SDE noise
    kTaskReference = 5,    // model draws used as the Frechet reference set
    kTaskProbeData = 6,    // select_sigma probe X0
    kTaskProbeDecode = 7,
    kTaskProbeNoise = 8,
    kTaskProbeSolver = 9,
    kTaskEvalData = 10,    // fresh evaluation set for sigma re-measurement
    kTaskEvalDecode = 11,
    kTaskEvalNoise = 12,
    kTaskEvalSolver = 13,
    kTaskDpsDecode = 14,   // decode of the constraint target inside dps_sde
};

// xoshiro256++ with splitmix64 state expansion. Deterministic across
// platforms; the standard library distributions are not, which would break
// the byte-identical output contract.
class Rng {
  public:
    explicit Rng(uint64_t seed) {
        s_[0] = splitmix64(seed);
        s_[1] = splitmix64(s_[0]);
        s_[2] = splitmix64(s_[1]);
        s_[3] = splitmix64(s_[2]);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0,1), 53-bit mantissa.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; pairs cached so consumption order is
    // well defined (2 uniforms per 2 normals).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // 1 - uniform() lies in (0,1], keeping the log argument positive.
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

  private:
    static constexpr uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace pel
