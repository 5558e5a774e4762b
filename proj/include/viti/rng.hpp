#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "viti/tensor.hpp"

namespace viti {

// All randomness in the project flows from one root seed split into named
// streams, so every artifact is reproducible from the run config alone.
// Uniform/normal draws are generated from raw engine words rather than
// std::*_distribution to keep byte-level determinism under our control.
class RngStream {
public:
    explicit RngStream(uint64_t seed) : eng_(seed) {}

    // [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // (0, 1]
    double uniform_pos() { return 1.0 - uniform(); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive bounds, rejection-sampled to avoid modulo bias
    int64_t uniform_int(int64_t lo, int64_t hi) {
        if (hi < lo)
            throw ContractError("uniform_int: empty range");
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        if (span == 0)
            return static_cast<int64_t>(eng_());  // full 64-bit range
        uint64_t threshold = (0ULL - span) % span;
        for (;;) {
            uint64_t r = eng_();
            if (r >= threshold)
                return lo + static_cast<int64_t>(r % span);
        }
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller with a cached spare
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform_pos();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    Tensor normal_tensor(std::vector<int64_t> shape, double mean = 0.0, double stddev = 1.0) {
        Tensor t(std::move(shape));
        for (double& v : t.data)
            v = mean + stddev * normal();
        return t;
    }

    Tensor uniform_tensor(std::vector<int64_t> shape, double lo, double hi) {
        Tensor t(std::move(shape));
        for (double& v : t.data)
            v = uniform(lo, hi);
        return t;
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

namespace detail {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<uint64_t>(static_cast<unsigned char>(c));
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

// Deterministic seed derivation: root seed -> named stream (-> numeric salts).
inline uint64_t derive_seed(uint64_t root, std::string_view name, uint64_t salt0 = 0, uint64_t salt1 = 0) {
    uint64_t h = detail::splitmix64(root ^ detail::fnv1a64(name));
    h = detail::splitmix64(h ^ salt0);
    h = detail::splitmix64(h ^ salt1);
    return h;
}

inline RngStream derive_stream(uint64_t root, std::string_view name, uint64_t salt0 = 0, uint64_t salt1 = 0) {
    return RngStream(derive_seed(root, name, salt0, salt1));
}

}  // namespace viti
