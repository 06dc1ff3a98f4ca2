#pragma once

#include <cmath>
#include <cstdint>

namespace finflow {

// splitmix64 based generator. std::mt19937 distributions are
// implementation-defined, so reproducibility across toolchains requires
// owning both the generator and the transforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1) with 53 bits
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int uniform_int(int lo, int hi_inclusive) {
        return lo + int(next_u64() % std::uint64_t(hi_inclusive - lo + 1));
    }

    // Box-Muller; one value per call, deterministic call sequence
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    // derive an independent stream (for per-entry / per-episode rngs)
    Rng fork(std::uint64_t salt) {
        Rng r(next_u64() ^ (salt * 0x9E3779B97F4A7C15ull + 0x165667B19E3779F9ull));
        return r;
    }

private:
    std::uint64_t state_;
};

} // namespace finflow
