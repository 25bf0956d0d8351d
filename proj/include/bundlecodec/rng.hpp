#pragma once

#include <cmath>
#include <cstdint>

namespace bundlecodec::diff {

// Counter-based splitmix64 stream. The same seed yields the same sequence on
// every platform (pure 64-bit integer arithmetic); fork() derives independent
// substreams for parallel work.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    static std::uint64_t mix64(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

    // Uniform on [2^-53, 1 - 2^-53]; endpoints excluded so log and log(-log)
    // stay finite downstream.
    double uniform() {
        double u = static_cast<double>(next_u64() >> 11) * 0x1p-53;
        return u < 0x1p-53 ? 0x1p-53 : u;
    }

    double uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller without caching: two uniforms per draw, second value
    // discarded, so the whole stream state is the single 64-bit counter.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    // Unit Gumbel(0,1): g = -ln(-ln u).
    double gumbel() { return -std::log(-std::log(uniform())); }

    // Index in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    Rng fork(std::uint64_t stream) const {
        return Rng(mix64(state_ ^ mix64(stream + 0x632be59bd9b4e019ULL)));
    }

    std::uint64_t state() const { return state_; }
    void set_state(std::uint64_t s) { state_ = s; }

private:
    std::uint64_t state_;
};

inline double gumbel_from_uniform(double u) { return -std::log(-std::log(u)); }

} // namespace bundlecodec::diff
