#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace voxseek::num {

/// Counter-based splitmix64 stream. Identical seed + identical call sequence
/// yields identical draws, independent of platform or standard library.
class RngState {
public:
    explicit RngState(uint64_t seed = 0) : seed_(seed) {}

    uint64_t seed() const { return seed_; }
    uint64_t position() const { return counter_; }

    uint64_t next_u64() {
        uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0,1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0,n). n must be positive.
    uint64_t uniform_int(uint64_t n) {
        return static_cast<uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    int uniform_int(int lo, int hi_inclusive) {
        return lo + static_cast<int>(uniform_int(static_cast<uint64_t>(hi_inclusive - lo + 1)));
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller, one value per call (no caching, so the
    /// draw count stays equal to the call count).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    template <class V>
    void shuffle(std::vector<V>& xs) {
        for (size_t i = xs.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(static_cast<uint64_t>(i)));
            std::swap(xs[i - 1], xs[j]);
        }
    }

    /// Derive an independent substream (e.g. one per training seed).
    RngState split(uint64_t stream) {
        RngState r(next_u64() ^ (stream * 0xD1342543DE82EF95ull));
        return r;
    }

private:
    uint64_t seed_;
    uint64_t counter_ = 0;
};

} // namespace voxseek::num
