#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>

#include "voxseek/error.hpp"

namespace voxseek::voxel {

using Index3 = std::array<int, 3>;

/// Axis-aligned box over grid unit indices; `hi` is exclusive. Every side is
/// at least 2 units long.
struct EyeWindow {
    Index3 lo{0, 0, 0};
    Index3 hi{2, 2, 2};

    int side(int axis) const { return hi[static_cast<size_t>(axis)] - lo[static_cast<size_t>(axis)]; }

    long long volume() const {
        return static_cast<long long>(side(0)) * side(1) * side(2);
    }

    bool contains(int ix, int iy, int iz) const {
        return ix >= lo[0] && ix < hi[0] && iy >= lo[1] && iy < hi[1] && iz >= lo[2] && iz < hi[2];
    }

    bool valid_within(const Index3& dims) const {
        for (int a = 0; a < 3; ++a) {
            if (lo[static_cast<size_t>(a)] < 0) return false;
            if (hi[static_cast<size_t>(a)] > dims[static_cast<size_t>(a)]) return false;
            if (side(a) < 2) return false;
        }
        return true;
    }

    /// Centered window spanning half the grid extent per axis (minimum 2).
    static EyeWindow centered_half(const Index3& dims) {
        EyeWindow w;
        for (size_t a = 0; a < 3; ++a) {
            int half = std::max(2, dims[a] / 2);
            half = std::min(half, dims[a]);
            int lo = (dims[a] - half) / 2;
            w.lo[a] = lo;
            w.hi[a] = lo + half;
        }
        return w;
    }

    bool operator==(const EyeWindow& o) const = default;
};

inline std::string to_string(const EyeWindow& w) {
    return "[(" + std::to_string(w.lo[0]) + "," + std::to_string(w.lo[1]) + "," + std::to_string(w.lo[2]) +
           "),(" + std::to_string(w.hi[0]) + "," + std::to_string(w.hi[1]) + "," + std::to_string(w.hi[2]) + "))";
}

/// Intersection-over-union of two integer boxes, in whole units.
inline double box_iou(const EyeWindow& a, const EyeWindow& b) {
    long long inter = 1;
    for (int axis = 0; axis < 3; ++axis) {
        int lo = std::max(a.lo[static_cast<size_t>(axis)], b.lo[static_cast<size_t>(axis)]);
        int hi = std::min(a.hi[static_cast<size_t>(axis)], b.hi[static_cast<size_t>(axis)]);
        if (hi <= lo) return 0.0;
        inter *= hi - lo;
    }
    long long uni = a.volume() + b.volume() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

/// 64-bit key identifying a window state (size and position), usable as a
/// hash-map key for reward caching and winner replay.
struct WindowKey {
    Index3 lo, hi;

    bool operator==(const WindowKey& o) const = default;
};

inline WindowKey key_of(const EyeWindow& w) { return {w.lo, w.hi}; }

struct WindowKeyHash {
    size_t operator()(const WindowKey& k) const {
        uint64_t h = 0xcbf29ce484222325ull;
        auto mix = [&h](int v) {
            h ^= static_cast<uint64_t>(static_cast<uint32_t>(v));
            h *= 0x100000001b3ull;
        };
        for (int v : k.lo) mix(v);
        for (int v : k.hi) mix(v);
        return static_cast<size_t>(h);
    }
};

} // namespace voxseek::voxel
