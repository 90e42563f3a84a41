#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "voxseek/error.hpp"
#include "voxseek/rewardnet/model.hpp"
#include "voxseek/voxel/grid.hpp"
#include "voxseek/voxel/point_cloud.hpp"

namespace voxseek::rescls {

enum class SequenceOrder { Morton, LexicographicZyx };

/// Interleave the low 21 bits of x,y,z (x in the least significant position).
inline uint64_t morton_code(uint32_t x, uint32_t y, uint32_t z) {
    uint64_t out = 0;
    for (int b = 0; b < 21; ++b) {
        out |= (static_cast<uint64_t>((x >> b) & 1u) << (3 * b)) |
               (static_cast<uint64_t>((y >> b) & 1u) << (3 * b + 1)) |
               (static_cast<uint64_t>((z >> b) & 1u) << (3 * b + 2));
    }
    return out;
}

/// A canonically ordered run of per-point input vectors
/// [x,y,z, r,g,b scaled to [0,1], f1,f2,f3].
struct Sequence {
    std::vector<int> order;    // position in the source point vector, per step
    std::vector<float> inputs; // length() * input_dim, row-major
    int input_dim = 0;

    int length() const { return static_cast<int>(order.size()); }

    const float* row(int i) const { return inputs.data() + static_cast<size_t>(i) * input_dim; }
};

/// Order points deterministically by the Morton code of their voxel indices
/// (ties by raw coordinates, then color) and attach the window's shared CNN
/// feature vector to every point.
inline Sequence build_point_sequence(const std::vector<voxel::Point>& points, const voxel::OccupancyGrid& grid,
                                     const rewardnet::CnnFeatures& features,
                                     SequenceOrder order = SequenceOrder::Morton) {
    if (points.empty()) throw InputError("build_point_sequence: empty point set");

    struct Keyed {
        uint64_t key;
        int index;
    };
    std::vector<Keyed> keyed;
    keyed.reserve(points.size());
    for (size_t i = 0; i < points.size(); ++i) {
        const voxel::Point& p = points[i];
        voxel::Index3 u = grid.unit_of(p.x, p.y, p.z);
        uint64_t key;
        if (order == SequenceOrder::Morton) {
            key = morton_code(static_cast<uint32_t>(u[0]), static_cast<uint32_t>(u[1]), static_cast<uint32_t>(u[2]));
        } else {
            key = (static_cast<uint64_t>(static_cast<uint32_t>(u[2])) << 42) |
                  (static_cast<uint64_t>(static_cast<uint32_t>(u[1])) << 21) |
                  static_cast<uint64_t>(static_cast<uint32_t>(u[0]));
        }
        keyed.push_back({key, static_cast<int>(i)});
    }
    std::sort(keyed.begin(), keyed.end(), [&points](const Keyed& a, const Keyed& b) {
        if (a.key != b.key) return a.key < b.key;
        const voxel::Point& pa = points[static_cast<size_t>(a.index)];
        const voxel::Point& pb = points[static_cast<size_t>(b.index)];
        if (pa.x != pb.x) return pa.x < pb.x;
        if (pa.y != pb.y) return pa.y < pb.y;
        if (pa.z != pb.z) return pa.z < pb.z;
        if (pa.r != pb.r) return pa.r < pb.r;
        if (pa.g != pb.g) return pa.g < pb.g;
        return pa.b < pb.b;
    });

    std::vector<float> feat = features.concatenated();
    Sequence seq;
    seq.input_dim = 6 + static_cast<int>(feat.size());
    seq.order.reserve(points.size());
    seq.inputs.reserve(points.size() * static_cast<size_t>(seq.input_dim));
    for (const Keyed& k : keyed) {
        const voxel::Point& p = points[static_cast<size_t>(k.index)];
        seq.order.push_back(k.index);
        seq.inputs.push_back(static_cast<float>(p.x));
        seq.inputs.push_back(static_cast<float>(p.y));
        seq.inputs.push_back(static_cast<float>(p.z));
        seq.inputs.push_back(static_cast<float>(p.r) / 255.0f);
        seq.inputs.push_back(static_cast<float>(p.g) / 255.0f);
        seq.inputs.push_back(static_cast<float>(p.b) / 255.0f);
        seq.inputs.insert(seq.inputs.end(), feat.begin(), feat.end());
    }
    return seq;
}

} // namespace voxseek::rescls
