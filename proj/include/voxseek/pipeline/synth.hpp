#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "voxseek/error.hpp"
#include "voxseek/num/rng.hpp"
#include "voxseek/voxel/point_cloud.hpp"

namespace voxseek::pipeline {

struct SurfaceClass {
    int class_id = 0;
    int r = 200, g = 200, b = 200;
};

struct ObjectSpec {
    int class_id = 0;
    double min_size[3] = {0.5, 0.5, 0.5}; // meters per axis
    double max_size[3] = {1.0, 1.0, 1.0};
    int r = 128, g = 128, b = 128;
    int count = 1;
};

/// Room description for the synthetic generator: structural slabs (floor,
/// ceiling, four walls) plus non-overlapping axis-aligned cuboid objects
/// resting on the floor, all sampled on surfaces at a fixed density.
struct SceneSpec {
    double width = 4.0, depth = 4.0, height = 2.5; // meters
    double density = 400.0;                        // points per square meter
    double color_noise = 8.0;                      // stddev of per-point color jitter
    SurfaceClass ceiling{0, 245, 245, 245};
    SurfaceClass floor_surface{1, 150, 120, 90};
    SurfaceClass wall{2, 205, 205, 175};
    std::vector<ObjectSpec> objects;
    int max_placement_retries = 200;
};

namespace detail {

struct Box {
    double lo[3], hi[3];

    bool overlaps(const Box& o, double margin) const {
        for (int a = 0; a < 3; ++a)
            if (hi[a] + margin <= o.lo[a] || o.hi[a] + margin <= lo[a]) return false;
        return true;
    }
};

inline int jitter_color(int base, double noise, num::RngState& rng) {
    int v = base + static_cast<int>(std::lround(rng.normal() * noise));
    return std::min(255, std::max(0, v));
}

// Sample a planar axis-aligned rectangle. `axis` is the plane normal; `at` its
// coordinate; u/v span the other two axes in (x,y,z) order.
inline void sample_face(voxel::PointCloud& cloud, int axis, double at, double ulo, double uhi, double vlo,
                        double vhi, const SceneSpec& spec, int class_id, int r, int g, int b,
                        num::RngState& rng) {
    double area = (uhi - ulo) * (vhi - vlo);
    long long n = std::max(1ll, std::llround(area * spec.density));
    for (long long i = 0; i < n; ++i) {
        double u = rng.uniform(ulo, uhi);
        double v = rng.uniform(vlo, vhi);
        voxel::Point p;
        switch (axis) {
            case 0: p.x = at; p.y = u; p.z = v; break;
            case 1: p.x = u; p.y = at; p.z = v; break;
            default: p.x = u; p.y = v; p.z = at; break;
        }
        p.r = jitter_color(r, spec.color_noise, rng);
        p.g = jitter_color(g, spec.color_noise, rng);
        p.b = jitter_color(b, spec.color_noise, rng);
        p.label = class_id;
        cloud.points.push_back(p);
    }
}

} // namespace detail

/// Fully labeled synthetic room, deterministic per seed. Objects are placed
/// without overlap (bounded retries) and sampled on five faces (no bottom).
inline voxel::PointCloud generate_synthetic_scene(const SceneSpec& spec, uint64_t seed) {
    if (spec.width <= 0 || spec.depth <= 0 || spec.height <= 0)
        throw InputError("generate_synthetic_scene: room dimensions must be positive");
    num::RngState rng(seed);
    voxel::PointCloud cloud;

    const double w = spec.width, d = spec.depth, h = spec.height;
    detail::sample_face(cloud, 2, 0.0, 0, w, 0, d, spec, spec.floor_surface.class_id, spec.floor_surface.r,
                        spec.floor_surface.g, spec.floor_surface.b, rng);
    detail::sample_face(cloud, 2, h, 0, w, 0, d, spec, spec.ceiling.class_id, spec.ceiling.r, spec.ceiling.g,
                        spec.ceiling.b, rng);
    for (double x : {0.0, w})
        detail::sample_face(cloud, 0, x, 0, d, 0, h, spec, spec.wall.class_id, spec.wall.r, spec.wall.g,
                            spec.wall.b, rng);
    for (double y : {0.0, d})
        detail::sample_face(cloud, 1, y, 0, w, 0, h, spec, spec.wall.class_id, spec.wall.r, spec.wall.g,
                            spec.wall.b, rng);

    std::vector<detail::Box> placed;
    for (const ObjectSpec& obj : spec.objects) {
        for (int inst = 0; inst < obj.count; ++inst) {
            detail::Box box{};
            bool ok = false;
            for (int attempt = 0; attempt < spec.max_placement_retries && !ok; ++attempt) {
                double size[3];
                for (int a = 0; a < 3; ++a) size[a] = rng.uniform(obj.min_size[a], obj.max_size[a]);
                if (size[0] >= w - 0.4 || size[1] >= d - 0.4 || size[2] >= h - 0.2) continue;
                box.lo[0] = rng.uniform(0.2, w - size[0] - 0.2);
                box.lo[1] = rng.uniform(0.2, d - size[1] - 0.2);
                box.lo[2] = 0.0; // resting on the floor
                for (int a = 0; a < 3; ++a) box.hi[a] = box.lo[a] + size[a];
                ok = true;
                for (const auto& other : placed)
                    if (box.overlaps(other, 0.15)) {
                        ok = false;
                        break;
                    }
            }
            if (!ok)
                throw GenerationError("generate_synthetic_scene: cannot place object of class " +
                                      std::to_string(obj.class_id) + " without overlap");
            placed.push_back(box);
            // five faces: top plus four sides (the bottom rests on the floor)
            detail::sample_face(cloud, 2, box.hi[2], box.lo[0], box.hi[0], box.lo[1], box.hi[1], spec,
                                obj.class_id, obj.r, obj.g, obj.b, rng);
            detail::sample_face(cloud, 0, box.lo[0], box.lo[1], box.hi[1], box.lo[2], box.hi[2], spec,
                                obj.class_id, obj.r, obj.g, obj.b, rng);
            detail::sample_face(cloud, 0, box.hi[0], box.lo[1], box.hi[1], box.lo[2], box.hi[2], spec,
                                obj.class_id, obj.r, obj.g, obj.b, rng);
            detail::sample_face(cloud, 1, box.lo[1], box.lo[0], box.hi[0], box.lo[2], box.hi[2], spec,
                                obj.class_id, obj.r, obj.g, obj.b, rng);
            detail::sample_face(cloud, 1, box.hi[1], box.lo[0], box.hi[0], box.lo[2], box.hi[2], spec,
                                obj.class_id, obj.r, obj.g, obj.b, rng);
        }
    }
    return cloud;
}

} // namespace voxseek::pipeline
