#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "voxseek/error.hpp"
#include "voxseek/num/tensor.hpp"
#include "voxseek/voxel/point_cloud.hpp"
#include "voxseek/voxel/window.hpp"

namespace voxseek::voxel {

constexpr long long kDefaultUnitBudget = 1ll << 27;

struct GridUnit {
    int count = 0;
    float r = 0, g = 0, b = 0; // mean color of contained points

    bool occupied() const { return count > 0; }
};

/// Dense 3D lattice of attributed units derived from a point cloud. Units are
/// stored x-fastest. Treat a grid as immutable once built; mutation is only
/// for a single owner masking out parsed units.
class OccupancyGrid {
public:
    OccupancyGrid(Index3 dims, double unit_size, std::array<double, 3> origin)
        : dims_(dims), unit_size_(unit_size), origin_(origin) {
        long long n = static_cast<long long>(dims[0]) * dims[1] * dims[2];
        if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1) throw ContractError("grid dims must be positive");
        units_.assign(static_cast<size_t>(n), GridUnit{});
    }

    const Index3& dims() const { return dims_; }
    double unit_size() const { return unit_size_; }
    const std::array<double, 3>& origin() const { return origin_; }
    long long unit_count() const { return static_cast<long long>(units_.size()); }

    size_t index(int ix, int iy, int iz) const {
        return static_cast<size_t>(ix) + static_cast<size_t>(dims_[0]) * (static_cast<size_t>(iy) + static_cast<size_t>(dims_[1]) * static_cast<size_t>(iz));
    }

    const GridUnit& at(int ix, int iy, int iz) const { return units_[index(ix, iy, iz)]; }
    GridUnit& at(int ix, int iy, int iz) { return units_[index(ix, iy, iz)]; }

    const std::vector<GridUnit>& units() const { return units_; }

    /// Unit index of a coordinate: floor((coord-origin)/unit_size), boundary
    /// points clamped into the last unit.
    Index3 unit_of(double x, double y, double z) const {
        Index3 idx;
        const double c[3] = {x, y, z};
        for (size_t a = 0; a < 3; ++a) {
            int i = static_cast<int>(std::floor((c[a] - origin_[a]) / unit_size_));
            idx[a] = std::min(std::max(i, 0), dims_[a] - 1);
        }
        return idx;
    }

    long long occupied_count() const {
        long long n = 0;
        for (const GridUnit& u : units_)
            if (u.occupied()) ++n;
        return n;
    }

    long long total_point_count() const {
        long long n = 0;
        for (const GridUnit& u : units_) n += u.count;
        return n;
    }

    void clear_unit(size_t i) { units_[i] = GridUnit{}; }

private:
    Index3 dims_;
    double unit_size_;
    std::array<double, 3> origin_;
    std::vector<GridUnit> units_;
};

/// Convert a point cloud to an attributed occupancy grid spanning its
/// axis-aligned bounding box.
inline OccupancyGrid voxelize(const PointCloud& cloud, double unit_size,
                              long long unit_budget = kDefaultUnitBudget) {
    if (cloud.empty()) throw InputError("voxelize: empty point cloud");
    if (!(unit_size > 0)) throw InputError("voxelize: unit_size must be positive");

    double mn[3], mx[3];
    for (int a = 0; a < 3; ++a) {
        mn[a] = std::numeric_limits<double>::infinity();
        mx[a] = -std::numeric_limits<double>::infinity();
    }
    for (const Point& p : cloud.points) {
        const double c[3] = {p.x, p.y, p.z};
        for (int a = 0; a < 3; ++a) {
            mn[a] = std::min(mn[a], c[a]);
            mx[a] = std::max(mx[a], c[a]);
        }
    }

    Index3 dims;
    double approx = 1;
    for (int a = 0; a < 3; ++a) {
        double n = std::floor((mx[a] - mn[a]) / unit_size) + 1;
        approx *= std::max(n, 1.0);
    }
    if (approx > static_cast<double>(unit_budget))
        throw CapacityError("voxelize: grid would need about " + std::to_string(static_cast<long long>(approx)) +
                            " units, budget is " + std::to_string(unit_budget));
    for (size_t a = 0; a < 3; ++a)
        dims[a] = std::max(1, static_cast<int>(std::floor((mx[a] - mn[a]) / unit_size)) + 1);

    OccupancyGrid grid(dims, unit_size, {mn[0], mn[1], mn[2]});
    // accumulate color sums, then divide
    std::vector<double> rs(static_cast<size_t>(grid.unit_count()), 0.0), gs(rs.size(), 0.0), bs(rs.size(), 0.0);
    for (const Point& p : cloud.points) {
        Index3 i = grid.unit_of(p.x, p.y, p.z);
        size_t u = grid.index(i[0], i[1], i[2]);
        GridUnit& unit = grid.at(i[0], i[1], i[2]);
        ++unit.count;
        rs[u] += p.r;
        gs[u] += p.g;
        bs[u] += p.b;
    }
    for (int iz = 0; iz < dims[2]; ++iz)
        for (int iy = 0; iy < dims[1]; ++iy)
            for (int ix = 0; ix < dims[0]; ++ix) {
                GridUnit& u = grid.at(ix, iy, iz);
                if (u.count > 0) {
                    size_t i = grid.index(ix, iy, iz);
                    u.r = static_cast<float>(rs[i] / u.count);
                    u.g = static_cast<float>(gs[i] / u.count);
                    u.b = static_cast<float>(bs[i] / u.count);
                }
            }
    return grid;
}

/// Majority ground-truth label per unit (kNoLabel where empty or unlabeled).
inline std::vector<int> unit_majority_labels(const OccupancyGrid& grid, const PointCloud& cloud) {
    std::vector<std::map<int, int>> votes(static_cast<size_t>(grid.unit_count()));
    for (const Point& p : cloud.points) {
        if (p.label == kNoLabel) continue;
        Index3 i = grid.unit_of(p.x, p.y, p.z);
        ++votes[grid.index(i[0], i[1], i[2])][p.label];
    }
    std::vector<int> labels(static_cast<size_t>(grid.unit_count()), kNoLabel);
    for (size_t u = 0; u < votes.size(); ++u) {
        int best = kNoLabel, best_n = 0;
        for (auto& [lab, n] : votes[u])
            if (n > best_n) {
                best = lab;
                best_n = n;
            }
        labels[u] = best;
    }
    return labels;
}

/// Copy the units inside a window into a standalone sub-grid.
inline OccupancyGrid extract_window(const OccupancyGrid& grid, const EyeWindow& w) {
    if (!w.valid_within(grid.dims()))
        throw BoundsError("extract_window: window " + to_string(w) + " outside grid");
    Index3 dims{w.side(0), w.side(1), w.side(2)};
    std::array<double, 3> origin;
    for (size_t a = 0; a < 3; ++a) origin[a] = grid.origin()[a] + w.lo[a] * grid.unit_size();
    OccupancyGrid sub(dims, grid.unit_size(), origin);
    for (int iz = 0; iz < dims[2]; ++iz)
        for (int iy = 0; iy < dims[1]; ++iy)
            for (int ix = 0; ix < dims[0]; ++ix)
                sub.at(ix, iy, iz) = grid.at(w.lo[0] + ix, w.lo[1] + iy, w.lo[2] + iz);
    return sub;
}

constexpr int kCnnInputSide = 32;
constexpr int kCnnInputChannels = 4; // occupancy + rgb scaled to [0,1]

/// Nearest-neighbor resampling of a sub-grid onto the fixed CNN input lattice.
inline num::Tensor resample_to_cnn_input(const OccupancyGrid& sub, int target = kCnnInputSide) {
    const Index3& d = sub.dims();
    if (d[0] < 2 || d[1] < 2 || d[2] < 2) throw ContractError("resample_to_cnn_input: sub-grid dims must be >= 2");
    num::Tensor out({kCnnInputChannels, target, target, target});
    const int spatial = target * target * target;
    for (int tz = 0; tz < target; ++tz) {
        int sz = tz * d[2] / target;
        for (int ty = 0; ty < target; ++ty) {
            int sy = ty * d[1] / target;
            for (int tx = 0; tx < target; ++tx) {
                int sx = tx * d[0] / target;
                const GridUnit& u = sub.at(sx, sy, sz);
                int cell = (tz * target + ty) * target + tx;
                if (u.occupied()) {
                    out[cell] = 1.0f;
                    out[spatial + cell] = u.r / 255.0f;
                    out[2 * spatial + cell] = u.g / 255.0f;
                    out[3 * spatial + cell] = u.b / 255.0f;
                }
            }
        }
    }
    return out;
}

} // namespace voxseek::voxel
