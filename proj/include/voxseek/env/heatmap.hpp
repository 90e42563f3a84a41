#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "voxseek/error.hpp"
#include "voxseek/voxel/window.hpp"

namespace voxseek::env {

/// Per-unit visit counts accumulated while the eye window roams a grid.
class VisitHeatmap {
public:
    explicit VisitHeatmap(voxel::Index3 dims) : dims_(dims) {
        counts_.assign(static_cast<size_t>(dims[0]) * dims[1] * dims[2], 0);
    }

    const voxel::Index3& dims() const { return dims_; }

    uint64_t at(int ix, int iy, int iz) const {
        return counts_[static_cast<size_t>(ix) +
                       static_cast<size_t>(dims_[0]) * (static_cast<size_t>(iy) + static_cast<size_t>(dims_[1]) * static_cast<size_t>(iz))];
    }

    void record_visit(const voxel::EyeWindow& w) {
        if (!w.valid_within(dims_)) throw BoundsError("record_visit: window outside heatmap dims");
        for (int iz = w.lo[2]; iz < w.hi[2]; ++iz)
            for (int iy = w.lo[1]; iy < w.hi[1]; ++iy) {
                size_t row = static_cast<size_t>(dims_[0]) * (static_cast<size_t>(iy) + static_cast<size_t>(dims_[1]) * static_cast<size_t>(iz));
                for (int ix = w.lo[0]; ix < w.hi[0]; ++ix) ++counts_[row + static_cast<size_t>(ix)];
            }
        ++visits_;
    }

    uint64_t total() const {
        uint64_t t = 0;
        for (uint64_t c : counts_) t += c;
        return t;
    }

    uint64_t visits() const { return visits_; }

private:
    voxel::Index3 dims_;
    std::vector<uint64_t> counts_;
    uint64_t visits_ = 0;
};

/// `Nx Ny Nz` header, then one count per line in x-fastest order.
inline void write_heatmap_text(std::ostream& out, const VisitHeatmap& h) {
    out << h.dims()[0] << ' ' << h.dims()[1] << ' ' << h.dims()[2] << '\n';
    for (int iz = 0; iz < h.dims()[2]; ++iz)
        for (int iy = 0; iy < h.dims()[1]; ++iy)
            for (int ix = 0; ix < h.dims()[0]; ++ix) out << h.at(ix, iy, iz) << '\n';
}

/// One z-slice as CSV: Ny rows of Nx comma-separated counts.
inline void write_heatmap_slice_csv(std::ostream& out, const VisitHeatmap& h, int iz) {
    if (iz < 0 || iz >= h.dims()[2]) throw BoundsError("heatmap slice index out of range");
    for (int iy = 0; iy < h.dims()[1]; ++iy) {
        for (int ix = 0; ix < h.dims()[0]; ++ix) {
            if (ix) out << ',';
            out << h.at(ix, iy, iz);
        }
        out << '\n';
    }
}

} // namespace voxseek::env
