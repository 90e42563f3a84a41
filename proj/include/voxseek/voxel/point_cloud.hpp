#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "voxseek/error.hpp"

namespace voxseek::voxel {

constexpr int kNoLabel = -1;

struct Point {
    double x = 0, y = 0, z = 0; // meters
    int r = 0, g = 0, b = 0;    // 0..255
    int label = kNoLabel;       // optional class id
};

struct PointCloud {
    std::vector<Point> points;

    bool empty() const { return points.empty(); }
    size_t size() const { return points.size(); }
};

// ---------------------------------------------------------------------------
// Text format: one point per line, whitespace-separated `x y z r g b [label]`,
// `#` starts a comment line.
// ---------------------------------------------------------------------------

inline PointCloud read_point_cloud(std::istream& in, const std::string& source = "<stream>") {
    PointCloud cloud;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        Point p;
        if (!(ls >> p.x >> p.y >> p.z >> p.r >> p.g >> p.b))
            throw FormatError(source + ":" + std::to_string(lineno) + ": expected `x y z r g b [label]`");
        if (!(ls >> p.label)) p.label = kNoLabel;
        std::string extra;
        if (ls >> extra) throw FormatError(source + ":" + std::to_string(lineno) + ": trailing fields");
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
            throw FormatError(source + ":" + std::to_string(lineno) + ": non-finite coordinate");
        if (p.r < 0 || p.r > 255 || p.g < 0 || p.g > 255 || p.b < 0 || p.b > 255)
            throw FormatError(source + ":" + std::to_string(lineno) + ": color outside 0-255");
        if (p.label < kNoLabel) throw FormatError(source + ":" + std::to_string(lineno) + ": negative label");
        cloud.points.push_back(p);
    }
    return cloud;
}

inline PointCloud load_point_cloud(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InputError("cannot open point cloud file: " + path);
    return read_point_cloud(f, path);
}

inline void write_point_cloud(std::ostream& out, const PointCloud& cloud, bool with_labels) {
    char buf[160];
    for (const Point& p : cloud.points) {
        if (with_labels)
            std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f %d %d %d %d\n", p.x, p.y, p.z, p.r, p.g, p.b,
                          p.label);
        else
            std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f %d %d %d\n", p.x, p.y, p.z, p.r, p.g, p.b);
        out << buf;
    }
}

inline void save_point_cloud(const std::string& path, const PointCloud& cloud, bool with_labels) {
    std::ofstream f(path, std::ios::binary); // binary keeps line endings stable
    if (!f) throw InputError("cannot write point cloud file: " + path);
    write_point_cloud(f, cloud, with_labels);
}

} // namespace voxseek::voxel
