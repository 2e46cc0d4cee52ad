#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "navforge/simcore.hpp"
#include "navforge/worldmap.hpp"

namespace test_util {

using namespace navforge;

// Fine-step ray marching, independent of the grid-traversal raycaster.
// Overshoots the true boundary by at most `step`.
inline double raymarch_oracle(const GridMap& map, const Point2& origin,
                              double angle, double max_range,
                              double step = 1e-4) {
    const double dx = std::cos(angle);
    const double dy = std::sin(angle);
    const double res = map.resolution();
    for (double t = step; t <= max_range; t += step) {
        int cx = static_cast<int>(std::floor((origin.x + t * dx) / res));
        int cy = static_cast<int>(std::floor((origin.y + t * dy) / res));
        if (map.occupied(cx, cy))
            return t;
    }
    return max_range;
}

// Cells a beam traverses, recounted independently of the DDA: enumerate
// every cell-boundary crossing in (0, range), then classify each segment
// by its midpoint. The terminal occupied cell of a hit beam is picked up
// by probing just past the measured range.
inline std::set<std::pair<int, int>> beam_cells_oracle(const GridMap& map,
                                                       const Point2& origin,
                                                       double angle, double range,
                                                       bool hit) {
    const double dx = std::cos(angle);
    const double dy = std::sin(angle);
    const double res = map.resolution();
    std::vector<double> ts{0.0};
    auto add_crossings = [&](double o, double d) {
        if (d == 0.0)
            return;
        int first = static_cast<int>(std::floor(o / res)) + (d > 0 ? 1 : 0);
        for (int k = first;; k += (d > 0 ? 1 : -1)) {
            double t = (k * res - o) / d;
            if (t <= 0.0)
                continue;
            if (t >= range)
                break;
            ts.push_back(t);
        }
    };
    add_crossings(origin.x, dx);
    add_crossings(origin.y, dy);
    ts.push_back(range);
    std::sort(ts.begin(), ts.end());

    std::set<std::pair<int, int>> cells;
    for (size_t i = 0; i + 1 < ts.size(); ++i) {
        double mid = 0.5 * (ts[i] + ts[i + 1]);
        int cx = static_cast<int>(std::floor((origin.x + mid * dx) / res));
        int cy = static_cast<int>(std::floor((origin.y + mid * dy) / res));
        if (map.in_bounds(cx, cy))
            cells.insert({cx, cy});
    }
    if (hit) {
        double probe = range + 1e-9;
        int cx = static_cast<int>(std::floor((origin.x + probe * dx) / res));
        int cy = static_cast<int>(std::floor((origin.y + probe * dy) / res));
        if (map.in_bounds(cx, cy))
            cells.insert({cx, cy});
    }
    return cells;
}

inline GridMap map_from_rows(const std::vector<std::string>& rows,
                             double resolution = 1.0) {
    std::string text = std::to_string(rows[0].size()) + " " +
                       std::to_string(rows.size()) + " " +
                       std::to_string(resolution) + "\n";
    for (const auto& r : rows)
        text += r + "\n";
    return load_map(text);
}

// Open square room of `n` cells per side (occupied ring only).
inline GridMap empty_room(int n, double resolution = 1.0) {
    std::vector<uint8_t> cells(static_cast<size_t>(n) * n, 0);
    return GridMap(n, n, resolution, std::move(cells));
}

}  // namespace test_util
