#include "navforge/percept.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace navforge {

std::array<double, kLidarGroups> decimate(const LidarScan& scan) {
    std::array<double, kLidarGroups> out;
    for (int g = 0; g < kLidarGroups; ++g) {
        double m = scan.ranges[g * kGroupSize];
        for (int k = 1; k < kGroupSize; ++k)
            m = std::min(m, scan.ranges[g * kGroupSize + k]);
        out[g] = m;
    }
    return out;
}

std::array<double, kObsDim> Observation::flatten() const {
    std::array<double, kObsDim> out;
    out[0] = rel_goal[0];
    out[1] = rel_goal[1];
    out[2] = v;
    out[3] = omega;
    std::copy(lidar.begin(), lidar.end(), out.begin() + 4);
    return out;
}

Observation build_observation(const EpisodeState& ep, const LidarScan& scan) {
    Observation obs;
    double gx = ep.goal.x - ep.robot.pose.position.x;
    double gy = ep.goal.y - ep.robot.pose.position.y;
    double c = std::cos(ep.robot.pose.heading);
    double s = std::sin(ep.robot.pose.heading);
    obs.rel_goal[0] = c * gx + s * gy;
    obs.rel_goal[1] = -s * gx + c * gy;
    obs.v = ep.robot.v;
    obs.omega = ep.robot.omega;
    obs.lidar = decimate(scan);
    return obs;
}

Observation build_observation(const EpisodeState& ep, const LidarScan& scan,
                              const ObsConfig& cfg) {
    Observation obs = build_observation(ep, scan);
    if (cfg.normalize) {
        obs.rel_goal[0] /= cfg.map_diag;
        obs.rel_goal[1] /= cfg.map_diag;
        for (auto& r : obs.lidar)
            r /= cfg.max_range;
    }
    return obs;
}

OccupancyTracker::OccupancyTracker(int width_cells, int height_cells)
    : width_(width_cells), height_(height_cells),
      seen_(static_cast<size_t>(width_cells) * height_cells, 0), seen_count_(0) {
    if (width_cells <= 0 || height_cells <= 0)
        throw std::invalid_argument("OccupancyTracker: dimensions must be positive");
}

void OccupancyTracker::reset() {
    std::fill(seen_.begin(), seen_.end(), uint8_t{0});
    seen_count_ = 0;
}

size_t OccupancyTracker::update(const GridMap& map, const RobotState& state,
                                const LidarScan& scan, double max_range) {
    if (map.width() != width_ || map.height() != height_)
        throw std::invalid_argument("OccupancyTracker: map/tracker shape mismatch");

    const size_t before = seen_count_;

    auto mark = [&](int cx, int cy) {
        size_t i = static_cast<size_t>(cy) * width_ + cx;
        if (!seen_[i]) {
            seen_[i] = 1;
            ++seen_count_;
        }
    };

    for (int beam = 0; beam < kLidarBeams; ++beam) {
        const double range = scan.ranges[beam];
        const bool hit = range < max_range;
        const double angle = state.pose.heading + beam_angle_offset(beam);
        // A hit beam stops at the first occupied cell, which by the
        // raycast postcondition is the measured one; a clipped beam stops
        // once it reaches the recorded range.
        traverse_ray(map, state.pose.position, angle, [&](int cx, int cy, double t) {
            if (hit && map.occupied(cx, cy)) {
                mark(cx, cy);
                return false;
            }
            if (t >= range)
                return false;
            mark(cx, cy);
            return true;
        });
    }
    return seen_count_ - before;
}

std::string OccupancyTracker::dump_pgm() const {
    std::ostringstream out;
    out << "P2\n" << width_ << " " << height_ << "\n1\n";
    for (int cy = 0; cy < height_; ++cy) {
        for (int cx = 0; cx < width_; ++cx) {
            out << (seen(cx, cy) ? 1 : 0);
            out << (cx + 1 == width_ ? '\n' : ' ');
        }
    }
    return out.str();
}

}  // namespace navforge
