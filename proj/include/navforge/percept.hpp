#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "navforge/simcore.hpp"

namespace navforge {

inline constexpr int kLidarGroups = 57;
inline constexpr int kGroupSize = 12;  // 57 * 12 = 684
inline constexpr int kObsDim = 2 + 1 + 1 + kLidarGroups;  // 61

// Group minima of the raw scan: out[i] = min(scan[12i .. 12i+12)).
std::array<double, kLidarGroups> decimate(const LidarScan& scan);

struct Observation {
    std::array<double, 2> rel_goal{};             // goal in the robot body frame, m
    double v = 0.0;
    double omega = 0.0;
    std::array<double, kLidarGroups> lidar{};     // decimated ranges, m

    std::array<double, kObsDim> flatten() const;
};

struct ObsConfig {
    // Unit-scaling of the metric inputs (lidar / max_range,
    // rel_goal / map diagonal). Off by default: raw metric inputs.
    bool normalize = false;
    double max_range = 10.0;
    double map_diag = 1.0;
};

Observation build_observation(const EpisodeState& ep, const LidarScan& scan);
Observation build_observation(const EpisodeState& ep, const LidarScan& scan,
                              const ObsConfig& cfg);

// Per-episode seen/unseen grid. Feeds only the reward; observations never
// read it.
class OccupancyTracker {
public:
    OccupancyTracker(int width_cells, int height_cells);

    void reset();
    int width() const { return width_; }
    int height() const { return height_; }
    size_t seen_count() const { return seen_count_; }
    bool seen(int cx, int cy) const {
        return seen_[static_cast<size_t>(cy) * width_ + cx] != 0;
    }

    // Marks every cell each beam traverses, including the terminal
    // occupied cell when the beam hit, and returns the number of newly
    // seen cells. The traversal is the raycaster's, so marking agrees
    // with the measured ranges. Throws std::invalid_argument when the
    // tracker and map shapes differ.
    size_t update(const GridMap& map, const RobotState& state, const LidarScan& scan,
                  double max_range);

    // PGM-style (P2) text dump for debugging.
    std::string dump_pgm() const;

private:
    int width_;
    int height_;
    std::vector<uint8_t> seen_;
    size_t seen_count_;
};

}  // namespace navforge
