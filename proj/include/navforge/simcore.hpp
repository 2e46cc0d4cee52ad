#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

#include "navforge/common.hpp"
#include "navforge/worldmap.hpp"

namespace navforge {

inline constexpr int kLidarBeams = 684;
inline constexpr double kLidarFovDeg = 270.0;  // -135 deg .. +135 deg
inline constexpr double kMaxLinearVel = 0.5;   // m/s
inline constexpr double kMaxAngularVel = 1.0;  // rad/s

struct RobotState {
    Pose pose;          // heading normalized to (-pi, pi]
    double v = 0.0;     // realized linear velocity, >= 0
    double omega = 0.0; // realized angular velocity
};

struct Action {
    double v_cmd = 0.0;      // [0, 0.5] m/s
    double omega_cmd = 0.0;  // [-1, 1] rad/s
};

struct LidarScan {
    std::array<double, kLidarBeams> ranges{};
};

// Beam i points at heading + (-135 + i * 270/683) degrees.
inline double beam_angle_offset(int beam) {
    return deg2rad(-kLidarFovDeg / 2.0 +
                   static_cast<double>(beam) * kLidarFovDeg / (kLidarBeams - 1));
}

struct SimConfig {
    double dt = 0.1;           // s
    double robot_radius = 0.2; // m
    double max_range = 10.0;   // m
    double d_min = 0.5;        // arrival radius, m
    int train_timeout = 500;   // steps
    int eval_timeout = 1500;   // steps
};

enum class EpisodeStatus : uint8_t { Running, Arrived, Collided, TimedOut };

const char* to_string(EpisodeStatus s);

struct EpisodeState {
    RobotState robot;
    Point2 goal;
    int step_count = 0;
    int timeout = 500;
    EpisodeStatus status = EpisodeStatus::Running;
};

// Amanatides-Woo walk along a ray. The visitor is called for every cell
// in traversal order with the ray length at which the cell is entered
// (0 for the origin cell) and may return false to stop. The walk ends at
// the grid edge. Raycasting and occupancy marking both run on this one
// traversal, so their cell sequences agree exactly.
template <typename Visitor>
void traverse_ray(const GridMap& map, const Point2& origin, double angle,
                  Visitor&& visit) {
    const double res = map.resolution();
    const double dx = std::cos(angle);
    const double dy = std::sin(angle);
    int cx = static_cast<int>(std::floor(origin.x / res));
    int cy = static_cast<int>(std::floor(origin.y / res));

    constexpr double inf = std::numeric_limits<double>::infinity();
    int step_x = 0, step_y = 0;
    double t_max_x = inf, t_max_y = inf, t_delta_x = inf, t_delta_y = inf;
    if (dx > 0.0) {
        step_x = 1;
        t_delta_x = res / dx;
        t_max_x = ((cx + 1) * res - origin.x) / dx;
    } else if (dx < 0.0) {
        step_x = -1;
        t_delta_x = -res / dx;
        t_max_x = (cx * res - origin.x) / dx;
    }
    if (dy > 0.0) {
        step_y = 1;
        t_delta_y = res / dy;
        t_max_y = ((cy + 1) * res - origin.y) / dy;
    } else if (dy < 0.0) {
        step_y = -1;
        t_delta_y = -res / dy;
        t_max_y = (cy * res - origin.y) / dy;
    }

    double t = 0.0;
    for (;;) {
        if (!map.in_bounds(cx, cy))
            return;
        if (!visit(cx, cy, t))
            return;
        if (t_max_x < t_max_y) {
            t = t_max_x;
            t_max_x += t_delta_x;
            cx += step_x;
        } else {
            t = t_max_y;
            t_max_y += t_delta_y;
            cy += step_y;
        }
    }
}

// Exact distance along the ray from `origin` at `angle` to the first
// occupied-cell boundary, clipped to max_range. The origin's cell must be
// free (throws std::invalid_argument otherwise).
double raycast(const GridMap& map, const Point2& origin, double angle, double max_range);

// Full 684-beam scan from the robot pose.
LidarScan scan(const GridMap& map, const RobotState& state, double max_range);

struct StepResult {
    EpisodeState state;
    bool action_clamped = false;  // commanded action was out of range
};

// Advance one control period. Commanded velocities take effect
// immediately; the pose follows the exact unicycle arc over dt. A step
// whose swept disc (midpoint and endpoint) touches an occupied cell
// collides with the pose frozen at the last free pose. Arrival is checked
// before timeout, so a final step that reaches the goal counts.
StepResult step(const EpisodeState& ep, const Action& a, const SimConfig& cfg,
                const GridMap& map);

double distance_to_goal(const EpisodeState& ep);

// Unicycle displacement over dt, exact arc for |omega| >= 1e-6.
Pose integrate_unicycle(const Pose& p, double v, double omega, double dt);

}  // namespace navforge
