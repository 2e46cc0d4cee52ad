#include "navforge/simcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace navforge {

const char* to_string(EpisodeStatus s) {
    switch (s) {
        case EpisodeStatus::Running: return "Running";
        case EpisodeStatus::Arrived: return "Arrived";
        case EpisodeStatus::Collided: return "Collided";
        case EpisodeStatus::TimedOut: return "TimedOut";
    }
    return "?";
}

double raycast(const GridMap& map, const Point2& origin, double angle,
               double max_range) {
    const int ox = static_cast<int>(std::floor(origin.x / map.resolution()));
    const int oy = static_cast<int>(std::floor(origin.y / map.resolution()));
    if (map.occupied(ox, oy))
        throw std::invalid_argument("raycast: origin cell is occupied");

    double result = max_range;
    bool first = true;
    traverse_ray(map, origin, angle, [&](int cx, int cy, double t) {
        if (first) {  // origin cell, known free
            first = false;
            return true;
        }
        if (t >= max_range)
            return false;
        if (map.occupied(cx, cy)) {
            result = t;
            return false;
        }
        return true;
    });
    return result;
}

LidarScan scan(const GridMap& map, const RobotState& state, double max_range) {
    LidarScan out;
    for (int i = 0; i < kLidarBeams; ++i) {
        double angle = state.pose.heading + beam_angle_offset(i);
        out.ranges[i] = raycast(map, state.pose.position, angle, max_range);
    }
    return out;
}

Pose integrate_unicycle(const Pose& p, double v, double omega, double dt) {
    Pose out = p;
    if (std::abs(omega) < 1e-6) {
        out.position.x += v * dt * std::cos(p.heading);
        out.position.y += v * dt * std::sin(p.heading);
        out.heading = wrap_angle(p.heading + omega * dt);
    } else {
        double h1 = p.heading + omega * dt;
        out.position.x += (v / omega) * (std::sin(h1) - std::sin(p.heading));
        out.position.y += (v / omega) * (std::cos(p.heading) - std::cos(h1));
        out.heading = wrap_angle(h1);
    }
    return out;
}

StepResult step(const EpisodeState& ep, const Action& a, const SimConfig& cfg,
                const GridMap& map) {
    if (ep.status != EpisodeStatus::Running)
        throw std::logic_error("step: episode already terminal");

    StepResult r;
    double v = std::clamp(a.v_cmd, 0.0, kMaxLinearVel);
    double omega = std::clamp(a.omega_cmd, -kMaxAngularVel, kMaxAngularVel);
    r.action_clamped = (v != a.v_cmd) || (omega != a.omega_cmd);

    EpisodeState next = ep;
    next.robot.v = v;
    next.robot.omega = omega;
    next.step_count = ep.step_count + 1;

    // Midpoint check guards against tunneling; at 0.05 m max displacement
    // per step it cannot skip a 0.1 m cell, but robot_radius and dt are
    // configurable.
    Pose mid = integrate_unicycle(ep.robot.pose, v, omega, cfg.dt * 0.5);
    Pose full = integrate_unicycle(ep.robot.pose, v, omega, cfg.dt);
    bool collided = disc_overlaps_occupied(map, mid.position, cfg.robot_radius) ||
                    disc_overlaps_occupied(map, full.position, cfg.robot_radius);

    if (collided) {
        next.status = EpisodeStatus::Collided;  // pose frozen at last free pose
    } else {
        next.robot.pose = full;
        if (dist(full.position, next.goal) <= cfg.d_min)
            next.status = EpisodeStatus::Arrived;
        else if (next.step_count >= ep.timeout)
            next.status = EpisodeStatus::TimedOut;
    }
    r.state = next;
    return r;
}

double distance_to_goal(const EpisodeState& ep) {
    return dist(ep.robot.pose.position, ep.goal);
}

}  // namespace navforge
