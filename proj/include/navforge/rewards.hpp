#pragma once

#include <span>
#include <string>
#include <vector>

#include "navforge/simcore.hpp"

namespace navforge {

// The four reward engines, named by what shapes them:
//   InfoGain   - proposed: map-information gain over goal distance, front
//                clearance, and progressive motion
//   Motion     - speeds-and-distance baseline (v - |omega| shaping)
//   Clearance  - safety-clearance baseline with unit penalty weights
//   Sparse     - arrival/collision constants only
enum class RewardVariant { InfoGain, Motion, Clearance, Sparse };

const char* to_string(RewardVariant v);
RewardVariant reward_variant_from_string(const std::string& name);

// Everything a reward engine may look at for one step. Flags are mutually
// exclusive; the episode lifecycle guarantees at most one is set.
struct RewardContext {
    double d = 0.0;        // distance to goal after the step, m
    double d_prev = 0.0;   // distance to goal before the step, m
    bool arrived = false;
    bool collided = false;
    bool timed_out = false;
    std::span<const double> raw_scan;  // 684 raw beams; only InfoGain and
                                       // Clearance read it
    double gain = 0.0;     // newly seen cells G
    double v = 0.0;
    double omega = 0.0;
};

struct RewardSpec {
    RewardVariant variant = RewardVariant::InfoGain;

    // InfoGain constants
    double r_arrive = 100.0;
    double r_collide = -200.0;
    double r_timeout = -200.0;
    int front_lo = 336;        // raw beam window for the front read,
    int front_hi = 348;        // inclusive on both ends
    double front_cap = 3.0;    // cap on the front-clearance term, m

    // Motion baseline
    double motion_r_arrive = 80.0;
    double motion_r_collide = -100.0;

    // Clearance baseline: four unit-weight penalties plus goal progress.
    double clearance_r_arrive = 40.0;
    double clearance_w_clear = 1.0;
    double clearance_w_prox = 1.0;
    double clearance_w_spin = 1.0;
    double clearance_w_slow = 1.0;
    double safety_dist = 1.0;  // m
    double v_max = kMaxLinearVel;

    // Sparse baseline
    double sparse_r_arrive = 100.0;
    double sparse_r_collide = -10.0;
};

double reward_info_gain(const RewardContext& ctx, const RewardSpec& spec);
double reward_motion(const RewardContext& ctx, const RewardSpec& spec);
double reward_clearance(const RewardContext& ctx, const RewardSpec& spec);
double reward_sparse(const RewardContext& ctx, const RewardSpec& spec);

double reward(const RewardContext& ctx, const RewardSpec& spec);

// Named term values for the trajectory CSV breakdown.
std::vector<std::pair<std::string, double>> reward_terms(const RewardContext& ctx,
                                                         const RewardSpec& spec);

}  // namespace navforge
