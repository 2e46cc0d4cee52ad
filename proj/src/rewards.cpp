#include "navforge/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace navforge {

const char* to_string(RewardVariant v) {
    switch (v) {
        case RewardVariant::InfoGain: return "info_gain";
        case RewardVariant::Motion: return "motion";
        case RewardVariant::Clearance: return "clearance";
        case RewardVariant::Sparse: return "sparse";
    }
    return "?";
}

RewardVariant reward_variant_from_string(const std::string& name) {
    if (name == "info_gain") return RewardVariant::InfoGain;
    if (name == "motion") return RewardVariant::Motion;
    if (name == "clearance") return RewardVariant::Clearance;
    if (name == "sparse") return RewardVariant::Sparse;
    throw ConfigError("unknown reward variant '" + name +
                      "' (expected info_gain, motion, clearance, or sparse)");
}

namespace {

double front_clearance(const RewardContext& ctx, const RewardSpec& spec) {
    if (ctx.raw_scan.size() != static_cast<size_t>(kLidarBeams))
        throw std::invalid_argument("reward: raw_scan must hold 684 beams");
    double m = ctx.raw_scan[spec.front_lo];
    for (int i = spec.front_lo + 1; i <= spec.front_hi; ++i)
        m = std::min(m, ctx.raw_scan[i]);
    return std::min(m, spec.front_cap);
}

double min_scan(const RewardContext& ctx) {
    if (ctx.raw_scan.size() != static_cast<size_t>(kLidarBeams))
        throw std::invalid_argument("reward: raw_scan must hold 684 beams");
    return *std::min_element(ctx.raw_scan.begin(), ctx.raw_scan.end());
}

}  // namespace

double reward_info_gain(const RewardContext& ctx, const RewardSpec& spec) {
    if (ctx.arrived)
        return spec.r_arrive;
    if (ctx.collided)
        return spec.r_collide;
    if (ctx.timed_out)
        return spec.r_timeout;
    if (!(ctx.d > 0.0))
        throw std::invalid_argument(
            "reward_info_gain: non-terminal step with d = 0 (arrival precedence broken)");
    return ctx.gain / ctx.d + front_clearance(ctx, spec) + (ctx.v - std::abs(ctx.omega));
}

double reward_motion(const RewardContext& ctx, const RewardSpec& spec) {
    if (ctx.arrived)
        return spec.motion_r_arrive;
    if (ctx.collided)
        return spec.motion_r_collide;
    return ctx.v - std::abs(ctx.omega);
}

double reward_clearance(const RewardContext& ctx, const RewardSpec& spec) {
    if (ctx.arrived)
        return spec.clearance_r_arrive;
    if (ctx.collided)
        return 0.0;  // the baseline has no collision constant; ending the
                     // episode is the penalty
    double m = min_scan(ctx);
    double r = 0.0;
    if (m < spec.safety_dist) {
        r -= spec.clearance_w_clear;
        r -= spec.clearance_w_prox * (spec.safety_dist - m) / spec.safety_dist;
    }
    r -= spec.clearance_w_spin * std::abs(ctx.omega);
    r -= spec.clearance_w_slow * (spec.v_max - ctx.v) / spec.v_max;
    r += ctx.d_prev - ctx.d;
    return r;
}

double reward_sparse(const RewardContext& ctx, const RewardSpec& spec) {
    if (ctx.arrived)
        return spec.sparse_r_arrive;
    if (ctx.collided)
        return spec.sparse_r_collide;
    return 0.0;
}

double reward(const RewardContext& ctx, const RewardSpec& spec) {
    switch (spec.variant) {
        case RewardVariant::InfoGain: return reward_info_gain(ctx, spec);
        case RewardVariant::Motion: return reward_motion(ctx, spec);
        case RewardVariant::Clearance: return reward_clearance(ctx, spec);
        case RewardVariant::Sparse: return reward_sparse(ctx, spec);
    }
    throw std::logic_error("reward: bad variant");
}

std::vector<std::pair<std::string, double>> reward_terms(const RewardContext& ctx,
                                                         const RewardSpec& spec) {
    std::vector<std::pair<std::string, double>> out;
    bool terminal = ctx.arrived || ctx.collided || ctx.timed_out;
    switch (spec.variant) {
        case RewardVariant::InfoGain:
            out.emplace_back("r_gd", terminal ? 0.0 : ctx.gain / ctx.d);
            out.emplace_back("r_front", terminal ? 0.0 : front_clearance(ctx, spec));
            out.emplace_back("r_vel", terminal ? 0.0 : ctx.v - std::abs(ctx.omega));
            break;
        case RewardVariant::Clearance:
            out.emplace_back("r_progress", terminal ? 0.0 : ctx.d_prev - ctx.d);
            break;
        default:
            break;
    }
    out.emplace_back("total", reward(ctx, spec));
    return out;
}

}  // namespace navforge
