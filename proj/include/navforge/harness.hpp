#pragma once

#include <optional>
#include <string>
#include <vector>

#include "navforge/agents.hpp"
#include "navforge/percept.hpp"
#include "navforge/rewards.hpp"
#include "navforge/simcore.hpp"
#include "navforge/worldmap.hpp"

namespace navforge {

enum class AgentKind : uint8_t { Sac = 0, Td3 = 1 };

const char* to_string(AgentKind k);
AgentKind agent_kind_from_string(const std::string& name);

struct TrainConfig {
    int episodes = 20000;
    int episode_timeout = 500;       // steps
    int map_rotation_period = 500;   // episodes
    std::vector<std::string> map_files;
    AgentKind agent = AgentKind::Sac;
    RewardSpec reward;
    SimConfig sim;
    bool normalize_obs = false;
    SacConfig sac;
    Td3Config td3;
    // n-step reward aggregation: -1 follows the algorithm default
    // (on for TD3, off for SAC), 0 forces off, 1 forces on.
    int nstep_mode = -1;
    uint64_t seed = 1;
    int checkpoint_period = 1000;    // episodes; 0 disables periodic saves
    int log_window = 100;            // moving-average window, episodes
    int warmup_steps = 10000;        // uniform-random action steps
    double min_start_goal_sep = 2.0; // m
    double max_hours = 0.0;          // 0 disables the wall-time budget
    size_t replay_capacity = 1'000'000;
    std::string out_dir = "run_out";

    bool nstep_enabled() const {
        if (nstep_mode >= 0)
            return nstep_mode != 0;
        return agent == AgentKind::Td3;
    }
};

enum class Outcome : uint8_t { Arrived = 0, Collided = 1, TimedOut = 2 };

const char* to_string(Outcome o);

struct EpisodeRecord {
    int episode = 0;
    double episode_return = 0.0;
    int length = 0;
    Outcome outcome = Outcome::TimedOut;
    std::string map_id;
    double wall_ms = 0.0;  // excluded from the canonical CSV
};

struct TrainLog {
    std::vector<EpisodeRecord> episodes;

    std::vector<double> returns() const;
    // Canonical CSV is fully deterministic; wall time is opt-in.
    std::string to_csv(bool include_wall_time = false) const;
    static TrainLog from_csv(const std::string& text);
};

// out[i] = mean(series[max(0, i-window+1) ..= i]); the head window grows.
std::vector<double> moving_average(std::span<const double> series, int window);

struct TrainResult {
    TrainLog log;
    std::string final_checkpoint;
    bool stopped_by_time_budget = false;
};

// Runs the full training protocol: episode loop, uniform map re-draw every
// map_rotation_period episodes, per-episode start/goal resampling,
// scheduled checkpoints, deterministic for a fixed seed. Pass a checkpoint
// path to resume. On divergence the partial log and a checkpoint are
// written before the error propagates.
TrainResult run_training(const TrainConfig& cfg,
                         const std::string& resume_checkpoint = "");

// Frozen policy plus the pieces needed to rebuild its observation
// pipeline, as loaded from a training checkpoint.
struct PolicyHandle {
    AgentKind kind = AgentKind::Sac;
    std::optional<SacAgent> sac;
    std::optional<Td3Agent> td3;
    SimConfig sim;
    bool normalize_obs = false;

    std::array<double, 2> act(std::span<const double> obs, bool explore,
                              Rng& rng) const;
    int obs_dim() const;
};

PolicyHandle load_policy(const std::string& checkpoint_path);

// Pre-scaling action to physical command units (v = 0.5 * a0, omega = a1).
Action to_physical(const std::array<double, 2>& a);

}  // namespace navforge
