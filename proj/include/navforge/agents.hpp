#pragma once

#include <array>
#include <cmath>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "navforge/bytes.hpp"
#include "navforge/neuralnet.hpp"
#include "navforge/rng.hpp"

namespace navforge {

// Replay record. The action lives in pre-scaling space [0,1] x [-1,1];
// the harness owns the mapping to physical units (v = 0.5*a0, omega = a1).
// done is true only for arrival/collision: a timeout is an artificial
// horizon and keeps bootstrapping.
struct Transition {
    std::vector<double> obs;
    std::array<double, 2> action{};
    double reward = 0.0;
    std::vector<double> next_obs;
    bool done = false;
};

// FIFO ring with uniform sampling from an explicit stream.
class ReplayBuffer {
public:
    explicit ReplayBuffer(size_t capacity = 1'000'000);

    void push(Transition t);
    size_t size() const { return data_.size(); }
    size_t capacity() const { return capacity_; }
    const Transition& at(size_t i) const { return data_[i]; }

    // batch i.i.d. uniform indices; batch must not exceed the population.
    std::vector<size_t> sample_indices(size_t batch, Rng& rng) const;

    void serialize(ByteWriter& w) const;
    static ReplayBuffer deserialize(ByteReader& r);

private:
    std::vector<Transition> data_;
    size_t capacity_;
    size_t next_ = 0;  // overwrite cursor once full
};

// Aggregates a window of consecutive in-episode transitions: reward
// becomes sum gamma^k r_k, next_obs/done come from the last element,
// obs/action stay with the first. Non-consecutive input (next_obs of one
// element differing from the obs of the next, or a terminal mid-window)
// throws std::invalid_argument.
Transition assemble_nstep(std::span<const Transition> window, double gamma);

// Streaming n-step wrapper: each pushed transition eventually yields one
// aggregated transition; windows truncated by episode end are drained by
// flush().
class NStepAssembler {
public:
    NStepAssembler(int window, double gamma) : window_(window), gamma_(gamma) {}

    std::optional<Transition> push(Transition t);
    std::vector<Transition> flush();
    size_t pending() const { return buf_.size(); }

private:
    int window_;
    double gamma_;
    std::deque<Transition> buf_;
};

struct LossReport {
    bool skipped = false;  // buffer below batch size, nothing updated
    double critic1 = 0.0;
    double critic2 = 0.0;
    double actor = 0.0;
    double alpha = 0.0;
    bool actor_updated = false;
};

// Bootstrap target arithmetic, shared by the updates and their tests.
inline double sac_target(double r, double gamma, bool done, double min_q_target,
                         double alpha_logpi) {
    return r + gamma * (done ? 0.0 : 1.0) * (min_q_target - alpha_logpi);
}
inline double td3_target(double r, double gamma, bool done, double min_q_target) {
    return r + gamma * (done ? 0.0 : 1.0) * min_q_target;
}

// Pre-squash to bounded action space: dimension 0 through a sigmoid to
// [0,1], dimension 1 through tanh to [-1,1].
std::array<double, 2> squash_action(const std::array<double, 2>& u);

struct SacConfig {
    int obs_dim = 61;
    std::vector<int> hidden = {512, 512, 512};
    double lr = 3e-4;
    double gamma = 0.99;
    double tau = 0.005;
    int batch_size = 256;
    double init_alpha = 0.2;
    bool auto_alpha = true;
    double target_entropy = -2.0;  // -dim(action)
    double logstd_min = -20.0;
    double logstd_max = 2.0;
};

class SacAgent {
public:
    SacAgent(const SacConfig& cfg, Rng& init_rng);

    // Pre-scaling action. Explore samples the squashed Gaussian; exploit
    // squashes the mean.
    std::array<double, 2> act(std::span<const double> obs, bool explore,
                              Rng& rng) const;

    LossReport update(const ReplayBuffer& buffer, Rng& rng);

    double alpha() const { return std::exp(log_alpha_); }
    const SacConfig& config() const { return cfg_; }

    // Target computation exposed for instrumented tests.
    struct TargetDebug {
        std::vector<double> y, q1_target, q2_target, logpi;
    };
    TargetDebug compute_targets(const std::vector<const Transition*>& batch,
                                Rng& rng) const;

    const DenseNet& actor() const { return actor_; }
    const DenseNet& critic1() const { return critic1_; }
    const DenseNet& critic2() const { return critic2_; }
    DenseNet& mutable_actor() { return actor_; }
    DenseNet& mutable_critic1() { return critic1_; }
    DenseNet& mutable_critic2() { return critic2_; }
    DenseNet& mutable_target_critic1() { return target_critic1_; }
    DenseNet& mutable_target_critic2() { return target_critic2_; }
    void set_alpha(double a) { log_alpha_ = std::log(a); }

    void save(ByteWriter& w) const;
    static SacAgent load(ByteReader& r);

private:
    SacConfig cfg_;
    DenseNet actor_;  // obs -> [mean(2), logstd(2)]
    DenseNet critic1_, critic2_;
    DenseNet target_critic1_, target_critic2_;
    AdamState actor_opt_, critic1_opt_, critic2_opt_;
    double log_alpha_ = 0.0;
    AdamScalar alpha_opt_;

    SacAgent() = default;
};

struct Td3Config {
    int obs_dim = 61;
    std::vector<int> hidden = {512, 512, 512};
    double lr = 3e-4;
    double gamma = 0.99;
    double tau = 0.005;
    int batch_size = 256;
    double policy_noise = 0.2;   // target smoothing sigma (pre-scaling space)
    double noise_clip = 0.5;
    int policy_delay = 2;
    double explore_noise = 0.1;  // exploration sigma (pre-scaling space)
    int nstep = 10;              // reward aggregation window
};

class Td3Agent {
public:
    Td3Agent(const Td3Config& cfg, Rng& init_rng);

    std::array<double, 2> act(std::span<const double> obs, bool explore,
                              Rng& rng) const;

    // Critics update every call; actor and targets only when
    // step_index % policy_delay == 0.
    LossReport update(const ReplayBuffer& buffer, uint64_t step_index, Rng& rng);

    const Td3Config& config() const { return cfg_; }

    struct TargetDebug {
        std::vector<double> y, q1_target, q2_target;
        std::vector<std::array<double, 2>> smoothed_actions;
    };
    TargetDebug compute_targets(const std::vector<const Transition*>& batch,
                                Rng& rng) const;

    const DenseNet& actor() const { return actor_; }
    const DenseNet& critic1() const { return critic1_; }
    DenseNet& mutable_actor() { return actor_; }
    DenseNet& mutable_target_actor() { return target_actor_; }
    DenseNet& mutable_critic1() { return critic1_; }
    DenseNet& mutable_critic2() { return critic2_; }
    DenseNet& mutable_target_critic1() { return target_critic1_; }
    DenseNet& mutable_target_critic2() { return target_critic2_; }

    void save(ByteWriter& w) const;
    static Td3Agent load(ByteReader& r);

private:
    Td3Config cfg_;
    DenseNet actor_, target_actor_;  // obs -> pre-squash (2)
    DenseNet critic1_, critic2_;
    DenseNet target_critic1_, target_critic2_;
    AdamState actor_opt_, critic1_opt_, critic2_opt_;

    Td3Agent() = default;
};

}  // namespace navforge
