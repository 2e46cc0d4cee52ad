#include "navforge/agents.hpp"

#include <algorithm>
#include <cstring>
#include <numbers>
#include <stdexcept>

namespace navforge {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * log(2*pi)

double softplus(double x) {
    return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<LayerSpec> mlp_spec(int in, const std::vector<int>& hidden, int out) {
    std::vector<LayerSpec> spec;
    int prev = in;
    for (int h : hidden) {
        spec.push_back({prev, h, Activation::ReLU});
        prev = h;
    }
    spec.push_back({prev, out, Activation::Linear});
    return spec;
}

// Batched [obs action] rows for the critics.
std::vector<double> concat_obs_action(std::span<const double> obs, int obs_dim,
                                      std::span<const std::array<double, 2>> actions,
                                      int batch) {
    std::vector<double> out(static_cast<size_t>(batch) * (obs_dim + 2));
    for (int b = 0; b < batch; ++b) {
        double* row = out.data() + static_cast<size_t>(b) * (obs_dim + 2);
        std::memcpy(row, obs.data() + static_cast<size_t>(b) * obs_dim,
                    sizeof(double) * obs_dim);
        row[obs_dim] = actions[b][0];
        row[obs_dim + 1] = actions[b][1];
    }
    return out;
}

void put_int_vector(ByteWriter& w, const std::vector<int>& v) {
    w.put_u32(static_cast<uint32_t>(v.size()));
    for (int x : v)
        w.put_u32(static_cast<uint32_t>(x));
}

std::vector<int> get_int_vector(ByteReader& r) {
    uint32_t n = r.get_u32();
    if (n > 1024)
        throw IoError("checkpoint: implausible vector length");
    std::vector<int> v(n);
    for (auto& x : v)
        x = static_cast<int>(r.get_u32());
    return v;
}

void put_adam_scalar(ByteWriter& w, const AdamScalar& s) {
    w.put_f64(s.lr);
    w.put_f64(s.beta1);
    w.put_f64(s.beta2);
    w.put_f64(s.eps);
    w.put_u64(s.step);
    w.put_f64(s.m);
    w.put_f64(s.v);
}

AdamScalar get_adam_scalar(ByteReader& r) {
    AdamScalar s;
    s.lr = r.get_f64();
    s.beta1 = r.get_f64();
    s.beta2 = r.get_f64();
    s.eps = r.get_f64();
    s.step = r.get_u64();
    s.m = r.get_f64();
    s.v = r.get_f64();
    return s;
}

}  // namespace

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0)
        throw std::invalid_argument("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
    if (data_.size() < capacity_) {
        data_.push_back(std::move(t));
    } else {
        data_[next_] = std::move(t);
        next_ = (next_ + 1) % capacity_;
    }
}

std::vector<size_t> ReplayBuffer::sample_indices(size_t batch, Rng& rng) const {
    if (batch > data_.size())
        throw std::invalid_argument("ReplayBuffer: batch exceeds population");
    std::vector<size_t> idx(batch);
    for (auto& i : idx)
        i = rng.uniform_int(data_.size());
    return idx;
}

void ReplayBuffer::serialize(ByteWriter& w) const {
    w.put_u64(capacity_);
    w.put_u64(data_.size());
    w.put_u64(next_);
    w.put_u32(data_.empty() ? 0 : static_cast<uint32_t>(data_[0].obs.size()));
    for (const auto& t : data_) {
        for (double v : t.obs)
            w.put_f64(v);
        w.put_f64(t.action[0]);
        w.put_f64(t.action[1]);
        w.put_f64(t.reward);
        for (double v : t.next_obs)
            w.put_f64(v);
        w.put_u8(t.done ? 1 : 0);
    }
}

ReplayBuffer ReplayBuffer::deserialize(ByteReader& r) {
    uint64_t capacity = r.get_u64();
    uint64_t size = r.get_u64();
    uint64_t next = r.get_u64();
    uint32_t obs_dim = r.get_u32();
    ReplayBuffer buf(capacity);
    buf.data_.reserve(size);
    for (uint64_t k = 0; k < size; ++k) {
        Transition t;
        t.obs.resize(obs_dim);
        for (auto& v : t.obs)
            v = r.get_f64();
        t.action[0] = r.get_f64();
        t.action[1] = r.get_f64();
        t.reward = r.get_f64();
        t.next_obs.resize(obs_dim);
        for (auto& v : t.next_obs)
            v = r.get_f64();
        t.done = r.get_u8() != 0;
        buf.data_.push_back(std::move(t));
    }
    buf.next_ = next;
    return buf;
}

Transition assemble_nstep(std::span<const Transition> window, double gamma) {
    if (window.empty())
        throw std::invalid_argument("assemble_nstep: empty window");
    for (size_t k = 0; k + 1 < window.size(); ++k) {
        if (window[k].done)
            throw std::invalid_argument("assemble_nstep: terminal mid-window");
        if (window[k].next_obs != window[k + 1].obs)
            throw std::invalid_argument("assemble_nstep: non-consecutive transitions");
    }
    Transition out = window.front();
    double reward = 0.0;
    double discount = 1.0;
    for (const auto& t : window) {
        reward += discount * t.reward;
        discount *= gamma;
    }
    out.reward = reward;
    out.next_obs = window.back().next_obs;
    out.done = window.back().done;
    return out;
}

std::optional<Transition> NStepAssembler::push(Transition t) {
    buf_.push_back(std::move(t));
    if (static_cast<int>(buf_.size()) < window_)
        return std::nullopt;
    std::vector<Transition> window(buf_.begin(), buf_.end());
    Transition out = assemble_nstep(window, gamma_);
    buf_.pop_front();
    return out;
}

std::vector<Transition> NStepAssembler::flush() {
    std::vector<Transition> out;
    while (!buf_.empty()) {
        std::vector<Transition> window(buf_.begin(), buf_.end());
        out.push_back(assemble_nstep(window, gamma_));
        buf_.pop_front();
    }
    return out;
}

std::array<double, 2> squash_action(const std::array<double, 2>& u) {
    return {sigmoid(u[0]), std::tanh(u[1])};
}

// ---------------------------------------------------------------- SAC --

SacAgent::SacAgent(const SacConfig& cfg, Rng& init_rng) : cfg_(cfg) {
    if (cfg_.hidden.empty())
        throw std::invalid_argument("SacAgent: need at least one hidden layer");
    actor_ = DenseNet(mlp_spec(cfg_.obs_dim, cfg_.hidden, 4), init_rng, 0.003);
    critic1_ = DenseNet(mlp_spec(cfg_.obs_dim + 2, cfg_.hidden, 1), init_rng);
    critic2_ = DenseNet(mlp_spec(cfg_.obs_dim + 2, cfg_.hidden, 1), init_rng);
    target_critic1_ = critic1_;
    target_critic2_ = critic2_;
    actor_opt_ = make_adam_state(actor_, cfg_.lr);
    critic1_opt_ = make_adam_state(critic1_, cfg_.lr);
    critic2_opt_ = make_adam_state(critic2_, cfg_.lr);
    log_alpha_ = std::log(cfg_.init_alpha);
    alpha_opt_.lr = cfg_.lr;
}

std::array<double, 2> SacAgent::act(std::span<const double> obs, bool explore,
                                    Rng& rng) const {
    std::vector<double> head = actor_.forward(obs);
    for (double v : head)
        if (!std::isfinite(v))
            throw DivergenceError("SacAgent::act: non-finite actor output");
    std::array<double, 2> u{head[0], head[1]};
    if (explore) {
        for (int i = 0; i < 2; ++i) {
            double logstd = std::clamp(head[2 + i], cfg_.logstd_min, cfg_.logstd_max);
            u[i] += std::exp(logstd) * rng.normal();
        }
    }
    return squash_action(u);
}

SacAgent::TargetDebug SacAgent::compute_targets(
    const std::vector<const Transition*>& batch, Rng& rng) const {
    const int B = static_cast<int>(batch.size());
    const int obs_dim = cfg_.obs_dim;
    std::vector<double> S2(static_cast<size_t>(B) * obs_dim);
    for (int b = 0; b < B; ++b)
        std::copy(batch[b]->next_obs.begin(), batch[b]->next_obs.end(),
                  S2.begin() + static_cast<size_t>(b) * obs_dim);

    std::vector<double> head = actor_.forward_batch(S2, B);
    std::vector<std::array<double, 2>> a2(B);
    std::vector<double> logpi(B);
    for (int b = 0; b < B; ++b) {
        const double* h = head.data() + static_cast<size_t>(b) * 4;
        double lp = 0.0;
        std::array<double, 2> u;
        for (int i = 0; i < 2; ++i) {
            double mean = h[i];
            double logstd = std::clamp(h[2 + i], cfg_.logstd_min, cfg_.logstd_max);
            double eps = rng.normal();
            u[i] = mean + std::exp(logstd) * eps;
            lp += -logstd - kHalfLog2Pi - 0.5 * eps * eps;
        }
        // Change of variables through the squashes.
        lp += softplus(u[0]) + softplus(-u[0]);            // -log a0(1-a0)
        lp += -std::log(4.0) + 2.0 * u[1] + 2.0 * softplus(-2.0 * u[1]);
        a2[b] = squash_action(u);
        logpi[b] = lp;
    }

    std::vector<double> in2 = concat_obs_action(S2, obs_dim, a2, B);
    TargetDebug dbg;
    dbg.q1_target = target_critic1_.forward_batch(in2, B);
    dbg.q2_target = target_critic2_.forward_batch(in2, B);
    dbg.logpi = std::move(logpi);
    dbg.y.resize(B);
    const double alpha = std::exp(log_alpha_);
    for (int b = 0; b < B; ++b) {
        double min_q = std::min(dbg.q1_target[b], dbg.q2_target[b]);
        dbg.y[b] = sac_target(batch[b]->reward, cfg_.gamma, batch[b]->done, min_q,
                              alpha * dbg.logpi[b]);
    }
    return dbg;
}

LossReport SacAgent::update(const ReplayBuffer& buffer, Rng& rng) {
    LossReport report;
    report.alpha = alpha();
    const int B = cfg_.batch_size;
    if (buffer.size() < static_cast<size_t>(B)) {
        report.skipped = true;
        return report;
    }
    const int obs_dim = cfg_.obs_dim;
    std::vector<size_t> idx = buffer.sample_indices(B, rng);
    std::vector<const Transition*> batch(B);
    for (int b = 0; b < B; ++b)
        batch[b] = &buffer.at(idx[b]);

    std::vector<double> S(static_cast<size_t>(B) * obs_dim);
    std::vector<std::array<double, 2>> A(B);
    for (int b = 0; b < B; ++b) {
        std::copy(batch[b]->obs.begin(), batch[b]->obs.end(),
                  S.begin() + static_cast<size_t>(b) * obs_dim);
        A[b] = batch[b]->action;
    }

    TargetDebug tgt = compute_targets(batch, rng);

    // Critic regression toward y.
    std::vector<double> in = concat_obs_action(S, obs_dim, A, B);
    auto update_critic = [&](DenseNet& critic, AdamState& opt) {
        ForwardCache cache;
        std::vector<double> q = critic.forward_batch(in, B, &cache);
        double loss = 0.0;
        std::vector<double> dq(B);
        for (int b = 0; b < B; ++b) {
            double err = q[b] - tgt.y[b];
            loss += err * err;
            dq[b] = 2.0 * err / B;
        }
        loss /= B;
        GradientBundle grads = critic.make_gradient_bundle();
        critic.backward_batch(cache, dq, grads);
        adam_step(critic, grads, opt);
        return loss;
    };
    report.critic1 = update_critic(critic1_, critic1_opt_);
    report.critic2 = update_critic(critic2_, critic2_opt_);

    // Actor: ascend min-critic value plus entropy bonus via fresh
    // reparameterized samples.
    ForwardCache actor_cache;
    std::vector<double> head = actor_.forward_batch(S, B, &actor_cache);
    std::vector<std::array<double, 2>> a_new(B), u_new(B), eps(B), std_v(B);
    std::vector<std::array<bool, 2>> gate(B);  // logstd clamp pass-through
    std::vector<double> logpi(B);
    for (int b = 0; b < B; ++b) {
        const double* h = head.data() + static_cast<size_t>(b) * 4;
        double lp = 0.0;
        for (int i = 0; i < 2; ++i) {
            double raw = h[2 + i];
            double logstd = std::clamp(raw, cfg_.logstd_min, cfg_.logstd_max);
            gate[b][i] = raw > cfg_.logstd_min && raw < cfg_.logstd_max;
            double e = rng.normal();
            eps[b][i] = e;
            std_v[b][i] = std::exp(logstd);
            u_new[b][i] = h[i] + std_v[b][i] * e;
            lp += -logstd - kHalfLog2Pi - 0.5 * e * e;
        }
        lp += softplus(u_new[b][0]) + softplus(-u_new[b][0]);
        lp += -std::log(4.0) + 2.0 * u_new[b][1] + 2.0 * softplus(-2.0 * u_new[b][1]);
        logpi[b] = lp;
        a_new[b] = squash_action(u_new[b]);
    }

    std::vector<double> in_new = concat_obs_action(S, obs_dim, a_new, B);
    ForwardCache c1_cache, c2_cache;
    std::vector<double> q1 = critic1_.forward_batch(in_new, B, &c1_cache);
    std::vector<double> q2 = critic2_.forward_batch(in_new, B, &c2_cache);

    const double alpha_v = std::exp(log_alpha_);
    double actor_loss = 0.0;
    std::vector<double> dq1(B, 0.0), dq2(B, 0.0);
    for (int b = 0; b < B; ++b) {
        double qmin = std::min(q1[b], q2[b]);
        actor_loss += alpha_v * logpi[b] - qmin;
        // d(-qmin)/dq_k routed to the minimizing critic.
        if (q1[b] <= q2[b])
            dq1[b] = -1.0 / B;
        else
            dq2[b] = -1.0 / B;
    }
    actor_loss /= B;
    report.actor = actor_loss;

    std::vector<double> dIn1 = critic1_.backward_batch_input(c1_cache, dq1);
    std::vector<double> dIn2 = critic2_.backward_batch_input(c2_cache, dq2);

    // Chain into the actor head: columns [mean0, mean1, logstd0, logstd1].
    std::vector<double> dHead(static_cast<size_t>(B) * 4, 0.0);
    for (int b = 0; b < B; ++b) {
        const double a0 = a_new[b][0];
        const double a1 = a_new[b][1];
        // dL/da from the critic path (the entropy path adds dlogpi/du).
        const double dL_da0 = dIn1[static_cast<size_t>(b) * (obs_dim + 2) + obs_dim] +
                              dIn2[static_cast<size_t>(b) * (obs_dim + 2) + obs_dim];
        const double dL_da1 =
            dIn1[static_cast<size_t>(b) * (obs_dim + 2) + obs_dim + 1] +
            dIn2[static_cast<size_t>(b) * (obs_dim + 2) + obs_dim + 1];
        const double da0_du0 = a0 * (1.0 - a0);
        const double da1_du1 = 1.0 - a1 * a1;
        // dlogpi/du per dimension (the Gaussian part vanishes under the
        // reparameterization; only the squash corrections depend on u).
        const double dlp_du0 = 2.0 * a0 - 1.0;
        const double dlp_du1 = 2.0 * std::tanh(u_new[b][1]);

        const double w = alpha_v / B;
        const double dL_du0 = dL_da0 * da0_du0 + w * dlp_du0;
        const double dL_du1 = dL_da1 * da1_du1 + w * dlp_du1;

        double* g = dHead.data() + static_cast<size_t>(b) * 4;
        g[0] = dL_du0;  // du/dmean = 1
        g[1] = dL_du1;
        // du/dlogstd = std*eps; plus the direct -1 from -logstd in logpi.
        g[2] = gate[b][0] ? dL_du0 * std_v[b][0] * eps[b][0] - w : 0.0;
        g[3] = gate[b][1] ? dL_du1 * std_v[b][1] * eps[b][1] - w : 0.0;
    }
    GradientBundle actor_grads = actor_.make_gradient_bundle();
    actor_.backward_batch(actor_cache, dHead, actor_grads);
    adam_step(actor_, actor_grads, actor_opt_);

    if (cfg_.auto_alpha) {
        double g = 0.0;
        for (int b = 0; b < B; ++b)
            g += logpi[b] + cfg_.target_entropy;
        g = -g / B;
        alpha_opt_.update(log_alpha_, g);
    }
    report.alpha = alpha();

    soft_update(target_critic1_, critic1_, cfg_.tau);
    soft_update(target_critic2_, critic2_, cfg_.tau);

    if (!std::isfinite(report.critic1) || !std::isfinite(report.critic2) ||
        !std::isfinite(report.actor))
        throw DivergenceError("SacAgent::update: non-finite loss");
    return report;
}

void SacAgent::save(ByteWriter& w) const {
    w.put_u32(static_cast<uint32_t>(cfg_.obs_dim));
    put_int_vector(w, cfg_.hidden);
    w.put_f64(cfg_.lr);
    w.put_f64(cfg_.gamma);
    w.put_f64(cfg_.tau);
    w.put_u32(static_cast<uint32_t>(cfg_.batch_size));
    w.put_f64(cfg_.init_alpha);
    w.put_u8(cfg_.auto_alpha ? 1 : 0);
    w.put_f64(cfg_.target_entropy);
    w.put_f64(cfg_.logstd_min);
    w.put_f64(cfg_.logstd_max);
    append_net_block(w, actor_, &actor_opt_);
    append_net_block(w, critic1_, &critic1_opt_);
    append_net_block(w, critic2_, &critic2_opt_);
    append_net_block(w, target_critic1_);
    append_net_block(w, target_critic2_);
    w.put_f64(log_alpha_);
    put_adam_scalar(w, alpha_opt_);
}

SacAgent SacAgent::load(ByteReader& r) {
    SacAgent agent;
    agent.cfg_.obs_dim = static_cast<int>(r.get_u32());
    agent.cfg_.hidden = get_int_vector(r);
    agent.cfg_.lr = r.get_f64();
    agent.cfg_.gamma = r.get_f64();
    agent.cfg_.tau = r.get_f64();
    agent.cfg_.batch_size = static_cast<int>(r.get_u32());
    agent.cfg_.init_alpha = r.get_f64();
    agent.cfg_.auto_alpha = r.get_u8() != 0;
    agent.cfg_.target_entropy = r.get_f64();
    agent.cfg_.logstd_min = r.get_f64();
    agent.cfg_.logstd_max = r.get_f64();
    agent.actor_ = read_net_block(r, &agent.actor_opt_);
    agent.critic1_ = read_net_block(r, &agent.critic1_opt_);
    agent.critic2_ = read_net_block(r, &agent.critic2_opt_);
    agent.target_critic1_ = read_net_block(r);
    agent.target_critic2_ = read_net_block(r);
    agent.log_alpha_ = r.get_f64();
    agent.alpha_opt_ = get_adam_scalar(r);
    require_manifest(agent.actor_, mlp_spec(agent.cfg_.obs_dim, agent.cfg_.hidden, 4));
    require_manifest(agent.critic1_,
                     mlp_spec(agent.cfg_.obs_dim + 2, agent.cfg_.hidden, 1));
    return agent;
}

// ---------------------------------------------------------------- TD3 --

Td3Agent::Td3Agent(const Td3Config& cfg, Rng& init_rng) : cfg_(cfg) {
    if (cfg_.hidden.empty())
        throw std::invalid_argument("Td3Agent: need at least one hidden layer");
    if (cfg_.policy_delay < 1)
        throw std::invalid_argument("Td3Agent: policy_delay must be >= 1");
    if (cfg_.policy_noise < 0.0 || cfg_.explore_noise < 0.0)
        throw std::invalid_argument("Td3Agent: noise must be non-negative");
    actor_ = DenseNet(mlp_spec(cfg_.obs_dim, cfg_.hidden, 2), init_rng, 0.003);
    critic1_ = DenseNet(mlp_spec(cfg_.obs_dim + 2, cfg_.hidden, 1), init_rng);
    critic2_ = DenseNet(mlp_spec(cfg_.obs_dim + 2, cfg_.hidden, 1), init_rng);
    target_actor_ = actor_;
    target_critic1_ = critic1_;
    target_critic2_ = critic2_;
    actor_opt_ = make_adam_state(actor_, cfg_.lr);
    critic1_opt_ = make_adam_state(critic1_, cfg_.lr);
    critic2_opt_ = make_adam_state(critic2_, cfg_.lr);
}

std::array<double, 2> Td3Agent::act(std::span<const double> obs, bool explore,
                                    Rng& rng) const {
    std::vector<double> head = actor_.forward(obs);
    for (double v : head)
        if (!std::isfinite(v))
            throw DivergenceError("Td3Agent::act: non-finite actor output");
    std::array<double, 2> a = squash_action({head[0], head[1]});
    if (explore) {
        a[0] = std::clamp(a[0] + cfg_.explore_noise * rng.normal(), 0.0, 1.0);
        a[1] = std::clamp(a[1] + cfg_.explore_noise * rng.normal(), -1.0, 1.0);
    }
    return a;
}

Td3Agent::TargetDebug Td3Agent::compute_targets(
    const std::vector<const Transition*>& batch, Rng& rng) const {
    const int B = static_cast<int>(batch.size());
    const int obs_dim = cfg_.obs_dim;
    std::vector<double> S2(static_cast<size_t>(B) * obs_dim);
    for (int b = 0; b < B; ++b)
        std::copy(batch[b]->next_obs.begin(), batch[b]->next_obs.end(),
                  S2.begin() + static_cast<size_t>(b) * obs_dim);

    std::vector<double> head = target_actor_.forward_batch(S2, B);
    std::vector<std::array<double, 2>> a2(B);
    for (int b = 0; b < B; ++b) {
        std::array<double, 2> a =
            squash_action({head[static_cast<size_t>(b) * 2],
                           head[static_cast<size_t>(b) * 2 + 1]});
        double n0 = std::clamp(cfg_.policy_noise * rng.normal(), -cfg_.noise_clip,
                               cfg_.noise_clip);
        double n1 = std::clamp(cfg_.policy_noise * rng.normal(), -cfg_.noise_clip,
                               cfg_.noise_clip);
        a2[b] = {std::clamp(a[0] + n0, 0.0, 1.0), std::clamp(a[1] + n1, -1.0, 1.0)};
    }

    std::vector<double> in2 = concat_obs_action(S2, obs_dim, a2, B);
    TargetDebug dbg;
    dbg.q1_target = target_critic1_.forward_batch(in2, B);
    dbg.q2_target = target_critic2_.forward_batch(in2, B);
    dbg.smoothed_actions = std::move(a2);
    dbg.y.resize(B);
    for (int b = 0; b < B; ++b)
        dbg.y[b] = td3_target(batch[b]->reward, cfg_.gamma, batch[b]->done,
                              std::min(dbg.q1_target[b], dbg.q2_target[b]));
    return dbg;
}

LossReport Td3Agent::update(const ReplayBuffer& buffer, uint64_t step_index,
                            Rng& rng) {
    LossReport report;
    const int B = cfg_.batch_size;
    if (buffer.size() < static_cast<size_t>(B)) {
        report.skipped = true;
        return report;
    }
    const int obs_dim = cfg_.obs_dim;
    std::vector<size_t> idx = buffer.sample_indices(B, rng);
    std::vector<const Transition*> batch(B);
    for (int b = 0; b < B; ++b)
        batch[b] = &buffer.at(idx[b]);

    std::vector<double> S(static_cast<size_t>(B) * obs_dim);
    std::vector<std::array<double, 2>> A(B);
    for (int b = 0; b < B; ++b) {
        std::copy(batch[b]->obs.begin(), batch[b]->obs.end(),
                  S.begin() + static_cast<size_t>(b) * obs_dim);
        A[b] = batch[b]->action;
    }

    TargetDebug tgt = compute_targets(batch, rng);

    std::vector<double> in = concat_obs_action(S, obs_dim, A, B);
    auto update_critic = [&](DenseNet& critic, AdamState& opt) {
        ForwardCache cache;
        std::vector<double> q = critic.forward_batch(in, B, &cache);
        double loss = 0.0;
        std::vector<double> dq(B);
        for (int b = 0; b < B; ++b) {
            double err = q[b] - tgt.y[b];
            loss += err * err;
            dq[b] = 2.0 * err / B;
        }
        loss /= B;
        GradientBundle grads = critic.make_gradient_bundle();
        critic.backward_batch(cache, dq, grads);
        adam_step(critic, grads, opt);
        return loss;
    };
    report.critic1 = update_critic(critic1_, critic1_opt_);
    report.critic2 = update_critic(critic2_, critic2_opt_);

    if (step_index % static_cast<uint64_t>(cfg_.policy_delay) == 0) {
        // Actor ascends Q1 at its own action.
        ForwardCache actor_cache;
        std::vector<double> head = actor_.forward_batch(S, B, &actor_cache);
        std::vector<std::array<double, 2>> a_new(B);
        for (int b = 0; b < B; ++b)
            a_new[b] = squash_action({head[static_cast<size_t>(b) * 2],
                                      head[static_cast<size_t>(b) * 2 + 1]});
        std::vector<double> in_new = concat_obs_action(S, obs_dim, a_new, B);
        ForwardCache c1_cache;
        std::vector<double> q1 = critic1_.forward_batch(in_new, B, &c1_cache);
        double actor_loss = 0.0;
        std::vector<double> dq(B, -1.0 / B);
        for (int b = 0; b < B; ++b)
            actor_loss -= q1[b];
        actor_loss /= B;
        report.actor = actor_loss;
        report.actor_updated = true;

        std::vector<double> dIn = critic1_.backward_batch_input(c1_cache, dq);
        std::vector<double> dHead(static_cast<size_t>(B) * 2);
        for (int b = 0; b < B; ++b) {
            double da0_du0 = a_new[b][0] * (1.0 - a_new[b][0]);
            double da1_du1 = 1.0 - a_new[b][1] * a_new[b][1];
            dHead[static_cast<size_t>(b) * 2] =
                dIn[static_cast<size_t>(b) * (obs_dim + 2) + obs_dim] * da0_du0;
            dHead[static_cast<size_t>(b) * 2 + 1] =
                dIn[static_cast<size_t>(b) * (obs_dim + 2) + obs_dim + 1] * da1_du1;
        }
        GradientBundle actor_grads = actor_.make_gradient_bundle();
        actor_.backward_batch(actor_cache, dHead, actor_grads);
        adam_step(actor_, actor_grads, actor_opt_);

        soft_update(target_actor_, actor_, cfg_.tau);
        soft_update(target_critic1_, critic1_, cfg_.tau);
        soft_update(target_critic2_, critic2_, cfg_.tau);
    }

    if (!std::isfinite(report.critic1) || !std::isfinite(report.critic2) ||
        !std::isfinite(report.actor))
        throw DivergenceError("Td3Agent::update: non-finite loss");
    return report;
}

void Td3Agent::save(ByteWriter& w) const {
    w.put_u32(static_cast<uint32_t>(cfg_.obs_dim));
    put_int_vector(w, cfg_.hidden);
    w.put_f64(cfg_.lr);
    w.put_f64(cfg_.gamma);
    w.put_f64(cfg_.tau);
    w.put_u32(static_cast<uint32_t>(cfg_.batch_size));
    w.put_f64(cfg_.policy_noise);
    w.put_f64(cfg_.noise_clip);
    w.put_u32(static_cast<uint32_t>(cfg_.policy_delay));
    w.put_f64(cfg_.explore_noise);
    w.put_u32(static_cast<uint32_t>(cfg_.nstep));
    append_net_block(w, actor_, &actor_opt_);
    append_net_block(w, target_actor_);
    append_net_block(w, critic1_, &critic1_opt_);
    append_net_block(w, critic2_, &critic2_opt_);
    append_net_block(w, target_critic1_);
    append_net_block(w, target_critic2_);
}

Td3Agent Td3Agent::load(ByteReader& r) {
    Td3Agent agent;
    agent.cfg_.obs_dim = static_cast<int>(r.get_u32());
    agent.cfg_.hidden = get_int_vector(r);
    agent.cfg_.lr = r.get_f64();
    agent.cfg_.gamma = r.get_f64();
    agent.cfg_.tau = r.get_f64();
    agent.cfg_.batch_size = static_cast<int>(r.get_u32());
    agent.cfg_.policy_noise = r.get_f64();
    agent.cfg_.noise_clip = r.get_f64();
    agent.cfg_.policy_delay = static_cast<int>(r.get_u32());
    agent.cfg_.explore_noise = r.get_f64();
    agent.cfg_.nstep = static_cast<int>(r.get_u32());
    agent.actor_ = read_net_block(r, &agent.actor_opt_);
    agent.target_actor_ = read_net_block(r);
    agent.critic1_ = read_net_block(r, &agent.critic1_opt_);
    agent.critic2_ = read_net_block(r, &agent.critic2_opt_);
    agent.target_critic1_ = read_net_block(r);
    agent.target_critic2_ = read_net_block(r);
    require_manifest(agent.actor_, mlp_spec(agent.cfg_.obs_dim, agent.cfg_.hidden, 2));
    require_manifest(agent.critic1_,
                     mlp_spec(agent.cfg_.obs_dim + 2, agent.cfg_.hidden, 1));
    return agent;
}

}  // namespace navforge
