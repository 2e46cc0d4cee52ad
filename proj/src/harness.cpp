#include "navforge/harness.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace navforge {

const char* to_string(AgentKind k) {
    return k == AgentKind::Sac ? "sac" : "td3";
}

AgentKind agent_kind_from_string(const std::string& name) {
    if (name == "sac")
        return AgentKind::Sac;
    if (name == "td3")
        return AgentKind::Td3;
    throw ConfigError("unknown agent '" + name + "' (expected sac or td3)");
}

const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::Arrived: return "Arrived";
        case Outcome::Collided: return "Collided";
        case Outcome::TimedOut: return "TimedOut";
    }
    return "?";
}

namespace {

Outcome outcome_from_status(EpisodeStatus s) {
    switch (s) {
        case EpisodeStatus::Arrived: return Outcome::Arrived;
        case EpisodeStatus::Collided: return Outcome::Collided;
        case EpisodeStatus::TimedOut: return Outcome::TimedOut;
        case EpisodeStatus::Running: break;
    }
    throw std::logic_error("episode ended while still running");
}

Outcome outcome_from_string(const std::string& s) {
    if (s == "Arrived")
        return Outcome::Arrived;
    if (s == "Collided")
        return Outcome::Collided;
    if (s == "TimedOut")
        return Outcome::TimedOut;
    throw IoError("train log: unknown outcome '" + s + "'");
}

}  // namespace

std::vector<double> TrainLog::returns() const {
    std::vector<double> out;
    out.reserve(episodes.size());
    for (const auto& e : episodes)
        out.push_back(e.episode_return);
    return out;
}

std::string TrainLog::to_csv(bool include_wall_time) const {
    std::string out = include_wall_time
                          ? "episode,return,length,outcome,map_id,wall_ms\n"
                          : "episode,return,length,outcome,map_id\n";
    for (const auto& e : episodes) {
        out += std::to_string(e.episode);
        out += ',';
        out += format_double(e.episode_return);
        out += ',';
        out += std::to_string(e.length);
        out += ',';
        out += to_string(e.outcome);
        out += ',';
        out += e.map_id;
        if (include_wall_time) {
            out += ',';
            out += format_double(e.wall_ms);
        }
        out += '\n';
    }
    return out;
}

TrainLog TrainLog::from_csv(const std::string& text) {
    TrainLog log;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw IoError("train log: empty file");
    bool has_wall = line.find("wall_ms") != std::string::npos;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::istringstream ls(line);
        EpisodeRecord rec;
        std::string field;
        std::getline(ls, field, ',');
        rec.episode = std::stoi(field);
        std::getline(ls, field, ',');
        rec.episode_return = std::stod(field);
        std::getline(ls, field, ',');
        rec.length = std::stoi(field);
        std::getline(ls, field, ',');
        rec.outcome = outcome_from_string(field);
        std::getline(ls, rec.map_id, ',');
        if (has_wall && std::getline(ls, field, ','))
            rec.wall_ms = std::stod(field);
        log.episodes.push_back(std::move(rec));
    }
    return log;
}

std::vector<double> moving_average(std::span<const double> series, int window) {
    if (window < 1)
        throw std::invalid_argument("moving_average: window must be >= 1");
    std::vector<double> out(series.size());
    for (size_t i = 0; i < series.size(); ++i) {
        size_t lo = i + 1 >= static_cast<size_t>(window) ? i + 1 - window : 0;
        double sum = 0.0;
        for (size_t j = lo; j <= i; ++j)
            sum += series[j];
        out[i] = sum / static_cast<double>(i - lo + 1);
    }
    return out;
}

Action to_physical(const std::array<double, 2>& a) {
    return Action{kMaxLinearVel * a[0], a[1]};
}

// ------------------------------------------------------------ training --

namespace {

constexpr char kTrainMagic[4] = {'N', 'A', 'V', 'T'};
constexpr uint32_t kTrainVersion = 1;

// Disjoint stream tags under the master seed.
enum StreamTag : uint64_t {
    kStreamMapDraw = 1,
    kStreamReset = 2,
    kStreamAction = 3,
    kStreamReplay = 4,
    kStreamNetInit = 5,
};

struct TrainingState {
    AgentKind kind = AgentKind::Sac;
    std::optional<SacAgent> sac;
    std::optional<Td3Agent> td3;
    ReplayBuffer buffer{1};
    Rng rng_map, rng_reset, rng_action, rng_replay;
    uint64_t total_env_steps = 0;
    uint64_t update_count = 0;
    int next_episode = 0;
    int active_map_index = 0;
    TrainLog log;

    std::array<double, 2> act(std::span<const double> obs, Rng& rng) const {
        return kind == AgentKind::Sac ? sac->act(obs, true, rng)
                                      : td3->act(obs, true, rng);
    }
};

void put_rng(ByteWriter& w, const Rng& rng) {
    for (uint64_t word : rng.state())
        w.put_u64(word);
}

Rng get_rng(ByteReader& r) {
    std::array<uint64_t, 4> s;
    for (auto& word : s)
        word = r.get_u64();
    Rng rng;
    rng.set_state(s);
    return rng;
}

void put_reward_spec(ByteWriter& w, const RewardSpec& spec) {
    w.put_u8(static_cast<uint8_t>(spec.variant));
    w.put_f64(spec.r_arrive);
    w.put_f64(spec.r_collide);
    w.put_f64(spec.r_timeout);
    w.put_u32(static_cast<uint32_t>(spec.front_lo));
    w.put_u32(static_cast<uint32_t>(spec.front_hi));
    w.put_f64(spec.front_cap);
    w.put_f64(spec.motion_r_arrive);
    w.put_f64(spec.motion_r_collide);
    w.put_f64(spec.clearance_r_arrive);
    w.put_f64(spec.clearance_w_clear);
    w.put_f64(spec.clearance_w_prox);
    w.put_f64(spec.clearance_w_spin);
    w.put_f64(spec.clearance_w_slow);
    w.put_f64(spec.safety_dist);
    w.put_f64(spec.v_max);
    w.put_f64(spec.sparse_r_arrive);
    w.put_f64(spec.sparse_r_collide);
}

RewardSpec get_reward_spec(ByteReader& r) {
    RewardSpec spec;
    spec.variant = static_cast<RewardVariant>(r.get_u8());
    spec.r_arrive = r.get_f64();
    spec.r_collide = r.get_f64();
    spec.r_timeout = r.get_f64();
    spec.front_lo = static_cast<int>(r.get_u32());
    spec.front_hi = static_cast<int>(r.get_u32());
    spec.front_cap = r.get_f64();
    spec.motion_r_arrive = r.get_f64();
    spec.motion_r_collide = r.get_f64();
    spec.clearance_r_arrive = r.get_f64();
    spec.clearance_w_clear = r.get_f64();
    spec.clearance_w_prox = r.get_f64();
    spec.clearance_w_spin = r.get_f64();
    spec.clearance_w_slow = r.get_f64();
    spec.safety_dist = r.get_f64();
    spec.v_max = r.get_f64();
    spec.sparse_r_arrive = r.get_f64();
    spec.sparse_r_collide = r.get_f64();
    return spec;
}

void put_sim_config(ByteWriter& w, const SimConfig& sim) {
    w.put_f64(sim.dt);
    w.put_f64(sim.robot_radius);
    w.put_f64(sim.max_range);
    w.put_f64(sim.d_min);
    w.put_u32(static_cast<uint32_t>(sim.train_timeout));
    w.put_u32(static_cast<uint32_t>(sim.eval_timeout));
}

SimConfig get_sim_config(ByteReader& r) {
    SimConfig sim;
    sim.dt = r.get_f64();
    sim.robot_radius = r.get_f64();
    sim.max_range = r.get_f64();
    sim.d_min = r.get_f64();
    sim.train_timeout = static_cast<int>(r.get_u32());
    sim.eval_timeout = static_cast<int>(r.get_u32());
    return sim;
}

void write_checkpoint(const std::string& path, const TrainConfig& cfg,
                      const TrainingState& st,
                      const std::vector<uint64_t>& map_hashes) {
    ByteWriter w;
    w.put_bytes(std::string_view(kTrainMagic, 4));
    w.put_u32(kTrainVersion);
    w.put_u8(static_cast<uint8_t>(st.kind));
    w.put_u64(cfg.seed);
    put_sim_config(w, cfg.sim);
    w.put_u8(cfg.normalize_obs ? 1 : 0);
    put_reward_spec(w, cfg.reward);
    w.put_u32(static_cast<uint32_t>(st.next_episode));
    w.put_u64(st.total_env_steps);
    w.put_u64(st.update_count);
    w.put_u32(static_cast<uint32_t>(st.active_map_index));
    w.put_u32(static_cast<uint32_t>(map_hashes.size()));
    for (uint64_t h : map_hashes)
        w.put_u64(h);
    put_rng(w, st.rng_map);
    put_rng(w, st.rng_reset);
    put_rng(w, st.rng_action);
    put_rng(w, st.rng_replay);
    if (st.kind == AgentKind::Sac)
        st.sac->save(w);
    else
        st.td3->save(w);
    st.buffer.serialize(w);
    w.put_u32(static_cast<uint32_t>(st.log.episodes.size()));
    for (const auto& e : st.log.episodes) {
        w.put_u32(static_cast<uint32_t>(e.episode));
        w.put_f64(e.episode_return);
        w.put_u32(static_cast<uint32_t>(e.length));
        w.put_u8(static_cast<uint8_t>(e.outcome));
        w.put_u32(static_cast<uint32_t>(e.map_id.size()));
        w.put_bytes(e.map_id);
        w.put_f64(0.0);  // wall time stays out of checkpoint bytes
    }
    w.seal();
    write_file_bytes(path, w.buf);
}

struct CheckpointHeader {
    AgentKind kind;
    uint64_t seed;
    SimConfig sim;
    bool normalize_obs;
    RewardSpec reward;
    uint32_t next_episode;
    uint64_t total_env_steps;
    uint64_t update_count;
    uint32_t active_map_index;
    std::vector<uint64_t> map_hashes;
};

CheckpointHeader read_checkpoint_header(ByteReader& r) {
    std::string_view magic = r.get_bytes(4);
    if (magic != std::string_view(kTrainMagic, 4))
        throw IoError("training checkpoint: bad magic");
    uint32_t version = r.get_u32();
    if (version != kTrainVersion)
        throw IoError("training checkpoint: unsupported version " +
                      std::to_string(version));
    CheckpointHeader h;
    h.kind = static_cast<AgentKind>(r.get_u8());
    h.seed = r.get_u64();
    h.sim = get_sim_config(r);
    h.normalize_obs = r.get_u8() != 0;
    h.reward = get_reward_spec(r);
    h.next_episode = r.get_u32();
    h.total_env_steps = r.get_u64();
    h.update_count = r.get_u64();
    h.active_map_index = r.get_u32();
    uint32_t n_maps = r.get_u32();
    h.map_hashes.resize(n_maps);
    for (auto& v : h.map_hashes)
        v = r.get_u64();
    return h;
}

TrainingState read_checkpoint_state(ByteReader& r, const CheckpointHeader& h) {
    TrainingState st;
    st.kind = h.kind;
    st.next_episode = static_cast<int>(h.next_episode);
    st.total_env_steps = h.total_env_steps;
    st.update_count = h.update_count;
    st.active_map_index = static_cast<int>(h.active_map_index);
    st.rng_map = get_rng(r);
    st.rng_reset = get_rng(r);
    st.rng_action = get_rng(r);
    st.rng_replay = get_rng(r);
    if (st.kind == AgentKind::Sac)
        st.sac = SacAgent::load(r);
    else
        st.td3 = Td3Agent::load(r);
    st.buffer = ReplayBuffer::deserialize(r);
    uint32_t n_records = r.get_u32();
    st.log.episodes.resize(n_records);
    for (auto& e : st.log.episodes) {
        e.episode = static_cast<int>(r.get_u32());
        e.episode_return = r.get_f64();
        e.length = static_cast<int>(r.get_u32());
        e.outcome = static_cast<Outcome>(r.get_u8());
        uint32_t len = r.get_u32();
        e.map_id = std::string(r.get_bytes(len));
        e.wall_ms = r.get_f64();
    }
    return st;
}

std::string map_stem(const std::string& path) {
    return std::filesystem::path(path).stem().string();
}

void write_manifest(const std::string& path, const TrainConfig& cfg,
                    const std::vector<std::string>& ids,
                    const std::vector<uint64_t>& hashes, double wall_seconds,
                    int episodes_done) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write manifest: " + path);
    out << "agent = " << to_string(cfg.agent) << "\n";
    out << "reward = " << to_string(cfg.reward.variant) << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "episodes = " << cfg.episodes << "\n";
    out << "episodes_done = " << episodes_done << "\n";
    out << "episode_timeout = " << cfg.episode_timeout << "\n";
    out << "map_rotation_period = " << cfg.map_rotation_period << "\n";
    out << "warmup_steps = " << cfg.warmup_steps << "\n";
    out << "batch_size = "
        << (cfg.agent == AgentKind::Sac ? cfg.sac.batch_size : cfg.td3.batch_size)
        << "\n";
    out << "nstep_enabled = " << (cfg.nstep_enabled() ? 1 : 0) << "\n";
    out << "normalize_obs = " << (cfg.normalize_obs ? 1 : 0) << "\n";
    out << "min_start_goal_sep = " << format_double(cfg.min_start_goal_sep) << "\n";
    for (size_t i = 0; i < ids.size(); ++i) {
        char hex[32];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(hashes[i]));
        out << "map." << ids[i] << " = " << hex << "\n";
    }
    out << "wall_seconds = " << format_double(wall_seconds) << "\n";
}

Pose sample_start(const GridMap& map, Rng& rng, double clearance) {
    return sample_free_pose(map, rng, clearance);
}

Point2 sample_goal(const GridMap& map, Rng& rng, double clearance,
                   const Point2& start, double min_sep) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        Pose g = sample_free_pose(map, rng, clearance);
        if (dist(g.position, start) >= min_sep)
            return g.position;
    }
    throw ConfigError("goal sampling: no free goal at least " +
                      format_double(min_sep) + " m from the start after 1000 draws");
}

}  // namespace

TrainResult run_training(const TrainConfig& cfg, const std::string& resume_checkpoint) {
    if (cfg.map_files.empty())
        throw ConfigError("training needs at least one map");
    if (cfg.episodes <= 0 || cfg.episode_timeout <= 0 || cfg.map_rotation_period <= 0)
        throw ConfigError("training counters must be positive");
    const int obs_dim =
        cfg.agent == AgentKind::Sac ? cfg.sac.obs_dim : cfg.td3.obs_dim;
    if (obs_dim != kObsDim)
        throw ConfigError("agent obs_dim must be " + std::to_string(kObsDim) +
                          " for this observation pipeline");

    std::vector<GridMap> maps;
    std::vector<std::string> map_ids;
    std::vector<uint64_t> map_hashes;
    for (const auto& f : cfg.map_files) {
        maps.push_back(load_map_file(f));
        map_ids.push_back(map_stem(f));
        map_hashes.push_back(maps.back().content_hash());
    }

    std::filesystem::create_directories(cfg.out_dir);
    const std::string log_path = cfg.out_dir + "/train_log.csv";
    const std::string losses_path = cfg.out_dir + "/losses.csv";
    const std::string manifest_path = cfg.out_dir + "/manifest.txt";
    const std::string final_ckpt = cfg.out_dir + "/checkpoint_final.navt";

    TrainingState st;
    if (resume_checkpoint.empty()) {
        st.kind = cfg.agent;
        st.buffer = ReplayBuffer(cfg.replay_capacity);
        st.rng_map = Rng(derive_seed(cfg.seed, kStreamMapDraw));
        st.rng_reset = Rng(derive_seed(cfg.seed, kStreamReset));
        st.rng_action = Rng(derive_seed(cfg.seed, kStreamAction));
        st.rng_replay = Rng(derive_seed(cfg.seed, kStreamReplay));
        Rng init(derive_seed(cfg.seed, kStreamNetInit));
        if (cfg.agent == AgentKind::Sac)
            st.sac.emplace(cfg.sac, init);
        else
            st.td3.emplace(cfg.td3, init);
    } else {
        std::string bytes = read_file_bytes(resume_checkpoint);
        ByteReader r(bytes);
        r.check_crc();
        CheckpointHeader h = read_checkpoint_header(r);
        if (h.kind != cfg.agent)
            throw ConfigError("resume: checkpoint agent differs from config");
        if (h.seed != cfg.seed)
            throw ConfigError("resume: checkpoint seed differs from config");
        if (h.map_hashes != map_hashes)
            throw ConfigError("resume: checkpoint map set differs from config");
        st = read_checkpoint_state(r, h);
    }

    std::ofstream losses(losses_path,
                         resume_checkpoint.empty() ? std::ios::trunc : std::ios::app);
    if (!losses)
        throw IoError("cannot write " + losses_path);
    if (resume_checkpoint.empty())
        losses << "step,critic1,critic2,actor,alpha,buffer_size\n";

    const auto run_start = std::chrono::steady_clock::now();
    const int batch = cfg.agent == AgentKind::Sac ? cfg.sac.batch_size
                                                  : cfg.td3.batch_size;
    const double nstep_gamma =
        cfg.agent == AgentKind::Sac ? cfg.sac.gamma : cfg.td3.gamma;
    TrainResult result;

    auto save_all = [&](const std::string& ckpt_path) {
        write_checkpoint(ckpt_path, cfg, st, map_hashes);
        std::ofstream log_out(log_path);
        log_out << st.log.to_csv(false);
        double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                    run_start)
                          .count();
        write_manifest(manifest_path, cfg, map_ids, map_hashes, wall,
                       st.next_episode);
    };

    try {
        for (int e = st.next_episode; e < cfg.episodes; ++e) {
            if (e % cfg.map_rotation_period == 0)
                st.active_map_index =
                    static_cast<int>(st.rng_map.uniform_int(maps.size()));
            const GridMap& map = maps[st.active_map_index];
            const std::string& map_id = map_ids[st.active_map_index];

            const auto ep_start = std::chrono::steady_clock::now();
            Pose start = sample_start(map, st.rng_reset, cfg.sim.robot_radius);
            Point2 goal = sample_goal(map, st.rng_reset, cfg.sim.robot_radius,
                                      start.position, cfg.min_start_goal_sep);

            EpisodeState ep;
            ep.robot.pose = start;
            ep.goal = goal;
            ep.timeout = cfg.episode_timeout;

            ObsConfig obs_cfg;
            obs_cfg.normalize = cfg.normalize_obs;
            obs_cfg.max_range = cfg.sim.max_range;
            obs_cfg.map_diag = std::hypot(map.width_m(), map.height_m());

            OccupancyTracker tracker(map.width(), map.height());
            LidarScan current_scan = scan(map, ep.robot, cfg.sim.max_range);
            tracker.update(map, ep.robot, current_scan, cfg.sim.max_range);
            Observation obs = build_observation(ep, current_scan, obs_cfg);

            NStepAssembler assembler(cfg.nstep_enabled() ? cfg.td3.nstep : 1,
                                     nstep_gamma);
            double ep_return = 0.0;

            while (ep.status == EpisodeStatus::Running) {
                std::array<double, 2> a;
                if (st.total_env_steps < static_cast<uint64_t>(cfg.warmup_steps)) {
                    a[0] = st.rng_action.uniform();
                    a[1] = st.rng_action.uniform(-1.0, 1.0);
                } else {
                    a = st.act(obs.flatten(), st.rng_action);
                }

                double d_prev = distance_to_goal(ep);
                StepResult sr = step(ep, to_physical(a), cfg.sim, map);
                EpisodeState next = sr.state;
                LidarScan next_scan = scan(map, next.robot, cfg.sim.max_range);
                size_t gain =
                    tracker.update(map, next.robot, next_scan, cfg.sim.max_range);

                RewardContext ctx;
                ctx.d = distance_to_goal(next);
                ctx.d_prev = d_prev;
                ctx.arrived = next.status == EpisodeStatus::Arrived;
                ctx.collided = next.status == EpisodeStatus::Collided;
                ctx.timed_out = next.status == EpisodeStatus::TimedOut;
                ctx.raw_scan = std::span<const double>(next_scan.ranges);
                ctx.gain = static_cast<double>(gain);
                ctx.v = next.robot.v;
                ctx.omega = next.robot.omega;
                double r = reward(ctx, cfg.reward);
                ep_return += r;

                Observation next_obs = build_observation(next, next_scan, obs_cfg);
                Transition tr;
                auto obs_flat = obs.flatten();
                auto next_flat = next_obs.flatten();
                tr.obs.assign(obs_flat.begin(), obs_flat.end());
                tr.action = a;
                tr.reward = r;
                tr.next_obs.assign(next_flat.begin(), next_flat.end());
                tr.done = next.status == EpisodeStatus::Arrived ||
                          next.status == EpisodeStatus::Collided;

                if (cfg.nstep_enabled()) {
                    if (auto agg = assembler.push(std::move(tr)))
                        st.buffer.push(std::move(*agg));
                } else {
                    st.buffer.push(std::move(tr));
                }

                st.total_env_steps += 1;
                if (st.total_env_steps >= static_cast<uint64_t>(cfg.warmup_steps) &&
                    st.buffer.size() >= static_cast<size_t>(batch)) {
                    LossReport rep =
                        st.kind == AgentKind::Sac
                            ? st.sac->update(st.buffer, st.rng_replay)
                            : st.td3->update(st.buffer, st.update_count,
                                             st.rng_replay);
                    if (!rep.skipped) {
                        losses << st.total_env_steps << ','
                               << format_double(rep.critic1) << ','
                               << format_double(rep.critic2) << ','
                               << format_double(rep.actor) << ','
                               << format_double(rep.alpha) << ','
                               << st.buffer.size() << '\n';
                        st.update_count += 1;
                    }
                }

                ep = next;
                obs = next_obs;
            }

            if (cfg.nstep_enabled())
                for (auto& t : assembler.flush())
                    st.buffer.push(std::move(t));

            EpisodeRecord rec;
            rec.episode = e;
            rec.episode_return = ep_return;
            rec.length = ep.step_count;
            rec.outcome = outcome_from_status(ep.status);
            rec.map_id = map_id;
            rec.wall_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - ep_start)
                              .count();
            st.log.episodes.push_back(std::move(rec));
            st.next_episode = e + 1;

            if (cfg.checkpoint_period > 0 && (e + 1) % cfg.checkpoint_period == 0 &&
                e + 1 < cfg.episodes) {
                write_checkpoint(cfg.out_dir + "/checkpoint_ep" + std::to_string(e + 1) +
                                     ".navt",
                                 cfg, st, map_hashes);
            }
            if (cfg.max_hours > 0.0) {
                double hours = std::chrono::duration<double>(
                                   std::chrono::steady_clock::now() - run_start)
                                   .count() /
                               3600.0;
                if (hours >= cfg.max_hours) {
                    result.stopped_by_time_budget = true;
                    break;
                }
            }
        }
    } catch (const DivergenceError&) {
        save_all(final_ckpt);  // preserve partial log and state
        throw;
    }

    save_all(final_ckpt);
    result.log = st.log;
    result.final_checkpoint = final_ckpt;
    return result;
}

std::array<double, 2> PolicyHandle::act(std::span<const double> obs, bool explore,
                                        Rng& rng) const {
    return kind == AgentKind::Sac ? sac->act(obs, explore, rng)
                                  : td3->act(obs, explore, rng);
}

int PolicyHandle::obs_dim() const {
    return kind == AgentKind::Sac ? sac->config().obs_dim : td3->config().obs_dim;
}

PolicyHandle load_policy(const std::string& checkpoint_path) {
    std::string bytes = read_file_bytes(checkpoint_path);
    ByteReader r(bytes);
    r.check_crc();
    CheckpointHeader h = read_checkpoint_header(r);
    TrainingState st = read_checkpoint_state(r, h);
    PolicyHandle handle;
    handle.kind = st.kind;
    handle.sac = std::move(st.sac);
    handle.td3 = std::move(st.td3);
    handle.sim = h.sim;
    handle.normalize_obs = h.normalize_obs;
    return handle;
}

}  // namespace navforge
