#include "navforge/config.hpp"

#include <charconv>
#include <cstdlib>
#include <sstream>

namespace navforge {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos)
        return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_f64(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size())
            throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError("config: bad number for " + key + ": '" + value + "'");
    }
}

long long parse_i64(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        long long v = std::stoll(value, &used);
        if (used != value.size())
            throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError("config: bad integer for " + key + ": '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "on" || value == "yes")
        return true;
    if (value == "false" || value == "0" || value == "off" || value == "no")
        return false;
    throw ConfigError("config: bad boolean for " + key + ": '" + value + "'");
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::istringstream in(value);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty())
            out.push_back(item);
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    for (const auto& item : split_list(value))
        out.push_back(static_cast<int>(parse_i64(key, item)));
    return out;
}

void apply_sim(RunConfig& cfg, const std::string& key, const std::string& value) {
    SimConfig& sim = cfg.train.sim;
    if (key == "dt")
        sim.dt = parse_f64(key, value);
    else if (key == "robot_radius")
        sim.robot_radius = parse_f64(key, value);
    else if (key == "max_range")
        sim.max_range = parse_f64(key, value);
    else if (key == "d_min")
        sim.d_min = parse_f64(key, value);
    else if (key == "train_timeout") {
        sim.train_timeout = static_cast<int>(parse_i64(key, value));
        cfg.train.episode_timeout = sim.train_timeout;
    } else if (key == "eval_timeout") {
        sim.eval_timeout = static_cast<int>(parse_i64(key, value));
        cfg.eval.eval_timeout = sim.eval_timeout;
    } else if (key == "normalize_obs")
        cfg.train.normalize_obs = parse_bool(key, value);
    else
        throw ConfigError("config: unknown key [sim] " + key);
}

void apply_reward(RunConfig& cfg, const std::string& key, const std::string& value) {
    RewardSpec& r = cfg.train.reward;
    if (key == "variant")
        r.variant = reward_variant_from_string(value);
    else if (key == "r_arrive")
        r.r_arrive = parse_f64(key, value);
    else if (key == "r_collide")
        r.r_collide = parse_f64(key, value);
    else if (key == "r_timeout")
        r.r_timeout = parse_f64(key, value);
    else if (key == "front_lo")
        r.front_lo = static_cast<int>(parse_i64(key, value));
    else if (key == "front_hi")
        r.front_hi = static_cast<int>(parse_i64(key, value));
    else if (key == "front_cap")
        r.front_cap = parse_f64(key, value);
    else if (key == "motion_r_arrive")
        r.motion_r_arrive = parse_f64(key, value);
    else if (key == "motion_r_collide")
        r.motion_r_collide = parse_f64(key, value);
    else if (key == "clearance_r_arrive")
        r.clearance_r_arrive = parse_f64(key, value);
    else if (key == "clearance_w_clear")
        r.clearance_w_clear = parse_f64(key, value);
    else if (key == "clearance_w_prox")
        r.clearance_w_prox = parse_f64(key, value);
    else if (key == "clearance_w_spin")
        r.clearance_w_spin = parse_f64(key, value);
    else if (key == "clearance_w_slow")
        r.clearance_w_slow = parse_f64(key, value);
    else if (key == "safety_dist")
        r.safety_dist = parse_f64(key, value);
    else if (key == "sparse_r_arrive")
        r.sparse_r_arrive = parse_f64(key, value);
    else if (key == "sparse_r_collide")
        r.sparse_r_collide = parse_f64(key, value);
    else
        throw ConfigError("config: unknown key [reward] " + key);
    if (r.front_lo < 0 || r.front_hi <= r.front_lo || r.front_hi > 683)
        throw ConfigError("config: reward front window must satisfy "
                          "0 <= front_lo < front_hi <= 683");
}

void apply_agent(RunConfig& cfg, const std::string& key, const std::string& value) {
    SacConfig& sac = cfg.train.sac;
    Td3Config& td3 = cfg.train.td3;
    if (key == "algo")
        cfg.train.agent = agent_kind_from_string(value);
    else if (key == "hidden") {
        sac.hidden = parse_int_list(key, value);
        td3.hidden = sac.hidden;
    } else if (key == "batch_size") {
        sac.batch_size = static_cast<int>(parse_i64(key, value));
        td3.batch_size = sac.batch_size;
    } else if (key == "lr") {
        sac.lr = parse_f64(key, value);
        td3.lr = sac.lr;
    } else if (key == "gamma") {
        sac.gamma = parse_f64(key, value);
        td3.gamma = sac.gamma;
    } else if (key == "tau") {
        sac.tau = parse_f64(key, value);
        td3.tau = sac.tau;
    } else if (key == "init_alpha")
        sac.init_alpha = parse_f64(key, value);
    else if (key == "auto_alpha")
        sac.auto_alpha = parse_bool(key, value);
    else if (key == "target_entropy")
        sac.target_entropy = parse_f64(key, value);
    else if (key == "policy_noise")
        td3.policy_noise = parse_f64(key, value);
    else if (key == "noise_clip")
        td3.noise_clip = parse_f64(key, value);
    else if (key == "policy_delay")
        td3.policy_delay = static_cast<int>(parse_i64(key, value));
    else if (key == "explore_noise")
        td3.explore_noise = parse_f64(key, value);
    else if (key == "nstep")
        td3.nstep = static_cast<int>(parse_i64(key, value));
    else if (key == "nstep_enabled")
        cfg.train.nstep_mode = parse_bool(key, value) ? 1 : 0;
    else
        throw ConfigError("config: unknown key [agent] " + key);
}

void apply_train(RunConfig& cfg, const std::string& key, const std::string& value) {
    TrainConfig& t = cfg.train;
    if (key == "episodes")
        t.episodes = static_cast<int>(parse_i64(key, value));
    else if (key == "episode_timeout")
        t.episode_timeout = static_cast<int>(parse_i64(key, value));
    else if (key == "map_rotation_period")
        t.map_rotation_period = static_cast<int>(parse_i64(key, value));
    else if (key == "maps")
        t.map_files = split_list(value);
    else if (key == "seed") {
        t.seed = static_cast<uint64_t>(parse_i64(key, value));
        cfg.eval.seed = t.seed;
    } else if (key == "checkpoint_period")
        t.checkpoint_period = static_cast<int>(parse_i64(key, value));
    else if (key == "log_window")
        t.log_window = static_cast<int>(parse_i64(key, value));
    else if (key == "warmup_steps")
        t.warmup_steps = static_cast<int>(parse_i64(key, value));
    else if (key == "min_start_goal_sep")
        t.min_start_goal_sep = parse_f64(key, value);
    else if (key == "max_hours")
        t.max_hours = parse_f64(key, value);
    else if (key == "replay_capacity")
        t.replay_capacity = static_cast<size_t>(parse_i64(key, value));
    else if (key == "out_dir")
        t.out_dir = value;
    else
        throw ConfigError("config: unknown key [train] " + key);
}

void apply_eval(RunConfig& cfg, const std::string& key, const std::string& value) {
    EvalConfig& e = cfg.eval;
    if (key == "checkpoint")
        e.checkpoint_path = value;
    else if (key == "map")
        e.map_file = value;
    else if (key == "roster")
        e.roster_file = value;
    else if (key == "trials")
        e.trials = static_cast<int>(parse_i64(key, value));
    else if (key == "eval_timeout")
        e.eval_timeout = static_cast<int>(parse_i64(key, value));
    else if (key == "deterministic")
        e.deterministic_policy = parse_bool(key, value);
    else if (key == "seed")
        e.seed = static_cast<uint64_t>(parse_i64(key, value));
    else
        throw ConfigError("config: unknown key [eval] " + key);
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto comment = line.find('#');
        if (comment != std::string::npos)
            line.erase(comment);
        comment = line.find(';');
        if (comment != std::string::npos)
            line.erase(comment);
        line = trim(line);
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "sim" && section != "reward" && section != "agent" &&
                section != "train" && section != "eval")
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": unknown section [" + section + "]");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (section.empty())
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": key outside any section");
        if (section == "sim")
            apply_sim(cfg, key, value);
        else if (section == "reward")
            apply_reward(cfg, key, value);
        else if (section == "agent")
            apply_agent(cfg, key, value);
        else if (section == "train")
            apply_train(cfg, key, value);
        else
            apply_eval(cfg, key, value);
    }
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    return parse_config(read_file_bytes(path));
}

bool apply_env_seed(RunConfig& cfg) {
    const char* env = std::getenv("NAVFORGE_SEED");
    if (!env || !*env)
        return false;
    try {
        size_t used = 0;
        unsigned long long v = std::stoull(env, &used);
        if (used != std::string(env).size())
            throw std::invalid_argument("");
        cfg.train.seed = v;
        cfg.eval.seed = v;
        return true;
    } catch (...) {
        throw ConfigError("NAVFORGE_SEED is not a valid integer: '" +
                          std::string(env) + "'");
    }
}

}  // namespace navforge
