#pragma once

#include <string>

#include "navforge/evalcli.hpp"
#include "navforge/harness.hpp"

namespace navforge {

// Full run configuration parsed from the sectioned key/value config file.
// Sections: [sim] [reward] [agent] [train] [eval]. Unknown sections or
// keys are errors. The NAVFORGE_SEED environment variable, when set,
// overrides the seed for both training and evaluation.
struct RunConfig {
    TrainConfig train;  // carries sim/reward/agent sub-configs
    EvalConfig eval;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::string& path);

// Applies NAVFORGE_SEED when present; returns true if it overrode.
bool apply_env_seed(RunConfig& cfg);

}  // namespace navforge
