#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "seanav/acsi.hpp"
#include "seanav/policy.hpp"
#include "seanav/rewards.hpp"
#include "seanav/shield.hpp"
#include "seanav/world.hpp"

namespace seanav {

struct TrainConfig {
    int num_envs = 64;
    int rollout_steps = 100;
    int iterations = 150;
    int epochs = 4;
    int minibatches = 4;
    double gamma = 0.95;
    double gae_lambda = 0.95;
    double learning_rate = 3e-4;
    double clip_ratio = 0.2;
    double entropy_coef = 0.003;
    double value_coef = 0.5;
    double max_grad_norm = 1.0;
    double lambda_shield = 0.1;
    double lambda_reg = 1.0;
    double lambda_smooth_pi = 0.05;
    double lambda_smooth_v = 0.005;
    std::array<double, 3> u_min{-0.5, -0.8, -1.0};
    std::array<double, 3> u_max{1.7, 0.8, 1.0};
    double policy_dt = 0.1;
    double episode_duration = 60.0;
    double goal_radius = 0.5;
    double goal_stay = 2.0;
    double stuck_window = 2.0;
    bool domain_randomization = true;
    int threads = 0;              // 0 = hardware concurrency
};

struct EvalConfig {
    int trials = 100;
    int seed_groups = 3;
    double timeout = 30.0;
    double goal_radius = 0.5;
    double goal_stay = 0.5;
};

struct Config {
    world::WorldConfig world;
    shield::ShieldParams shield;
    policy::PolicyConfig policy;
    acsi::AcsiParams acsi;
    rewards::RewardWeights rewards;
    TrainConfig train;
    EvalConfig eval;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Strict load: unknown sections or keys raise ConfigError. Sections and keys
// are all optional; absent ones keep defaults.
Config config_from_json(const nlohmann::json& j);
Config load_config_file(const std::string& path);

// Environment overrides of the form SEANAV_<SECTION>_<KEY>=value, e.g.
// SEANAV_TRAIN_GAMMA=0.9. Invalid names or values raise ConfigError.
void apply_env_overrides(Config& c);

nlohmann::json config_to_json(const Config& c);

// FNV-1a over the canonical dump; stable across runs and platforms.
std::uint64_t config_hash(const Config& c);

void validate_config(const Config& c);

}  // namespace seanav
