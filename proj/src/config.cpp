#include "seanav/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <set>

extern char** environ;

namespace seanav {

namespace {

using FieldRef = std::variant<double*, int*, bool*, std::array<double, 3>*>;

struct Field {
    const char* section;
    const char* key;
    FieldRef ref;
};

std::vector<Field> field_table(Config& c) {
    return {
        {"world", "room_half_extent", &c.world.room_half_extent},
        {"world", "circle_radius_min", &c.world.circle_radius_min},
        {"world", "circle_radius_max", &c.world.circle_radius_max},
        {"world", "box_half_extent_min", &c.world.box_half_extent_min},
        {"world", "box_half_extent_max", &c.world.box_half_extent_max},
        {"world", "footprint_train", &c.world.footprint_train},
        {"world", "footprint_eval", &c.world.footprint_eval},
        {"world", "min_start_goal_distance", &c.world.min_start_goal_distance},
        {"world", "lidar_min_range", &c.world.lidar_min_range},
        {"world", "lidar_max_range", &c.world.lidar_max_range},
        {"world", "sim_dt", &c.world.sim_dt},
        {"world", "tau_v", &c.world.tau_v},
        {"world", "grid_cell", &c.world.grid_cell},

        {"shield", "d_safe", &c.shield.d_safe},
        {"shield", "lse_k", &c.shield.lse_k},
        {"shield", "damping", &c.shield.damping},
        {"shield", "alpha_min", &c.shield.alpha_min},

        {"policy", "history_length", &c.policy.history_length},
        {"policy", "encoder_hidden", &c.policy.encoder_hidden},
        {"policy", "latent_dim", &c.policy.latent_dim},
        {"policy", "backbone_hidden", &c.policy.backbone_hidden},
        {"policy", "feature_dim", &c.policy.feature_dim},
        {"policy", "nav_hidden", &c.policy.nav_hidden},
        {"policy", "alpha_hidden", &c.policy.alpha_hidden},
        {"policy", "critic_hidden", &c.policy.critic_hidden},
        {"policy", "critic_hidden2", &c.policy.critic_hidden2},
        {"policy", "init_log_std", &c.policy.init_log_std},
        {"policy", "log_std_min", &c.policy.log_std_min},
        {"policy", "log_std_max", &c.policy.log_std_max},
        {"policy", "goal_clip_radius", &c.policy.goal_clip_radius},
        {"policy", "range_norm", &c.policy.range_norm},
        {"policy", "alpha_bias", &c.policy.alpha_bias},

        {"acsi", "p_min", &c.acsi.p_min},
        {"acsi", "p_max", &c.acsi.p_max},
        {"acsi", "d_up", &c.acsi.d_up},
        {"acsi", "d_down", &c.acsi.d_down},
        {"acsi", "step_increment", &c.acsi.step_increment},
        {"acsi", "t_back", &c.acsi.t_back},
        {"acsi", "t_hist", &c.acsi.t_hist},

        {"rewards", "termination", &c.rewards.termination},
        {"rewards", "reach", &c.rewards.reach},
        {"rewards", "velocity", &c.rewards.velocity},
        {"rewards", "clearance", &c.rewards.clearance},
        {"rewards", "stuck", &c.rewards.stuck},
        {"rewards", "collision", &c.rewards.collision},
        {"rewards", "angular", &c.rewards.angular},

        {"train", "num_envs", &c.train.num_envs},
        {"train", "rollout_steps", &c.train.rollout_steps},
        {"train", "iterations", &c.train.iterations},
        {"train", "epochs", &c.train.epochs},
        {"train", "minibatches", &c.train.minibatches},
        {"train", "gamma", &c.train.gamma},
        {"train", "gae_lambda", &c.train.gae_lambda},
        {"train", "learning_rate", &c.train.learning_rate},
        {"train", "clip_ratio", &c.train.clip_ratio},
        {"train", "entropy_coef", &c.train.entropy_coef},
        {"train", "value_coef", &c.train.value_coef},
        {"train", "max_grad_norm", &c.train.max_grad_norm},
        {"train", "lambda_shield", &c.train.lambda_shield},
        {"train", "lambda_reg", &c.train.lambda_reg},
        {"train", "lambda_smooth_pi", &c.train.lambda_smooth_pi},
        {"train", "lambda_smooth_v", &c.train.lambda_smooth_v},
        {"train", "u_min", &c.train.u_min},
        {"train", "u_max", &c.train.u_max},
        {"train", "policy_dt", &c.train.policy_dt},
        {"train", "episode_duration", &c.train.episode_duration},
        {"train", "goal_radius", &c.train.goal_radius},
        {"train", "goal_stay", &c.train.goal_stay},
        {"train", "stuck_window", &c.train.stuck_window},
        {"train", "domain_randomization", &c.train.domain_randomization},
        {"train", "threads", &c.train.threads},

        {"eval", "trials", &c.eval.trials},
        {"eval", "seed_groups", &c.eval.seed_groups},
        {"eval", "timeout", &c.eval.timeout},
        {"eval", "goal_radius", &c.eval.goal_radius},
        {"eval", "goal_stay", &c.eval.goal_stay},
    };
}

void assign_from_json(const Field& f, const nlohmann::json& v) {
    std::visit(
        [&](auto* p) {
            using T = std::remove_pointer_t<decltype(p)>;
            try {
                *p = v.get<T>();
            } catch (const nlohmann::json::exception&) {
                throw ConfigError(std::string("bad value for ") + f.section + "." + f.key + ": " + v.dump());
            }
        },
        f.ref);
}

nlohmann::json field_to_json(const Field& f) {
    return std::visit([](auto* p) { return nlohmann::json(*p); }, f.ref);
}

void assign_from_string(const Field& f, const std::string& s) {
    nlohmann::json v = nlohmann::json::parse(s, nullptr, false);
    if (v.is_discarded()) throw ConfigError(std::string("unparseable override for ") + f.section + "." + f.key + ": " + s);
    assign_from_json(f, v);
}

std::string upper(std::string s) {
    for (char& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return s;
}

}  // namespace

Config config_from_json(const nlohmann::json& j) {
    Config c;
    auto fields = field_table(c);
    if (!j.is_object()) throw ConfigError("config root must be an object");
    for (const auto& [section, body] : j.items()) {
        if (!body.is_object()) throw ConfigError("config section must be an object: " + section);
        for (const auto& [key, value] : body.items()) {
            bool found = false;
            for (auto& f : fields) {
                if (section == f.section && key == f.key) {
                    assign_from_json(f, value);
                    found = true;
                    break;
                }
            }
            if (!found) throw ConfigError("unknown config key: " + section + "." + key);
        }
    }
    validate_config(c);
    return c;
}

Config load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

void apply_env_overrides(Config& c) {
    auto fields = field_table(c);
    std::set<std::string> known;
    for (auto& f : fields) {
        const std::string name = "SEANAV_" + upper(f.section) + "_" + upper(f.key);
        known.insert(name);
        if (const char* v = std::getenv(name.c_str())) {
            assign_from_string(f, v);
        }
    }
    // Misspelled override names are rejected like unknown config file keys.
    for (char** e = environ; e && *e; ++e) {
        const char* eq = std::strchr(*e, '=');
        if (!eq) continue;
        const std::string name(*e, eq - *e);
        if (name.rfind("SEANAV_", 0) == 0 && !known.count(name)) {
            throw ConfigError("unknown environment override: " + name);
        }
    }
    validate_config(c);
}

nlohmann::json config_to_json(const Config& c) {
    auto fields = field_table(const_cast<Config&>(c));
    nlohmann::json j = nlohmann::json::object();
    for (const auto& f : fields) j[f.section][f.key] = field_to_json(f);
    return j;
}

std::uint64_t config_hash(const Config& c) {
    const std::string dump = config_to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : dump) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void validate_config(const Config& c) {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("invalid config: ") + what);
    };
    require(c.world.room_half_extent > 0, "world.room_half_extent must be positive");
    require(c.world.lidar_min_range > 0 && c.world.lidar_max_range > c.world.lidar_min_range,
            "lidar range bounds must satisfy 0 < min < max");
    require(c.world.sim_dt > 0, "world.sim_dt must be positive");
    require(c.world.footprint_train > 0 && c.world.footprint_eval > 0, "footprints must be positive");
    require(c.shield.lse_k > 0, "shield.lse_k must be positive");
    require(c.shield.damping >= 0, "shield.damping must be non-negative");
    require(c.policy.history_length > 0, "policy.history_length must be positive");
    require(c.acsi.p_min >= 0 && c.acsi.p_max <= 1 && c.acsi.p_min <= c.acsi.p_max,
            "acsi probabilities must satisfy 0 <= p_min <= p_max <= 1");
    require(c.acsi.d_up < c.acsi.d_down, "acsi.d_up must be below acsi.d_down");
    require(c.train.num_envs > 0 && c.train.rollout_steps > 0, "train batch shape must be positive");
    require(c.train.minibatches > 0 && c.train.epochs > 0, "train.epochs/minibatches must be positive");
    require(c.train.num_envs * c.train.rollout_steps % c.train.minibatches == 0,
            "train.minibatches must divide the batch size");
    require(c.train.gamma > 0 && c.train.gamma < 1, "train.gamma must lie in (0, 1)");
    require(c.train.policy_dt > c.world.sim_dt - 1e-12, "train.policy_dt must be >= world.sim_dt");
    const double ratio = c.train.policy_dt / c.world.sim_dt;
    require(std::abs(ratio - std::round(ratio)) < 1e-9, "train.policy_dt must be a multiple of world.sim_dt");
    for (int i = 0; i < 3; ++i) {
        require(c.train.u_min[static_cast<std::size_t>(i)] < c.train.u_max[static_cast<std::size_t>(i)],
                "train.u_min must be below train.u_max componentwise");
    }
    require(c.eval.trials > 0 && c.eval.seed_groups > 0, "eval.trials/seed_groups must be positive");
}

}  // namespace seanav
