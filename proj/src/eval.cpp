#include "seanav/eval.hpp"

#include <cmath>

#include "seanav/rng.hpp"
#include "seanav/shield.hpp"
#include "seanav/threading.hpp"
#include "seanav/trainer.hpp"

namespace seanav::eval {

const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::Success: return "success";
        case Outcome::Collision: return "collision";
        default: return "timeout";
    }
}

policy::Observation make_observation(const world::RobotState& state, const Vec2& goal,
                                     const world::LidarScan& scan, const policy::PolicyConfig& pc) {
    policy::Observation o;
    o.linear_velocity = {state.velocity.vx, state.velocity.vy, 0.0};
    o.angular_velocity = {0.0, 0.0, state.velocity.wz};
    o.gravity = {0.0, 0.0, -1.0};
    const Vec2 gb = rotate_inverse(goal - state.position, state.heading);
    const double gn = gb.norm();
    const double scale = gn > pc.goal_clip_radius ? pc.goal_clip_radius / gn : 1.0;
    o.goal_body = {gb.x * scale, gb.y * scale};
    for (int i = 0; i < world::LidarScan::kRayCount; ++i) {
        const auto u = static_cast<std::size_t>(i);
        o.ranges[u] = scan.ranges[u] / pc.range_norm;
    }
    return o;
}

TrialRecord run_trial(const Config& cfg, const world::Scenario& scenario,
                      const world::OccupancyGrid& grid, std::uint64_t trial_seed,
                      bool use_shield, TrialPolicy& policy,
                      std::vector<TrialTraceRow>* trace) {
    TrialRecord rec;
    rec.scenario_seed = scenario.seed;
    Rng rng(trial_seed);
    const double footprint = cfg.world.footprint_eval;
    const auto sg = world::sample_start_goal(scenario, grid, cfg.world, footprint, rng);
    if (!sg) throw world::GenerationError("no start/goal pair for evaluation scenario");

    world::RobotState state{sg->start, sg->heading, {}};
    const Vec2 goal = sg->goal;
    policy.reset();

    const double dt = cfg.train.policy_dt;
    const int substeps = static_cast<int>(std::lround(dt / cfg.world.sim_dt));
    const std::array<double, 3> ceiling = {
        10.0 * std::max(std::abs(cfg.train.u_min[0]), std::abs(cfg.train.u_max[0])),
        10.0 * std::max(std::abs(cfg.train.u_min[1]), std::abs(cfg.train.u_max[1])),
        10.0 * std::max(std::abs(cfg.train.u_min[2]), std::abs(cfg.train.u_max[2]))};

    double stay = 0.0;
    double elapsed = 0.0;
    rec.outcome = Outcome::Timeout;
    const int max_ticks = static_cast<int>(std::lround(cfg.eval.timeout / dt));
    for (int tick = 0; tick < max_ticks; ++tick) {
        const auto scan = world::cast_lidar(scenario, state, cfg.world);
        const auto obs = make_observation(state, goal, scan, cfg.policy);
        double alpha = 1.0;
        const VelocityCommand u_nom = policy.act(obs, alpha);
        VelocityCommand u_exec = u_nom;
        double h = 0.0, eta = 0.0;
        if (use_shield) {
            const auto constraints = shield::build_constraints(scan, cfg.shield);
            const auto fb = shield::fuse_lse(constraints, cfg.shield.lse_k);
            const auto proj = shield::project_damped(u_nom, fb, alpha, cfg.shield.damping);
            u_exec = proj.u_safe;
            h = fb.h;
            eta = proj.eta;
        }
        if (trace) {
            trace->push_back({elapsed, state.position.x, state.position.y, state.heading,
                              state.velocity.vx, state.velocity.vy, state.velocity.wz, h, alpha,
                              eta});
        }

        bool collided = false;
        for (int k = 0; k < substeps; ++k) {
            const Vec2 before = state.position;
            state = world::step_dynamics(state, u_exec, cfg.world.sim_dt, cfg.world.tau_v, ceiling);
            rec.path_length += (state.position - before).norm();
            if (world::check_collision(scenario, state.position, footprint).hit) {
                collided = true;
                break;
            }
        }
        elapsed += dt;
        if (collided) {
            rec.outcome = Outcome::Collision;
            break;
        }
        const double d = (goal - state.position).norm();
        if (d < cfg.eval.goal_radius) {
            stay += dt;
        } else {
            stay = 0.0;
        }
        if (stay >= cfg.eval.goal_stay - 1e-9) {
            rec.outcome = Outcome::Success;
            break;
        }
    }
    rec.duration = rec.outcome == Outcome::Timeout ? cfg.eval.timeout : elapsed;
    rec.avg_speed = rec.duration > 0.0 ? rec.path_length / rec.duration : 0.0;
    return rec;
}

EvalReport evaluate(const Config& cfg, world::Difficulty difficulty, int trials_per_group,
                    int groups, std::uint64_t seed, bool use_shield,
                    const PolicyFactory& make_policy, const std::string& policy_name,
                    int threads) {
    EvalReport rep;
    rep.difficulty = world::to_string(difficulty);
    rep.policy_name = policy_name;
    rep.shield = use_shield;
    rep.groups = groups;
    rep.trials_per_group = trials_per_group;
    const std::size_t total = static_cast<std::size_t>(groups) * static_cast<std::size_t>(trials_per_group);
    rep.trials.resize(total);

    if (threads <= 0) threads = hardware_threads();
    parallel_chunks(total, 8, threads, [&](int, std::size_t b, std::size_t e) {
        auto policy = make_policy();
        for (std::size_t i = b; i < e; ++i) {
            const int g = static_cast<int>(i) / trials_per_group;
            const int t = static_cast<int>(i) % trials_per_group;
            const std::uint64_t group_seed = seed + static_cast<std::uint64_t>(g);
            const auto scen_seed = derive_seed(group_seed, 0xe7a1ULL, static_cast<std::uint64_t>(t));
            const auto scenario = world::generate_scenario(difficulty, scen_seed, cfg.world);
            const world::OccupancyGrid grid(scenario, cfg.world.footprint_eval, cfg.world.grid_cell);
            auto rec = run_trial(cfg, scenario, grid,
                                 derive_seed(group_seed, 0x57a6ULL, static_cast<std::uint64_t>(t)),
                                 use_shield, *policy);
            rec.group = g;
            rec.trial = t;
            rep.trials[i] = rec;
        }
    });

    rep.group_success_rate.assign(static_cast<std::size_t>(groups), 0.0);
    rep.group_avg_speed.assign(static_cast<std::size_t>(groups), 0.0);
    std::vector<int> group_successes(static_cast<std::size_t>(groups), 0);
    for (const auto& r : rep.trials) {
        switch (r.outcome) {
            case Outcome::Success:
                ++rep.successes;
                ++group_successes[static_cast<std::size_t>(r.group)];
                rep.group_avg_speed[static_cast<std::size_t>(r.group)] += r.avg_speed;
                break;
            case Outcome::Collision: ++rep.collisions; break;
            case Outcome::Timeout: ++rep.timeouts; break;
        }
    }
    if (rep.successes + rep.collisions + rep.timeouts != static_cast<int>(total)) {
        throw std::logic_error("trial outcomes do not partition the trial set");
    }
    int as_groups = 0;
    double as_sum = 0.0;
    std::vector<double> as_values;
    for (int g = 0; g < groups; ++g) {
        const auto u = static_cast<std::size_t>(g);
        rep.group_success_rate[u] =
            static_cast<double>(group_successes[u]) / static_cast<double>(trials_per_group);
        if (group_successes[u] > 0) {
            rep.group_avg_speed[u] /= static_cast<double>(group_successes[u]);
            as_values.push_back(rep.group_avg_speed[u]);
            as_sum += rep.group_avg_speed[u];
            ++as_groups;
        }
    }
    double sr_sum = 0.0;
    for (const double v : rep.group_success_rate) sr_sum += v;
    rep.sr_mean = sr_sum / static_cast<double>(groups);
    double sr_var = 0.0;
    for (const double v : rep.group_success_rate) sr_var += (v - rep.sr_mean) * (v - rep.sr_mean);
    rep.sr_std = std::sqrt(sr_var / static_cast<double>(groups));
    if (as_groups > 0) {
        rep.as_mean = as_sum / as_groups;
        double as_var = 0.0;
        for (const double v : as_values) as_var += (v - rep.as_mean) * (v - rep.as_mean);
        rep.as_std = std::sqrt(as_var / as_groups);
    }
    return rep;
}

nlohmann::json EvalReport::summary_json() const {
    return {
        {"difficulty", difficulty},
        {"policy", policy_name},
        {"shield", shield},
        {"groups", groups},
        {"trials_per_group", trials_per_group},
        {"group_success_rate", group_success_rate},
        {"group_avg_speed", group_avg_speed},
        {"success_rate_mean", sr_mean},
        {"success_rate_std", sr_std},
        {"avg_speed_mean", as_mean},
        {"avg_speed_std", as_std},
        {"successes", successes},
        {"collisions", collisions},
        {"timeouts", timeouts},
    };
}

void EvalReport::write_trials_csv(std::ostream& os) const {
    os << "group,trial,scenario_seed,outcome,duration,path_length,avg_speed\n";
    for (const auto& r : trials) {
        os << r.group << ',' << r.trial << ',' << r.scenario_seed << ',' << to_string(r.outcome)
           << ',' << trainer::format_double(r.duration) << ','
           << trainer::format_double(r.path_length) << ','
           << trainer::format_double(r.avg_speed) << '\n';
    }
}

PolicyFactory make_zero_policy() {
    return []() -> std::unique_ptr<TrialPolicy> {
        struct ZeroPolicy final : TrialPolicy {
            void reset() override {}
            VelocityCommand act(const policy::Observation&, double& alpha) override {
                alpha = 1.0;
                return {};
            }
        };
        return std::make_unique<ZeroPolicy>();
    };
}

PolicyFactory make_goto_policy(const Config& cfg) {
    return [cfg]() -> std::unique_ptr<TrialPolicy> {
        struct GotoPolicy final : TrialPolicy {
            Config cfg;
            explicit GotoPolicy(const Config& c) : cfg(c) {}
            void reset() override {}
            VelocityCommand act(const policy::Observation& obs, double& alpha) override {
                alpha = 1.0;
                const double gx = obs.goal_body[0];
                const double gy = obs.goal_body[1];
                VelocityCommand u{1.5 * gx, 1.5 * gy, 2.0 * std::atan2(gy, gx)};
                for (int i = 0; i < 3; ++i) {
                    u[i] = clamp(u[i], cfg.train.u_min[static_cast<std::size_t>(i)],
                                 cfg.train.u_max[static_cast<std::size_t>(i)]);
                }
                return u;
            }
        };
        return std::make_unique<GotoPolicy>(cfg);
    };
}

}  // namespace seanav::eval
