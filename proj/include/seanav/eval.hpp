#pragma once

#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seanav/config.hpp"
#include "seanav/policy.hpp"
#include "seanav/world.hpp"

namespace seanav::eval {

enum class Outcome { Success, Collision, Timeout };

const char* to_string(Outcome o);

struct TrialRecord {
    int group = 0;
    int trial = 0;
    std::uint64_t scenario_seed = 0;
    Outcome outcome = Outcome::Timeout;
    double duration = 0.0;
    double path_length = 0.0;
    double avg_speed = 0.0;
};

struct TrialTraceRow {
    double t, x, y, theta, vx, vy, wz, h, alpha, eta;
};

struct EvalReport {
    std::string difficulty;
    std::string policy_name;
    bool shield = true;
    int groups = 0;
    int trials_per_group = 0;
    std::vector<double> group_success_rate;
    std::vector<double> group_avg_speed;
    double sr_mean = 0.0, sr_std = 0.0;
    double as_mean = 0.0, as_std = 0.0;
    int successes = 0, collisions = 0, timeouts = 0;
    std::vector<TrialRecord> trials;

    nlohmann::json summary_json() const;
    void write_trials_csv(std::ostream& os) const;
};

// Per-trial policy instance; owns whatever recurrent state it needs.
struct TrialPolicy {
    virtual ~TrialPolicy() = default;
    virtual void reset() = 0;
    // Returns the nominal command for this observation and fills the class-K
    // gain used if a shield wraps the policy.
    virtual VelocityCommand act(const policy::Observation& obs, double& alpha) = 0;
};

using PolicyFactory = std::function<std::unique_ptr<TrialPolicy>()>;

// Clean-conditions observation (no noise, no sensor delay).
policy::Observation make_observation(const world::RobotState& state, const Vec2& goal,
                                     const world::LidarScan& scan, const policy::PolicyConfig& pc);

TrialRecord run_trial(const Config& cfg, const world::Scenario& scenario,
                      const world::OccupancyGrid& grid, std::uint64_t trial_seed,
                      bool use_shield, TrialPolicy& policy,
                      std::vector<TrialTraceRow>* trace = nullptr);

EvalReport evaluate(const Config& cfg, world::Difficulty difficulty, int trials_per_group,
                    int groups, std::uint64_t seed, bool use_shield,
                    const PolicyFactory& make_policy, const std::string& policy_name,
                    int threads);

PolicyFactory make_zero_policy();
// Obstacle-blind proportional controller toward the goal; exercises the
// shield and the trial plumbing without any learning.
PolicyFactory make_goto_policy(const Config& cfg);

template <typename Real>
PolicyFactory make_net_policy(const Config& cfg, std::vector<double> params_f64) {
    auto shared = std::make_shared<const std::vector<double>>(std::move(params_f64));
    return [cfg, shared]() -> std::unique_ptr<TrialPolicy> {
        struct NetPolicy final : TrialPolicy {
            policy::PolicyNet<Real> net;
            std::vector<Real> params;
            policy::HistoryBuffer hist;
            policy::PolicyEval<Real> ev;
            std::vector<Real> hist_flat;
            std::vector<double> hist_tmp;

            explicit NetPolicy(const Config& c, const std::vector<double>& p)
                : net(c.policy), hist(c.policy.history_length) {
                if (p.size() != net.param_count()) {
                    throw std::invalid_argument("checkpoint parameter count mismatch");
                }
                params.resize(p.size());
                for (std::size_t i = 0; i < p.size(); ++i) params[i] = static_cast<Real>(p[i]);
                const auto n = static_cast<std::size_t>(c.policy.history_length) *
                               policy::Observation::kDim;
                hist_flat.resize(n);
                hist_tmp.resize(n);
            }

            void reset() override { hist.clear(); }

            VelocityCommand act(const policy::Observation& obs, double& alpha) override {
                hist.flatten(hist_tmp);
                for (std::size_t i = 0; i < hist_tmp.size(); ++i) {
                    hist_flat[i] = static_cast<Real>(hist_tmp[i]);
                }
                std::array<double, policy::Observation::kDim> flat{};
                obs.flatten(flat);
                std::array<Real, policy::Observation::kDim> obs_r{};
                for (int i = 0; i < policy::Observation::kDim; ++i) {
                    obs_r[static_cast<std::size_t>(i)] = static_cast<Real>(flat[static_cast<std::size_t>(i)]);
                }
                net.eval_full(params, obs_r, hist_flat, ev);
                hist.push(flat);
                alpha = static_cast<double>(ev.alpha_gain);
                return {static_cast<double>(ev.mean[0]), static_cast<double>(ev.mean[1]),
                        static_cast<double>(ev.mean[2])};
            }
        };
        return std::make_unique<NetPolicy>(cfg, *shared);
    };
}

}  // namespace seanav::eval
