#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "seanav/checks.hpp"
#include "seanav/config.hpp"
#include "seanav/eval.hpp"
#include "seanav/shield.hpp"
#include "seanav/trainer.hpp"
#include "seanav/world.hpp"

namespace py = pybind11;
using namespace seanav;

namespace {

Config config_from_str(const std::string& json_text) {
    if (json_text.empty()) {
        Config c;
        validate_config(c);
        return c;
    }
    return config_from_json(nlohmann::json::parse(json_text));
}

world::Scenario scenario_from_str(const std::string& json_text) {
    return nlohmann::json::parse(json_text).get<world::Scenario>();
}

py::dict shield_output_dict(const shield::ShieldOutput& out) {
    py::dict d;
    d["u_safe"] = std::array<double, 3>{out.u_safe.vx, out.u_safe.vy, out.u_safe.wz};
    d["eta"] = out.eta;
    d["active"] = out.active;
    d["jac_u"] = out.jac_u;
    d["jac_alpha"] = out.jac_alpha;
    return d;
}

py::dict report_dict(const eval::EvalReport& rep) {
    py::dict d;
    d["policy"] = rep.policy_name;
    d["difficulty"] = rep.difficulty;
    d["shield"] = rep.shield;
    d["groups"] = rep.groups;
    d["trials_per_group"] = rep.trials_per_group;
    d["successes"] = rep.successes;
    d["collisions"] = rep.collisions;
    d["timeouts"] = rep.timeouts;
    d["success_rate_mean"] = rep.sr_mean;
    d["success_rate_std"] = rep.sr_std;
    d["avg_speed_mean"] = rep.as_mean;
    const int total = rep.groups * rep.trials_per_group;
    d["success_rate"] = total > 0 ? static_cast<double>(rep.successes) / total : 0.0;
    std::ostringstream csv;
    rep.write_trials_csv(csv);
    d["trials_csv"] = csv.str();
    return d;
}

py::dict stats_dict(const trainer::IterationStats& s) {
    py::dict d;
    d["iteration"] = s.iteration;
    d["env_steps"] = s.env_steps;
    d["loss_total"] = s.loss.total;
    d["loss_ppo"] = s.loss.ppo;
    d["loss_policy"] = s.loss.policy;
    d["loss_value"] = s.loss.value;
    d["entropy"] = s.loss.entropy;
    d["loss_shield"] = s.loss.shield;
    d["loss_reg"] = s.loss.reg;
    d["reward_total"] = s.mean_reward.total;
    d["mean_alpha"] = s.mean_alpha;
    d["shield_active_fraction"] = s.shield_active_fraction;
    d["mean_p_reset"] = s.mean_p_reset;
    d["mean_l_goal"] = s.mean_l_goal;
    d["episodes"] = s.episodes;
    d["successes"] = s.successes;
    d["collisions"] = s.collisions;
    d["timeouts"] = s.timeouts;
    d["replays"] = s.replays;
    d["full_resets"] = s.full_resets;
    d["grad_norm"] = s.grad_norm;
    return d;
}

// float32 trainer behind a stable Python surface.
class PyTrainer {
public:
    PyTrainer(const std::string& config_json, const std::string& difficulty, std::uint64_t seed,
              const std::string& ablation)
        : cfg_(config_from_str(config_json)),
          impl_(cfg_, world::difficulty_from_string(difficulty), seed,
                trainer::Ablation::from_string(ablation)) {}

    py::dict run_iteration() {
        trainer::IterationStats s;
        {
            py::gil_scoped_release release;
            s = impl_.run_iteration();
        }
        return stats_dict(s);
    }

    std::size_t param_count() const { return impl_.net().param_count(); }
    std::vector<double> params() const { return impl_.params_f64(); }
    void set_params(const std::vector<double>& p) { impl_.set_params_f64(p); }

    py::dict evaluate(int trials_per_group, int groups, std::uint64_t seed, int threads) {
        auto factory = eval::make_net_policy<float>(cfg_, impl_.params_f64());
        eval::EvalReport rep;
        {
            py::gil_scoped_release release;
            rep = eval::evaluate(cfg_, impl_.difficulty(), trials_per_group, groups, seed,
                                 impl_.ablation().shield, factory, "net", threads);
        }
        return report_dict(rep);
    }

private:
    Config cfg_;
    trainer::Trainer<float> impl_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Safe navigation training core: soft-min barrier shield, collision-state "
              "resets, PPO on a planar lidar robot.";

    m.attr("RAY_COUNT") = world::LidarScan::kRayCount;
    m.attr("OBS_DIM") = policy::Observation::kDim;

    m.def(
        "fuse_lse",
        [](const std::vector<double>& residuals,
           const std::vector<std::array<double, 3>>& gradients, double k) {
            shield::ConstraintSet cs;
            cs.residuals = residuals;
            cs.gradients = gradients.empty()
                               ? std::vector<std::array<double, 3>>(residuals.size())
                               : gradients;
            if (cs.gradients.size() != cs.residuals.size()) {
                throw std::invalid_argument("gradients must match residuals in length");
            }
            const auto f = shield::fuse_lse(cs, k);
            py::dict d;
            d["h"] = f.h;
            d["grad"] = f.grad;
            d["weights"] = f.weights;
            return d;
        },
        py::arg("residuals"), py::arg("gradients") = std::vector<std::array<double, 3>>{},
        py::arg("k") = 10.0,
        "Soft-min fusion of barrier residuals; returns the fused value, its "
        "command-space gradient, and the softmax weights.");

    m.def(
        "project_damped",
        [](const std::array<double, 3>& nominal, double h, const std::array<double, 3>& grad,
           double alpha, double damping) {
            shield::FusedBarrier b;
            b.h = h;
            b.grad = grad;
            const auto out = shield::project_damped({nominal[0], nominal[1], nominal[2]}, b,
                                                    alpha, damping);
            return shield_output_dict(out);
        },
        py::arg("nominal"), py::arg("h"), py::arg("grad"), py::arg("alpha") = 1.0,
        py::arg("damping") = 1.0,
        "Closed-form damped projection of a command onto the barrier half-space.");

    m.def(
        "shield_filter",
        [](const std::vector<double>& ranges, const std::array<double, 3>& nominal,
           double alpha, double d_safe, double lse_k, double damping) {
            if (ranges.size() != world::LidarScan::kRayCount) {
                throw std::invalid_argument("expected 41 ranges");
            }
            world::LidarScan scan;
            std::copy(ranges.begin(), ranges.end(), scan.ranges.begin());
            shield::ShieldParams p;
            p.d_safe = d_safe;
            p.lse_k = lse_k;
            p.damping = damping;
            const auto cs = shield::build_constraints(scan, p);
            const auto fused = shield::fuse_lse(cs, p.lse_k);
            const auto out = shield::project_damped({nominal[0], nominal[1], nominal[2]},
                                                    fused, alpha, p.damping);
            auto d = shield_output_dict(out);
            d["h"] = fused.h;
            d["grad"] = fused.grad;
            return d;
        },
        py::arg("ranges"), py::arg("nominal"), py::arg("alpha") = 1.0,
        py::arg("d_safe") = 0.45, py::arg("lse_k") = 10.0, py::arg("damping") = 1.0,
        "Full safety filter for one lidar scan: residuals, soft-min fusion, projection.");

    m.def(
        "generate_scenario",
        [](const std::string& difficulty, std::uint64_t seed, const std::string& config_json) {
            const auto cfg = config_from_str(config_json);
            const auto s =
                world::generate_scenario(world::difficulty_from_string(difficulty), seed, cfg.world);
            return nlohmann::json(s).dump();
        },
        py::arg("difficulty"), py::arg("seed"), py::arg("config_json") = std::string(),
        "Procedurally generate an obstacle room; returns scenario JSON.");

    m.def(
        "cast_lidar",
        [](const std::string& scenario_json, double x, double y, double theta,
           const std::string& config_json) {
            const auto cfg = config_from_str(config_json);
            const auto scenario = scenario_from_str(scenario_json);
            world::RobotState st;
            st.position = {x, y};
            st.heading = theta;
            const auto scan = world::cast_lidar(scenario, st, cfg.world);
            return std::vector<double>(scan.ranges.begin(), scan.ranges.end());
        },
        py::arg("scenario_json"), py::arg("x"), py::arg("y"), py::arg("theta"),
        py::arg("config_json") = std::string(),
        "41-ray planar lidar scan of a scenario from a given pose.");

    m.def("default_config", [] { return config_to_json(Config{}).dump(2); },
          "Canonical default configuration as JSON.");

    m.def(
        "parse_config",
        [](const std::string& json_text) { return config_to_json(config_from_str(json_text)).dump(2); },
        py::arg("config_json"),
        "Validate a configuration (strict keys) and return its canonical JSON form.");

    m.def(
        "config_hash",
        [](const std::string& json_text) { return config_hash(config_from_str(json_text)); },
        py::arg("config_json") = std::string(), "Stable hash of a configuration.");

    m.def(
        "run_checks",
        [] {
            std::vector<checks::CheckResult> results;
            {
                py::gil_scoped_release release;
                results = checks::run_all();
            }
            py::list out;
            for (const auto& c : results) {
                py::dict d;
                d["name"] = c.name;
                d["passed"] = c.passed;
                d["worst"] = c.worst;
                d["detail"] = c.detail;
                out.append(d);
            }
            return out;
        },
        "Run the fast property checks (fusion sandwich, projection, gradients, "
        "invariance, resets, rewards).");

    m.def(
        "evaluate_policy",
        [](const std::string& config_json, const std::string& difficulty,
           const std::string& policy, int trials_per_group, int groups, std::uint64_t seed,
           bool use_shield, int threads) {
            const auto cfg = config_from_str(config_json);
            eval::PolicyFactory factory;
            if (policy == "zero") {
                factory = eval::make_zero_policy();
            } else if (policy == "goto") {
                factory = eval::make_goto_policy(cfg);
            } else {
                throw std::invalid_argument("policy must be 'zero' or 'goto'");
            }
            eval::EvalReport rep;
            {
                py::gil_scoped_release release;
                rep = eval::evaluate(cfg, world::difficulty_from_string(difficulty),
                                     trials_per_group, groups, seed, use_shield, factory, policy,
                                     threads);
            }
            return report_dict(rep);
        },
        py::arg("config_json") = std::string(), py::arg("difficulty") = "easy",
        py::arg("policy") = "goto", py::arg("trials_per_group") = 5, py::arg("groups") = 2,
        py::arg("seed") = 0, py::arg("use_shield") = true, py::arg("threads") = 0,
        "Run randomized trials with a built-in baseline policy; returns summary plus CSV.");

    py::class_<PyTrainer>(m, "Trainer")
        .def(py::init<const std::string&, const std::string&, std::uint64_t, const std::string&>(),
             py::arg("config_json") = std::string(), py::arg("difficulty") = "easy",
             py::arg("seed") = 0, py::arg("ablation") = "full")
        .def("run_iteration", &PyTrainer::run_iteration,
             "One rollout + update cycle; returns the iteration statistics.")
        .def("evaluate", &PyTrainer::evaluate, py::arg("trials_per_group") = 5,
             py::arg("groups") = 2, py::arg("seed") = 0, py::arg("threads") = 0,
             "Evaluate the current parameters on randomized trials.")
        .def_property_readonly("param_count", &PyTrainer::param_count)
        .def("params", &PyTrainer::params)
        .def("set_params", &PyTrainer::set_params, py::arg("params"));
}
