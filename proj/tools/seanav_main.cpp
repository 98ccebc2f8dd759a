#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seanav/checkpoint.hpp"
#include "seanav/checks.hpp"
#include "seanav/config.hpp"
#include "seanav/eval.hpp"
#include "seanav/trainer.hpp"
#include "seanav/world.hpp"

namespace {

using namespace seanav;

Config resolve_config(const std::string& path, const nlohmann::json* fallback = nullptr) {
    Config cfg;
    if (!path.empty()) {
        cfg = load_config_file(path);
    } else if (fallback && !fallback->is_null()) {
        cfg = config_from_json(*fallback);
    }
    apply_env_overrides(cfg);
    validate_config(cfg);
    return cfg;
}

template <typename Real>
int run_train_typed(const Config& cfg, world::Difficulty diff, std::uint64_t seed,
                    trainer::Ablation ablation, const std::string& stats_path,
                    const std::string& save_path, bool quiet) {
    trainer::Trainer<Real> tr(cfg, diff, seed, ablation);

    std::ofstream stats;
    if (!stats_path.empty()) {
        stats.open(stats_path);
        if (!stats) {
            std::cerr << "cannot open stats file: " << stats_path << "\n";
            return 2;
        }
        trainer::write_stats_csv_header(stats);
    }

    for (int i = 0; i < cfg.train.iterations; ++i) {
        const auto s = tr.run_iteration();
        if (stats.is_open()) trainer::write_stats_csv_row(stats, s);
        if (!quiet) {
            std::printf(
                "iter %4d  steps %9lld  return %9.2f  ep %3d  succ %3d  coll %3d  "
                "alpha %5.3f  active %4.2f  p_reset %4.2f  sps %6.0f\n",
                s.iteration, s.env_steps, s.mean_episode_return, s.episodes, s.successes,
                s.collisions, s.mean_alpha, s.shield_active_fraction, s.mean_p_reset,
                s.steps_per_second);
            std::fflush(stdout);
        }
    }

    if (!save_path.empty()) {
        checkpoint::Checkpoint ck;
        ck.shapes = tr.net().shape_table();
        ck.params = tr.params_f64();
        ck.meta = {{"config", config_to_json(cfg)},
                   {"config_hash", config_hash(cfg)},
                   {"iteration", tr.iteration()},
                   {"env_steps", tr.env_steps()},
                   {"difficulty", world::to_string(diff)},
                   {"seed", seed},
                   {"ablation", ablation.name()},
                   {"precision", sizeof(Real) == 4 ? "f32" : "f64"}};
        checkpoint::save(save_path, ck);
        if (!quiet) std::printf("saved checkpoint to %s\n", save_path.c_str());
    }
    return 0;
}

int run_eval(const std::string& config_path, const std::string& ckpt_path,
             const std::string& policy_name, world::Difficulty diff, std::uint64_t seed,
             int trials, int groups, bool no_shield, const std::string& trials_csv, int threads) {
    checkpoint::Checkpoint ck;
    nlohmann::json meta_cfg;
    const bool have_ck = !ckpt_path.empty();
    if (have_ck) {
        ck = checkpoint::load(ckpt_path);
        if (ck.meta.contains("config")) meta_cfg = ck.meta["config"];
    }
    const Config cfg = resolve_config(config_path, &meta_cfg);

    eval::PolicyFactory factory;
    std::string name;
    if (have_ck) {
        policy::PolicyNet<double> probe(cfg.policy);
        if (ck.params.size() != probe.param_count() || ck.shapes != probe.shape_table()) {
            std::cerr << "checkpoint does not match the configured policy architecture\n";
            return 2;
        }
        factory = eval::make_net_policy<double>(cfg, ck.params);
        name = "net";
    } else if (policy_name == "zero") {
        factory = eval::make_zero_policy();
        name = "zero";
    } else if (policy_name == "goto") {
        factory = eval::make_goto_policy(cfg);
        name = "goto";
    } else {
        std::cerr << "unknown policy: " << policy_name << "\n";
        return 2;
    }

    const int n = trials > 0 ? trials : cfg.eval.trials;
    const int g = groups > 0 ? groups : cfg.eval.seed_groups;
    const auto rep = eval::evaluate(cfg, diff, n, g, seed, !no_shield, factory, name, threads);
    std::cout << rep.summary_json().dump(2) << "\n";

    if (!trials_csv.empty()) {
        std::ofstream os(trials_csv);
        if (!os) {
            std::cerr << "cannot open trials file: " << trials_csv << "\n";
            return 2;
        }
        rep.write_trials_csv(os);
    }
    return 0;
}

int run_check(const std::vector<std::string>& only) {
    using Entry = std::pair<std::string, std::function<checks::CheckResult()>>;
    const std::vector<Entry> registry = {
        {"lse-sandwich", [] { return checks::check_lse_sandwich(); }},
        {"qp-equivalence", [] { return checks::check_qp_equivalence(); }},
        {"damping-bound", [] { return checks::check_damping_bound(); }},
        {"projection-jacobian", [] { return checks::check_projection_jacobian(); }},
        {"loss-gradient", [] { return checks::check_loss_gradient(); }},
        {"forward-invariance", [] { return checks::check_forward_invariance(); }},
        {"replay-fraction", [] { return checks::check_replay_fraction(); }},
        {"reward-table", [] { return checks::check_reward_table(); }},
    };
    bool all_passed = true;
    bool ran_any = false;
    for (const auto& [name, fn] : registry) {
        if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
        ran_any = true;
        const auto res = fn();
        std::printf("%s %s: %s\n", res.passed ? "PASS" : "FAIL", res.name.c_str(),
                    res.detail.c_str());
        std::fflush(stdout);
        all_passed = all_passed && res.passed;
    }
    if (!ran_any) {
        std::cerr << "no check matched the requested names\n";
        return 2;
    }
    return all_passed ? 0 : 1;
}

int run_dump_traj(const std::string& config_path, const std::string& ckpt_path,
                  world::Difficulty diff, std::uint64_t seed, bool no_shield,
                  const std::string& out_path) {
    checkpoint::Checkpoint ck;
    nlohmann::json meta_cfg;
    const bool have_ck = !ckpt_path.empty();
    if (have_ck) {
        ck = checkpoint::load(ckpt_path);
        if (ck.meta.contains("config")) meta_cfg = ck.meta["config"];
    }
    const Config cfg = resolve_config(config_path, &meta_cfg);

    eval::PolicyFactory factory =
        have_ck ? eval::make_net_policy<double>(cfg, ck.params) : eval::make_goto_policy(cfg);
    const auto scenario =
        world::generate_scenario(diff, derive_seed(seed, 0xd7a9ULL), cfg.world);
    const world::OccupancyGrid grid(scenario, cfg.world.footprint_eval, cfg.world.grid_cell);

    std::vector<eval::TrialTraceRow> trace;
    auto policy = factory();
    const auto rec = eval::run_trial(cfg, scenario, grid, derive_seed(seed, 0x57a6ULL),
                                     !no_shield, *policy, &trace);

    std::ofstream os(out_path);
    if (!os) {
        std::cerr << "cannot open output file: " << out_path << "\n";
        return 2;
    }
    os << "t,x,y,theta,vx,vy,wz,h,alpha,eta\n";
    for (const auto& row : trace) {
        os << trainer::format_double(row.t) << ',' << trainer::format_double(row.x) << ','
           << trainer::format_double(row.y) << ',' << trainer::format_double(row.theta) << ','
           << trainer::format_double(row.vx) << ',' << trainer::format_double(row.vy) << ','
           << trainer::format_double(row.wz) << ',' << trainer::format_double(row.h) << ','
           << trainer::format_double(row.alpha) << ',' << trainer::format_double(row.eta) << '\n';
    }
    std::printf("%s in %.2fs, path %.2fm, %zu trace rows written to %s\n",
                eval::to_string(rec.outcome), rec.duration, rec.path_length, trace.size(),
                out_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"shielded exploration and navigation on a velocity-controlled planar robot"};
    app.require_subcommand(1);

    std::string config_path, ckpt_path, stats_path, save_path, trials_csv, out_path;
    std::string difficulty = "easy", ablate = "full", policy_name = "goto";
    std::uint64_t seed = 0;
    int iterations = -1, trials = -1, groups = -1, threads = 0;
    bool f64 = false, quiet = false, no_shield = false;
    std::vector<std::string> only;

    auto* train = app.add_subcommand("train", "train a policy with PPO behind the safety shield");
    train->add_option("-c,--config", config_path, "JSON config file");
    train->add_option("-s,--seed", seed, "master seed");
    train->add_option("-d,--difficulty", difficulty, "easy, medium or hard");
    train->add_option("-n,--iterations", iterations, "override the configured iteration count");
    train->add_option("-a,--ablate", ablate, "full, no-shield, no-acsi or no-reg");
    train->add_option("-j,--threads", threads, "worker threads (0 = hardware)");
    train->add_option("--stats", stats_path, "write per-iteration statistics CSV here");
    train->add_option("--save", save_path, "write the final checkpoint here");
    train->add_flag("--f64", f64, "train in double precision");
    train->add_flag("-q,--quiet", quiet, "suppress per-iteration console output");

    auto* ev = app.add_subcommand("eval", "evaluate a policy over seeded scenario groups");
    ev->add_option("-c,--config", config_path, "JSON config file (default: checkpoint sidecar)");
    ev->add_option("-k,--checkpoint", ckpt_path, "policy checkpoint");
    ev->add_option("-p,--policy", policy_name, "built-in policy when no checkpoint: goto or zero");
    ev->add_option("-s,--seed", seed, "evaluation seed");
    ev->add_option("-d,--difficulty", difficulty, "easy, medium or hard");
    ev->add_option("-n,--trials", trials, "trials per seed group");
    ev->add_option("-g,--groups", groups, "number of seed groups");
    ev->add_option("-j,--threads", threads, "worker threads (0 = hardware)");
    ev->add_flag("--no-shield", no_shield, "run the raw policy without the projection");
    ev->add_option("--trials-csv", trials_csv, "write per-trial records CSV here");

    auto* check = app.add_subcommand("check", "run the numerical verification suites");
    check->add_option("--only", only, "run only the named checks")->expected(-1);

    auto* dump = app.add_subcommand("dump-traj", "record one trial trajectory to CSV");
    dump->add_option("-c,--config", config_path, "JSON config file (default: checkpoint sidecar)");
    dump->add_option("-k,--checkpoint", ckpt_path, "policy checkpoint (default: goto policy)");
    dump->add_option("-s,--seed", seed, "scenario and trial seed");
    dump->add_option("-d,--difficulty", difficulty, "easy, medium or hard");
    dump->add_flag("--no-shield", no_shield, "run the raw policy without the projection");
    dump->add_option("-o,--out", out_path, "trace CSV path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            Config cfg = resolve_config(config_path);
            if (iterations >= 0) cfg.train.iterations = iterations;
            if (threads > 0) cfg.train.threads = threads;
            const auto diff = world::difficulty_from_string(difficulty);
            const auto ab = trainer::Ablation::from_string(ablate);
            return f64 ? run_train_typed<double>(cfg, diff, seed, ab, stats_path, save_path, quiet)
                       : run_train_typed<float>(cfg, diff, seed, ab, stats_path, save_path, quiet);
        }
        if (ev->parsed()) {
            return run_eval(config_path, ckpt_path, policy_name,
                            world::difficulty_from_string(difficulty), seed, trials, groups,
                            no_shield, trials_csv, threads);
        }
        if (check->parsed()) return run_check(only);
        if (dump->parsed()) {
            return run_dump_traj(config_path, ckpt_path, world::difficulty_from_string(difficulty),
                                 seed, no_shield, out_path);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const checkpoint::CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
