#include "seanav/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "seanav/acsi.hpp"
#include "seanav/config.hpp"
#include "seanav/rewards.hpp"
#include "seanav/rng.hpp"
#include "seanav/shield.hpp"
#include "seanav/trainer.hpp"
#include "seanav/world.hpp"

namespace seanav::checks {

namespace {

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), pattern, a, b, c);
    return buf;
}

shield::FusedBarrier make_barrier(double h, const std::array<double, 3>& g) {
    shield::FusedBarrier fb;
    fb.h = h;
    fb.grad = g;
    return fb;
}

}  // namespace

CheckResult check_lse_sandwich(int cases, std::uint64_t seed) {
    CheckResult r{"lse-sandwich"};
    Rng rng(seed);
    const double ks[] = {1.0, 5.0, 10.0, 50.0};
    double worst = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < cases; ++c) {
        const std::size_t n = 1 + rng.uniform_index(41);
        shield::ConstraintSet cs;
        cs.residuals.resize(n);
        cs.gradients.assign(n, {1.0, 0.0, 0.0});
        double h_min = std::numeric_limits<double>::infinity();
        for (auto& v : cs.residuals) {
            v = rng.uniform(-2.0, 5.0);
            h_min = std::min(h_min, v);
        }
        const double k = ks[c % 4];
        const auto fb = shield::fuse_lse(cs, k);
        const double lower = h_min - std::log(static_cast<double>(n)) / k;
        worst = std::max(worst, std::max(lower - fb.h, fb.h - h_min));
    }
    r.worst = worst;
    r.passed = worst <= 1e-9;
    r.detail = fmt("max sandwich violation %.3g over %.0f cases (tol 1e-9)", worst,
                   static_cast<double>(cases));
    return r;
}

CheckResult check_qp_equivalence(int cases, std::uint64_t seed) {
    CheckResult r{"qp-equivalence"};
    Rng rng(seed);
    double worst = 0.0;
    for (int c = 0; c < cases; ++c) {
        std::array<double, 3> g{};
        double gg = 0.0;
        do {
            gg = 0.0;
            for (auto& v : g) {
                v = rng.uniform(-2.0, 2.0);
                gg += v * v;
            }
        } while (gg <= 1.001e-6);
        const auto fb = make_barrier(rng.uniform(-1.0, 1.0), g);
        const double alpha = rng.uniform(0.1, 3.0);
        const VelocityCommand u{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
                                rng.uniform(-2.0, 2.0)};
        const auto damped = shield::project_damped(u, fb, alpha, 0.0);
        const auto qp = shield::solve_qp_oracle(u, fb, alpha);
        for (int j = 0; j < 3; ++j) {
            worst = std::max(worst, std::abs(damped.u_safe[j] - qp[j]));
        }
    }
    r.worst = worst;
    r.passed = worst <= 1e-9;
    r.detail = fmt("max component gap %.3g over %.0f cases (tol 1e-9)", worst,
                   static_cast<double>(cases));
    return r;
}

CheckResult check_damping_bound(int cases, std::uint64_t seed) {
    CheckResult r{"damping-bound"};
    Rng rng(seed);
    const double dampings[] = {1e-3, 1e-2, 0.1, 1.0};
    double worst = -std::numeric_limits<double>::infinity();
    bool ok = true;
    for (int c = 0; c < cases; ++c) {
        std::array<double, 3> g{};
        if (c % 10 != 0) {
            for (auto& v : g) v = rng.uniform(-2.0, 2.0);
        }
        const double h = rng.uniform(-1.0, 1.0);
        const double alpha = rng.uniform(0.1, 3.0);
        const VelocityCommand u{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
                                rng.uniform(-2.0, 2.0)};
        const double eps = dampings[c % 4];
        const auto out = shield::project_damped(u, make_barrier(h, g), alpha, eps);
        const double b = g[0] * u.vx + g[1] * u.vy + g[2] * u.wz + alpha * h;
        const double bound = std::abs(b) / eps;
        ok = ok && std::abs(out.eta) <= bound;
        worst = std::max(worst, std::abs(out.eta) - bound);
    }
    r.worst = worst;
    r.passed = ok;
    r.detail = fmt("max |eta| excess over |b|/eps_d: %.3g over %.0f cases", worst,
                   static_cast<double>(cases));
    return r;
}

CheckResult check_projection_jacobian(int cases, std::uint64_t seed) {
    CheckResult r{"projection-jacobian"};
    Rng rng(seed);
    const double step = 1e-5;
    const double dampings[] = {1e-2, 0.1, 1.0};
    double worst = 0.0;
    int accepted = 0, skipped = 0;
    while (accepted < cases) {
        std::array<double, 3> g{};
        for (auto& v : g) v = rng.uniform(-2.0, 2.0);
        const double h = rng.uniform(-1.0, 1.0);
        const double alpha = rng.uniform(0.1, 3.0);
        const VelocityCommand u{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
                                rng.uniform(-2.0, 2.0)};
        const double damping = dampings[(accepted + skipped) % 3];
        const double b = g[0] * u.vx + g[1] * u.vy + g[2] * u.wz + alpha * h;
        if (std::abs(b) < 1e-7) {
            ++skipped;
            continue;
        }
        ++accepted;
        const auto fb = make_barrier(h, g);
        const auto out = shield::project_damped(u, fb, alpha, damping);
        for (int j = 0; j < 3; ++j) {
            VelocityCommand up = u, um = u;
            up[j] += step;
            um[j] -= step;
            const auto fp = shield::project_damped(up, fb, alpha, damping).u_safe;
            const auto fm = shield::project_damped(um, fb, alpha, damping).u_safe;
            for (int i = 0; i < 3; ++i) {
                const double fd = (fp[i] - fm[i]) / (2.0 * step);
                const double an = out.jac_u[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                worst = std::max(worst, std::abs(fd - an) / std::max(1.0, std::abs(an)));
            }
        }
        const auto ap = shield::project_damped(u, fb, alpha + step, damping).u_safe;
        const auto am = shield::project_damped(u, fb, alpha - step, damping).u_safe;
        for (int i = 0; i < 3; ++i) {
            const double fd = (ap[i] - am[i]) / (2.0 * step);
            const double an = out.jac_alpha[static_cast<std::size_t>(i)];
            worst = std::max(worst, std::abs(fd - an) / std::max(1.0, std::abs(an)));
        }
    }
    r.worst = worst;
    r.passed = worst <= 1e-4;
    r.detail = fmt("max relative Jacobian error %.3g over %.0f cases, %g near-boundary skips", worst,
                   static_cast<double>(cases), static_cast<double>(skipped));
    return r;
}

CheckResult check_loss_gradient(std::uint64_t seed) {
    CheckResult r{"loss-gradient"};

    Config cfg;
    cfg.policy.history_length = 3;
    cfg.policy.encoder_hidden = 8;
    cfg.policy.latent_dim = 8;
    cfg.policy.backbone_hidden = 8;
    cfg.policy.feature_dim = 8;
    cfg.policy.nav_hidden = 8;
    cfg.policy.alpha_hidden = 8;
    cfg.policy.critic_hidden = 8;
    cfg.policy.critic_hidden2 = 8;
    cfg.train.num_envs = 2;
    cfg.train.rollout_steps = 8;
    cfg.train.threads = 1;

    trainer::Trainer<double> tr(cfg, world::Difficulty::Easy, seed);
    tr.run_iteration();
    const auto& batch = tr.batch();

    std::vector<double> params(tr.params().begin(), tr.params().end());
    const auto& net = tr.net();
    policy::PolicyEval<double> ev;
    std::vector<double> hist(static_cast<std::size_t>(cfg.policy.history_length) *
                             policy::Observation::kDim);

    // Keep every piecewise-linear switch (clip, hinge, half-space boundary,
    // actuator bounds) away from the difference stencil.
    const double margin = 1e-3;
    std::vector<std::uint32_t> picks;
    for (std::uint32_t idx = 0; idx < batch.sample_count() && picks.size() < 4; ++idx) {
        const int e = static_cast<int>(idx) / batch.steps;
        const int t = static_cast<int>(idx) % batch.steps;
        const int row = batch.horizon + t;
        batch.gather_history(e, row, batch.hist_from[idx], hist);
        const std::span<const double> obs(batch.obs_row(e, row),
                                          static_cast<std::size_t>(policy::Observation::kDim));
        net.eval_full(params, obs, hist, ev);
        const double adv = batch.advantages[idx];
        if (std::abs(adv) < 1e-6) continue;
        const double ratio =
            std::exp(policy::gaussian_log_prob(batch.actions[idx], ev.mean, ev.log_std) -
                     batch.log_prob_old[idx]);
        if (std::abs(ratio - (1.0 - cfg.train.clip_ratio)) < margin ||
            std::abs(ratio - (1.0 + cfg.train.clip_ratio)) < margin) {
            continue;
        }
        const auto& g = batch.barrier_grad[idx];
        const double alpha = ev.alpha_gain;
        const double b = g[0] * ev.mean[0] + g[1] * ev.mean[1] + g[2] * ev.mean[2] +
                         alpha * batch.barrier_h[idx];
        if (std::abs(b) < margin) continue;
        if (std::abs(alpha - cfg.shield.alpha_min) < margin) continue;
        const auto proj = shield::project_damped({ev.mean[0], ev.mean[1], ev.mean[2]},
                                                 make_barrier(batch.barrier_h[idx], g), alpha,
                                                 cfg.shield.damping);
        bool clear = true;
        for (int j = 0; j < 3 && clear; ++j) {
            const auto uj = static_cast<std::size_t>(j);
            clear = std::abs(proj.u_safe[j] - cfg.train.u_min[uj]) > margin &&
                    std::abs(proj.u_safe[j] - cfg.train.u_max[uj]) > margin;
        }
        if (clear) picks.push_back(idx);
    }
    if (picks.empty()) {
        r.detail = "no smooth transition found in the probe batch";
        return r;
    }

    std::vector<double> g_an(params.size(), 0.0);
    std::vector<double> scratch(params.size(), 0.0);
    trainer::LossReport rep;
    tr.loss_and_grad(params, batch, picks, g_an, rep);

    const double step = 1e-5;
    double num = 0.0, den = 0.0, max_coord = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + step;
        const double lp = tr.loss_and_grad(params, batch, picks, scratch, rep);
        params[i] = keep - step;
        const double lm = tr.loss_and_grad(params, batch, picks, scratch, rep);
        params[i] = keep;
        const double fd = (lp - lm) / (2.0 * step);
        num += (fd - g_an[i]) * (fd - g_an[i]);
        den += fd * fd;
        max_coord = std::max(max_coord, std::abs(fd - g_an[i]));
    }
    const double rel = std::sqrt(num) / std::max(std::sqrt(den), 1e-8);
    r.worst = rel;
    r.passed = rel <= 1e-3;
    r.detail = fmt("relative gradient error %.3g over %g parameters, max coordinate gap %.3g", rel,
                   static_cast<double>(params.size()), max_coord);
    return r;
}

CheckResult check_forward_invariance() {
    CheckResult r{"forward-invariance"};
    const world::WorldConfig wc;
    shield::ShieldParams sp;
    sp.damping = 1e-3;
    world::Scenario empty;
    empty.room_half_extent = wc.room_half_extent;

    const double dt = 1e-3;
    const int steps = 10000;
    const std::array<double, 3> ceiling{17.0, 8.0, 10.0};
    const VelocityCommand commands[] = {
        {1.7, 0.0, 0.0}, {1.7, 0.8, 0.0}, {1.7, -0.8, 0.0}, {1.2, 0.0, 1.0}, {0.5, 0.8, -0.5}};
    const double alphas[] = {0.5, 1.0, 2.0};

    double min_h = std::numeric_limits<double>::infinity();
    bool collided = false;
    for (const double alpha : alphas) {
        for (const auto& cmd : commands) {
            world::RobotState s{{0.0, 0.0}, 0.0, {}};
            for (int k = 0; k < steps; ++k) {
                const auto scan = world::cast_lidar(empty, s, wc);
                const auto cs = shield::build_constraints(scan, sp);
                const auto fb = shield::fuse_lse(cs, sp.lse_k);
                min_h = std::min(min_h, fb.h);
                const auto out = shield::project_damped(cmd, fb, alpha, sp.damping);
                // The invariance statement is for the velocity-controlled
                // kinematic model, so the shielded command is integrated
                // directly (no tracking lag).
                s = world::step_dynamics(s, out.u_safe, dt, 0.0, ceiling);
                collided = collided ||
                           world::check_collision(empty, s.position, wc.footprint_train).hit;
            }
        }
    }
    r.worst = min_h;
    r.passed = min_h >= -0.01 && !collided;
    r.detail = fmt("min fused barrier %.4g over 15 wall charges of %gs (floor -0.01)", min_h,
                   steps * dt) + (collided ? ", collision occurred" : "");
    return r;
}

CheckResult check_replay_fraction(int cases, std::uint64_t seed) {
    CheckResult r{"replay-fraction"};
    acsi::StateHistoryRing ring(3.0, 0.1);
    world::RobotState s;
    for (int i = 0; i < 40; ++i) {
        s.position = {0.1 * i, 0.0};
        ring.push(s, 0.1 * i);
    }

    const double levels[] = {0.0, 1.0, 0.5};
    const double expected[] = {0.1, 0.5, 0.3};
    double worst = 0.0;
    bool ok = true;
    std::string parts;
    for (int i = 0; i < 3; ++i) {
        acsi::CurriculumState cs;
        cs.l_goal = levels[i];
        const double p = cs.p_reset();
        if (std::abs(p - expected[i]) > 1e-12) ok = false;

        Rng rng(seed + static_cast<std::uint64_t>(i));
        int replays = 0;
        for (int c = 0; c < cases; ++c) {
            const auto dec = acsi::on_collision(ring, cs, 3.9, 1.0, rng);
            if (dec.kind == acsi::ResetDecision::Kind::ReplayCritical) {
                ++replays;
                if (dec.snapshot.time > 2.9000001) ok = false;
            }
        }
        const double f = static_cast<double>(replays) / cases;
        const double sigma = std::sqrt(p * (1.0 - p) / cases);
        const double gap = std::abs(f - p);
        worst = std::max(worst, gap / (3.0 * sigma));
        ok = ok && gap <= 3.0 * sigma;
        parts += fmt(" p=%.2g f=%.4g", p, f);
    }
    r.worst = worst;
    r.passed = ok;
    r.detail = "replay fractions within 3 sigma of closed-form probabilities:" + parts;
    return r;
}

CheckResult check_reward_table() {
    CheckResult r{"reward-table"};
    const rewards::RewardWeights w;
    const double inf = std::numeric_limits<double>::infinity();
    double worst = 0.0;

    struct Row {
        const char* name;
        rewards::RewardContext ctx;
        rewards::RewardBreakdown want;
    };
    auto prox = [](double d) { return 1.0 / (1.0 + 2.0 * d * d); };

    std::vector<Row> rows;
    {
        Row row{"termination", {}, {}};
        row.ctx = {4.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, false, true, inf};
        row.want.termination = -100.0;
        row.want.velocity = 15.0 * (std::cos(0.0) * 0.0 + prox(4.0));
        rows.push_back(row);
    }
    {
        Row row{"reach", {}, {}};
        row.ctx = {0.3, 0.4, 0.0, 0.7, 0.0, 0.0, 0.0, 0.0, false, false, inf};
        row.want.reach = 10.0 * prox(0.3);
        row.want.velocity = 15.0 * (std::cos(0.4) * 0.7 + prox(0.3));
        row.want.clearance = 15.0 * prox(0.3);
        rows.push_back(row);
    }
    {
        Row row{"velocity", {}, {}};
        row.ctx = {1.0, 0.0, 0.3, 1.0, 0.0, 0.0, 0.0, 0.0, false, false, inf};
        row.want.velocity = 15.0 * (std::cos(0.0) * 1.0 + prox(1.0));
        row.want.clearance = 15.0 * prox(1.0);
        rows.push_back(row);
    }
    {
        Row row{"clearance-far", {}, {}};
        row.ctx = {2.0, 1.0, 0.2, 0.5, 0.0, 0.0, 0.0, 0.0, false, false, inf};
        row.want.velocity = 15.0 * (std::cos(1.0) * 0.5 + prox(2.0));
        row.want.clearance = 15.0 * (std::cos(0.2) * 0.5);
        rows.push_back(row);
    }
    {
        Row row{"stuck", {}, {}};
        row.ctx = {2.0, 0.9, 0.0, 0.3, 0.0, 0.5, 0.0, 0.0, false, false, 0.05};
        row.want.velocity = 15.0 * (std::cos(0.9) * 0.3 + prox(2.0));
        row.want.clearance = 15.0 * (std::cos(0.0) * 0.3);
        row.want.stuck = -5.0;
        rows.push_back(row);
    }
    {
        Row row{"collision", {}, {}};
        row.ctx = {0.8, 0.2, 0.0, 0.6, -0.2, 0.3, 0.0, 0.0, true, true, inf};
        row.want.termination = -100.0;
        row.want.velocity = 15.0 * (std::cos(0.2) * 0.6 + prox(0.8));
        row.want.clearance = 15.0 * prox(0.8);
        row.want.collision = -4.0 * (1.0 + 4.0 * (0.6 * 0.6 + (-0.2) * (-0.2) + 0.3 * 0.3));
        rows.push_back(row);
    }
    {
        Row row{"angular", {}, {}};
        row.ctx = {3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.3, -0.4, false, false, inf};
        row.want.velocity = 15.0 * prox(3.0);
        row.want.angular = -0.05 * std::sqrt(0.3 * 0.3 + 0.4 * 0.4);
        rows.push_back(row);
    }

    bool ok = true;
    std::string failing;
    for (auto& row : rows) {
        row.want.total = row.want.termination + row.want.reach + row.want.velocity +
                         row.want.clearance + row.want.stuck + row.want.collision +
                         row.want.angular;
        const auto got = rewards::compute_reward(row.ctx, w);
        const double gaps[] = {
            std::abs(got.termination - row.want.termination), std::abs(got.reach - row.want.reach),
            std::abs(got.velocity - row.want.velocity),
            std::abs(got.clearance - row.want.clearance), std::abs(got.stuck - row.want.stuck),
            std::abs(got.collision - row.want.collision), std::abs(got.angular - row.want.angular),
            std::abs(got.total - row.want.total)};
        double gap = 0.0;
        for (const double v : gaps) gap = std::max(gap, v);
        worst = std::max(worst, gap);
        if (gap > 1e-12) {
            ok = false;
            failing += std::string(" ") + row.name;
        }
    }
    r.worst = worst;
    r.passed = ok;
    r.detail = fmt("max term gap %.3g over 7 rows (tol 1e-12)", worst) +
               (failing.empty() ? "" : "; failing:" + failing);
    return r;
}

std::vector<CheckResult> run_all() {
    return {check_lse_sandwich(),       check_qp_equivalence(), check_damping_bound(),
            check_projection_jacobian(), check_loss_gradient(),  check_forward_invariance(),
            check_replay_fraction(),    check_reward_table()};
}

}  // namespace seanav::checks
