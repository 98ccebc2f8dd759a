#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "seanav/acsi.hpp"
#include "seanav/config.hpp"
#include "seanav/geometry.hpp"
#include "seanav/policy.hpp"
#include "seanav/rewards.hpp"
#include "seanav/rng.hpp"
#include "seanav/shield.hpp"
#include "seanav/threading.hpp"
#include "seanav/world.hpp"

namespace seanav::trainer {

struct Ablation {
    bool shield = true;
    bool acsi = true;
    bool regularizers = true;

    std::string name() const {
        if (!shield) return "no-shield";
        if (!acsi) return "no-acsi";
        if (!regularizers) return "no-reg";
        return "full";
    }

    static Ablation from_string(const std::string& s) {
        if (s.empty() || s == "none" || s == "full") return {};
        if (s == "no-shield") return {false, true, true};
        if (s == "no-acsi") return {true, false, true};
        if (s == "no-reg") return {true, true, false};
        throw std::invalid_argument("unknown ablation: " + s);
    }
};

// Per-episode domain randomization draw; ranges follow the training setup
// (sensor delay in ms, additive observation biases, friction and payload
// factors folded into the velocity tracking constant).
struct RandomizationDraw {
    double ray_delay_ms = 0.0;
    std::array<double, 3> gravity_noise{};
    std::array<double, 3> linvel_noise{};
    std::array<double, 3> angvel_noise{};
    double friction = 0.0;
    double mass_perturbation = 0.0;

    int delay_ticks(double policy_dt) const {
        return static_cast<int>(std::lround(ray_delay_ms / (1000.0 * policy_dt)));
    }

    double effective_tau(double tau_v) const {
        const double mass_factor = 1.0 + 0.1 * mass_perturbation;
        const double friction_factor = clamp(1.0 / (1.0 + friction), 0.5, 2.0);
        return tau_v * mass_factor * friction_factor;
    }
};

inline RandomizationDraw draw_randomization(Rng& rng, bool enabled) {
    RandomizationDraw d;
    if (!enabled) return d;
    d.ray_delay_ms = rng.uniform(40.0, 80.0);
    for (auto& v : d.gravity_noise) v = rng.uniform(-0.05, 0.05);
    for (auto& v : d.linvel_noise) v = rng.uniform(-0.1, 0.1);
    for (auto& v : d.angvel_noise) v = rng.uniform(-0.1, 0.1);
    d.friction = rng.uniform(-0.2, 1.25);
    d.mass_perturbation = rng.uniform(-1.5, 1.5);
    return d;
}

struct LossReport {
    double ppo = 0.0;       // clipped surrogate + value term - entropy bonus
    double policy = 0.0;
    double value = 0.0;
    double entropy = 0.0;
    double shield = 0.0;    // unweighted means of the raw terms
    double range = 0.0;
    double smooth = 0.0;
    double reg = 0.0;
    double total = 0.0;

    void finalize(double lambda_shield, double lambda_reg) {
        reg = range + smooth;
        total = ppo + lambda_shield * shield + lambda_reg * reg;
    }
};

struct IterationStats {
    int iteration = 0;
    long long env_steps = 0;
    LossReport loss;
    rewards::RewardBreakdown mean_reward;
    double mean_alpha = 0.0;
    double shield_active_fraction = 0.0;
    double mean_p_reset = 0.0;
    double mean_l_goal = 0.0;
    double mean_c_front = 0.0;
    double mean_episode_return = 0.0;   // mean total reward of episodes finished this iteration
    int episodes = 0;
    int successes = 0;
    int collisions = 0;
    int timeouts = 0;
    int replays = 0;
    int full_resets = 0;
    double grad_norm = 0.0;
    double steps_per_second = 0.0;      // wall clock; excluded from CSV output
};

void write_stats_csv_header(std::ostream& os);
void write_stats_csv_row(std::ostream& os, const IterationStats& s);
std::string format_double(double v);    // shortest round-trip decimal

// One PPO rollout: observation store plus per-sample fields. Observation rows
// are env-major with stride (H + steps + 1); row H + t holds the observation
// consumed at step t, rows [0, H) the carried pre-rollout history.
template <typename Real>
struct RolloutBatch {
    int num_envs = 0;
    int steps = 0;
    int horizon = 0;

    std::vector<Real> obs;
    std::vector<std::array<Real, 3>> actions;
    std::vector<Real> log_prob_old;
    std::vector<double> values_old;
    std::vector<double> rewards;
    std::vector<signed char> done;        // 0 running, 1 terminal, 2 truncated
    std::vector<double> bootstrap_value;  // V(next obs) for truncated samples
    std::vector<int> hist_from;           // first obs row of the episode at step t
    std::vector<int> next_hist_from;      // same after the step resolved
    std::vector<double> barrier_h;
    std::vector<std::array<double, 3>> barrier_grad;
    std::vector<Real> beta;               // smoothing interpolation draws
    std::vector<double> tail_value;       // per env, V at the final obs row
    std::vector<Real> advantages;
    std::vector<Real> returns;

    int row_stride() const { return horizon + steps + 1; }

    void resize(int envs, int s, int h) {
        num_envs = envs;
        steps = s;
        horizon = h;
        const std::size_t n = static_cast<std::size_t>(envs) * static_cast<std::size_t>(s);
        obs.assign(static_cast<std::size_t>(envs) * static_cast<std::size_t>(row_stride()) *
                       policy::Observation::kDim,
                   Real(0));
        actions.assign(n, {});
        log_prob_old.assign(n, Real(0));
        values_old.assign(n, 0.0);
        rewards.assign(n, 0.0);
        done.assign(n, 0);
        bootstrap_value.assign(n, 0.0);
        hist_from.assign(n, 0);
        next_hist_from.assign(n, 0);
        barrier_h.assign(n, 0.0);
        barrier_grad.assign(n, {});
        beta.assign(n, Real(0));
        tail_value.assign(static_cast<std::size_t>(envs), 0.0);
        advantages.assign(n, Real(0));
        returns.assign(n, Real(0));
    }

    Real* obs_row(int e, int row) {
        return obs.data() +
               (static_cast<std::size_t>(e) * static_cast<std::size_t>(row_stride()) +
                static_cast<std::size_t>(row)) *
                   policy::Observation::kDim;
    }
    const Real* obs_row(int e, int row) const {
        return const_cast<RolloutBatch*>(this)->obs_row_mut(e, row);
    }
    Real* obs_row_mut(int e, int row) { return obs_row(e, row); }

    // History window for the observation at row `row`: rows [row - H, row),
    // oldest first, rows before `from` zeroed.
    void gather_history(int e, int row, int from, std::span<Real> out) const {
        const int dim = policy::Observation::kDim;
        for (int k = 0; k < horizon; ++k) {
            const int r = row - horizon + k;
            Real* dst = out.data() + static_cast<std::size_t>(k) * dim;
            if (r < from) {
                std::fill(dst, dst + dim, Real(0));
            } else {
                const Real* src = obs_row(e, r);
                std::copy(src, src + dim, dst);
            }
        }
    }

    std::size_t sample_count() const {
        return static_cast<std::size_t>(num_envs) * static_cast<std::size_t>(steps);
    }
};

// Full training loss for one sample set: clipped PPO surrogate with value and
// entropy terms, shield consistency, actuator range and temporal smoothness
// regularizers. Gradients are accumulated into `grad`; scalars into `report`
// (unweighted sums, divided by the count by the caller).
template <typename Real>
class LossComputer {
public:
    LossComputer(const policy::PolicyNet<Real>& net, const Config& cfg, Ablation ablation)
        : net_(net), cfg_(cfg), ablation_(ablation) {}

    struct Workspace {
        policy::PolicyEval<Real> ev;
        policy::ActorEval<Real> actor_bar;
        policy::CriticEval<Real> critic_bar;
        nn::MlpCache<Real> enc_next;
        policy::PolicyWorkspace<Real> pws;
        std::vector<Real> hist, hist_next, x_bar, x_next, dx, dx_bar, dz_next;
    };

    // Returns the per-sample total loss; accumulates unweighted term sums.
    double sample_loss_grad(std::span<const Real> params, const RolloutBatch<Real>& batch,
                            std::size_t idx, std::span<Real> grad, LossReport& sums,
                            Workspace& ws) const {
        const auto& tc = cfg_.train;
        const int H = batch.horizon;
        const int dim = policy::Observation::kDim;
        const int e = static_cast<int>(idx) / batch.steps;
        const int t = static_cast<int>(idx) % batch.steps;
        const int row = H + t;

        ws.hist.resize(static_cast<std::size_t>(H) * dim);
        batch.gather_history(e, row, batch.hist_from[idx], ws.hist);
        const std::span<const Real> obs(batch.obs_row(e, row), static_cast<std::size_t>(dim));
        net_.eval_full(params, obs, ws.hist, ws.ev);

        const auto& act = batch.actions[idx];
        const Real logp = policy::gaussian_log_prob(act, ws.ev.mean, ws.ev.log_std);
        const Real ratio = std::exp(logp - batch.log_prob_old[idx]);
        const Real adv = batch.advantages[idx];
        const Real clipped = clamp(static_cast<double>(ratio), 1.0 - tc.clip_ratio, 1.0 + tc.clip_ratio);
        const Real surr1 = ratio * adv;
        const Real surr2 = clipped * adv;
        const bool use_clipped = static_cast<double>(surr2) < static_cast<double>(surr1);
        const double l_policy = -static_cast<double>(std::min(surr1, surr2));

        const Real v_err = ws.ev.value - batch.returns[idx];
        const double l_value = static_cast<double>(v_err) * static_cast<double>(v_err);
        const double ent = static_cast<double>(policy::gaussian_entropy(ws.ev.log_std));
        const double l_ppo = l_policy + tc.value_coef * l_value - tc.entropy_coef * ent;

        std::array<Real, 3> d_mean{};
        std::array<Real, 3> d_log_std{};
        Real d_alpha = Real(0);
        Real d_value = static_cast<Real>(2.0 * tc.value_coef * static_cast<double>(v_err));

        // d l_policy / d logp = -ratio * adv on the unclipped branch, 0 when
        // the clipped branch is active (clip kills the dependence).
        const Real d_logp = use_clipped ? Real(0) : -ratio * adv;
        for (int j = 0; j < 3; ++j) {
            const auto i = static_cast<std::size_t>(j);
            const Real inv_var = std::exp(Real(-2) * ws.ev.log_std[i]);
            const Real diff = act[i] - ws.ev.mean[i];
            d_mean[i] += d_logp * diff * inv_var;
            d_log_std[i] += d_logp * (diff * diff * inv_var - Real(1));
            d_log_std[i] += static_cast<Real>(-tc.entropy_coef);
        }

        // Shield consistency and actuator range terms.
        double l_shield = 0.0;
        double l_range = 0.0;
        if (ablation_.shield) {
            const VelocityCommand u_nom{static_cast<double>(ws.ev.mean[0]),
                                        static_cast<double>(ws.ev.mean[1]),
                                        static_cast<double>(ws.ev.mean[2])};
            shield::FusedBarrier fb;
            fb.h = batch.barrier_h[idx];
            fb.grad = batch.barrier_grad[idx];
            const double alpha = static_cast<double>(ws.ev.alpha_gain);
            const auto proj = shield::project_damped(u_nom, fb, alpha, cfg_.shield.damping);

            std::array<double, 3> diff{};
            std::array<double, 3> upstream{};
            for (int j = 0; j < 3; ++j) {
                const auto i = static_cast<std::size_t>(j);
                diff[i] = proj.u_safe[j] - u_nom[j];
                l_shield += diff[i] * diff[i];
                const double us = proj.u_safe[j];
                const double excess = us - clamp(us, tc.u_min[i], tc.u_max[i]);
                l_range += excess * excess;
                upstream[i] = 2.0 * tc.lambda_shield * diff[i] + 2.0 * tc.lambda_reg * excess;
            }
            const double hinge = std::max(0.0, cfg_.shield.alpha_min - alpha);
            l_shield += hinge * hinge;

            const auto back = shield::shield_backward(proj, upstream);
            for (int j = 0; j < 3; ++j) {
                const auto i = static_cast<std::size_t>(j);
                d_mean[i] += static_cast<Real>(back.d_nominal[i] - 2.0 * tc.lambda_shield * diff[i]);
            }
            d_alpha += static_cast<Real>(back.d_alpha - 2.0 * tc.lambda_shield * hinge);
        } else {
            for (int j = 0; j < 3; ++j) {
                const auto i = static_cast<std::size_t>(j);
                const double m = static_cast<double>(ws.ev.mean[i]);
                const double excess = m - clamp(m, tc.u_min[i], tc.u_max[i]);
                l_range += excess * excess;
                d_mean[i] += static_cast<Real>(2.0 * tc.lambda_reg * excess);
            }
        }

        // Temporal smoothness on the interpolated joint representation.
        double l_smooth = 0.0;
        const bool smooth_ok = ablation_.regularizers && batch.done[idx] == 0;
        ws.dx.assign(static_cast<std::size_t>(net_.joint_dim()), Real(0));
        if (smooth_ok) {
            ws.hist_next.resize(static_cast<std::size_t>(H) * dim);
            batch.gather_history(e, row + 1, batch.next_hist_from[idx], ws.hist_next);
            const std::span<const Real> obs_next(batch.obs_row(e, row + 1),
                                                 static_cast<std::size_t>(dim));
            const auto z_next = net_.encode(params, ws.hist_next, ws.enc_next);
            ws.x_next.resize(static_cast<std::size_t>(net_.joint_dim()));
            for (int i = 0; i < dim; ++i) ws.x_next[static_cast<std::size_t>(i)] = obs_next[static_cast<std::size_t>(i)];
            for (std::size_t i = 0; i < z_next.size(); ++i) ws.x_next[static_cast<std::size_t>(dim) + i] = z_next[i];

            const Real b = batch.beta[idx];
            ws.x_bar.resize(ws.ev.x.size());
            for (std::size_t i = 0; i < ws.ev.x.size(); ++i) {
                ws.x_bar[i] = ws.ev.x[i] + b * (ws.x_next[i] - ws.ev.x[i]);
            }
            net_.eval_actor_on_x(params, ws.x_bar, ws.actor_bar);
            net_.eval_critic_on_x(params, ws.x_bar, ws.critic_bar);

            double mse_pi = 0.0;
            std::array<Real, 3> d_mean_bar{};
            for (int j = 0; j < 3; ++j) {
                const auto i = static_cast<std::size_t>(j);
                const double dmu = static_cast<double>(ws.ev.mean[i] - ws.actor_bar.mean[i]);
                mse_pi += dmu * dmu / 3.0;
                const Real g = static_cast<Real>(tc.lambda_reg * tc.lambda_smooth_pi * 2.0 / 3.0 * dmu);
                d_mean[i] += g;
                d_mean_bar[i] = -g;
            }
            const double dv = static_cast<double>(ws.ev.value - ws.critic_bar.value);
            l_smooth = tc.lambda_smooth_pi * mse_pi + tc.lambda_smooth_v * dv * dv;
            const Real g_v = static_cast<Real>(tc.lambda_reg * tc.lambda_smooth_v * 2.0 * dv);
            d_value += g_v;

            ws.dx_bar.assign(static_cast<std::size_t>(net_.joint_dim()), Real(0));
            net_.backward_actor_eval(params, ws.actor_bar, d_mean_bar, grad, ws.dx_bar, ws.pws);
            net_.backward_critic_eval(params, ws.critic_bar, -g_v, grad, ws.dx_bar, ws.pws);

            // x_bar = (1 - beta) x_t + beta x_{t+1}: split its gradient.
            for (std::size_t i = 0; i < ws.dx.size(); ++i) ws.dx[i] += (Real(1) - b) * ws.dx_bar[i];
            const std::size_t latent = static_cast<std::size_t>(net_.config().latent_dim);
            ws.dz_next.assign(latent, Real(0));
            for (std::size_t i = 0; i < latent; ++i) {
                ws.dz_next[i] = b * ws.dx_bar[static_cast<std::size_t>(dim) + i];
            }
            net_.backward_encoder(params, ws.enc_next, ws.dz_next, grad, ws.pws);
        }

        net_.backward_main(params, ws.ev, d_mean, d_alpha, d_value, d_log_std, grad, ws.dx, ws.pws);
        net_.backward_encoder(params, ws.ev.enc,
                              std::span<const Real>(ws.dx.data() + dim,
                                                    static_cast<std::size_t>(net_.config().latent_dim)),
                              grad, ws.pws);

        sums.policy += l_policy;
        sums.value += l_value;
        sums.entropy += ent;
        sums.ppo += l_ppo;
        sums.shield += l_shield;
        sums.range += l_range;
        sums.smooth += l_smooth;
        return l_ppo + tc.lambda_shield * l_shield + tc.lambda_reg * (l_range + l_smooth);
    }

private:
    const policy::PolicyNet<Real>& net_;
    const Config& cfg_;
    Ablation ablation_;
};

// Vectorized rollout + PPO update with the safety shield in the loop and
// collision-state replay on failures. Deterministic for a fixed seed: every
// random draw comes from a derived per-env or per-phase stream and parallel
// reductions run over fixed chunk boundaries.
template <typename Real>
class Trainer {
public:
    Trainer(const Config& cfg, world::Difficulty difficulty, std::uint64_t seed,
            Ablation ablation = {})
        : cfg_(cfg),
          difficulty_(difficulty),
          seed_(seed),
          ablation_(ablation),
          net_(cfg.policy),
          update_rng_(derive_seed(seed, 0x06da7eULL)),
          loss_(net_, cfg_, ablation) {
        threads_ = cfg_.train.threads > 0 ? cfg_.train.threads : hardware_threads();
        substeps_ = static_cast<int>(std::lround(cfg_.train.policy_dt / cfg_.world.sim_dt));
        for (int i = 0; i < 3; ++i) {
            const auto u = static_cast<std::size_t>(i);
            ceiling_[u] = 10.0 * std::max(std::abs(cfg_.train.u_min[u]), std::abs(cfg_.train.u_max[u]));
        }
        params_.resize(net_.param_count());
        Rng init_rng(derive_seed(seed, 0x9a7aULL));
        net_.init(std::span<Real>(params_), init_rng);
        adam_.lr = cfg_.train.learning_rate;
        adam_.reset(params_.size());

        batch_.resize(cfg_.train.num_envs, cfg_.train.rollout_steps, cfg_.policy.history_length);
        envs_.resize(static_cast<std::size_t>(cfg_.train.num_envs));
        for (int e = 0; e < cfg_.train.num_envs; ++e) {
            auto& env = envs_[static_cast<std::size_t>(e)];
            env.rng.reseed(derive_seed(seed, 0xe0b5ULL, static_cast<std::uint64_t>(e)));
            env.curriculum = {0.0, cfg_.acsi.p_min, cfg_.acsi.p_max, cfg_.acsi.d_up, cfg_.acsi.d_down};
            env.ring = acsi::StateHistoryRing(cfg_.acsi.t_hist, cfg_.train.policy_dt);
            env.stuck.reset(std::max(1, static_cast<int>(std::lround(cfg_.train.stuck_window / cfg_.train.policy_dt))));
            env.sim_time = 0.0;
            full_reset(env);
            env.episode_first_row = cfg_.policy.history_length;
            write_observation(env, batch_.obs_row(e, cfg_.policy.history_length));
        }

        const int chunks = kChunks;
        chunk_grads_.assign(chunks, std::vector<Real>(params_.size(), Real(0)));
        chunk_ws_.resize(static_cast<std::size_t>(chunks));
        chunk_sums_.assign(chunks, LossReport{});
        chunk_total_.assign(chunks, 0.0);
        grad_.resize(params_.size());
    }

    const Config& config() const { return cfg_; }
    Ablation ablation() const { return ablation_; }
    world::Difficulty difficulty() const { return difficulty_; }
    std::uint64_t seed() const { return seed_; }
    int iteration() const { return iteration_; }
    long long env_steps() const { return env_steps_; }
    const policy::PolicyNet<Real>& net() const { return net_; }
    std::span<const Real> params() const { return params_; }

    std::vector<double> params_f64() const {
        std::vector<double> out(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) out[i] = static_cast<double>(params_[i]);
        return out;
    }

    void set_params_f64(const std::vector<double>& p) {
        if (p.size() != params_.size()) throw std::invalid_argument("parameter count mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) params_[i] = static_cast<Real>(p[i]);
    }

    IterationStats run_iteration() {
        const auto t0 = std::chrono::steady_clock::now();
        if (iteration_ > 0) carry_rows();
        for (auto& env : envs_) env.stats = EnvStats{};

        parallel_chunks(static_cast<std::size_t>(cfg_.train.num_envs), kChunks, threads_,
                        [&](int, std::size_t b, std::size_t e) {
                            for (std::size_t i = b; i < e; ++i) {
                                rollout_env(envs_[i], static_cast<int>(i));
                            }
                        });
        compute_gae();
        env_steps_ += static_cast<long long>(batch_.sample_count());

        IterationStats s;
        s.iteration = iteration_;
        s.env_steps = env_steps_;
        double grad_norm_sum = 0.0;
        s.loss = update(grad_norm_sum);
        s.grad_norm = grad_norm_sum;

        const double n = static_cast<double>(batch_.sample_count());
        for (const auto& env : envs_) {
            const auto& st = env.stats;
            s.mean_reward.termination += st.reward_sum.termination;
            s.mean_reward.reach += st.reward_sum.reach;
            s.mean_reward.velocity += st.reward_sum.velocity;
            s.mean_reward.clearance += st.reward_sum.clearance;
            s.mean_reward.stuck += st.reward_sum.stuck;
            s.mean_reward.collision += st.reward_sum.collision;
            s.mean_reward.angular += st.reward_sum.angular;
            s.mean_reward.total += st.reward_sum.total;
            s.mean_alpha += st.alpha_sum;
            s.shield_active_fraction += st.active_count;
            s.mean_c_front += st.c_front_sum;
            s.episodes += st.episodes;
            s.successes += st.successes;
            s.collisions += st.collisions;
            s.timeouts += st.timeouts;
            s.replays += st.replays;
            s.full_resets += st.full_resets;
            s.mean_episode_return += st.episode_return_sum;
            s.mean_p_reset += env.curriculum.p_reset();
            s.mean_l_goal += env.curriculum.l_goal;
        }
        s.mean_reward.termination /= n;
        s.mean_reward.reach /= n;
        s.mean_reward.velocity /= n;
        s.mean_reward.clearance /= n;
        s.mean_reward.stuck /= n;
        s.mean_reward.collision /= n;
        s.mean_reward.angular /= n;
        s.mean_reward.total /= n;
        s.mean_alpha /= n;
        s.shield_active_fraction /= n;
        s.mean_c_front /= n;
        s.mean_episode_return = s.episodes > 0 ? s.mean_episode_return / s.episodes : 0.0;
        s.mean_p_reset /= static_cast<double>(envs_.size());
        s.mean_l_goal /= static_cast<double>(envs_.size());

        const auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        s.steps_per_second = dt > 0 ? n / dt : 0.0;
        ++iteration_;
        return s;
    }

    // Loss path entry point used by gradient checks: mean loss and gradient
    // over the given sample indices at arbitrary parameters.
    double loss_and_grad(std::span<const Real> params, const RolloutBatch<Real>& batch,
                         std::span<const std::uint32_t> indices, std::span<Real> grad,
                         LossReport& report) {
        std::fill(grad.begin(), grad.end(), Real(0));
        report = LossReport{};
        typename LossComputer<Real>::Workspace ws;
        double total = 0.0;
        for (const auto idx : indices) {
            total += loss_.sample_loss_grad(params, batch, idx, grad, report, ws);
        }
        const double inv = indices.empty() ? 0.0 : 1.0 / static_cast<double>(indices.size());
        for (auto& g : grad) g = static_cast<Real>(static_cast<double>(g) * inv);
        report.policy *= inv;
        report.value *= inv;
        report.entropy *= inv;
        report.ppo *= inv;
        report.shield *= inv;
        report.range *= inv;
        report.smooth *= inv;
        report.finalize(cfg_.train.lambda_shield, cfg_.train.lambda_reg);
        return total * inv;
    }

    RolloutBatch<Real>& batch() { return batch_; }

private:
    static constexpr int kChunks = 8;

    struct ExteroFrame {
        world::LidarScan scan;
        std::array<double, 2> goal_body{};
    };

    struct EnvStats {
        rewards::RewardBreakdown reward_sum;
        double alpha_sum = 0.0;
        double active_count = 0.0;
        double c_front_sum = 0.0;
        double episode_return_sum = 0.0;
        int episodes = 0, successes = 0, collisions = 0, timeouts = 0, replays = 0, full_resets = 0;
    };

    struct Env {
        Rng rng;
        world::Scenario scenario;
        world::OccupancyGrid grid;
        Vec2 goal;
        world::RobotState state;
        world::LidarScan scan_true;     // at the current state
        world::LidarScan shield_scan;   // delayed scan the policy last saw
        std::deque<ExteroFrame> extero;
        RandomizationDraw draw;
        double tau_eff = 0.2;
        acsi::StateHistoryRing ring;
        acsi::CurriculumState curriculum;
        rewards::StuckTracker stuck;
        double episode_time = 0.0;
        double stay_time = 0.0;
        double sim_time = 0.0;
        double episode_return = 0.0;
        int episode_first_row = 0;
        EnvStats stats;
    };

    void full_reset(Env& env) {
        env.draw = draw_randomization(env.rng, cfg_.train.domain_randomization);
        env.tau_eff = env.draw.effective_tau(cfg_.world.tau_v);
        for (;;) {
            const auto scenario_seed = env.rng.next_u64();
            env.scenario = world::generate_scenario(difficulty_, scenario_seed, cfg_.world);
            env.grid = world::OccupancyGrid(env.scenario, cfg_.world.footprint_train, cfg_.world.grid_cell);
            const auto sg = world::sample_start_goal(env.scenario, env.grid, cfg_.world,
                                                     cfg_.world.footprint_train, env.rng);
            if (sg) {
                env.state = {sg->start, sg->heading, {}};
                env.goal = sg->goal;
                break;
            }
        }
        env.episode_time = 0.0;
        after_reset(env);
    }

    void replay_reset(Env& env, const acsi::Snapshot& snap) {
        env.draw = draw_randomization(env.rng, cfg_.train.domain_randomization);
        env.tau_eff = env.draw.effective_tau(cfg_.world.tau_v);
        env.state = snap.state;
        after_reset(env);
    }

    void after_reset(Env& env) {
        env.stay_time = 0.0;
        env.episode_return = 0.0;
        env.stuck.clear();
        env.extero.clear();
        env.ring.clear();
        env.scan_true = world::cast_lidar(env.scenario, env.state, cfg_.world);
        env.ring.push(env.state, env.sim_time);
    }

    void write_observation(Env& env, Real* out) {
        ExteroFrame f;
        f.scan = env.scan_true;
        const Vec2 gb = rotate_inverse(env.goal - env.state.position, env.state.heading);
        f.goal_body = {gb.x, gb.y};
        env.extero.push_back(f);
        const int delay = cfg_.train.domain_randomization ? env.draw.delay_ticks(cfg_.train.policy_dt) : 0;
        while (static_cast<int>(env.extero.size()) > delay + 1) env.extero.pop_front();
        const ExteroFrame& seen = env.extero.front();
        env.shield_scan = seen.scan;

        policy::Observation o;
        const auto& v = env.state.velocity;
        const auto& d = env.draw;
        o.linear_velocity = {v.vx + d.linvel_noise[0], v.vy + d.linvel_noise[1], d.linvel_noise[2]};
        o.angular_velocity = {d.angvel_noise[0], d.angvel_noise[1], v.wz + d.angvel_noise[2]};
        o.gravity = {d.gravity_noise[0], d.gravity_noise[1], -1.0 + d.gravity_noise[2]};
        const double gn = std::hypot(seen.goal_body[0], seen.goal_body[1]);
        const double clip = cfg_.policy.goal_clip_radius;
        const double scale = gn > clip ? clip / gn : 1.0;
        o.goal_body = {seen.goal_body[0] * scale, seen.goal_body[1] * scale};
        for (int i = 0; i < world::LidarScan::kRayCount; ++i) {
            const auto u = static_cast<std::size_t>(i);
            o.ranges[u] = seen.scan.ranges[u] / cfg_.policy.range_norm;
        }
        std::array<double, policy::Observation::kDim> flat{};
        o.flatten(flat);
        for (int i = 0; i < policy::Observation::kDim; ++i) out[i] = static_cast<Real>(flat[static_cast<std::size_t>(i)]);
    }

    static double front_clearance(const world::LidarScan& scan) {
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < world::LidarScan::kRayCount; ++i) {
            if (std::abs(world::LidarScan::bearing(i)) <= std::numbers::pi / 6.0 + 1e-9) {
                best = std::min(best, scan.ranges[static_cast<std::size_t>(i)]);
            }
        }
        return best;
    }

    void rollout_env(Env& env, int e) {
        const int H = cfg_.policy.history_length;
        const int S = cfg_.train.rollout_steps;
        const int dim = policy::Observation::kDim;
        policy::PolicyEval<Real> ev;
        std::vector<Real> hist(static_cast<std::size_t>(H) * dim);

        for (int t = 0; t < S; ++t) {
            const int row = H + t;
            const std::size_t idx = static_cast<std::size_t>(e) * S + static_cast<std::size_t>(t);
            batch_.hist_from[idx] = env.episode_first_row;
            batch_.gather_history(e, row, env.episode_first_row, hist);
            const std::span<const Real> obs(batch_.obs_row(e, row), static_cast<std::size_t>(dim));
            net_.eval_full(params_, obs, hist, ev);

            const auto action = policy::sample_gaussian(ev.mean, ev.log_std, env.rng);
            batch_.actions[idx] = action;
            batch_.log_prob_old[idx] = policy::gaussian_log_prob(action, ev.mean, ev.log_std);
            batch_.values_old[idx] = static_cast<double>(ev.value);
            batch_.beta[idx] = static_cast<Real>(env.rng.uniform(-1.0, 1.0));

            const auto constraints = shield::build_constraints(env.shield_scan, cfg_.shield);
            const auto fb = shield::fuse_lse(constraints, cfg_.shield.lse_k);
            batch_.barrier_h[idx] = fb.h;
            batch_.barrier_grad[idx] = fb.grad;

            const double alpha = static_cast<double>(ev.alpha_gain);
            const VelocityCommand u_nom{static_cast<double>(action[0]), static_cast<double>(action[1]),
                                        static_cast<double>(action[2])};
            VelocityCommand u_exec = u_nom;
            if (ablation_.shield) {
                const auto proj = shield::project_damped(u_nom, fb, alpha, cfg_.shield.damping);
                u_exec = proj.u_safe;
                env.stats.active_count += proj.active ? 1.0 : 0.0;
            }
            env.stats.alpha_sum += alpha;
            env.stats.c_front_sum += front_clearance(env.scan_true);

            bool collided = false;
            for (int k = 0; k < substeps_; ++k) {
                env.state = world::step_dynamics(env.state, u_exec, cfg_.world.sim_dt, env.tau_eff, ceiling_);
                if (world::check_collision(env.scenario, env.state.position, cfg_.world.footprint_train).hit) {
                    collided = true;
                    break;
                }
            }
            env.sim_time += cfg_.train.policy_dt;
            env.episode_time += cfg_.train.policy_dt;
            env.scan_true = world::cast_lidar(env.scenario, env.state, cfg_.world);
            env.stuck.push(env.state.position);

            const auto ctx = rewards::make_context(env.state, env.goal, env.scan_true, collided,
                                                   collided, env.stuck.max_displacement());
            const auto rb = rewards::compute_reward(ctx, cfg_.rewards);
            batch_.rewards[idx] = rb.total;
            add_breakdown(env.stats.reward_sum, rb);
            env.episode_return += rb.total;

            env.ring.push(env.state, env.sim_time);
            write_observation(env, batch_.obs_row(e, row + 1));

            signed char done = 0;
            if (collided) {
                done = 1;
                finish_episode(env, ctx.goal_distance, &EnvStats::collisions);
                bool replayed = false;
                if (ablation_.acsi) {
                    const auto dec = acsi::on_collision(env.ring, env.curriculum, env.sim_time,
                                                        cfg_.acsi.t_back, env.rng);
                    if (dec.kind == acsi::ResetDecision::Kind::ReplayCritical) {
                        replay_reset(env, dec.snapshot);
                        ++env.stats.replays;
                        replayed = true;
                    }
                }
                if (!replayed) {
                    full_reset(env);
                    ++env.stats.full_resets;
                }
                env.episode_first_row = row + 1;
                write_observation(env, batch_.obs_row(e, row + 1));
            } else {
                if (ctx.goal_distance < cfg_.train.goal_radius) {
                    env.stay_time += cfg_.train.policy_dt;
                } else {
                    env.stay_time = 0.0;
                }
                if (env.stay_time >= cfg_.train.goal_stay - 1e-9) {
                    done = 1;
                    finish_episode(env, ctx.goal_distance, &EnvStats::successes);
                    full_reset(env);
                    ++env.stats.full_resets;
                    env.episode_first_row = row + 1;
                    write_observation(env, batch_.obs_row(e, row + 1));
                } else if (env.episode_time >= cfg_.train.episode_duration - 1e-9) {
                    done = 2;
                    // Bootstrap off the observation the episode would have
                    // continued into, before the reset overwrites it.
                    batch_.gather_history(e, row + 1, env.episode_first_row, hist);
                    const std::span<const Real> next_obs(batch_.obs_row(e, row + 1),
                                                         static_cast<std::size_t>(dim));
                    net_.eval_full(params_, next_obs, hist, ev);
                    batch_.bootstrap_value[idx] = static_cast<double>(ev.value);
                    finish_episode(env, ctx.goal_distance, &EnvStats::timeouts);
                    full_reset(env);
                    ++env.stats.full_resets;
                    env.episode_first_row = row + 1;
                    write_observation(env, batch_.obs_row(e, row + 1));
                }
            }
            batch_.done[idx] = done;
            batch_.next_hist_from[idx] = env.episode_first_row;
        }

        const int final_row = H + S;
        batch_.gather_history(e, final_row, env.episode_first_row, hist);
        const std::span<const Real> final_obs(batch_.obs_row(e, final_row), static_cast<std::size_t>(dim));
        net_.eval_full(params_, final_obs, hist, ev);
        batch_.tail_value[static_cast<std::size_t>(e)] = static_cast<double>(ev.value);
    }

    void finish_episode(Env& env, double goal_distance, int EnvStats::* counter) {
        env.stats.*counter += 1;
        ++env.stats.episodes;
        env.stats.episode_return_sum += env.episode_return;
        acsi::update_curriculum(env.curriculum, goal_distance, cfg_.acsi.step_increment);
    }

    static void add_breakdown(rewards::RewardBreakdown& acc, const rewards::RewardBreakdown& rb) {
        acc.termination += rb.termination;
        acc.reach += rb.reach;
        acc.velocity += rb.velocity;
        acc.clearance += rb.clearance;
        acc.stuck += rb.stuck;
        acc.collision += rb.collision;
        acc.angular += rb.angular;
        acc.total += rb.total;
    }

    void carry_rows() {
        const int H = cfg_.policy.history_length;
        const int S = cfg_.train.rollout_steps;
        const int dim = policy::Observation::kDim;
        for (int e = 0; e < cfg_.train.num_envs; ++e) {
            Real* base = batch_.obs_row(e, 0);
            const Real* src = batch_.obs_row(e, S);
            // Overlapping forward copy is safe: destination precedes source.
            std::copy(src, src + static_cast<std::size_t>(H + 1) * dim, base);
            auto& env = envs_[static_cast<std::size_t>(e)];
            env.episode_first_row = std::max(env.episode_first_row - S, 0);
        }
    }

    void compute_gae() {
        const int S = cfg_.train.rollout_steps;
        const double gamma = cfg_.train.gamma;
        const double lam = cfg_.train.gae_lambda;
        std::vector<double> adv_raw(batch_.sample_count());
        for (int e = 0; e < cfg_.train.num_envs; ++e) {
            double next_value = batch_.tail_value[static_cast<std::size_t>(e)];
            double next_adv = 0.0;
            for (int t = S - 1; t >= 0; --t) {
                const std::size_t i = static_cast<std::size_t>(e) * S + static_cast<std::size_t>(t);
                double delta;
                if (batch_.done[i] == 1) {
                    delta = batch_.rewards[i] - batch_.values_old[i];
                    next_adv = 0.0;
                } else if (batch_.done[i] == 2) {
                    delta = batch_.rewards[i] + gamma * batch_.bootstrap_value[i] - batch_.values_old[i];
                    next_adv = 0.0;
                } else {
                    delta = batch_.rewards[i] + gamma * next_value - batch_.values_old[i];
                }
                const double adv = delta + gamma * lam * next_adv;
                adv_raw[i] = adv;
                next_adv = adv;
                next_value = batch_.values_old[i];
            }
        }
        double mean = 0.0;
        for (const double a : adv_raw) mean += a;
        mean /= static_cast<double>(adv_raw.size());
        double var = 0.0;
        for (const double a : adv_raw) var += (a - mean) * (a - mean);
        const double stddev = std::sqrt(var / static_cast<double>(adv_raw.size())) + 1e-8;
        for (std::size_t i = 0; i < adv_raw.size(); ++i) {
            batch_.advantages[i] = static_cast<Real>((adv_raw[i] - mean) / stddev);
            batch_.returns[i] = static_cast<Real>(adv_raw[i] + batch_.values_old[i]);
        }
    }

    LossReport update(double& mean_grad_norm) {
        const std::size_t n = batch_.sample_count();
        std::vector<std::uint32_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0u);
        LossReport mean_report;
        int updates = 0;
        double norm_sum = 0.0;
        for (int epoch = 0; epoch < cfg_.train.epochs; ++epoch) {
            update_rng_.shuffle(perm.begin(), perm.end());
            for (int mb = 0; mb < cfg_.train.minibatches; ++mb) {
                const std::size_t lo = n * static_cast<std::size_t>(mb) / static_cast<std::size_t>(cfg_.train.minibatches);
                const std::size_t hi = n * (static_cast<std::size_t>(mb) + 1) / static_cast<std::size_t>(cfg_.train.minibatches);
                const std::size_t m = hi - lo;
                for (int c = 0; c < kChunks; ++c) {
                    std::fill(chunk_grads_[static_cast<std::size_t>(c)].begin(),
                              chunk_grads_[static_cast<std::size_t>(c)].end(), Real(0));
                    chunk_sums_[static_cast<std::size_t>(c)] = LossReport{};
                    chunk_total_[static_cast<std::size_t>(c)] = 0.0;
                }
                parallel_chunks(m, kChunks, threads_, [&](int c, std::size_t b, std::size_t e) {
                    auto& ws = chunk_ws_[static_cast<std::size_t>(c)];
                    auto& grads = chunk_grads_[static_cast<std::size_t>(c)];
                    auto& sums = chunk_sums_[static_cast<std::size_t>(c)];
                    double& total = chunk_total_[static_cast<std::size_t>(c)];
                    for (std::size_t i = b; i < e; ++i) {
                        total += loss_.sample_loss_grad(params_, batch_, perm[lo + i], grads, sums, ws);
                    }
                });
                std::fill(grad_.begin(), grad_.end(), Real(0));
                LossReport sums;
                for (int c = 0; c < kChunks; ++c) {
                    const auto& cg = chunk_grads_[static_cast<std::size_t>(c)];
                    for (std::size_t p = 0; p < grad_.size(); ++p) grad_[p] += cg[p];
                    add_report(sums, chunk_sums_[static_cast<std::size_t>(c)]);
                }
                const double inv = 1.0 / static_cast<double>(m);
                double norm_sq = 0.0;
                for (auto& g : grad_) {
                    g = static_cast<Real>(static_cast<double>(g) * inv);
                    norm_sq += static_cast<double>(g) * static_cast<double>(g);
                }
                const double norm = std::sqrt(norm_sq);
                norm_sum += norm;
                if (norm > cfg_.train.max_grad_norm) {
                    const double scale = cfg_.train.max_grad_norm / norm;
                    for (auto& g : grad_) g = static_cast<Real>(static_cast<double>(g) * scale);
                }
                adam_.step(std::span<Real>(params_), std::span<const Real>(grad_));

                scale_report(sums, inv);
                sums.finalize(cfg_.train.lambda_shield, cfg_.train.lambda_reg);
                add_report(mean_report, sums);
                ++updates;
            }
        }
        scale_report(mean_report, updates > 0 ? 1.0 / updates : 0.0);
        mean_grad_norm = updates > 0 ? norm_sum / updates : 0.0;
        return mean_report;
    }

    static void add_report(LossReport& a, const LossReport& b) {
        a.ppo += b.ppo;
        a.policy += b.policy;
        a.value += b.value;
        a.entropy += b.entropy;
        a.shield += b.shield;
        a.range += b.range;
        a.smooth += b.smooth;
        a.reg += b.reg;
        a.total += b.total;
    }

    static void scale_report(LossReport& a, double s) {
        a.ppo *= s;
        a.policy *= s;
        a.value *= s;
        a.entropy *= s;
        a.shield *= s;
        a.range *= s;
        a.smooth *= s;
        a.reg *= s;
        a.total *= s;
    }

    Config cfg_;
    world::Difficulty difficulty_;
    std::uint64_t seed_;
    Ablation ablation_;
    policy::PolicyNet<Real> net_;
    Rng update_rng_;
    LossComputer<Real> loss_;
    int threads_ = 1;
    int substeps_ = 5;
    std::array<double, 3> ceiling_{};
    std::vector<Real> params_;
    nn::Adam<Real> adam_;
    std::vector<Env> envs_;
    RolloutBatch<Real> batch_;
    int iteration_ = 0;
    long long env_steps_ = 0;
    std::vector<std::vector<Real>> chunk_grads_;
    std::vector<typename LossComputer<Real>::Workspace> chunk_ws_;
    std::vector<LossReport> chunk_sums_;
    std::vector<double> chunk_total_;
    std::vector<Real> grad_;
};

}  // namespace seanav::trainer
