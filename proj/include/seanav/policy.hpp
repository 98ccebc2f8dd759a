#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "seanav/geometry.hpp"
#include "seanav/nn.hpp"
#include "seanav/rng.hpp"
#include "seanav/world.hpp"

namespace seanav::policy {

// Proprioception, goal direction and normalized ranges, in listed order.
struct Observation {
    std::array<double, 3> linear_velocity{};
    std::array<double, 3> angular_velocity{};
    std::array<double, 3> gravity{0.0, 0.0, -1.0};
    std::array<double, 2> goal_body{};
    std::array<double, world::LidarScan::kRayCount> ranges{};

    static constexpr int kDim = 11 + world::LidarScan::kRayCount;

    void flatten(std::span<double> out) const {
        int k = 0;
        for (double v : linear_velocity) out[k++] = v;
        for (double v : angular_velocity) out[k++] = v;
        for (double v : gravity) out[k++] = v;
        for (double v : goal_body) out[k++] = v;
        for (double v : ranges) out[k++] = v;
    }
};

struct PolicyConfig {
    int history_length = 10;
    int encoder_hidden = 128;
    int latent_dim = 32;
    int backbone_hidden = 256;
    int feature_dim = 128;
    int nav_hidden = 64;
    int alpha_hidden = 32;
    int critic_hidden = 256;
    int critic_hidden2 = 128;
    double init_log_std = std::log(0.5);
    double log_std_min = -4.0;
    double log_std_max = 1.0;
    double goal_clip_radius = 5.0;
    double range_norm = 3.0;
    // softplus(alpha_bias) = 1, so the class-K gain starts near 1.
    double alpha_bias = 0.5413248546129181;
};

// Ring of the last H observations; flatten() yields oldest-first with
// zero-filled slots before warm-up.
class HistoryBuffer {
public:
    HistoryBuffer() = default;
    explicit HistoryBuffer(int horizon) { reset(horizon); }

    void reset(int horizon) {
        h_ = horizon;
        data_.assign(static_cast<std::size_t>(h_) * Observation::kDim, 0.0);
        count_ = 0;
        head_ = 0;
    }

    void clear() {
        std::fill(data_.begin(), data_.end(), 0.0);
        count_ = 0;
        head_ = 0;
    }

    void push(std::span<const double> frame) {
        double* dst = data_.data() + static_cast<std::size_t>(head_) * Observation::kDim;
        for (int i = 0; i < Observation::kDim; ++i) dst[i] = frame[static_cast<std::size_t>(i)];
        head_ = (head_ + 1) % h_;
        if (count_ < h_) ++count_;
    }

    int horizon() const { return h_; }
    int count() const { return count_; }

    void flatten(std::span<double> out) const {
        const int lead = h_ - count_;
        std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(lead) * Observation::kDim, 0.0);
        for (int i = 0; i < count_; ++i) {
            const int slot = (head_ - count_ + i + h_) % h_;
            const double* src = data_.data() + static_cast<std::size_t>(slot) * Observation::kDim;
            double* dst = out.data() + static_cast<std::size_t>(lead + i) * Observation::kDim;
            for (int k = 0; k < Observation::kDim; ++k) dst[k] = src[k];
        }
    }

private:
    int h_ = 0;
    int count_ = 0;
    int head_ = 0;
    std::vector<double> data_;
};

template <typename Real>
struct PolicyEval {
    nn::MlpCache<Real> enc, bb, nav, alpha, critic;
    std::vector<Real> x;                 // [obs, latent]
    std::array<Real, 3> mean{};
    std::array<Real, 3> log_std{};       // clamped values
    Real alpha_raw{};
    Real alpha_gain{};
    Real value{};
};

template <typename Real>
struct ActorEval {
    nn::MlpCache<Real> bb, nav;
    std::array<Real, 3> mean{};
};

template <typename Real>
struct CriticEval {
    nn::MlpCache<Real> cache;
    Real value{};
};

// Reused backward-pass scratch; one per worker thread.
template <typename Real>
struct PolicyWorkspace {
    std::vector<Real> df, dx, scratch;
};

// Actor-critic with a history encoder, a nav head, a class-K gain head and a
// critic, all reading one flat parameter vector:
// [encoder | backbone | nav | alpha | critic | log_std(3)].
template <typename Real>
class PolicyNet {
public:
    explicit PolicyNet(const PolicyConfig& cfg = {})
        : cfg_(cfg),
          encoder_({cfg.history_length * Observation::kDim, cfg.encoder_hidden, cfg.latent_dim},
                   nn::Activation::Elu, nn::Activation::Linear),
          backbone_({Observation::kDim + cfg.latent_dim, cfg.backbone_hidden, cfg.feature_dim},
                    nn::Activation::Elu, nn::Activation::Elu),
          nav_({cfg.feature_dim, cfg.nav_hidden, 3}, nn::Activation::Elu, nn::Activation::Linear),
          alpha_({cfg.feature_dim, cfg.alpha_hidden, 1}, nn::Activation::Elu, nn::Activation::Linear),
          critic_({Observation::kDim + cfg.latent_dim, cfg.critic_hidden, cfg.critic_hidden2, 1},
                  nn::Activation::Elu, nn::Activation::Linear) {
        offsets_[0] = 0;
        offsets_[1] = offsets_[0] + encoder_.param_count();
        offsets_[2] = offsets_[1] + backbone_.param_count();
        offsets_[3] = offsets_[2] + nav_.param_count();
        offsets_[4] = offsets_[3] + alpha_.param_count();
        offsets_[5] = offsets_[4] + critic_.param_count();
        total_ = offsets_[5] + 3;
    }

    const PolicyConfig& config() const { return cfg_; }
    std::size_t param_count() const { return total_; }
    int joint_dim() const { return Observation::kDim + cfg_.latent_dim; }

    std::vector<std::vector<int>> shape_table() const {
        return {encoder_.sizes(), backbone_.sizes(), nav_.sizes(), alpha_.sizes(),
                critic_.sizes(), {3}};
    }

    void init(std::span<Real> params, Rng& rng) const {
        encoder_.init(seg(params, 0), rng, 1.0);
        backbone_.init(seg(params, 1), rng, 1.0);
        nav_.init(seg(params, 2), rng, 0.01);
        alpha_.init(seg(params, 3), rng, 0.01);
        critic_.init(seg(params, 4), rng, 1.0);
        for (int j = 0; j < 3; ++j) {
            params[offsets_[5] + static_cast<std::size_t>(j)] = static_cast<Real>(cfg_.init_log_std);
        }
    }

    Real alpha_from_raw(Real raw) const { return softplus(raw + static_cast<Real>(cfg_.alpha_bias)); }

    std::span<const Real> encode(std::span<const Real> params, std::span<const Real> hist,
                                 nn::MlpCache<Real>& cache) const {
        return encoder_.forward(cseg(params, 0), hist, cache);
    }

    void eval_full(std::span<const Real> params, std::span<const Real> obs,
                   std::span<const Real> hist, PolicyEval<Real>& ev) const {
        const auto z = encoder_.forward(cseg(params, 0), hist, ev.enc);
        ev.x.resize(static_cast<std::size_t>(joint_dim()));
        for (int i = 0; i < Observation::kDim; ++i) ev.x[static_cast<std::size_t>(i)] = obs[static_cast<std::size_t>(i)];
        for (int i = 0; i < cfg_.latent_dim; ++i) {
            ev.x[static_cast<std::size_t>(Observation::kDim + i)] = z[static_cast<std::size_t>(i)];
        }
        const auto f = backbone_.forward(cseg(params, 1), ev.x, ev.bb);
        const auto mu = nav_.forward(cseg(params, 2), f, ev.nav);
        for (int j = 0; j < 3; ++j) ev.mean[static_cast<std::size_t>(j)] = mu[static_cast<std::size_t>(j)];
        const auto a = alpha_.forward(cseg(params, 3), f, ev.alpha);
        ev.alpha_raw = a[0];
        ev.alpha_gain = alpha_from_raw(a[0]);
        const auto v = critic_.forward(cseg(params, 4), ev.x, ev.critic);
        ev.value = v[0];
        for (int j = 0; j < 3; ++j) {
            ev.log_std[static_cast<std::size_t>(j)] = clamp_log_std(log_std_param(params, j));
        }
    }

    void eval_actor_on_x(std::span<const Real> params, std::span<const Real> x,
                         ActorEval<Real>& ev) const {
        const auto f = backbone_.forward(cseg(params, 1), x, ev.bb);
        const auto mu = nav_.forward(cseg(params, 2), f, ev.nav);
        for (int j = 0; j < 3; ++j) ev.mean[static_cast<std::size_t>(j)] = mu[static_cast<std::size_t>(j)];
    }

    void eval_critic_on_x(std::span<const Real> params, std::span<const Real> x,
                          CriticEval<Real>& ev) const {
        const auto v = critic_.forward(cseg(params, 4), x, ev.cache);
        ev.value = v[0];
    }

    // Heads and trunk back to d_x; encoder excluded so callers can split the
    // joint-representation gradient (smoothness pairs need that).
    void backward_main(std::span<const Real> params, const PolicyEval<Real>& ev,
                       const std::array<Real, 3>& d_mean, Real d_alpha, Real d_value,
                       const std::array<Real, 3>& d_log_std, std::span<Real> grad,
                       std::span<Real> d_x, PolicyWorkspace<Real>& ws) const {
        ws.df.assign(static_cast<std::size_t>(cfg_.feature_dim), Real(0));
        nav_.backward(cseg(params, 2), ev.nav, std::span<const Real>(d_mean.data(), 3),
                      seg_mut(grad, 2), ws.df, ws.scratch);
        const Real d_raw = d_alpha * sigmoid(ev.alpha_raw + static_cast<Real>(cfg_.alpha_bias));
        const std::array<Real, 1> dr{d_raw};
        alpha_.backward(cseg(params, 3), ev.alpha, std::span<const Real>(dr.data(), 1),
                        seg_mut(grad, 3), ws.df, ws.scratch);
        backbone_.backward(cseg(params, 1), ev.bb, ws.df, seg_mut(grad, 1), d_x, ws.scratch);
        const std::array<Real, 1> dv{d_value};
        critic_.backward(cseg(params, 4), ev.critic, std::span<const Real>(dv.data(), 1),
                         seg_mut(grad, 4), d_x, ws.scratch);
        for (int j = 0; j < 3; ++j) {
            const Real raw = log_std_param(params, j);
            if (static_cast<double>(raw) > cfg_.log_std_min && static_cast<double>(raw) < cfg_.log_std_max) {
                grad[offsets_[5] + static_cast<std::size_t>(j)] += d_log_std[static_cast<std::size_t>(j)];
            }
        }
    }

    void backward_actor_eval(std::span<const Real> params, const ActorEval<Real>& ev,
                             const std::array<Real, 3>& d_mean, std::span<Real> grad,
                             std::span<Real> d_x, PolicyWorkspace<Real>& ws) const {
        ws.df.assign(static_cast<std::size_t>(cfg_.feature_dim), Real(0));
        nav_.backward(cseg(params, 2), ev.nav, std::span<const Real>(d_mean.data(), 3),
                      seg_mut(grad, 2), ws.df, ws.scratch);
        backbone_.backward(cseg(params, 1), ev.bb, ws.df, seg_mut(grad, 1), d_x, ws.scratch);
    }

    void backward_critic_eval(std::span<const Real> params, const CriticEval<Real>& ev,
                              Real d_value, std::span<Real> grad, std::span<Real> d_x,
                              PolicyWorkspace<Real>& ws) const {
        const std::array<Real, 1> dv{d_value};
        critic_.backward(cseg(params, 4), ev.cache, std::span<const Real>(dv.data(), 1),
                         seg_mut(grad, 4), d_x, ws.scratch);
    }

    void backward_encoder(std::span<const Real> params, const nn::MlpCache<Real>& enc_cache,
                          std::span<const Real> d_latent, std::span<Real> grad,
                          PolicyWorkspace<Real>& ws) const {
        encoder_.backward(cseg(params, 0), enc_cache, d_latent, seg_mut(grad, 0), {}, ws.scratch);
    }

    // Convenience full chain including the encoder.
    void backward_full(std::span<const Real> params, const PolicyEval<Real>& ev,
                       const std::array<Real, 3>& d_mean, Real d_alpha, Real d_value,
                       const std::array<Real, 3>& d_log_std, std::span<Real> grad,
                       PolicyWorkspace<Real>& ws) const {
        ws.dx.assign(static_cast<std::size_t>(joint_dim()), Real(0));
        backward_main(params, ev, d_mean, d_alpha, d_value, d_log_std, grad, ws.dx, ws);
        backward_encoder(params, ev.enc,
                         std::span<const Real>(ws.dx.data() + Observation::kDim,
                                               static_cast<std::size_t>(cfg_.latent_dim)),
                         grad, ws);
    }

    Real clamp_log_std(Real v) const {
        if (static_cast<double>(v) < cfg_.log_std_min) return static_cast<Real>(cfg_.log_std_min);
        if (static_cast<double>(v) > cfg_.log_std_max) return static_cast<Real>(cfg_.log_std_max);
        return v;
    }

    Real log_std_param(std::span<const Real> params, int j) const {
        return params[offsets_[5] + static_cast<std::size_t>(j)];
    }

    static Real softplus(Real x) {
        if (static_cast<double>(x) > 30.0) return x;
        return std::log1p(std::exp(x));
    }
    static Real sigmoid(Real x) { return Real(1) / (Real(1) + std::exp(-x)); }

private:
    std::span<Real> seg_mut(std::span<Real> p, int i) const {
        return p.subspan(offsets_[static_cast<std::size_t>(i)],
                         offsets_[static_cast<std::size_t>(i) + 1] - offsets_[static_cast<std::size_t>(i)]);
    }
    std::span<Real> seg(std::span<Real> p, int i) const { return seg_mut(p, i); }
    std::span<const Real> cseg(std::span<const Real> p, int i) const {
        return p.subspan(offsets_[static_cast<std::size_t>(i)],
                         offsets_[static_cast<std::size_t>(i) + 1] - offsets_[static_cast<std::size_t>(i)]);
    }

    PolicyConfig cfg_;
    nn::Mlp<Real> encoder_, backbone_, nav_, alpha_, critic_;
    std::array<std::size_t, 6> offsets_{};
    std::size_t total_ = 0;
};

// Diagonal Gaussian helpers shared by rollout and update.
template <typename Real>
Real gaussian_log_prob(const std::array<Real, 3>& action, const std::array<Real, 3>& mean,
                       const std::array<Real, 3>& log_std) {
    constexpr double kLogTwoPi = 1.8378770664093453;
    Real lp = Real(0);
    for (int j = 0; j < 3; ++j) {
        const auto i = static_cast<std::size_t>(j);
        const Real inv_std = std::exp(-log_std[i]);
        const Real zscore = (action[i] - mean[i]) * inv_std;
        lp += Real(-0.5) * zscore * zscore - log_std[i] - Real(0.5 * kLogTwoPi);
    }
    return lp;
}

template <typename Real>
Real gaussian_entropy(const std::array<Real, 3>& log_std) {
    constexpr double kHalfLogTwoPiE = 1.4189385332046727;
    Real e = Real(0);
    for (int j = 0; j < 3; ++j) e += log_std[static_cast<std::size_t>(j)] + Real(kHalfLogTwoPiE);
    return e;
}

template <typename Real>
std::array<Real, 3> sample_gaussian(const std::array<Real, 3>& mean,
                                    const std::array<Real, 3>& log_std, Rng& rng) {
    std::array<Real, 3> a{};
    for (int j = 0; j < 3; ++j) {
        const auto i = static_cast<std::size_t>(j);
        a[i] = mean[i] + std::exp(log_std[i]) * static_cast<Real>(rng.normal());
    }
    return a;
}

}  // namespace seanav::policy
