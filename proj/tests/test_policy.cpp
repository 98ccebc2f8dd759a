#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "seanav/nn.hpp"
#include "seanav/policy.hpp"
#include "seanav/rng.hpp"

using namespace seanav;
using namespace seanav::policy;

namespace {

PolicyConfig tiny_config() {
    PolicyConfig pc;
    pc.history_length = 2;
    pc.encoder_hidden = 8;
    pc.latent_dim = 4;
    pc.backbone_hidden = 8;
    pc.feature_dim = 8;
    pc.nav_hidden = 4;
    pc.alpha_hidden = 4;
    pc.critic_hidden = 8;
    pc.critic_hidden2 = 8;
    return pc;
}

}  // namespace

TEST_CASE("observation flattens in the documented order") {
    Observation o;
    o.linear_velocity = {1, 2, 3};
    o.angular_velocity = {4, 5, 6};
    o.gravity = {7, 8, 9};
    o.goal_body = {10, 11};
    for (int i = 0; i < world::LidarScan::kRayCount; ++i) o.ranges[static_cast<std::size_t>(i)] = 12 + i;
    std::array<double, Observation::kDim> flat{};
    o.flatten(flat);
    CHECK(Observation::kDim == 52);
    for (int i = 0; i < 52; ++i) CHECK(flat[static_cast<std::size_t>(i)] == 1.0 + i);
}

TEST_CASE("history buffer is oldest-first with zero lead before warm-up") {
    const int dim = Observation::kDim;
    HistoryBuffer hb(3);
    std::vector<double> frame(static_cast<std::size_t>(dim));
    std::vector<double> flat(static_cast<std::size_t>(3 * dim));

    auto push_const = [&](double v) {
        std::fill(frame.begin(), frame.end(), v);
        hb.push(frame);
    };

    push_const(1.0);
    push_const(2.0);
    hb.flatten(flat);
    CHECK(hb.count() == 2);
    CHECK(flat[0] == 0.0);
    CHECK(flat[static_cast<std::size_t>(dim) - 1] == 0.0);
    CHECK(flat[static_cast<std::size_t>(dim)] == 1.0);
    CHECK(flat[static_cast<std::size_t>(2 * dim)] == 2.0);

    push_const(3.0);
    push_const(4.0);
    hb.flatten(flat);
    CHECK(hb.count() == 3);
    CHECK(flat[0] == 2.0);
    CHECK(flat[static_cast<std::size_t>(dim)] == 3.0);
    CHECK(flat[static_cast<std::size_t>(2 * dim)] == 4.0);

    hb.clear();
    hb.flatten(flat);
    CHECK(hb.count() == 0);
    for (const double v : flat) CHECK(v == 0.0);
}

TEST_CASE("default network has the expected parameter budget") {
    PolicyNet<double> net;
    CHECK(net.param_count() == 192872);
    const auto shapes = net.shape_table();
    REQUIRE(shapes.size() == 6);
    CHECK(shapes[0] == std::vector<int>{520, 128, 32});
    CHECK(shapes[1] == std::vector<int>{84, 256, 128});
    CHECK(shapes[2] == std::vector<int>{128, 64, 3});
    CHECK(shapes[3] == std::vector<int>{128, 32, 1});
    CHECK(shapes[4] == std::vector<int>{84, 256, 128, 1});
    CHECK(shapes[5] == std::vector<int>{3});
}

TEST_CASE("orthogonal init produces orthonormal rows and zero biases") {
    nn::Mlp<double> m({10, 4}, nn::Activation::Elu, nn::Activation::Linear);
    std::vector<double> p(m.param_count());
    Rng rng(5);

    SUBCASE("unit gain") {
        m.init(p, rng, 1.0);
        for (int r = 0; r < 4; ++r) {
            for (int r2 = 0; r2 < 4; ++r2) {
                double dot = 0.0;
                for (int c = 0; c < 10; ++c) {
                    dot += p[static_cast<std::size_t>(r * 10 + c)] * p[static_cast<std::size_t>(r2 * 10 + c)];
                }
                CHECK(dot == doctest::Approx(r == r2 ? 1.0 : 0.0).epsilon(1e-9));
            }
        }
        for (int b = 0; b < 4; ++b) CHECK(p[static_cast<std::size_t>(40 + b)] == 0.0);
    }

    SUBCASE("final gain scales the rows") {
        m.init(p, rng, 0.01);
        for (int r = 0; r < 4; ++r) {
            double dot = 0.0;
            for (int c = 0; c < 10; ++c) {
                dot += p[static_cast<std::size_t>(r * 10 + c)] * p[static_cast<std::size_t>(r * 10 + c)];
            }
            CHECK(dot == doctest::Approx(1e-4).epsilon(1e-6));
        }
    }
}

TEST_CASE("orthogonal init with more outputs than inputs orthonormalizes columns") {
    nn::Mlp<double> m({4, 10}, nn::Activation::Elu, nn::Activation::Linear);
    std::vector<double> p(m.param_count());
    Rng rng(6);
    m.init(p, rng, 1.0);
    for (int c = 0; c < 4; ++c) {
        for (int c2 = 0; c2 < 4; ++c2) {
            double dot = 0.0;
            for (int r = 0; r < 10; ++r) {
                dot += p[static_cast<std::size_t>(r * 4 + c)] * p[static_cast<std::size_t>(r * 4 + c2)];
            }
            CHECK(dot == doctest::Approx(c == c2 ? 1.0 : 0.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("class-K gain starts at one") {
    PolicyNet<double> net(tiny_config());
    CHECK(net.alpha_from_raw(0.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(net.alpha_from_raw(5.0) > net.alpha_from_raw(0.0));
    CHECK(net.alpha_from_raw(-50.0) > 0.0);
    // Softplus switches to the identity for large inputs without a jump.
    CHECK(PolicyNet<double>::softplus(31.0) == 31.0);
    CHECK(PolicyNet<double>::softplus(29.9) == doctest::Approx(29.9).epsilon(1e-12));
}

TEST_CASE("log-std is clamped in the forward pass and gated in the backward pass") {
    const auto pc = tiny_config();
    PolicyNet<double> net(pc);
    std::vector<double> params(net.param_count());
    Rng rng(7);
    net.init(params, rng);

    const std::size_t ls = net.param_count() - 3;
    params[ls + 0] = -5.0;   // below the clamp
    params[ls + 1] = 2.0;    //  above the clamp
    params[ls + 2] = 0.25;   // strictly inside

    std::vector<double> obs(Observation::kDim, 0.1);
    std::vector<double> hist(static_cast<std::size_t>(pc.history_length) * Observation::kDim, 0.05);
    PolicyEval<double> ev;
    net.eval_full(params, obs, hist, ev);
    CHECK(ev.log_std[0] == -4.0);
    CHECK(ev.log_std[1] == 1.0);
    CHECK(ev.log_std[2] == 0.25);

    std::vector<double> grad(net.param_count(), 0.0);
    PolicyWorkspace<double> ws;
    std::vector<double> dx(static_cast<std::size_t>(net.joint_dim()), 0.0);
    net.backward_main(params, ev, {0, 0, 0}, 0.0, 0.0, {1.0, 1.0, 1.0}, grad, dx, ws);
    CHECK(grad[ls + 0] == 0.0);
    CHECK(grad[ls + 1] == 0.0);
    CHECK(grad[ls + 2] == 1.0);
}

TEST_CASE("gaussian helpers match their closed forms") {
    const std::array<double, 3> zero_ls{0.0, 0.0, 0.0};
    const std::array<double, 3> mean{0.3, -0.2, 1.1};
    CHECK(std::abs(gaussian_log_prob(mean, mean, zero_ls) -
                   (-2.75681559961401822534098920922)) < 1e-12);
    CHECK(std::abs(gaussian_entropy(zero_ls) - 3.0 * 1.4189385332046727) < 1e-12);

    // Against the explicit density for a non-trivial point.
    const std::array<double, 3> ls{-0.5, 0.2, 0.0};
    const std::array<double, 3> a{0.5, -0.1, 0.9};
    double expect = 0.0;
    for (int j = 0; j < 3; ++j) {
        const auto i = static_cast<std::size_t>(j);
        const double sd = std::exp(ls[i]);
        const double z = (a[i] - mean[i]) / sd;
        expect += -0.5 * z * z - ls[i] - 0.5 * std::log(2.0 * std::numbers::pi);
    }
    CHECK(gaussian_log_prob(a, mean, ls) == doctest::Approx(expect).epsilon(1e-12));

    Rng r1(9), r2(9);
    const auto s1 = sample_gaussian(mean, ls, r1);
    const auto s2 = sample_gaussian(mean, ls, r2);
    for (int j = 0; j < 3; ++j) CHECK(s1[static_cast<std::size_t>(j)] == s2[static_cast<std::size_t>(j)]);

    const std::array<double, 3> frozen{-20.0, -20.0, -20.0};
    const auto s3 = sample_gaussian(mean, frozen, r1);
    for (int j = 0; j < 3; ++j) {
        CHECK(std::abs(s3[static_cast<std::size_t>(j)] - mean[static_cast<std::size_t>(j)]) < 1e-6);
    }
}

TEST_CASE("head evaluations on the joint representation match the full pass") {
    const auto pc = tiny_config();
    PolicyNet<double> net(pc);
    std::vector<double> params(net.param_count());
    Rng rng(11);
    net.init(params, rng);
    // Perturb so heads are not near zero.
    for (auto& p : params) p += 0.01;

    std::vector<double> obs(Observation::kDim);
    std::vector<double> hist(static_cast<std::size_t>(pc.history_length) * Observation::kDim);
    for (auto& v : obs) v = rng.uniform(-1.0, 1.0);
    for (auto& v : hist) v = rng.uniform(-1.0, 1.0);

    PolicyEval<double> ev;
    net.eval_full(params, obs, hist, ev);

    nn::MlpCache<double> enc;
    const auto z = net.encode(params, hist, enc);
    for (int i = 0; i < pc.latent_dim; ++i) {
        CHECK(ev.x[static_cast<std::size_t>(Observation::kDim + i)] == z[static_cast<std::size_t>(i)]);
    }

    ActorEval<double> ae;
    net.eval_actor_on_x(params, ev.x, ae);
    for (int j = 0; j < 3; ++j) CHECK(ae.mean[static_cast<std::size_t>(j)] == ev.mean[static_cast<std::size_t>(j)]);

    CriticEval<double> ce;
    net.eval_critic_on_x(params, ev.x, ce);
    CHECK(ce.value == ev.value);
}

TEST_CASE("full backward pass matches finite differences of a linear probe") {
    const auto pc = tiny_config();
    PolicyNet<double> net(pc);
    std::vector<double> params(net.param_count());
    Rng rng(13);
    net.init(params, rng);
    for (auto& p : params) p += 0.02 * rng.normal();

    std::vector<double> obs(Observation::kDim);
    std::vector<double> hist(static_cast<std::size_t>(pc.history_length) * Observation::kDim);
    for (auto& v : obs) v = rng.uniform(-1.0, 1.0);
    for (auto& v : hist) v = rng.uniform(-1.0, 1.0);

    const std::array<double, 3> c_mean{0.7, -1.3, 0.4};
    const double c_alpha = 0.9;
    const double c_value = -0.6;
    const std::array<double, 3> c_ls{0.2, -0.8, 1.1};

    auto probe = [&](std::span<const double> p) {
        PolicyEval<double> ev;
        net.eval_full(p, obs, hist, ev);
        double L = c_alpha * ev.alpha_gain + c_value * ev.value;
        for (int j = 0; j < 3; ++j) {
            const auto i = static_cast<std::size_t>(j);
            L += c_mean[i] * ev.mean[i] + c_ls[i] * ev.log_std[i];
        }
        return L;
    };

    PolicyEval<double> ev;
    net.eval_full(params, obs, hist, ev);
    std::vector<double> grad(net.param_count(), 0.0);
    PolicyWorkspace<double> ws;
    std::array<double, 3> d_mean = c_mean;
    std::array<double, 3> d_ls = c_ls;
    net.backward_full(params, ev, d_mean, c_alpha, c_value, d_ls, grad, ws);

    const double step = 1e-6;
    double err_sq = 0.0, norm_sq = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + step;
        const double up = probe(params);
        params[i] = saved - step;
        const double dn = probe(params);
        params[i] = saved;
        const double fd = (up - dn) / (2.0 * step);
        err_sq += (fd - grad[i]) * (fd - grad[i]);
        norm_sq += fd * fd;
    }
    CHECK(std::sqrt(err_sq) / std::max(1.0, std::sqrt(norm_sq)) < 1e-6);
}

TEST_CASE("backward accumulates instead of overwriting") {
    const auto pc = tiny_config();
    PolicyNet<double> net(pc);
    std::vector<double> params(net.param_count());
    Rng rng(17);
    net.init(params, rng);

    std::vector<double> obs(Observation::kDim, 0.2);
    std::vector<double> hist(static_cast<std::size_t>(pc.history_length) * Observation::kDim, -0.1);
    PolicyEval<double> ev;
    net.eval_full(params, obs, hist, ev);

    PolicyWorkspace<double> ws;
    std::vector<double> g1(net.param_count(), 0.0);
    net.backward_full(params, ev, {1, 0, 0}, 0.0, 1.0, {0, 0, 0}, g1, ws);
    std::vector<double> g2(net.param_count(), 0.0);
    net.backward_full(params, ev, {1, 0, 0}, 0.0, 1.0, {0, 0, 0}, g2, ws);
    net.backward_full(params, ev, {1, 0, 0}, 0.0, 1.0, {0, 0, 0}, g2, ws);
    for (std::size_t i = 0; i < g1.size(); ++i) {
        CHECK(g2[i] == doctest::Approx(2.0 * g1[i]).epsilon(1e-12));
    }
}

TEST_CASE("adam takes lr-sized first steps and is deterministic") {
    nn::Adam<double> a;
    a.lr = 1e-3;
    a.reset(3);
    std::vector<double> p{1.0, 2.0, 3.0};
    const std::vector<double> g{0.5, -0.25, 0.0};
    a.step(p, g);
    // First step moves by lr * sign(g) up to the eps correction.
    CHECK(p[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(2.0 + 1e-3).epsilon(1e-6));
    CHECK(p[2] == 3.0);

    nn::Adam<double> b;
    b.lr = 1e-3;
    b.reset(3);
    std::vector<double> q{1.0, 2.0, 3.0};
    b.step(q, g);
    CHECK(q[0] == p[0]);
}
