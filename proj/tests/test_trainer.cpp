#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <vector>

#include "seanav/shield.hpp"
#include "seanav/trainer.hpp"

using namespace seanav;
using namespace seanav::trainer;

namespace {

Config tiny_config() {
    Config c;
    c.policy.history_length = 3;
    c.policy.encoder_hidden = 8;
    c.policy.latent_dim = 4;
    c.policy.backbone_hidden = 8;
    c.policy.feature_dim = 8;
    c.policy.nav_hidden = 4;
    c.policy.alpha_hidden = 4;
    c.policy.critic_hidden = 8;
    c.policy.critic_hidden2 = 8;
    c.train.num_envs = 2;
    c.train.rollout_steps = 8;
    c.train.epochs = 0;        // no updates: parameters stay at their init
    c.train.minibatches = 1;
    c.train.threads = 1;
    c.train.episode_duration = 0.4;   // forces truncations inside the rollout
    return c;
}

}  // namespace

TEST_CASE("ablation names round trip") {
    CHECK(Ablation{}.name() == "full");
    CHECK(Ablation::from_string("full").shield);
    CHECK(Ablation::from_string("none").acsi);
    CHECK_FALSE(Ablation::from_string("no-shield").shield);
    CHECK_FALSE(Ablation::from_string("no-acsi").acsi);
    CHECK_FALSE(Ablation::from_string("no-reg").regularizers);
    for (const char* n : {"full", "no-shield", "no-acsi", "no-reg"}) {
        CHECK(Ablation::from_string(n).name() == n);
    }
    CHECK_THROWS_AS((void)Ablation::from_string("bogus"), std::invalid_argument);
}

TEST_CASE("randomization draws stay inside their documented ranges") {
    Rng rng(18);
    for (int i = 0; i < 500; ++i) {
        const auto d = draw_randomization(rng, true);
        CHECK(d.ray_delay_ms >= 40.0);
        CHECK(d.ray_delay_ms < 80.0);
        const int ticks = d.delay_ticks(0.1);
        CHECK(ticks >= 0);
        CHECK(ticks <= 1);
        for (const double v : d.gravity_noise) CHECK(std::abs(v) <= 0.05);
        for (const double v : d.linvel_noise) CHECK(std::abs(v) <= 0.1);
        for (const double v : d.angvel_noise) CHECK(std::abs(v) <= 0.1);
        CHECK(d.friction >= -0.2);
        CHECK(d.friction < 1.25);
        CHECK(std::abs(d.mass_perturbation) <= 1.5);
        const double expect = 0.2 * (1.0 + 0.1 * d.mass_perturbation) *
                              clamp(1.0 / (1.0 + d.friction), 0.5, 2.0);
        CHECK(d.effective_tau(0.2) == doctest::Approx(expect).epsilon(1e-12));
    }
    const auto off = draw_randomization(rng, false);
    CHECK(off.ray_delay_ms == 0.0);
    CHECK(off.friction == 0.0);
    CHECK(off.effective_tau(0.2) == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("rollout batch history gathering zero-fills before the episode start") {
    RolloutBatch<double> b;
    b.resize(1, 4, 3);
    CHECK(b.row_stride() == 8);
    const int dim = policy::Observation::kDim;
    for (int r = 0; r < 8; ++r) {
        double* row = b.obs_row(0, r);
        std::fill(row, row + dim, static_cast<double>(r));
    }
    std::vector<double> out(static_cast<std::size_t>(3) * dim);

    b.gather_history(0, 5, 4, out);
    CHECK(out[0] == 0.0);
    CHECK(out[static_cast<std::size_t>(dim)] == 0.0);
    CHECK(out[static_cast<std::size_t>(2 * dim)] == 4.0);

    b.gather_history(0, 5, 0, out);
    CHECK(out[0] == 2.0);
    CHECK(out[static_cast<std::size_t>(dim)] == 3.0);
    CHECK(out[static_cast<std::size_t>(2 * dim)] == 4.0);
}

TEST_CASE("stored log-probs and values match a replay of the frozen policy") {
    const auto cfg = tiny_config();
    Trainer<double> tr(cfg, world::Difficulty::Easy, 3);
    (void)tr.run_iteration();

    auto& b = tr.batch();
    const auto params = tr.params();
    const auto& net = tr.net();
    const int dim = policy::Observation::kDim;
    std::vector<double> hist(static_cast<std::size_t>(b.horizon) * dim);
    policy::PolicyEval<double> ev;
    for (std::size_t idx = 0; idx < b.sample_count(); ++idx) {
        const int e = static_cast<int>(idx) / b.steps;
        const int t = static_cast<int>(idx) % b.steps;
        const int row = b.horizon + t;
        b.gather_history(e, row, b.hist_from[idx], hist);
        const std::span<const double> obs(b.obs_row(e, row), static_cast<std::size_t>(dim));
        net.eval_full(params, obs, hist, ev);
        const double logp = policy::gaussian_log_prob(b.actions[idx], ev.mean, ev.log_std);
        CHECK(logp == b.log_prob_old[idx]);
        CHECK(static_cast<double>(ev.value) == b.values_old[idx]);
    }
}

TEST_CASE("returns equal discounted reward sums when gae_lambda is one") {
    auto cfg = tiny_config();
    cfg.train.gae_lambda = 1.0;
    cfg.train.gamma = 0.9;
    Trainer<double> tr(cfg, world::Difficulty::Easy, 4);
    (void)tr.run_iteration();

    auto& b = tr.batch();
    const int S = b.steps;
    int truncations = 0;
    for (int e = 0; e < b.num_envs; ++e) {
        double future = b.tail_value[static_cast<std::size_t>(e)];
        for (int t = S - 1; t >= 0; --t) {
            const std::size_t i = static_cast<std::size_t>(e) * S + static_cast<std::size_t>(t);
            double expect;
            if (b.done[i] == 1) {
                expect = b.rewards[i];
            } else if (b.done[i] == 2) {
                expect = b.rewards[i] + cfg.train.gamma * b.bootstrap_value[i];
                ++truncations;
            } else {
                expect = b.rewards[i] + cfg.train.gamma * future;
            }
            CHECK(static_cast<double>(b.returns[i]) == doctest::Approx(expect).epsilon(1e-9));
            future = expect;
        }
    }
    // The short episode cap must have produced truncations to make this test
    // exercise the bootstrap path.
    CHECK(truncations >= 2);

    double mean = 0.0;
    for (std::size_t i = 0; i < b.sample_count(); ++i) mean += static_cast<double>(b.advantages[i]);
    mean /= static_cast<double>(b.sample_count());
    CHECK(std::abs(mean) < 1e-9);
    double var = 0.0;
    for (std::size_t i = 0; i < b.sample_count(); ++i) {
        const double a = static_cast<double>(b.advantages[i]) - mean;
        var += a * a;
    }
    CHECK(std::sqrt(var / static_cast<double>(b.sample_count())) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("frozen parameters give unit ratios and a zero-mean policy loss") {
    const auto cfg = tiny_config();
    Trainer<double> tr(cfg, world::Difficulty::Easy, 5);
    (void)tr.run_iteration();

    auto& b = tr.batch();
    std::vector<std::uint32_t> all(b.sample_count());
    std::iota(all.begin(), all.end(), 0u);
    std::vector<double> grad(tr.net().param_count());
    LossReport report;
    const double total = tr.loss_and_grad(tr.params(), b, all, grad, report);

    CHECK(std::isfinite(total));
    CHECK(std::abs(report.policy) < 1e-6);
    const double expect_entropy =
        3.0 * (cfg.policy.init_log_std + 1.4189385332046727);
    CHECK(report.entropy == doctest::Approx(expect_entropy).epsilon(1e-12));
    CHECK(report.reg == doctest::Approx(report.range + report.smooth).epsilon(1e-12));
    CHECK(report.total ==
          doctest::Approx(report.ppo + cfg.train.lambda_shield * report.shield +
                          cfg.train.lambda_reg * report.reg)
              .epsilon(1e-9));
    CHECK(total == doctest::Approx(report.total).epsilon(1e-9));
    for (const double g : grad) CHECK(std::isfinite(g));
}

TEST_CASE("same seed is bitwise reproducible across thread counts") {
    auto cfg = tiny_config();
    cfg.train.num_envs = 8;
    cfg.train.rollout_steps = 8;
    cfg.train.epochs = 2;
    cfg.train.minibatches = 2;
    cfg.train.episode_duration = 1.0;

    auto cfg4 = cfg;
    cfg4.train.threads = 4;
    Trainer<float> a(cfg, world::Difficulty::Easy, 6);
    Trainer<float> b(cfg4, world::Difficulty::Easy, 6);

    for (int it = 0; it < 2; ++it) {
        const auto sa = a.run_iteration();
        const auto sb = b.run_iteration();
        std::ostringstream ra, rb;
        write_stats_csv_row(ra, sa);
        write_stats_csv_row(rb, sb);
        CHECK(ra.str() == rb.str());
    }
    const auto pa = a.params();
    const auto pb = b.params();
    REQUIRE(pa.size() == pb.size());
    bool same = true;
    for (std::size_t i = 0; i < pa.size(); ++i) same = same && pa[i] == pb[i];
    CHECK(same);

    // A different seed diverges immediately.
    Trainer<float> c(cfg, world::Difficulty::Easy, 7);
    const auto sc = c.run_iteration();
    std::ostringstream rc;
    write_stats_csv_row(rc, sc);
    Trainer<float> d(cfg, world::Difficulty::Easy, 6);
    const auto sd = d.run_iteration();
    std::ostringstream rd;
    write_stats_csv_row(rd, sd);
    CHECK(rc.str() != rd.str());
}

TEST_CASE("observation rows carry across iterations") {
    const auto cfg = tiny_config();
    Trainer<double> tr(cfg, world::Difficulty::Easy, 8);
    (void)tr.run_iteration();

    auto& b = tr.batch();
    const int H = b.horizon;
    const int S = b.steps;
    const int dim = policy::Observation::kDim;
    std::vector<std::vector<double>> tail(static_cast<std::size_t>(b.num_envs));
    for (int e = 0; e < b.num_envs; ++e) {
        const double* src = b.obs_row(e, S);
        tail[static_cast<std::size_t>(e)].assign(src, src + static_cast<std::size_t>(H + 1) * dim);
    }

    (void)tr.run_iteration();
    for (int e = 0; e < b.num_envs; ++e) {
        const double* head = b.obs_row(e, 0);
        const auto& expect = tail[static_cast<std::size_t>(e)];
        bool same = true;
        for (std::size_t i = 0; i < expect.size(); ++i) same = same && head[i] == expect[i];
        CHECK(same);
    }
}

TEST_CASE("the no-shield ablation never projects") {
    const auto cfg = tiny_config();

    Trainer<float> off(cfg, world::Difficulty::Easy, 9, Ablation::from_string("no-shield"));
    const auto before = shield::projection_call_count();
    (void)off.run_iteration();
    CHECK(shield::projection_call_count() - before == 0);

    Trainer<float> on(cfg, world::Difficulty::Easy, 9);
    const auto before_on = shield::projection_call_count();
    (void)on.run_iteration();
    CHECK(shield::projection_call_count() - before_on ==
          static_cast<std::uint64_t>(cfg.train.num_envs) *
              static_cast<std::uint64_t>(cfg.train.rollout_steps));
}

TEST_CASE("episode accounting is consistent") {
    const auto cfg = tiny_config();
    Trainer<double> tr(cfg, world::Difficulty::Easy, 10);
    const auto s = tr.run_iteration();
    CHECK(s.episodes == s.successes + s.collisions + s.timeouts);
    CHECK(s.episodes == s.replays + s.full_resets);
    CHECK(s.episodes >= 2);    // the 0.4 s cap ends episodes inside the rollout
    CHECK(s.env_steps == static_cast<long long>(cfg.train.num_envs) * cfg.train.rollout_steps);
    CHECK(s.mean_p_reset >= cfg.acsi.p_min - 1e-12);
    CHECK(s.mean_p_reset <= cfg.acsi.p_max + 1e-12);
    CHECK(s.mean_c_front >= 0.0);
    CHECK(s.mean_alpha > 0.0);
}

TEST_CASE("stats CSV header and rows have matching shape") {
    std::ostringstream header;
    write_stats_csv_header(header);
    const auto htext = header.str();
    const auto cols = std::count(htext.begin(), htext.end(), ',') + 1;
    CHECK(cols == 31);
    CHECK(htext.rfind("iteration,", 0) == 0);
    CHECK(htext.find("steps_per_second") == std::string::npos);

    const auto cfg = tiny_config();
    Trainer<float> tr(cfg, world::Difficulty::Easy, 11);
    const auto s = tr.run_iteration();
    std::ostringstream row;
    write_stats_csv_row(row, s);
    const auto rtext = row.str();
    CHECK(std::count(rtext.begin(), rtext.end(), ',') + 1 == cols);
    CHECK(rtext.rfind("0,", 0) == 0);
    CHECK(rtext.back() == '\n');
}

TEST_CASE("format_double round trips exactly") {
    for (const double v : {0.1, -1.0 / 3.0, 1e-300, 0.0, 12345.678901234567, 2.5}) {
        const auto s = format_double(v);
        CHECK(std::strtod(s.c_str(), nullptr) == v);
    }
}
