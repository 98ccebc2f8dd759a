#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "seanav/rewards.hpp"
#include "seanav/rng.hpp"

using namespace seanav;
using namespace seanav::rewards;

namespace {
double prox(double d) { return 1.0 / (1.0 + 2.0 * d * d); }
}

TEST_CASE("velocity term combines heading-aligned speed and proximity") {
    RewardWeights w;
    RewardContext ctx;
    ctx.goal_distance = 1.0;
    ctx.heading_error = 0.0;
    ctx.vx = 1.0;
    const auto r = compute_reward(ctx, w);
    // cos(0) * 1 + 1/(1 + 2) = 4/3, scaled by the weight.
    CHECK(std::abs(r.velocity - 15.0 * (4.0 / 3.0)) < 1e-12);
    CHECK(r.reach == 0.0);
    CHECK(r.termination == 0.0);
}

TEST_CASE("reach bonus only inside half a meter") {
    RewardWeights w;
    RewardContext ctx;
    ctx.goal_distance = 0.49;
    CHECK(compute_reward(ctx, w).reach == doctest::Approx(10.0 * prox(0.49)).epsilon(1e-12));
    ctx.goal_distance = 0.5;
    CHECK(compute_reward(ctx, w).reach == 0.0);
}

TEST_CASE("clearance switches from open-ray tracking to goal proximity") {
    RewardWeights w;
    RewardContext ctx;
    ctx.vx = 0.5;
    ctx.open_ray_offset = 0.2;

    ctx.goal_distance = 2.0;
    CHECK(compute_reward(ctx, w).clearance ==
          doctest::Approx(15.0 * std::cos(0.2) * 0.5).epsilon(1e-12));

    ctx.goal_distance = 1.0;    // boundary counts as near
    CHECK(compute_reward(ctx, w).clearance == doctest::Approx(15.0 * prox(1.0)).epsilon(1e-12));
}

TEST_CASE("stuck penalty needs all four gates") {
    RewardWeights w;
    RewardContext base;
    base.goal_distance = 2.0;
    base.max_displacement = 0.05;
    base.vx = 0.3;
    base.wz = 0.5;
    CHECK(compute_reward(base, w).stuck == -5.0);

    auto ctx = base;
    ctx.goal_distance = 0.9;    // near the goal: not stuck
    CHECK(compute_reward(ctx, w).stuck == 0.0);
    ctx = base;
    ctx.max_displacement = 0.1;
    CHECK(compute_reward(ctx, w).stuck == 0.0);
    ctx = base;
    ctx.vx = 0.0;
    CHECK(compute_reward(ctx, w).stuck == 0.0);
    ctx = base;
    ctx.wz = 1.0;
    CHECK(compute_reward(ctx, w).stuck == 0.0);
}

TEST_CASE("collision penalty scales with squared speed") {
    RewardWeights w;
    RewardContext ctx;
    ctx.goal_distance = 0.8;
    ctx.vx = 0.6;
    ctx.vy = -0.2;
    ctx.wz = 0.3;
    ctx.collided = true;
    ctx.terminated = true;
    const auto r = compute_reward(ctx, w);
    CHECK(std::abs(r.collision - (-4.0) * (1.0 + 4.0 * 0.49)) < 1e-12);
    CHECK(r.termination == -100.0);
    CHECK(std::abs(r.total - (r.termination + r.reach + r.velocity + r.clearance + r.stuck +
                              r.collision + r.angular)) < 1e-12);
}

TEST_CASE("angular penalty reads the out-of-plane rates") {
    RewardWeights w;
    RewardContext ctx;
    ctx.goal_distance = 3.0;
    ctx.wx = 0.3;
    ctx.wy = -0.4;
    CHECK(std::abs(compute_reward(ctx, w).angular - (-0.05 * 0.5)) < 1e-12);
}

TEST_CASE("context derives heading error and the most open ray") {
    world::RobotState st;
    st.position = {0.0, 0.0};
    st.heading = std::numbers::pi / 2.0;
    st.velocity = {0.7, -0.1, 0.2};
    const Vec2 goal{0.0, 2.0};

    world::LidarScan scan;
    for (auto& r : scan.ranges) r = 1.0;
    scan.ranges[5] = 2.5;

    const auto ctx = make_context(st, goal, scan, false, false, 0.4);
    CHECK(ctx.goal_distance == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(std::abs(ctx.heading_error) < 1e-12);
    CHECK(ctx.open_ray_offset == doctest::Approx(world::LidarScan::bearing(5)).epsilon(1e-12));
    CHECK(ctx.vx == 0.7);
    CHECK(ctx.vy == -0.1);
    CHECK(ctx.wz == 0.2);
    CHECK(ctx.wx == 0.0);
    CHECK(ctx.wy == 0.0);
    CHECK(ctx.max_displacement == 0.4);

    // Ties resolve toward the straightest bearing.
    world::LidarScan flat_scan;
    for (auto& r : flat_scan.ranges) r = 3.0;
    const auto ctx2 = make_context(st, goal, flat_scan, false, false, 1.0);
    CHECK(ctx2.open_ray_offset == 0.0);

    // Goal behind the robot gives a half-turn heading error.
    world::RobotState back = st;
    back.heading = -std::numbers::pi / 2.0;
    const auto ctx3 = make_context(back, goal, flat_scan, false, false, 1.0);
    CHECK(std::abs(std::abs(ctx3.heading_error) - std::numbers::pi) < 1e-9);
}

TEST_CASE("stuck tracker matches a brute-force window maximum") {
    const int window = 5;
    StuckTracker tracker(window);
    Rng rng(21);
    std::vector<Vec2> pts;
    Vec2 p{0.0, 0.0};
    for (int t = 0; t < 30; ++t) {
        p.x += rng.uniform(-0.05, 0.08);
        p.y += rng.uniform(-0.05, 0.05);
        pts.push_back(p);
        tracker.push(p);
        if (t + 1 < window) {
            CHECK(std::isinf(tracker.max_displacement()));
            continue;
        }
        const Vec2 origin = pts[static_cast<std::size_t>(t + 1 - window)];
        double best = 0.0;
        for (int j = t + 2 - window; j <= t; ++j) {
            best = std::max(best, (pts[static_cast<std::size_t>(j)] - origin).norm());
        }
        CHECK(tracker.max_displacement() == doctest::Approx(best).epsilon(1e-12));
    }
    tracker.clear();
    CHECK(std::isinf(tracker.max_displacement()));
}
