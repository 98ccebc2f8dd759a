#include "seanav/rewards.hpp"

#include <cmath>

namespace seanav::rewards {

namespace {
double proximity(double d) { return 1.0 / (1.0 + 2.0 * d * d); }
}

RewardBreakdown compute_reward(const RewardContext& ctx, const RewardWeights& w) {
    RewardBreakdown r;
    const double d = ctx.goal_distance;
    const bool near = d <= 1.0;

    r.termination = w.termination * (ctx.terminated ? 1.0 : 0.0);
    r.reach = w.reach * (d < 0.5 ? proximity(d) : 0.0);
    r.velocity = w.velocity * (std::cos(ctx.heading_error) * ctx.vx + proximity(d));
    r.clearance = w.clearance * (near ? proximity(d) : std::cos(ctx.open_ray_offset) * ctx.vx);

    const bool stuck = !near && ctx.max_displacement < 0.1 && ctx.vx > 0.0 && std::abs(ctx.wz) < 1.0;
    r.stuck = w.stuck * (stuck ? 1.0 : 0.0);

    const double speed_sq = ctx.vx * ctx.vx + ctx.vy * ctx.vy + ctx.wz * ctx.wz;
    r.collision = w.collision * (ctx.collided ? 1.0 + 4.0 * speed_sq : 0.0);
    r.angular = w.angular * std::hypot(ctx.wx, ctx.wy);

    r.total = r.termination + r.reach + r.velocity + r.clearance + r.stuck + r.collision + r.angular;
    return r;
}

RewardContext make_context(const world::RobotState& state, const Vec2& goal,
                           const world::LidarScan& scan, bool collided, bool terminated,
                           double max_displacement) {
    RewardContext ctx;
    const Vec2 to_goal = goal - state.position;
    ctx.goal_distance = to_goal.norm();
    const Vec2 gb = rotate_inverse(to_goal, state.heading);
    ctx.heading_error = (ctx.goal_distance > 1e-12) ? std::atan2(gb.y, gb.x) : 0.0;

    int best = 0;
    for (int i = 1; i < world::LidarScan::kRayCount; ++i) {
        const double ri = scan.ranges[static_cast<std::size_t>(i)];
        const double rb = scan.ranges[static_cast<std::size_t>(best)];
        if (ri > rb || (ri == rb && std::abs(world::LidarScan::bearing(i)) <
                                        std::abs(world::LidarScan::bearing(best)))) {
            best = i;
        }
    }
    ctx.open_ray_offset = world::LidarScan::bearing(best);

    ctx.vx = state.velocity.vx;
    ctx.vy = state.velocity.vy;
    ctx.wz = state.velocity.wz;
    ctx.collided = collided;
    ctx.terminated = terminated;
    ctx.max_displacement = max_displacement;
    return ctx;
}

void StuckTracker::reset(int window_steps) {
    buf_.assign(static_cast<std::size_t>(window_steps), Vec2{});
    head_ = 0;
    count_ = 0;
}

void StuckTracker::clear() {
    head_ = 0;
    count_ = 0;
}

void StuckTracker::push(const Vec2& p) {
    buf_[static_cast<std::size_t>(head_)] = p;
    head_ = (head_ + 1) % static_cast<int>(buf_.size());
    if (count_ < static_cast<int>(buf_.size())) ++count_;
}

double StuckTracker::max_displacement() const {
    if (!full()) return std::numeric_limits<double>::infinity();
    const int n = static_cast<int>(buf_.size());
    const Vec2 origin = buf_[static_cast<std::size_t>((head_ - count_ + n) % n)];
    double best = 0.0;
    for (int i = 1; i < count_; ++i) {
        const Vec2& p = buf_[static_cast<std::size_t>((head_ - count_ + i + n) % n)];
        best = std::max(best, (p - origin).norm());
    }
    return best;
}

}  // namespace seanav::rewards
