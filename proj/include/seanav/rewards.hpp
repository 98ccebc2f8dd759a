#pragma once

#include <array>
#include <limits>
#include <vector>

#include "seanav/geometry.hpp"
#include "seanav/world.hpp"

namespace seanav::rewards {

struct RewardWeights {
    double termination = -100.0;
    double reach = 10.0;
    double velocity = 15.0;
    double clearance = 15.0;
    double stuck = -5.0;
    double collision = -4.0;
    double angular = -0.05;
};

struct RewardBreakdown {
    double termination = 0.0;
    double reach = 0.0;
    double velocity = 0.0;
    double clearance = 0.0;
    double stuck = 0.0;
    double collision = 0.0;
    double angular = 0.0;
    double total = 0.0;
};

// Everything the reward terms read, already reduced to scalars. The trainer
// assembles it from simulator state; tests can construct it directly.
struct RewardContext {
    double goal_distance = 0.0;      // d
    double heading_error = 0.0;      // bearing to goal in body frame
    double open_ray_offset = 0.0;    // bearing of the most open lidar ray
    double vx = 0.0;                 // body-frame velocities after the step
    double vy = 0.0;
    double wz = 0.0;
    double wx = 0.0;                 // out-of-plane rates, always 0 here
    double wy = 0.0;
    bool collided = false;
    bool terminated = false;         // failure termination this step
    double max_displacement = std::numeric_limits<double>::infinity();  // stuck window
};

RewardBreakdown compute_reward(const RewardContext& ctx, const RewardWeights& w);

// Builds the context from simulator quantities: goal bearing from the pose,
// open-ray direction from the scan (ties to the smaller |bearing|).
RewardContext make_context(const world::RobotState& state, const Vec2& goal,
                           const world::LidarScan& scan, bool collided, bool terminated,
                           double max_displacement);

// Max displacement of the robot over a sliding window of recent positions:
// max_t ||p_t - p_oldest||. Reports +inf until the window is full so the
// stuck penalty stays off early in an episode.
class StuckTracker {
public:
    StuckTracker() = default;
    explicit StuckTracker(int window_steps) { reset(window_steps); }

    void reset(int window_steps);
    void clear();
    void push(const Vec2& p);
    bool full() const { return count_ == static_cast<int>(buf_.size()); }
    double max_displacement() const;

private:
    std::vector<Vec2> buf_;
    int head_ = 0;
    int count_ = 0;
};

}  // namespace seanav::rewards
