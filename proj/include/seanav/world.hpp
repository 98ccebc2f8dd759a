#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seanav/geometry.hpp"
#include "seanav/rng.hpp"

namespace seanav::world {

enum class Difficulty { Easy, Medium, Hard };

Difficulty difficulty_from_string(const std::string& s);
std::string to_string(Difficulty d);
int obstacle_count(Difficulty d);

struct WorldConfig {
    double room_half_extent = 5.0;       // room is [-e, e]^2
    double circle_radius_min = 0.2;
    double circle_radius_max = 0.6;
    double box_half_extent_min = 0.2;
    double box_half_extent_max = 0.7;
    double footprint_train = 0.40;
    double footprint_eval = 0.35;
    double min_start_goal_distance = 4.0;
    double lidar_min_range = 0.1;
    double lidar_max_range = 3.0;
    double sim_dt = 0.02;
    double tau_v = 0.2;
    double grid_cell = 0.1;              // occupancy grid used for connectivity checks
};

struct Obstacle {
    enum class Kind { Circle, Box };
    Kind kind = Kind::Circle;
    Vec2 center;
    double radius = 0.0;        // circles
    Vec2 half_extents;          // axis-aligned boxes

    // Signed distance from p to the obstacle boundary; negative inside.
    double signed_distance(const Vec2& p) const;
};

struct Scenario {
    double room_half_extent = 5.0;
    Difficulty difficulty = Difficulty::Easy;
    std::uint64_t seed = 0;
    std::vector<Obstacle> obstacles;
};

struct RobotState {
    Vec2 position;
    double heading = 0.0;        // wrapped to (-pi, pi]
    VelocityCommand velocity;    // body-frame twist
};

struct LidarScan {
    static constexpr int kRayCount = 41;
    std::array<double, kRayCount> ranges{};

    // Body-frame bearing of ray i, spanning [-2pi/3, 2pi/3] in pi/30 steps.
    static double bearing(int i);
};

struct ContactInfo {
    bool hit = false;
    double depth = 0.0;          // penetration of the inflated boundary, >= 0 when hit
    Vec2 normal;                 // unit push-out direction (world frame)
};

struct StartGoal {
    Vec2 start;
    double heading = 0.0;
    Vec2 goal;
};

// Free-space bitmap at WorldConfig::grid_cell resolution for a fixed scenario
// and footprint. Used to reject start/goal pairs in disconnected pockets.
class OccupancyGrid {
public:
    OccupancyGrid() = default;
    OccupancyGrid(const Scenario& scenario, double footprint, double cell);

    bool in_bounds(int ix, int iy) const { return ix >= 0 && ix < n_ && iy >= 0 && iy < n_; }
    bool is_free(int ix, int iy) const { return in_bounds(ix, iy) && free_[static_cast<std::size_t>(iy * n_ + ix)]; }
    int cell_of(double coord) const;
    bool connected(const Vec2& a, const Vec2& b) const;
    int side() const { return n_; }

private:
    int n_ = 0;
    double cell_ = 0.1;
    double origin_ = 0.0;
    std::vector<char> free_;
};

struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Signed distance from p to the nearest obstacle or room wall; positive in
// free space. The room interior counts as free, walls as boundary.
double signed_distance(const Scenario& scenario, const Vec2& p);

Scenario generate_scenario(Difficulty difficulty, std::uint64_t seed, const WorldConfig& cfg);

// Samples a start/goal pair with clearance > footprint, separation >=
// min_start_goal_distance and a connected free path. Returns nullopt if the
// layout admits none within the attempt budget.
std::optional<StartGoal> sample_start_goal(const Scenario& scenario, const OccupancyGrid& grid,
                                           const WorldConfig& cfg, double footprint, Rng& rng);

LidarScan cast_lidar(const Scenario& scenario, const RobotState& state, const WorldConfig& cfg);

ContactInfo check_collision(const Scenario& scenario, const Vec2& position, double footprint);

// First-order velocity tracking (time constant tau) followed by exact SE(2)
// integration of the resulting body twist over dt. velocity_ceiling bounds
// each achieved component (sim guard, not the command limit).
RobotState step_dynamics(const RobotState& state, const VelocityCommand& command, double dt,
                         double tau, const std::array<double, 3>& velocity_ceiling);

void to_json(nlohmann::json& j, const Obstacle& o);
void from_json(const nlohmann::json& j, Obstacle& o);
void to_json(nlohmann::json& j, const Scenario& s);
void from_json(const nlohmann::json& j, Scenario& s);

}  // namespace seanav::world
