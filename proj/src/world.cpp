#include "seanav/world.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace seanav::world {

namespace {

constexpr double kRayEps = 1e-12;
constexpr double kSpawnMargin = 0.05;

double sign_or_one(double v) { return v < 0.0 ? -1.0 : 1.0; }

}  // namespace

Difficulty difficulty_from_string(const std::string& s) {
    if (s == "easy") return Difficulty::Easy;
    if (s == "medium") return Difficulty::Medium;
    if (s == "hard") return Difficulty::Hard;
    throw std::invalid_argument("unknown difficulty: " + s);
}

std::string to_string(Difficulty d) {
    switch (d) {
        case Difficulty::Easy: return "easy";
        case Difficulty::Medium: return "medium";
        default: return "hard";
    }
}

int obstacle_count(Difficulty d) {
    switch (d) {
        case Difficulty::Easy: return 6;
        case Difficulty::Medium: return 14;
        default: return 24;
    }
}

double Obstacle::signed_distance(const Vec2& p) const {
    if (kind == Kind::Circle) {
        return (p - center).norm() - radius;
    }
    const Vec2 q{std::abs(p.x - center.x) - half_extents.x,
                 std::abs(p.y - center.y) - half_extents.y};
    const Vec2 outside{std::max(q.x, 0.0), std::max(q.y, 0.0)};
    return outside.norm() + std::min(std::max(q.x, q.y), 0.0);
}

double LidarScan::bearing(int i) {
    return -2.0 * std::numbers::pi / 3.0 + static_cast<double>(i) * std::numbers::pi / 30.0;
}

double signed_distance(const Scenario& scenario, const Vec2& p) {
    const double e = scenario.room_half_extent;
    double best = std::min(std::min(e - p.x, e + p.x), std::min(e - p.y, e + p.y));
    for (const auto& o : scenario.obstacles) best = std::min(best, o.signed_distance(p));
    return best;
}

OccupancyGrid::OccupancyGrid(const Scenario& scenario, double footprint, double cell)
    : cell_(cell), origin_(-scenario.room_half_extent) {
    n_ = static_cast<int>(std::ceil(2.0 * scenario.room_half_extent / cell - 1e-9));
    free_.assign(static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_), 0);
    for (int iy = 0; iy < n_; ++iy) {
        for (int ix = 0; ix < n_; ++ix) {
            const Vec2 c{origin_ + (ix + 0.5) * cell_, origin_ + (iy + 0.5) * cell_};
            free_[static_cast<std::size_t>(iy * n_ + ix)] =
                signed_distance(scenario, c) > footprint ? 1 : 0;
        }
    }
}

int OccupancyGrid::cell_of(double coord) const {
    const int i = static_cast<int>(std::floor((coord - origin_) / cell_));
    return std::clamp(i, 0, n_ - 1);
}

bool OccupancyGrid::connected(const Vec2& a, const Vec2& b) const {
    if (n_ == 0) return false;
    const int ax = cell_of(a.x), ay = cell_of(a.y);
    const int bx = cell_of(b.x), by = cell_of(b.y);
    if (!is_free(ax, ay) || !is_free(bx, by)) return false;
    std::vector<char> seen(free_.size(), 0);
    std::deque<std::pair<int, int>> queue;
    queue.emplace_back(ax, ay);
    seen[static_cast<std::size_t>(ay * n_ + ax)] = 1;
    static constexpr int kDx[4] = {1, -1, 0, 0};
    static constexpr int kDy[4] = {0, 0, 1, -1};
    while (!queue.empty()) {
        const auto [cx, cy] = queue.front();
        queue.pop_front();
        if (cx == bx && cy == by) return true;
        for (int k = 0; k < 4; ++k) {
            const int nx = cx + kDx[k], ny = cy + kDy[k];
            if (!is_free(nx, ny)) continue;
            auto& mark = seen[static_cast<std::size_t>(ny * n_ + nx)];
            if (mark) continue;
            mark = 1;
            queue.emplace_back(nx, ny);
        }
    }
    return false;
}

std::optional<StartGoal> sample_start_goal(const Scenario& scenario, const OccupancyGrid& grid,
                                           const WorldConfig& cfg, double footprint, Rng& rng) {
    const double e = scenario.room_half_extent;
    const double margin = footprint + kSpawnMargin;
    const double lo = -e + margin, hi = e - margin;
    for (int attempt = 0; attempt < 256; ++attempt) {
        const Vec2 start{rng.uniform(lo, hi), rng.uniform(lo, hi)};
        const double heading = wrap_angle(rng.uniform(-std::numbers::pi, std::numbers::pi));
        const Vec2 goal{rng.uniform(lo, hi), rng.uniform(lo, hi)};
        if (signed_distance(scenario, start) < margin) continue;
        if (signed_distance(scenario, goal) < margin) continue;
        if ((goal - start).norm() < cfg.min_start_goal_distance) continue;
        if (!grid.connected(start, goal)) continue;
        return StartGoal{start, heading, goal};
    }
    return std::nullopt;
}

Scenario generate_scenario(Difficulty difficulty, std::uint64_t seed, const WorldConfig& cfg) {
    const int count = obstacle_count(difficulty);
    const double e = cfg.room_half_extent;
    Rng rng(derive_seed(seed, 0x5ce7a110u, static_cast<std::uint64_t>(difficulty)));
    for (int layout = 0; layout < 64; ++layout) {
        Scenario s;
        s.room_half_extent = e;
        s.difficulty = difficulty;
        s.seed = seed;
        s.obstacles.reserve(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) {
            Obstacle o;
            if (rng.bernoulli(0.5)) {
                o.kind = Obstacle::Kind::Circle;
                o.radius = rng.uniform(cfg.circle_radius_min, cfg.circle_radius_max);
                o.center = {rng.uniform(-e + o.radius, e - o.radius),
                            rng.uniform(-e + o.radius, e - o.radius)};
            } else {
                o.kind = Obstacle::Kind::Box;
                o.half_extents = {rng.uniform(cfg.box_half_extent_min, cfg.box_half_extent_max),
                                  rng.uniform(cfg.box_half_extent_min, cfg.box_half_extent_max)};
                o.center = {rng.uniform(-e + o.half_extents.x, e - o.half_extents.x),
                            rng.uniform(-e + o.half_extents.y, e - o.half_extents.y)};
            }
            s.obstacles.push_back(o);
        }
        // Keep only layouts that provably admit a start/goal pair under the
        // larger (training) footprint.
        const OccupancyGrid grid(s, cfg.footprint_train, cfg.grid_cell);
        Rng probe(derive_seed(seed, 0x90a1u, static_cast<std::uint64_t>(layout)));
        if (sample_start_goal(s, grid, cfg, cfg.footprint_train, probe)) return s;
    }
    throw GenerationError("no viable obstacle layout for seed " + std::to_string(seed));
}

namespace {

// Forward intersection distance of ray (origin p, unit dir d) with one
// obstacle; infinity on miss. Returns 0 when p starts inside.
double ray_obstacle(const Vec2& p, const Vec2& d, const Obstacle& o) {
    constexpr double kMiss = std::numeric_limits<double>::infinity();
    if (o.kind == Obstacle::Kind::Circle) {
        const Vec2 m = p - o.center;
        const double b = m.dot(d);
        const double c2 = m.squared_norm() - o.radius * o.radius;
        if (c2 <= 0.0) return 0.0;
        const double disc = b * b - c2;
        if (disc < 0.0) return kMiss;
        const double t = -b - std::sqrt(disc);
        return t >= 0.0 ? t : kMiss;
    }
    const Vec2 lo = o.center - o.half_extents;
    const Vec2 hi = o.center + o.half_extents;
    double tlow = -kMiss, thigh = kMiss;
    const double pv[2] = {p.x, p.y};
    const double dv[2] = {d.x, d.y};
    const double lov[2] = {lo.x, lo.y};
    const double hiv[2] = {hi.x, hi.y};
    for (int a = 0; a < 2; ++a) {
        if (std::abs(dv[a]) < kRayEps) {
            if (pv[a] < lov[a] || pv[a] > hiv[a]) return kMiss;
            continue;
        }
        double t1 = (lov[a] - pv[a]) / dv[a];
        double t2 = (hiv[a] - pv[a]) / dv[a];
        if (t1 > t2) std::swap(t1, t2);
        tlow = std::max(tlow, t1);
        thigh = std::min(thigh, t2);
    }
    if (tlow > thigh || thigh < 0.0) return kMiss;
    return std::max(tlow, 0.0);
}

double ray_room_exit(const Vec2& p, const Vec2& d, double e) {
    double t = std::numeric_limits<double>::infinity();
    if (std::abs(d.x) > kRayEps) t = std::min(t, ((d.x > 0.0 ? e : -e) - p.x) / d.x);
    if (std::abs(d.y) > kRayEps) t = std::min(t, ((d.y > 0.0 ? e : -e) - p.y) / d.y);
    return std::max(t, 0.0);
}

}  // namespace

LidarScan cast_lidar(const Scenario& scenario, const RobotState& state, const WorldConfig& cfg) {
    LidarScan scan;
    for (int i = 0; i < LidarScan::kRayCount; ++i) {
        const double a = state.heading + LidarScan::bearing(i);
        const Vec2 d{std::cos(a), std::sin(a)};
        double t = ray_room_exit(state.position, d, scenario.room_half_extent);
        for (const auto& o : scenario.obstacles) {
            t = std::min(t, ray_obstacle(state.position, d, o));
        }
        scan.ranges[static_cast<std::size_t>(i)] = clamp(t, cfg.lidar_min_range, cfg.lidar_max_range);
    }
    return scan;
}

namespace {

Vec2 obstacle_normal(const Obstacle& o, const Vec2& p) {
    if (o.kind == Obstacle::Kind::Circle) {
        const Vec2 d = p - o.center;
        const double n = d.norm();
        return n > 1e-12 ? d * (1.0 / n) : Vec2{1.0, 0.0};
    }
    const Vec2 q{p.x - o.center.x, p.y - o.center.y};
    const Vec2 clamped{clamp(q.x, -o.half_extents.x, o.half_extents.x),
                       clamp(q.y, -o.half_extents.y, o.half_extents.y)};
    const Vec2 d{q.x - clamped.x, q.y - clamped.y};
    const double n = d.norm();
    if (n > 1e-12) return d * (1.0 / n);
    // On or inside the box: push out along the least-penetrated axis.
    const double dx = o.half_extents.x - std::abs(q.x);
    const double dy = o.half_extents.y - std::abs(q.y);
    if (dx <= dy) return {sign_or_one(q.x), 0.0};
    return {0.0, sign_or_one(q.y)};
}

}  // namespace

ContactInfo check_collision(const Scenario& scenario, const Vec2& position, double footprint) {
    const double e = scenario.room_half_extent;
    double best = e - position.x;
    Vec2 normal{-1.0, 0.0};
    const double wall_sd[4] = {e - position.x, e + position.x, e - position.y, e + position.y};
    const Vec2 wall_n[4] = {{-1.0, 0.0}, {1.0, 0.0}, {0.0, -1.0}, {0.0, 1.0}};
    for (int i = 1; i < 4; ++i) {
        if (wall_sd[i] < best) {
            best = wall_sd[i];
            normal = wall_n[i];
        }
    }
    for (const auto& o : scenario.obstacles) {
        const double sd = o.signed_distance(position);
        if (sd < best) {
            best = sd;
            normal = obstacle_normal(o, position);
        }
    }
    ContactInfo c;
    c.hit = best <= footprint;
    c.depth = c.hit ? footprint - best : 0.0;
    c.normal = normal;
    return c;
}

RobotState step_dynamics(const RobotState& state, const VelocityCommand& command, double dt,
                         double tau, const std::array<double, 3>& velocity_ceiling) {
    const double decay = tau > 0.0 ? std::exp(-dt / tau) : 0.0;
    VelocityCommand v = command + (state.velocity - command) * decay;
    for (int i = 0; i < 3; ++i) v[i] = clamp(v[i], -velocity_ceiling[static_cast<std::size_t>(i)],
                                             velocity_ceiling[static_cast<std::size_t>(i)]);

    const double phi = v.wz * dt;
    Vec2 d_body;
    if (std::abs(phi) < 1e-8) {
        d_body = {v.vx * dt, v.vy * dt};
    } else {
        const double s = std::sin(phi), c = std::cos(phi);
        d_body = {(v.vx * s - v.vy * (1.0 - c)) / v.wz,
                  (v.vx * (1.0 - c) + v.vy * s) / v.wz};
    }

    RobotState out;
    out.position = state.position + rotate(d_body, state.heading);
    out.heading = wrap_angle(state.heading + phi);
    out.velocity = v;
    return out;
}

void to_json(nlohmann::json& j, const Obstacle& o) {
    if (o.kind == Obstacle::Kind::Circle) {
        j = {{"type", "circle"}, {"center", {o.center.x, o.center.y}}, {"radius", o.radius}};
    } else {
        j = {{"type", "box"},
             {"center", {o.center.x, o.center.y}},
             {"half_extents", {o.half_extents.x, o.half_extents.y}}};
    }
}

void from_json(const nlohmann::json& j, Obstacle& o) {
    const auto type = j.at("type").get<std::string>();
    o.center = {j.at("center").at(0).get<double>(), j.at("center").at(1).get<double>()};
    if (type == "circle") {
        o.kind = Obstacle::Kind::Circle;
        o.radius = j.at("radius").get<double>();
    } else if (type == "box") {
        o.kind = Obstacle::Kind::Box;
        o.half_extents = {j.at("half_extents").at(0).get<double>(),
                          j.at("half_extents").at(1).get<double>()};
    } else {
        throw std::invalid_argument("unknown obstacle type: " + type);
    }
}

void to_json(nlohmann::json& j, const Scenario& s) {
    j = {{"extent", s.room_half_extent},
         {"difficulty", to_string(s.difficulty)},
         {"seed", s.seed},
         {"obstacles", s.obstacles}};
}

void from_json(const nlohmann::json& j, Scenario& s) {
    s.room_half_extent = j.at("extent").get<double>();
    s.difficulty = difficulty_from_string(j.at("difficulty").get<std::string>());
    s.seed = j.at("seed").get<std::uint64_t>();
    s.obstacles = j.at("obstacles").get<std::vector<Obstacle>>();
}

}  // namespace seanav::world
