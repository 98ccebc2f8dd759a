#pragma once

#include <optional>
#include <vector>

#include "seanav/geometry.hpp"
#include "seanav/rng.hpp"
#include "seanav/world.hpp"

namespace seanav::acsi {

struct AcsiParams {
    double p_min = 0.1;
    double p_max = 0.5;
    double d_up = 0.5;          // goal distance below which L_goal rises
    double d_down = 2.0;        // goal distance above which L_goal falls
    double step_increment = 0.05;
    double t_back = 1.0;        // seconds rewound on a critical replay
    double t_hist = 3.0;        // ring horizon in seconds
};

// Per-env curriculum. L_goal is an unclipped running counter; only the
// derived probability clips it to [0, 1].
struct CurriculumState {
    double l_goal = 0.0;
    double p_min = 0.1;
    double p_max = 0.5;
    double d_up = 0.5;
    double d_down = 2.0;

    double p_reset() const {
        const double c = l_goal < 0.0 ? 0.0 : (l_goal > 1.0 ? 1.0 : l_goal);
        return p_min + (p_max - p_min) * c;
    }
};

void update_curriculum(CurriculumState& cs, double goal_distance, double step_increment);

struct Snapshot {
    world::RobotState state;
    double time = 0.0;
};

// Fixed-capacity ring of recent robot states keyed by simulation time.
// Capacity covers t_hist at the push cadence; times must be pushed
// monotonically increasing.
class StateHistoryRing {
public:
    StateHistoryRing() = default;
    StateHistoryRing(double t_hist, double push_dt);

    void clear();
    void push(const world::RobotState& state, double time);
    std::size_t size() const { return count_; }
    std::size_t capacity() const { return buf_.size(); }

    // Latest snapshot with time <= t; falls back to the oldest retained
    // snapshot when the whole ring is newer than t.
    std::optional<Snapshot> at_or_before(double t) const;
    std::optional<Snapshot> oldest() const;
    std::optional<Snapshot> newest() const;

private:
    std::vector<Snapshot> buf_;
    std::size_t head_ = 0;
    std::size_t count_ = 0;
};

struct ResetDecision {
    enum class Kind { ReplayCritical, FullReset };
    Kind kind = Kind::FullReset;
    Snapshot snapshot;          // valid for ReplayCritical
};

// Collision handler: with probability curriculum.p_reset() replays from
// t_back seconds before the collision, otherwise asks for a full reset.
ResetDecision on_collision(const StateHistoryRing& ring, const CurriculumState& curriculum,
                           double collision_time, double t_back, Rng& rng);

}  // namespace seanav::acsi
