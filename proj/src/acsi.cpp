#include "seanav/acsi.hpp"

#include <cmath>

namespace seanav::acsi {

void update_curriculum(CurriculumState& cs, double goal_distance, double step_increment) {
    if (goal_distance < cs.d_up) {
        cs.l_goal += step_increment;
    } else if (goal_distance > cs.d_down) {
        cs.l_goal -= step_increment;
    }
}

StateHistoryRing::StateHistoryRing(double t_hist, double push_dt) {
    const auto cap = static_cast<std::size_t>(std::ceil(t_hist / push_dt)) + 1;
    buf_.resize(cap);
}

void StateHistoryRing::clear() {
    head_ = 0;
    count_ = 0;
}

void StateHistoryRing::push(const world::RobotState& state, double time) {
    buf_[head_] = {state, time};
    head_ = (head_ + 1) % buf_.size();
    if (count_ < buf_.size()) ++count_;
}

std::optional<Snapshot> StateHistoryRing::at_or_before(double t) const {
    if (count_ == 0) return std::nullopt;
    // Scan newest to oldest; entries are time-ordered by construction.
    for (std::size_t i = 0; i < count_; ++i) {
        const std::size_t idx = (head_ + buf_.size() - 1 - i) % buf_.size();
        if (buf_[idx].time <= t) return buf_[idx];
    }
    return oldest();
}

std::optional<Snapshot> StateHistoryRing::oldest() const {
    if (count_ == 0) return std::nullopt;
    return buf_[(head_ + buf_.size() - count_) % buf_.size()];
}

std::optional<Snapshot> StateHistoryRing::newest() const {
    if (count_ == 0) return std::nullopt;
    return buf_[(head_ + buf_.size() - 1) % buf_.size()];
}

ResetDecision on_collision(const StateHistoryRing& ring, const CurriculumState& curriculum,
                           double collision_time, double t_back, Rng& rng) {
    ResetDecision d;
    // Draw unconditionally so a collision always consumes exactly one draw.
    const bool replay = rng.bernoulli(curriculum.p_reset());
    const auto snap = ring.at_or_before(collision_time - t_back);
    if (replay && snap) {
        d.kind = ResetDecision::Kind::ReplayCritical;
        d.snapshot = *snap;
    }
    return d;
}

}  // namespace seanav::acsi
