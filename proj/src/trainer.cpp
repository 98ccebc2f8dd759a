#include "seanav/trainer.hpp"

#include <cinttypes>
#include <cstdio>

namespace seanav::trainer {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_stats_csv_header(std::ostream& os) {
    os << "iteration,env_steps,loss_total,loss_ppo,loss_policy,loss_value,entropy,"
          "loss_shield,loss_range,loss_smooth,reward_total,reward_termination,reward_reach,"
          "reward_velocity,reward_clearance,reward_stuck,reward_collision,reward_angular,"
          "mean_alpha,shield_active_fraction,mean_p_reset,mean_l_goal,mean_c_front,"
          "mean_episode_return,episodes,successes,collisions,timeouts,replays,full_resets,"
          "grad_norm\n";
}

void write_stats_csv_row(std::ostream& os, const IterationStats& s) {
    const auto f = [](double v) { return format_double(v); };
    os << s.iteration << ',' << s.env_steps << ',' << f(s.loss.total) << ',' << f(s.loss.ppo)
       << ',' << f(s.loss.policy) << ',' << f(s.loss.value) << ',' << f(s.loss.entropy) << ','
       << f(s.loss.shield) << ',' << f(s.loss.range) << ',' << f(s.loss.smooth) << ','
       << f(s.mean_reward.total) << ',' << f(s.mean_reward.termination) << ','
       << f(s.mean_reward.reach) << ',' << f(s.mean_reward.velocity) << ','
       << f(s.mean_reward.clearance) << ',' << f(s.mean_reward.stuck) << ','
       << f(s.mean_reward.collision) << ',' << f(s.mean_reward.angular) << ','
       << f(s.mean_alpha) << ',' << f(s.shield_active_fraction) << ',' << f(s.mean_p_reset)
       << ',' << f(s.mean_l_goal) << ',' << f(s.mean_c_front) << ',' << f(s.mean_episode_return)
       << ',' << s.episodes << ',' << s.successes << ',' << s.collisions << ',' << s.timeouts
       << ',' << s.replays << ',' << s.full_resets << ',' << f(s.grad_norm) << '\n';
}

}  // namespace seanav::trainer
