#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace seanav::checks {

struct CheckResult {
    std::string name;
    bool passed = false;
    double worst = 0.0;     // worst observed error or margin, check-specific
    std::string detail;
};

// Soft-min fusion stays within [min h_i - ln(N)/k, min h_i].
CheckResult check_lse_sandwich(int cases = 10000, std::uint64_t seed = 101);

// Zero-damping projection matches the exact half-space QP solution.
CheckResult check_qp_equivalence(int cases = 10000, std::uint64_t seed = 202);

// Damped multiplier magnitude never exceeds |b| / epsilon_d, including
// degenerate zero-gradient barriers.
CheckResult check_damping_bound(int cases = 10000, std::uint64_t seed = 303);

// Analytic projection Jacobians against central differences; cases with the
// constraint boundary inside the difference stencil are skipped.
CheckResult check_projection_jacobian(int cases = 1000, std::uint64_t seed = 404);

// Full training-loss gradient against finite differences on small nets fed
// with a real rollout batch.
CheckResult check_loss_gradient(std::uint64_t seed = 505);

// Shielded wall charge in an empty room keeps the fused barrier above -0.01
// for every tested class-K gain and adversarial command.
CheckResult check_forward_invariance();

// Collision replay frequency matches the curriculum probability, and the
// probability itself matches the closed form.
CheckResult check_replay_fraction(int cases = 10000, std::uint64_t seed = 707);

// Each reward term against an independently coded scalar on fixed contexts.
CheckResult check_reward_table();

std::vector<CheckResult> run_all();

}  // namespace seanav::checks
