#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "seanav/geometry.hpp"
#include "seanav/world.hpp"

namespace seanav::shield {

struct ShieldParams {
    double d_safe = 0.45;       // inflated safety radius subtracted from each ray
    double lse_k = 10.0;        // log-sum-exp sharpness
    double damping = 1.0;       // epsilon_d added to ||grad h||^2 in the closed form
    double alpha_min = 0.1;     // hinge threshold for the learned class-K gain
};

// Per-ray barrier residuals h_i = rho_i - d_safe and their gradients in
// command space (v_x, v_y, omega_z); the omega_z component is always 0.
struct ConstraintSet {
    std::vector<double> residuals;
    std::vector<std::array<double, 3>> gradients;

    std::size_t size() const { return residuals.size(); }
};

struct FusedBarrier {
    double h = 0.0;
    std::array<double, 3> grad{};
    std::vector<double> weights;   // softmax(-k h_i); convex combination coefficients
    double k = 0.0;
};

struct ShieldOutput {
    VelocityCommand u_safe;
    double eta = 0.0;                        // closed-form multiplier, >= 0
    bool active = false;                     // eta > 0
    std::array<std::array<double, 3>, 3> jac_u{};   // d u_safe / d u_nominal
    std::array<double, 3> jac_alpha{};              // d u_safe / d alpha
};

struct SingularGradientError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

ConstraintSet build_constraints(const world::LidarScan& scan, const ShieldParams& params);

// Soft-min fusion h = -(1/k) log sum exp(-k h_i), evaluated with a max-shift
// so it stays finite for any residual scale.
FusedBarrier fuse_lse(const ConstraintSet& constraints, double k);

// Closed-form damped projection of the nominal command onto the half-space
// <grad h, u> + alpha h >= 0, with damping added to the Gram denominator.
ShieldOutput project_damped(const VelocityCommand& nominal, const FusedBarrier& barrier,
                            double alpha, double damping);

// Exact half-space projection (the damping-free QP solution). Throws
// SingularGradientError when ||grad h|| <= delta_singular.
VelocityCommand solve_qp_oracle(const VelocityCommand& nominal, const FusedBarrier& barrier,
                                double alpha, double delta_singular = 1e-3);

// Pulls an upstream gradient w.r.t. u_safe back to (u_nominal, alpha).
struct ShieldGradients {
    std::array<double, 3> d_nominal{};
    double d_alpha = 0.0;
};
ShieldGradients shield_backward(const ShieldOutput& out, const std::array<double, 3>& upstream);

// Process-wide count of project_damped invocations; lets tests prove the
// no-shield ablation never projects.
std::uint64_t projection_call_count();

}  // namespace seanav::shield
