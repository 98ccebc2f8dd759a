#include "seanav/shield.hpp"

#include <atomic>
#include <cmath>
#include <limits>

namespace seanav::shield {

namespace {
std::atomic<std::uint64_t> g_projection_calls{0};
}

ConstraintSet build_constraints(const world::LidarScan& scan, const ShieldParams& params) {
    ConstraintSet cs;
    cs.residuals.resize(world::LidarScan::kRayCount);
    cs.gradients.resize(world::LidarScan::kRayCount);
    for (int i = 0; i < world::LidarScan::kRayCount; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        const double b = world::LidarScan::bearing(i);
        cs.residuals[idx] = scan.ranges[idx] - params.d_safe;
        // d h_i / d u = -(cos b, sin b, 0): commanding velocity along the ray
        // shortens it at unit rate to first order.
        cs.gradients[idx] = {-std::cos(b), -std::sin(b), 0.0};
    }
    return cs;
}

FusedBarrier fuse_lse(const ConstraintSet& constraints, double k) {
    FusedBarrier fb;
    fb.k = k;
    const std::size_t n = constraints.size();
    fb.weights.assign(n, 0.0);
    if (n == 0) {
        fb.h = std::numeric_limits<double>::infinity();
        return fb;
    }
    double h_min = constraints.residuals[0];
    for (std::size_t i = 1; i < n; ++i) h_min = std::min(h_min, constraints.residuals[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        fb.weights[i] = std::exp(-k * (constraints.residuals[i] - h_min));
        sum += fb.weights[i];
    }
    fb.h = h_min - std::log(sum) / k;
    const double inv = 1.0 / sum;
    for (std::size_t i = 0; i < n; ++i) {
        fb.weights[i] *= inv;
        for (int d = 0; d < 3; ++d) {
            fb.grad[static_cast<std::size_t>(d)] +=
                fb.weights[i] * constraints.gradients[i][static_cast<std::size_t>(d)];
        }
    }
    return fb;
}

ShieldOutput project_damped(const VelocityCommand& nominal, const FusedBarrier& barrier,
                            double alpha, double damping) {
    g_projection_calls.fetch_add(1, std::memory_order_relaxed);
    const auto& g = barrier.grad;
    const double gg = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
    const double b = g[0] * nominal.vx + g[1] * nominal.vy + g[2] * nominal.wz
                   + alpha * barrier.h;

    ShieldOutput out;
    out.jac_u = {{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};
    if (b >= 0.0) {
        out.u_safe = nominal;
        return out;
    }
    const double denom = gg + damping;
    const double eta = -b / denom;
    out.eta = eta;
    out.active = true;
    out.u_safe = {nominal.vx + eta * g[0], nominal.vy + eta * g[1], nominal.wz + eta * g[2]};
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            out.jac_u[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] -=
                g[static_cast<std::size_t>(r)] * g[static_cast<std::size_t>(c)] / denom;
        }
        out.jac_alpha[static_cast<std::size_t>(r)] =
            -barrier.h * g[static_cast<std::size_t>(r)] / denom;
    }
    return out;
}

VelocityCommand solve_qp_oracle(const VelocityCommand& nominal, const FusedBarrier& barrier,
                                double alpha, double delta_singular) {
    const auto& g = barrier.grad;
    const double gg = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
    if (gg <= delta_singular * delta_singular) {
        throw SingularGradientError("barrier gradient norm below singular threshold");
    }
    const double b = g[0] * nominal.vx + g[1] * nominal.vy + g[2] * nominal.wz
                   + alpha * barrier.h;
    if (b >= 0.0) return nominal;
    const double eta = -b / gg;
    return {nominal.vx + eta * g[0], nominal.vy + eta * g[1], nominal.wz + eta * g[2]};
}

ShieldGradients shield_backward(const ShieldOutput& out, const std::array<double, 3>& upstream) {
    ShieldGradients g;
    for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int r = 0; r < 3; ++r) {
            acc += out.jac_u[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]
                 * upstream[static_cast<std::size_t>(r)];
        }
        g.d_nominal[static_cast<std::size_t>(c)] = acc;
        g.d_alpha += out.jac_alpha[static_cast<std::size_t>(c)] * upstream[static_cast<std::size_t>(c)];
    }
    return g;
}

std::uint64_t projection_call_count() {
    return g_projection_calls.load(std::memory_order_relaxed);
}

}  // namespace seanav::shield
