#include <doctest.h>

#include <cmath>
#include <limits>

#include "seanav/rng.hpp"
#include "seanav/shield.hpp"

using namespace seanav;
using namespace seanav::shield;

namespace {

ConstraintSet two_ray_set(double r0, double r1) {
    ConstraintSet cs;
    cs.residuals = {r0, r1};
    cs.gradients = {{{1.0, 0.0, 0.0}}, {{0.0, 1.0, 0.0}}};
    return cs;
}

FusedBarrier fixed_barrier(double h, double gx, double gy, double gz) {
    FusedBarrier fb;
    fb.h = h;
    fb.grad = {gx, gy, gz};
    fb.k = 10.0;
    return fb;
}

}  // namespace

TEST_CASE("constraints subtract the safety radius per ray") {
    world::LidarScan scan;
    for (auto& r : scan.ranges) r = 1.0;
    scan.ranges[20] = 0.7;
    ShieldParams p;
    const auto cs = build_constraints(scan, p);
    REQUIRE(cs.size() == 41);
    CHECK(cs.residuals[20] == doctest::Approx(0.7 - 0.45).epsilon(1e-15));
    CHECK(cs.residuals[0] == doctest::Approx(1.0 - 0.45).epsilon(1e-15));
    // Front ray points along +x, so its gradient is -x.
    CHECK(cs.gradients[20][0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(std::abs(cs.gradients[20][1]) < 1e-12);
    CHECK(cs.gradients[20][2] == 0.0);
    const double b0 = world::LidarScan::bearing(0);
    CHECK(cs.gradients[0][0] == doctest::Approx(-std::cos(b0)).epsilon(1e-12));
    CHECK(cs.gradients[0][1] == doctest::Approx(-std::sin(b0)).epsilon(1e-12));
}

TEST_CASE("log-sum-exp fusion matches a frozen reference value") {
    const auto fb = fuse_lse(two_ray_set(0.5, 0.6), 10.0);
    CHECK(std::abs(fb.h - 0.468673831248177716595100450503) < 1e-12);
    CHECK(fb.weights[0] + fb.weights[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(fb.weights[0] > fb.weights[1]);
    // Gradient is the convex combination of per-ray gradients.
    CHECK(fb.grad[0] == doctest::Approx(fb.weights[0]).epsilon(1e-15));
    CHECK(fb.grad[1] == doctest::Approx(fb.weights[1]).epsilon(1e-15));
    CHECK(fb.grad[2] == 0.0);
}

TEST_CASE("fusion obeys the soft-min sandwich") {
    Rng rng(2024);
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform_index(41));
        ConstraintSet cs;
        double hmin = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            const double r = rng.uniform(-2.0, 5.0);
            cs.residuals.push_back(r);
            cs.gradients.push_back({1.0, 0.0, 0.0});
            hmin = std::min(hmin, r);
        }
        const double k = (trial % 2 == 0) ? 10.0 : 50.0;
        const auto fb = fuse_lse(cs, k);
        CHECK(fb.h <= hmin + 1e-12);
        CHECK(fb.h >= hmin - std::log(static_cast<double>(n)) / k - 1e-12);
        double wsum = 0.0;
        for (const double w : fb.weights) {
            CHECK(w >= 0.0);
            wsum += w;
        }
        CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("uniform residuals fuse to min minus log(n)/k with flat weights") {
    world::LidarScan scan;
    for (auto& r : scan.ranges) r = 1.0;
    ShieldParams p;
    const auto fb = fuse_lse(build_constraints(scan, p), p.lse_k);
    const double expected = 0.55 - 0.371357206670430780386676337304;
    CHECK(std::abs(fb.h - expected) < 1e-12);
    for (const double w : fb.weights) CHECK(w == doctest::Approx(1.0 / 41.0).epsilon(1e-12));
    CHECK(fb.grad[2] == 0.0);
}

TEST_CASE("empty constraint set fuses to an unconstrained barrier") {
    const auto fb = fuse_lse(ConstraintSet{}, 10.0);
    CHECK(std::isinf(fb.h));
    CHECK(fb.h > 0.0);
    CHECK(fb.weights.empty());
}

TEST_CASE("projection is the identity when the constraint is slack") {
    const auto fb = fixed_barrier(2.0, -1.0, 0.0, 0.0);
    // b = -0.3 + 1.0 * 2.0 > 0.
    const auto out = project_damped({0.3, 0.1, -0.2}, fb, 1.0, 1.0);
    CHECK_FALSE(out.active);
    CHECK(out.eta == 0.0);
    CHECK(out.u_safe.vx == 0.3);
    CHECK(out.u_safe.vy == 0.1);
    CHECK(out.u_safe.wz == -0.2);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            CHECK(out.jac_u[r][c] == (r == c ? 1.0 : 0.0));
        }
        CHECK(out.jac_alpha[r] == 0.0);
    }
}

TEST_CASE("active projection matches the closed form") {
    const auto fb = fixed_barrier(-0.1, -1.0, 0.0, 0.0);
    // b = -1.0 - 0.1 = -1.1; gg = 1; denom = 2.
    const auto out = project_damped({1.0, 0.0, 0.0}, fb, 1.0, 1.0);
    CHECK(out.active);
    CHECK(out.eta == doctest::Approx(0.55).epsilon(1e-15));
    CHECK(out.u_safe.vx == doctest::Approx(0.45).epsilon(1e-15));
    CHECK(out.u_safe.vy == 0.0);
    CHECK(out.jac_u[0][0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(out.jac_u[1][1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(out.jac_u[0][1] == doctest::Approx(0.0));
    CHECK(out.jac_alpha[0] == doctest::Approx(-0.05).epsilon(1e-15));

    // Residual constraint violation shrinks by damping / (gg + damping).
    const double margin = -1.0 * out.u_safe.vx + 1.0 * fb.h;
    CHECK(margin == doctest::Approx(-1.1 * 1.0 / 2.0).epsilon(1e-12));
}

TEST_CASE("undamped projection makes the constraint exactly tight") {
    Rng rng(55);
    for (int trial = 0; trial < 200; ++trial) {
        FusedBarrier fb;
        fb.h = rng.uniform(-1.0, 0.5);
        for (auto& g : fb.grad) g = rng.uniform(-2.0, 2.0);
        const double gg = fb.grad[0] * fb.grad[0] + fb.grad[1] * fb.grad[1] + fb.grad[2] * fb.grad[2];
        if (gg < 1e-3) continue;
        const VelocityCommand u{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        const double alpha = rng.uniform(0.1, 2.0);
        const auto out = project_damped(u, fb, alpha, 0.0);
        if (!out.active) continue;
        const double margin = fb.grad[0] * out.u_safe.vx + fb.grad[1] * out.u_safe.vy +
                              fb.grad[2] * out.u_safe.wz + alpha * fb.h;
        CHECK(std::abs(margin) < 1e-12);
    }
}

TEST_CASE("undamped projection reproduces the QP solution") {
    // Tolerance sits far below the 1e-9 requirement but above instruction
    // selection noise (fused multiply-adds differ between the two paths).
    Rng rng(77);
    int active_cases = 0;
    for (int trial = 0; trial < 500; ++trial) {
        FusedBarrier fb;
        fb.h = rng.uniform(-1.0, 1.0);
        double gg = 0.0;
        do {
            for (auto& g : fb.grad) g = rng.uniform(-2.0, 2.0);
            gg = fb.grad[0] * fb.grad[0] + fb.grad[1] * fb.grad[1] + fb.grad[2] * fb.grad[2];
        } while (gg <= 1.001e-6);
        const VelocityCommand u{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        const double alpha = rng.uniform(0.1, 2.0);
        const auto damped = project_damped(u, fb, alpha, 0.0);
        const auto qp = solve_qp_oracle(u, fb, alpha);
        CHECK(std::abs(damped.u_safe.vx - qp.vx) < 1e-12);
        CHECK(std::abs(damped.u_safe.vy - qp.vy) < 1e-12);
        CHECK(std::abs(damped.u_safe.wz - qp.wz) < 1e-12);
        active_cases += damped.active ? 1 : 0;
    }
    CHECK(active_cases > 50);
}

TEST_CASE("QP oracle rejects singular gradients") {
    const auto fb = fixed_barrier(-0.5, 1e-4, 0.0, 0.0);
    CHECK_THROWS_AS((void)solve_qp_oracle({1.0, 0.0, 0.0}, fb, 1.0), SingularGradientError);
    const auto ok = fixed_barrier(-0.5, 0.1, 0.0, 0.0);
    CHECK_NOTHROW((void)solve_qp_oracle({1.0, 0.0, 0.0}, ok, 1.0));
}

TEST_CASE("multiplier magnitude is capped by |b| / damping") {
    Rng rng(88);
    for (int trial = 0; trial < 1000; ++trial) {
        FusedBarrier fb;
        fb.h = rng.uniform(-1.0, 1.0);
        for (auto& g : fb.grad) g = rng.uniform(-2.0, 2.0);
        if (trial % 10 == 0) fb.grad = {0.0, 0.0, 0.0};
        const VelocityCommand u{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        const double alpha = rng.uniform(0.1, 2.0);
        const double damping = (trial % 2 == 0) ? 1e-3 : 0.1;
        const auto out = project_damped(u, fb, alpha, damping);
        const double b = fb.grad[0] * u.vx + fb.grad[1] * u.vy + fb.grad[2] * u.wz + alpha * fb.h;
        CHECK(std::abs(out.eta) <= std::abs(b) / damping + 1e-15);
        CHECK(out.eta >= 0.0);
    }
}

TEST_CASE("analytic Jacobians agree with finite differences") {
    Rng rng(99);
    const double step = 1e-6;
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        FusedBarrier fb;
        fb.h = rng.uniform(-0.5, 0.0);
        for (auto& g : fb.grad) g = rng.uniform(-1.5, 1.5);
        VelocityCommand u{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
        const double alpha = rng.uniform(0.2, 1.5);
        const double damping = 0.5;
        const double b = fb.grad[0] * u.vx + fb.grad[1] * u.vy + fb.grad[2] * u.wz + alpha * fb.h;
        if (std::abs(b) < 1e-4) continue;   // keep clear of the projection kink
        const auto out = project_damped(u, fb, alpha, damping);
        for (int c = 0; c < 3; ++c) {
            VelocityCommand up = u, dn = u;
            up[c] += step;
            dn[c] -= step;
            const auto fp = project_damped(up, fb, alpha, damping);
            const auto fd = project_damped(dn, fb, alpha, damping);
            for (int r = 0; r < 3; ++r) {
                const double num = (fp.u_safe[r] - fd.u_safe[r]) / (2.0 * step);
                CHECK(num == doctest::Approx(out.jac_u[r][c]).epsilon(1e-6));
            }
        }
        const auto ap = project_damped(u, fb, alpha + step, damping);
        const auto ad = project_damped(u, fb, alpha - step, damping);
        for (int r = 0; r < 3; ++r) {
            const double num = (ap.u_safe[r] - ad.u_safe[r]) / (2.0 * step);
            CHECK(num == doctest::Approx(out.jac_alpha[r]).epsilon(1e-6));
        }
        ++checked;
    }
    CHECK(checked > 100);
}

TEST_CASE("shield_backward is the Jacobian transpose") {
    const auto fb = fixed_barrier(-0.3, -0.8, 0.3, 0.0);
    const auto out = project_damped({0.9, -0.2, 0.4}, fb, 0.7, 0.5);
    REQUIRE(out.active);
    const std::array<double, 3> up{0.5, -1.0, 2.0};
    const auto g = shield_backward(out, up);
    for (int c = 0; c < 3; ++c) {
        double expect = 0.0;
        for (int r = 0; r < 3; ++r) expect += out.jac_u[r][c] * up[r];
        CHECK(g.d_nominal[c] == doctest::Approx(expect).epsilon(1e-15));
    }
    double expect_alpha = 0.0;
    for (int r = 0; r < 3; ++r) expect_alpha += out.jac_alpha[r] * up[r];
    CHECK(g.d_alpha == doctest::Approx(expect_alpha).epsilon(1e-15));
}

TEST_CASE("projection call counter advances") {
    const auto before = projection_call_count();
    const auto fb = fixed_barrier(1.0, -1.0, 0.0, 0.0);
    (void)project_damped({0.0, 0.0, 0.0}, fb, 1.0, 1.0);
    (void)project_damped({0.0, 0.0, 0.0}, fb, 1.0, 1.0);
    CHECK(projection_call_count() == before + 2);
}
