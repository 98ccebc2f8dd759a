#pragma once

#include <array>
#include <cmath>
#include <numbers>

namespace seanav {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
    double squared_norm() const { return x * x + y * y; }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

// Planar command / body twist: (v_x, v_y, omega_z).
struct VelocityCommand {
    double vx = 0.0;
    double vy = 0.0;
    double wz = 0.0;

    double operator[](int i) const { return i == 0 ? vx : (i == 1 ? vy : wz); }
    double& operator[](int i) { return i == 0 ? vx : (i == 1 ? vy : wz); }
    std::array<double, 3> to_array() const { return {vx, vy, wz}; }
    static VelocityCommand from_array(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }

    VelocityCommand operator+(const VelocityCommand& o) const { return {vx + o.vx, vy + o.vy, wz + o.wz}; }
    VelocityCommand operator-(const VelocityCommand& o) const { return {vx - o.vx, vy - o.vy, wz - o.wz}; }
    VelocityCommand operator*(double s) const { return {vx * s, vy * s, wz * s}; }
    double squared_norm() const { return vx * vx + vy * vy + wz * wz; }
};

// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
    const double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(a + std::numbers::pi, two_pi);
    if (r <= 0.0) r += two_pi;
    return r - std::numbers::pi;
}

// Rotates v from body frame to world frame given heading theta.
inline Vec2 rotate(const Vec2& v, double theta) {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

inline Vec2 rotate_inverse(const Vec2& v, double theta) { return rotate(v, -theta); }

inline double clamp(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

}  // namespace seanav
