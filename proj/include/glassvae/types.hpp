#pragma once

#include <array>
#include <cmath>

namespace glassvae {

using Vec3 = std::array<double, 3>;

inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// Wrap a coordinate into [0, length).
inline double wrap_coordinate(double c, double length) {
    double w = c - length * std::floor(c / length);
    if (w >= length || w < 0.0) w = 0.0;
    return w;
}

}  // namespace glassvae
