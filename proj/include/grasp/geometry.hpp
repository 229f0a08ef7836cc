#pragma once

#include <cmath>

namespace grasp {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
};

// Fold an angle into the half-open interval (-pi/2, pi/2]. Lines have
// period pi, so this is the canonical orientation representative.
inline double fold_half_pi(double theta) {
  double t = std::fmod(theta, kPi);
  if (t <= -kPi / 2.0) t += kPi;
  if (t > kPi / 2.0) t -= kPi;
  return t;
}

// Wrap into (-pi, pi].
inline double wrap_pi(double theta) {
  double t = std::fmod(theta, 2.0 * kPi);
  if (t <= -kPi) t += 2.0 * kPi;
  if (t > kPi) t -= 2.0 * kPi;
  return t;
}

// Distance between two line orientations, in [0, pi/2].
inline double angular_dist_mod_pi(double a, double b) {
  return std::fabs(fold_half_pi(a - b));
}

inline double clamp(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

}  // namespace grasp
