#include "grasp/pose_estimation.hpp"

#include <algorithm>
#include <cmath>

namespace grasp {

double mask_ratio(const PixelMask& visible, int full_area) {
  if (full_area <= 0) throw InvalidReference("full_area must be positive");
  double m = static_cast<double>(visible.points.size());
  double M = static_cast<double>(full_area);
  if (m > M) {
    // Rasterization jitter can overshoot the pre-recorded full count by a
    // sliver; anything beyond 1% means the reference is wrong.
    if (m > 1.01 * M) throw InvalidReference("visible mask exceeds full_area by more than 1%");
    return 1.0;
  }
  return m / M;
}

Vec2 mask_centroid(const PixelMask& mask) {
  if (mask.points.empty()) throw EmptyMask();
  double sx = 0.0, sy = 0.0;
  for (const auto& p : mask.points) {
    sx += p.x;
    sy += p.y;
  }
  double n = static_cast<double>(mask.points.size());
  return {sx / n, sy / n};
}

Sym2Matrix covariance_2x2(const PixelMask& mask, const Vec2& center) {
  if (mask.points.empty()) throw EmptyMask();
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& p : mask.points) {
    double rx = p.x - center.x;
    double ry = p.y - center.y;
    sxx += rx * rx;
    sxy += rx * ry;
    syy += ry * ry;
  }
  // Population normalization: eigenvectors are scale-invariant and 1/n
  // stays defined for a single-point mask.
  double n = static_cast<double>(mask.points.size());
  return {sxx / n, sxy / n, syy / n};
}

EigenDecomp eigen_sym2(const Sym2Matrix& m) {
  EigenDecomp out;
  double tr = m.a + m.d;
  double det = m.a * m.d - m.b * m.b;
  double disc = (m.a - m.d) * (m.a - m.d) + 4.0 * m.b * m.b;
  double root = std::sqrt(std::max(disc, 0.0));
  out.lambda1 = 0.5 * (tr + root);
  out.lambda2 = 0.5 * (tr - root);
  // For PSD inputs, lambda2 = det / lambda1 is better conditioned than the
  // subtraction when the spectrum is spread.
  if (out.lambda1 > 0.0) out.lambda2 = det / out.lambda1;

  // Eigenvector for lambda1 from whichever (A - lambda I) row is better
  // conditioned; ties (b == 0, a == d) fall back to the x axis.
  Vec2 v1{m.b, out.lambda1 - m.a};
  Vec2 v2{out.lambda1 - m.d, m.b};
  Vec2 v = (v1.norm() >= v2.norm()) ? v1 : v2;
  double nv = v.norm();
  if (nv == 0.0) {
    out.axis1 = {1.0, 0.0};
  } else {
    out.axis1 = {v.x / nv, v.y / nv};
  }
  out.axis2 = {-out.axis1.y, out.axis1.x};
  return out;
}

double principal_angle(const Vec2& direction) {
  if (direction.norm() == 0.0) throw DegenerateDirection();
  return fold_half_pi(std::atan2(direction.y, direction.x));
}

ObjectPose estimate_pose(const PixelMask& mask) {
  if (mask.points.empty()) throw EmptyMask();
  ObjectPose pose;
  pose.center = mask_centroid(mask);
  if (mask.points.size() == 1) {
    // Heavy occlusion can shrink a mask to one pixel; report it as an
    // orientation-free pose instead of failing.
    pose.degenerate = true;
    return pose;
  }
  Sym2Matrix cov = covariance_2x2(mask, pose.center);
  EigenDecomp eig = eigen_sym2(cov);
  pose.lambda1 = eig.lambda1;
  pose.lambda2 = eig.lambda2;
  if (eig.lambda1 <= 0.0 || eig.lambda2 / eig.lambda1 > kDegenerateEigenRatio) {
    pose.degenerate = true;
    pose.theta = 0.0;
    return pose;
  }
  pose.theta = principal_angle(eig.axis1);
  return pose;
}

ObjectPose pixel_to_world(const AffineCalib& calib, const ObjectPose& pixel_pose) {
  if (std::fabs(calib.det()) < 1e-12) throw SingularCalibration();
  ObjectPose out = pixel_pose;
  out.center = calib.apply(pixel_pose.center);
  if (!pixel_pose.degenerate) {
    Vec2 dir = calib.apply_direction({std::cos(pixel_pose.theta), std::sin(pixel_pose.theta)});
    out.theta = principal_angle(dir);
  }
  return out;
}

std::vector<Vec2> principal_projection(const PixelMask& mask) {
  ObjectPose pose = estimate_pose(mask);
  Vec2 axis{std::cos(pose.theta), std::sin(pose.theta)};
  std::vector<Vec2> line;
  line.reserve(mask.points.size());
  for (const auto& p : mask.points) {
    Vec2 res{p.x - pose.center.x, p.y - pose.center.y};
    double s = res.dot(axis);
    line.push_back({pose.center.x + s * axis.x, pose.center.y + s * axis.y});
  }
  return line;
}

}  // namespace grasp
