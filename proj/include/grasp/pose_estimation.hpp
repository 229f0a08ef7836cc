#pragma once

#include <stdexcept>
#include <vector>

#include "grasp/geometry.hpp"

namespace grasp {

struct EmptyMask : std::runtime_error {
  EmptyMask() : std::runtime_error("mask contains no points") {}
};
struct DegenerateDirection : std::runtime_error {
  DegenerateDirection() : std::runtime_error("direction vector has zero length") {}
};
struct InvalidReference : std::runtime_error {
  explicit InvalidReference(const std::string& what) : std::runtime_error(what) {}
};
struct SingularCalibration : std::runtime_error {
  SingularCalibration() : std::runtime_error("calibration map is not invertible") {}
};

struct PixelCoord {
  int x = 0;  // column
  int y = 0;  // row
};

struct PixelMask {
  std::vector<PixelCoord> points;
  int class_label = 0;
};

// Entries [[a, b], [b, d]] of a symmetric 2x2 covariance matrix.
struct Sym2Matrix {
  double a = 0.0;
  double b = 0.0;
  double d = 0.0;
};

struct EigenDecomp {
  double lambda1 = 0.0;  // lambda1 >= lambda2
  double lambda2 = 0.0;
  Vec2 axis1;  // unit eigenvector for lambda1
  Vec2 axis2;  // unit eigenvector for lambda2 (perpendicular to axis1)
};

struct ObjectPose {
  Vec2 center;
  double theta = 0.0;  // principal-axis angle, in (-pi/2, pi/2]
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  bool degenerate = false;  // no well-defined orientation (near-isotropic or tiny mask)
};

// Affine pixel->world map: world = linear * pixel + offset.
struct AffineCalib {
  double m00 = 1.0, m01 = 0.0;
  double m10 = 0.0, m11 = 1.0;
  double tx = 0.0, ty = 0.0;

  Vec2 apply(const Vec2& p) const {
    return {m00 * p.x + m01 * p.y + tx, m10 * p.x + m11 * p.y + ty};
  }
  Vec2 apply_direction(const Vec2& d) const {
    return {m00 * d.x + m01 * d.y, m10 * d.x + m11 * d.y};
  }
  double det() const { return m00 * m11 - m01 * m10; }

  static AffineCalib identity() { return {}; }
  static AffineCalib uniform_scale(double s) { return {s, 0.0, 0.0, s, 0.0, 0.0}; }
};

// Eigenvalue-ratio threshold below which an orientation is considered
// well defined. Rasterized squares and discs land near ratio 1; the most
// isotropic oriented catalog shape stays under ~0.2.
inline constexpr double kDegenerateEigenRatio = 0.8;

double mask_ratio(const PixelMask& visible, int full_area);

Vec2 mask_centroid(const PixelMask& mask);

Sym2Matrix covariance_2x2(const PixelMask& mask, const Vec2& center);

EigenDecomp eigen_sym2(const Sym2Matrix& m);

double principal_angle(const Vec2& direction);

ObjectPose estimate_pose(const PixelMask& mask);

ObjectPose pixel_to_world(const AffineCalib& calib, const ObjectPose& pixel_pose);

// Debug view of the principal line: residuals projected onto the main
// axis and shifted back to the centroid.
std::vector<Vec2> principal_projection(const PixelMask& mask);

}  // namespace grasp
