#pragma once

#include "cameo/geometry.hpp"

namespace cameo {

// Pinhole camera. R, t are world-to-camera: x_cam = R * x_world + t.
// Continuous image coordinates put the center of pixel (row r, col c) at
// (u, v) = (c + 0.5, r + 0.5).
struct Camera {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  Mat3 R;
  Vec3 t;
  int width = 0, height = 0;

  Vec3 center() const { return R.transposed() * (-t); }

  Vec3 to_camera(const Vec3& p_world) const { return R * p_world + t; }

  // Projects a world point; returns false when the point is at or behind
  // the camera plane. (u, v) are continuous pixel coordinates.
  bool project(const Vec3& p_world, double& u, double& v) const {
    Vec3 pc = to_camera(p_world);
    if (pc.z <= 1e-12) return false;
    u = fx * pc.x / pc.z + cx;
    v = fy * pc.y / pc.z + cy;
    return true;
  }

  // World-space unit ray direction through pixel (row, col) center.
  Vec3 pixel_ray_dir(double row, double col) const {
    Vec3 dir_cam{(col + 0.5 - cx) / fx, (row + 0.5 - cy) / fy, 1.0};
    return normalized(R.transposed() * dir_cam);
  }
};

// Throws std::invalid_argument when intrinsics are out of range or R is not
// a proper rotation (orthonormality and det checked to 1e-6).
void validate_camera(const Camera& cam);

// Relative rotation angle in degrees: acos((trace(Ra * Rb^T) - 1) / 2),
// clamped to [0, 180].
double relative_rotation_deg(const Camera& a, const Camera& b);

// Camera at `position` looking at `target`, with `up` fixing the roll.
Camera make_lookat_camera(const Vec3& position, const Vec3& target,
                          const Vec3& up, double fx, double fy, int width,
                          int height);

}  // namespace cameo
