#include "cameo/camera.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cameo {

void validate_camera(const Camera& cam) {
  if (!(cam.fx > 0) || !(cam.fy > 0))
    throw std::invalid_argument("camera: focal lengths must be positive");
  if (cam.width < 1 || cam.height < 1)
    throw std::invalid_argument("camera: image size must be >= 1");
  if (!(cam.cx >= 0 && cam.cx < cam.width) ||
      !(cam.cy >= 0 && cam.cy < cam.height))
    throw std::invalid_argument("camera: principal point outside image");

  Mat3 rrt = cam.R * cam.R.transposed();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double expect = (i == j) ? 1.0 : 0.0;
      if (std::abs(rrt(i, j) - expect) > 1e-6)
        throw std::invalid_argument("camera: R is not orthonormal");
    }
  const auto& m = cam.R.m;
  double det = m[0] * (m[4] * m[8] - m[5] * m[7]) -
               m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
  if (std::abs(det - 1.0) > 1e-6)
    throw std::invalid_argument("camera: det(R) != +1");
}

double relative_rotation_deg(const Camera& a, const Camera& b) {
  Mat3 rel = a.R * b.R.transposed();
  double c = (rel.trace() - 1.0) / 2.0;
  c = std::clamp(c, -1.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

Camera make_lookat_camera(const Vec3& position, const Vec3& target,
                          const Vec3& up, double fx, double fy, int width,
                          int height) {
  Vec3 fwd = normalized(target - position);   // camera +z
  Vec3 yaxis = normalized(up - fwd * dot(up, fwd));
  Vec3 xaxis = cross(yaxis, fwd);             // right-handed: x = y × z

  Camera cam;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = width / 2.0;
  cam.cy = height / 2.0;
  cam.width = width;
  cam.height = height;
  cam.R = Mat3::from_rows(xaxis, yaxis, fwd);
  cam.t = -(cam.R * position);
  return cam;
}

}  // namespace cameo
