#pragma once

#include <utility>

#include "splatrack/errors.hpp"
#include "splatrack/se3.hpp"

namespace splatrack {

/// Pinhole camera. `extrinsic` maps world to camera: p_c = R p + t, with the
/// camera looking along +z. Pixel (x, y) samples at integer coordinates, so
/// the principal point lives in the same integer pixel frame.
struct Camera {
  double focal = 100.0;
  Vec2 principal_point = Vec2(64.0, 64.0);
  int width = 128;
  int height = 128;
  Pose extrinsic = Pose::identity();
};

struct Projection {
  Vec2 pixel;
  double depth;
};

inline constexpr double kMinDepth = 1e-6;

/// Standard pinhole projection; errors for points at or behind the camera.
inline Projection project(const Vec3& point, const Camera& cam) {
  if (!point.allFinite()) {
    throw InvalidInputError("project: non-finite point");
  }
  const Vec3 p_c = cam.extrinsic.rotation * point + cam.extrinsic.translation;
  if (p_c.z() <= kMinDepth) {
    throw BehindCameraError("project: point at or behind the camera");
  }
  Projection out;
  out.pixel = cam.focal * Vec2(p_c.x() / p_c.z(), p_c.y() / p_c.z()) +
              cam.principal_point;
  out.depth = p_c.z();
  return out;
}

}  // namespace splatrack
