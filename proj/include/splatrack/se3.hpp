#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <array>
#include <cmath>

#include "splatrack/errors.hpp"
#include "splatrack/gaussian_cloud.hpp"

namespace splatrack {

using Quat = Eigen::Quaterniond;

inline constexpr double kQuatTolerance = 1e-6;

/// Rigid transform. Quaternion convention is scalar-first (w, x, y, z),
/// right-handed, acting on column vectors: p' = R p + t.
struct Pose {
  Quat rotation = Quat::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return Pose{}; }

  Pose normalized() const {
    Pose p = *this;
    p.rotation.normalize();
    return p;
  }
};

/// Registration transform: rotation, translation and a uniform scale,
/// applied as p' = s * (R p) + t.
struct RegistrationTransform {
  Quat rotation = Quat::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  static RegistrationTransform identity() { return RegistrationTransform{}; }
};

namespace detail {

inline void require_unit(const Quat& q, const char* what) {
  if (std::abs(q.norm() - 1.0) > kQuatTolerance) {
    throw InvalidPoseError(std::string(what) + ": quaternion is not normalized");
  }
}

}  // namespace detail

inline Vec3 rotate(const Quat& q, const Vec3& v) { return q * v; }

/// mu' = R mu + t; anisotropic covariances are conjugated, radii unchanged.
inline GaussianCloud apply_pose(const Pose& pose, const GaussianCloud& cloud) {
  detail::require_unit(pose.rotation, "apply_pose");
  const Mat3 r = pose.rotation.toRotationMatrix();
  GaussianCloud out;
  out.kernels.reserve(cloud.size());
  for (const GaussianKernel& k : cloud.kernels) {
    GaussianKernel moved = k;
    moved.position = r * k.position + pose.translation;
    moved.covariance = r * k.covariance * r.transpose();
    out.kernels.push_back(moved);
  }
  return out;
}

inline IsotropicCloud apply_pose(const Pose& pose, const IsotropicCloud& cloud) {
  detail::require_unit(pose.rotation, "apply_pose");
  const Mat3 r = pose.rotation.toRotationMatrix();
  IsotropicCloud out;
  out.kernels.reserve(cloud.size());
  for (const IsotropicKernel& k : cloud.kernels) {
    IsotropicKernel moved = k;
    moved.position = r * k.position + pose.translation;
    out.kernels.push_back(moved);
  }
  return out;
}

/// mu' = s (R mu) + t; radii scale by s, covariances by s^2.
inline GaussianCloud apply_registration(const RegistrationTransform& t,
                                        const GaussianCloud& cloud) {
  if (!(t.scale > 0.0)) {
    throw InvalidTransformError("apply_registration: scale must be positive");
  }
  detail::require_unit(t.rotation, "apply_registration");
  const Mat3 r = t.rotation.toRotationMatrix();
  GaussianCloud out;
  out.kernels.reserve(cloud.size());
  for (const GaussianKernel& k : cloud.kernels) {
    GaussianKernel moved = k;
    moved.position = t.scale * (r * k.position) + t.translation;
    moved.covariance = (t.scale * t.scale) * (r * k.covariance * r.transpose());
    out.kernels.push_back(moved);
  }
  return out;
}

inline IsotropicCloud apply_registration(const RegistrationTransform& t,
                                         const IsotropicCloud& cloud) {
  if (!(t.scale > 0.0)) {
    throw InvalidTransformError("apply_registration: scale must be positive");
  }
  detail::require_unit(t.rotation, "apply_registration");
  const Mat3 r = t.rotation.toRotationMatrix();
  IsotropicCloud out;
  out.kernels.reserve(cloud.size());
  for (const IsotropicKernel& k : cloud.kernels) {
    IsotropicKernel moved = k;
    moved.position = t.scale * (r * k.position) + t.translation;
    moved.radius = t.scale * k.radius;
    out.kernels.push_back(moved);
  }
  return out;
}

/// Result applies b, then a: R = Ra Rb, t = Ra t_b + t_a.
inline Pose compose(const Pose& a, const Pose& b) {
  detail::require_unit(a.rotation, "compose");
  detail::require_unit(b.rotation, "compose");
  Pose out;
  out.rotation = (a.rotation * b.rotation).normalized();
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

inline Pose inverse(const Pose& p) {
  detail::require_unit(p.rotation, "inverse");
  Pose out;
  out.rotation = p.rotation.conjugate();
  out.translation = -(out.rotation * p.translation);
  return out;
}

/// cur.translation - prev.translation; the per-interval learned displacement.
inline Vec3 pose_delta_translation(const Pose& prev, const Pose& cur) {
  return cur.translation - prev.translation;
}

/// Unit quaternion for a rotation of |omega|*t about axis omega/|omega|.
inline Quat axis_angle_quat(const Vec3& omega, double t) {
  const double angle = omega.norm() * t;
  if (angle < 1e-300) return Quat::Identity();
  const Vec3 axis = omega.normalized();
  return Quat(Eigen::AngleAxisd(angle, axis));
}

// ---------------------------------------------------------------------------
// Derivatives used by the pose optimizer.
// ---------------------------------------------------------------------------

/// d(R(q) v)/dq for unit q, columns ordered (w, x, y, z).
/// R(q) v = v + 2 w (u x v) + 2 u x (u x v) with u = (x, y, z).
inline Eigen::Matrix<double, 3, 4> rotate_jacobian_quat(const Quat& q, const Vec3& v) {
  const double w = q.w();
  const Vec3 u(q.x(), q.y(), q.z());
  Eigen::Matrix<double, 3, 4> jac;
  jac.col(0) = 2.0 * u.cross(v);
  Mat3 skew_v;
  skew_v << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  const Mat3 du = 2.0 * (u.dot(v) * Mat3::Identity() + u * v.transpose() -
                         2.0 * v * u.transpose() - w * skew_v);
  jac.block<3, 3>(0, 1) = du;
  return jac;
}

/// Jacobian of q/|q| at q, rows/cols ordered (w, x, y, z).
inline Eigen::Matrix4d normalize_jacobian_quat(const Quat& q) {
  Eigen::Vector4d c(q.w(), q.x(), q.y(), q.z());
  const double n = c.norm();
  c /= n;
  return (Eigen::Matrix4d::Identity() - c * c.transpose()) / n;
}

/// Raw 7-vector pose parameterization (qw, qx, qy, qz, tx, ty, tz); the
/// quaternion block is normalized on conversion to Pose.
using PoseParams = std::array<double, 7>;

inline PoseParams pose_to_params(const Pose& pose) {
  return {pose.rotation.w(), pose.rotation.x(), pose.rotation.y(),
          pose.rotation.z(), pose.translation.x(), pose.translation.y(),
          pose.translation.z()};
}

inline Pose params_to_pose(const PoseParams& p) {
  Pose pose;
  pose.rotation = Quat(p[0], p[1], p[2], p[3]).normalized();
  pose.translation = Vec3(p[4], p[5], p[6]);
  return pose;
}

}  // namespace splatrack
