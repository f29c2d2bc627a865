#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>

#include "splatrack/camera.hpp"
#include "splatrack/errors.hpp"

namespace splatrack {

using Vec2d = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Per-axis state: per-interval displacement and velocity.
struct MotionState {
  double displacement = 0.0;
  double velocity = 0.0;

  Vec2d vec() const { return Vec2d(displacement, velocity); }
  static MotionState from_vec(const Vec2d& v) { return MotionState{v(0), v(1)}; }
};

using StateCovariance = Mat2;

/// Process noise (displacement, velocity) and observation noise for the two
/// displacement sources (flow back-projection, learned displacement).
struct NoiseConfig {
  double sigma_ds_sq = 1e-6;     // (1e-3)^2
  double sigma_v_sq = 1e-4;      // (1e-2)^2
  double sigma_flow_sq = 2.5e-5; // (5e-3)^2
  double sigma_learn_sq = 4e-6;  // (2e-3)^2
};

struct ObservationPair {
  double z_flow = 0.0;
  double z_learn = 0.0;
};

inline Mat2 transition_matrix(double dt) {
  Mat2 f;
  f << 1.0, dt, 0.0, 1.0;
  return f;
}

inline Vec2d control_matrix(double dt) { return Vec2d(0.5 * dt * dt, dt); }

inline Mat2 observation_matrix() {
  Mat2 h;
  h << 1.0, 0.0, 1.0, 0.0;
  return h;
}

/// Predict step: X- = F X + B a, P- = F P F^T + Q.
inline std::pair<MotionState, StateCovariance> predict(const MotionState& state,
                                                       const StateCovariance& p,
                                                       double a, double dt,
                                                       const NoiseConfig& noise) {
  if (!(dt > 0.0)) {
    throw InvalidInputError("kalman predict: dt must be positive");
  }
  const Mat2 f = transition_matrix(dt);
  const Vec2d x_pred = f * state.vec() + control_matrix(dt) * a;
  Mat2 q = Mat2::Zero();
  q(0, 0) = noise.sigma_ds_sq;
  q(1, 1) = noise.sigma_v_sq;
  const Mat2 p_pred = f * p * f.transpose() + q;
  return {MotionState::from_vec(x_pred), p_pred};
}

/// Kalman gain K = P- H^T (H P- H^T + R)^(-1). Both observation rows see only
/// the displacement state, so S = [[p+r_f, p], [p, p+r_l]] with p = P-(0,0)
/// and the product reduces to the cancellation-free closed form
///   K = [p; q] * [r_l, r_f] / (p (r_f + r_l) + r_f r_l),   q = P-(1,0).
inline Mat2 gain(const StateCovariance& p_pred, const NoiseConfig& noise) {
  const double p = p_pred(0, 0);
  const double q = 0.5 * (p_pred(0, 1) + p_pred(1, 0));
  const double r_f = noise.sigma_flow_sq;
  const double r_l = noise.sigma_learn_sq;
  const double det = p * (r_f + r_l) + r_f * r_l;
  if (!(det > 0.0)) {
    throw SingularMatrixError("kalman gain: singular innovation covariance");
  }
  Mat2 k;
  k(0, 0) = p * r_l / det;
  k(0, 1) = p * r_f / det;
  k(1, 0) = q * r_l / det;
  k(1, 1) = q * r_f / det;
  return k;
}

/// Update step: X+ = X- + K (z - H X-), P+ = (I - K H) P-, re-symmetrized.
inline std::pair<MotionState, StateCovariance> update(const MotionState& x_pred,
                                                      const StateCovariance& p_pred,
                                                      const ObservationPair& z,
                                                      const NoiseConfig& noise) {
  const Mat2 h = observation_matrix();
  const Mat2 k = gain(p_pred, noise);
  const Vec2d innovation = Vec2d(z.z_flow, z.z_learn) - h * x_pred.vec();
  const Vec2d x_post = x_pred.vec() + k * innovation;
  Mat2 p_post = (Mat2::Identity() - k * h) * p_pred;
  p_post = 0.5 * (p_post + p_post.transpose());
  return {MotionState::from_vec(x_post), p_post};
}

/// Back-project a pixel displacement to a world displacement at given depth:
/// world = R_cam^-1 * (du * depth / focal, dv * depth / focal, 0).
inline Vec3 backproject_flow(const Vec2& pixel_displacement, double depth,
                             const Camera& cam) {
  if (!(depth > 0.0)) {
    throw InvalidInputError("backproject_flow: depth must be positive");
  }
  const Vec3 cam_disp(pixel_displacement.x() * depth / cam.focal,
                      pixel_displacement.y() * depth / cam.focal, 0.0);
  return cam.extrinsic.rotation.conjugate() * cam_disp;
}

/// Three independent per-axis filters plus the per-frame fusion over them.
struct AxisFilters {
  std::array<MotionState, 3> state{};
  std::array<StateCovariance, 3> cov{StateCovariance::Identity(),
                                     StateCovariance::Identity(),
                                     StateCovariance::Identity()};

  static AxisFilters with_initial_covariance(double p_ds, double p_v) {
    AxisFilters f;
    for (auto& c : f.cov) {
      c = StateCovariance::Zero();
      c(0, 0) = p_ds;
      c(1, 1) = p_v;
    }
    return f;
  }
};

struct FuseTraceAxis {
  double ds_prior = 0.0;
  double v_prior = 0.0;
  double z_flow = 0.0;
  double z_learn = 0.0;
  double gain_ds = 0.0;  // K(0,0)
  double gain_v = 0.0;   // K(1,1)
  double ds_post = 0.0;
  double v_post = 0.0;
};

struct FuseResult {
  Vec3 fused_displacement;
  std::array<FuseTraceAxis, 3> trace;
};

/// Runs predict + update independently per axis with the given acceleration
/// control input; returns the fused per-interval displacement vector.
inline FuseResult fuse_frame(AxisFilters& filters, const Vec3& z_flow,
                             const Vec3& z_learn, const Vec3& acceleration, double dt,
                             const NoiseConfig& noise) {
  FuseResult result;
  for (int axis = 0; axis < 3; ++axis) {
    auto [x_pred, p_pred] =
        predict(filters.state[axis], filters.cov[axis], acceleration(axis), dt, noise);
    const Mat2 k = gain(p_pred, noise);
    ObservationPair z{z_flow(axis), z_learn(axis)};
    auto [x_post, p_post] = update(x_pred, p_pred, z, noise);
    filters.state[axis] = x_post;
    filters.cov[axis] = p_post;
    result.fused_displacement(axis) = x_post.displacement;
    result.trace[axis] = FuseTraceAxis{x_pred.displacement, x_pred.velocity,
                                       z.z_flow,            z.z_learn,
                                       k(0, 0),             k(1, 1),
                                       x_post.displacement, x_post.velocity};
  }
  return result;
}

}  // namespace splatrack
