#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "splatrack/adam.hpp"
#include "splatrack/camera.hpp"
#include "splatrack/dsa.hpp"
#include "splatrack/errors.hpp"
#include "splatrack/gaussian_cloud.hpp"
#include "splatrack/kalman.hpp"
#include "splatrack/metrics.hpp"
#include "splatrack/physics.hpp"
#include "splatrack/renderer.hpp"
#include "splatrack/se3.hpp"
#include "splatrack/simulator.hpp"
#include "splatrack/ssim.hpp"

namespace splatrack {

/// Composite objective weights. lambda_dssim mixes L1 vs D-SSIM inside the
/// photometric term; the three composite weights must sum to 1.
struct LossWeights {
  double lambda_dssim = 0.2;
  double lambda_gs = 0.7;
  double lambda_acc = 0.2;
  double lambda_smooth = 0.1;

  void validate() const {
    if (lambda_dssim < 0.0 || lambda_dssim > 1.0) {
      throw InvalidInputError("lambda_dssim must be in [0, 1]");
    }
    if (lambda_gs < 0.0 || lambda_acc < 0.0 || lambda_smooth < 0.0) {
      throw InvalidInputError("composite loss weights must be nonnegative");
    }
    if (std::abs(lambda_gs + lambda_acc + lambda_smooth - 1.0) > 1e-9) {
      throw InvalidInputError("composite loss weights must sum to 1");
    }
  }
};

struct RecoveryConfig {
  LossWeights loss_weights;
  DsaConfig dsa;
  NoiseConfig noise;
  PhysicsConfig physics;
  double registration_lr = 5e-5;
  int registration_iters = 10000;
  bool kalman_enabled = true;
  bool literal_lacc = false;
  // Ablation hook. When off, every frame runs at lr_base for iter_base
  // iterations; the within-frame exponential decay stays (it is the common
  // baseline scheduler), only the displacement adaptivity is removed.
  bool dsa_enabled = true;
  double p0_ds = 1e-2;      // initial filter covariance, displacement
  double p0_v = 1e-1;       // initial filter covariance, velocity
};

struct FrameLossBreakdown {
  double total = 0.0;
  double l_gs = 0.0;
  double l_acc = 0.0;
  double l_smooth = 0.0;
  int iterations = 0;
  double lr_init = 0.0;
};

struct KalmanTraceRow {
  int frame = 0;
  std::array<FuseTraceAxis, 3> axes{};
};

struct TrajectoryResult {
  std::vector<Pose> poses;
  std::vector<Vec3> centroids;
  std::vector<FrameLossBreakdown> losses;  // one row per frame
  std::vector<KalmanTraceRow> kalman_trace;
  RegistrationTransform registration;
};

/// Squared distance between the learned per-frame displacement and the
/// flow-backprojected displacement.
inline double smooth_loss(const Vec3& learned_delta, const Vec3& flow_delta) {
  if (!learned_delta.allFinite() || !flow_delta.allFinite()) {
    throw InvalidInputError("smooth_loss: non-finite input");
  }
  return (learned_delta - flow_delta).squaredNorm();
}

// ---------------------------------------------------------------------------
// Per-frame objective
// ---------------------------------------------------------------------------

namespace detail {

/// The per-frame pose objective: photometric term plus (when available) the
/// acceleration-consistency and flow-smoothness terms.
///
/// The acceleration term is evaluated on centroid second differences in
/// frame-normalized time (dt = 1 frame): physically the same constraint, but
/// its magnitude stays commensurate with the photometric term regardless of
/// the physical frame interval. Exactness checks on the recovered trajectory
/// use the physics module with the real dt.
struct FrameObjective {
  const IsotropicCloud* cloud = nullptr;
  const Camera* camera = nullptr;
  PhotometricContext* photo = nullptr;
  LossWeights weights;
  Vec3 canonical_centroid = Vec3::Zero();

  bool has_acc = false;
  Vec3 prev1 = Vec3::Zero();  // centroid at t-1
  Vec3 prev2 = Vec3::Zero();  // centroid at t-2
  Vec3 prev3 = Vec3::Zero();  // centroid at t-3
  bool literal_lacc = false;
  Vec3 gravity_dir = Vec3(0, -1, 0);

  bool has_smooth = false;
  Vec3 prev_translation = Vec3::Zero();
  Vec3 flow_world = Vec3::Zero();

  struct Eval {
    double total = 0.0;
    double l_gs = 0.0;
    double l_acc = 0.0;
    double l_smooth = 0.0;
    PoseParams grad{};
  };

  Eval evaluate(const PoseParams& params) const {
    Eval out;
    const Pose pose = params_to_pose(params);
    const IsotropicCloud posed = apply_pose(pose, *cloud);

    RenderCache cache;
    const RenderedImage rendered = splat_render(posed, *camera, &cache);
    std::vector<double> grad_rgb;
    out.l_gs = photo->loss_with_gradient(rendered, grad_rgb);
    const std::vector<KernelGrad> kgrads =
        splat_render_backward(posed, *camera, cache, grad_rgb);

    Eigen::Vector4d d_qhat = Eigen::Vector4d::Zero();
    Vec3 d_t = Vec3::Zero();
    for (std::size_t i = 0; i < cloud->size(); ++i) {
      const Vec3 g = weights.lambda_gs * kgrads[i].d_position;
      if (g.isZero(0.0)) continue;
      d_t += g;
      d_qhat +=
          rotate_jacobian_quat(pose.rotation, cloud->kernels[i].position).transpose() * g;
    }

    const Vec3 sigma_t = pose.rotation * canonical_centroid + pose.translation;
    if (has_acc) {
      // frame-unit second differences
      const Vec3 a1 = sigma_t - 2.0 * prev1 + prev2;
      const Vec3 a0 = prev1 - 2.0 * prev2 + prev3;
      Vec3 residual;
      Vec3 d_sigma;
      if (literal_lacc) {
        const Vec3 a0_par = a0.dot(gravity_dir) * gravity_dir;
        const Vec3 delta = a1 - a0;
        const Vec3 delta_perp = delta - delta.dot(gravity_dir) * gravity_dir;
        residual = a0_par + delta_perp;
        const Vec3 two_r = 2.0 * residual;
        d_sigma = two_r - two_r.dot(gravity_dir) * gravity_dir;  // (I - g g^T) 2r
      } else {
        residual = a1 - a0;
        d_sigma = 2.0 * residual;
      }
      out.l_acc = residual.squaredNorm();
      const Vec3 g = weights.lambda_acc * d_sigma;
      d_t += g;
      d_qhat += rotate_jacobian_quat(pose.rotation, canonical_centroid).transpose() * g;
    }

    if (has_smooth) {
      const Vec3 diff = (pose.translation - prev_translation) - flow_world;
      out.l_smooth = diff.squaredNorm();
      d_t += weights.lambda_smooth * 2.0 * diff;
    }

    out.total = weights.lambda_gs * out.l_gs + weights.lambda_acc * out.l_acc +
                weights.lambda_smooth * out.l_smooth;

    const Quat q_raw(params[0], params[1], params[2], params[3]);
    const Eigen::Vector4d d_qraw = normalize_jacobian_quat(q_raw).transpose() * d_qhat;
    out.grad = {d_qraw(0), d_qraw(1), d_qraw(2), d_qraw(3), d_t.x(), d_t.y(), d_t.z()};
    return out;
  }
};

inline void normalize_quat_params(PoseParams& p) {
  const double n = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2] + p[3] * p[3]);
  for (int i = 0; i < 4; ++i) p[i] /= n;
}

}  // namespace detail

struct FrameRecovery {
  Pose pose;
  FrameLossBreakdown breakdown;
};

/// Minimizes the frame objective with Adam under the within-frame schedule,
/// returning the best-loss pose encountered (not the last iterate).
inline FrameRecovery optimize_frame(const detail::FrameObjective& objective,
                                    const Pose& init, double lr_init, int iterations,
                                    const DsaConfig& dsa_cfg, bool use_decay,
                                    int frame_index) {
  PoseParams params = pose_to_params(init);
  Adam adam(7);
  FrameRecovery best;
  best.pose = init;
  best.breakdown.total = std::numeric_limits<double>::infinity();
  best.breakdown.iterations = iterations;
  best.breakdown.lr_init = lr_init;

  for (int i = 0; i < iterations; ++i) {
    const detail::FrameObjective::Eval eval = objective.evaluate(params);
    if (!std::isfinite(eval.total)) {
      throw OptimizationFailureError("non-finite loss at frame " +
                                     std::to_string(frame_index) + ", iteration " +
                                     std::to_string(i));
    }
    if (eval.total < best.breakdown.total) {
      best.pose = params_to_pose(params);
      best.breakdown.total = eval.total;
      best.breakdown.l_gs = eval.l_gs;
      best.breakdown.l_acc = eval.l_acc;
      best.breakdown.l_smooth = eval.l_smooth;
    }
    const double lr =
        use_decay ? lr_at_iteration(lr_init, i, iterations, dsa_cfg) : lr_init;
    adam.step(params.data(), eval.grad.data(), lr);
    detail::normalize_quat_params(params);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Registration
// ---------------------------------------------------------------------------

/// Aligns the canonical cloud to the first frame by plain gradient descent
/// over rotation, translation and uniform scale, minimizing the photometric
/// loss. Plain descent (rather than a per-coordinate adaptive method) matters
/// here: the monocular depth-scale gauge makes the loss flat along a
/// (scale, t_z) curve, and adaptive step normalization drifts along it.
inline RegistrationTransform register_cloud(const IsotropicCloud& cloud,
                                            const RenderedImage& first_frame,
                                            const Camera& cam, const RecoveryConfig& cfg) {
  if (cloud.kernels.empty()) {
    throw InvalidInputError("register_cloud: empty cloud");
  }
  PhotometricContext photo(first_frame, cfg.loss_weights.lambda_dssim);

  std::array<double, 8> params = {1, 0, 0, 0, 0, 0, 0, 1};  // qw qx qy qz t s
  std::array<double, 8> best_params = params;
  double best_loss = std::numeric_limits<double>::infinity();

  for (int i = 0; i < cfg.registration_iters; ++i) {
    const Quat q_raw(params[0], params[1], params[2], params[3]);
    const Quat q = q_raw.normalized();
    const Vec3 t(params[4], params[5], params[6]);
    const double s = params[7];

    RegistrationTransform reg{q, t, s};
    const IsotropicCloud posed = apply_registration(reg, cloud);
    RenderCache cache;
    const RenderedImage rendered = splat_render(posed, cam, &cache);
    std::vector<double> grad_rgb;
    const double loss = photo.loss_with_gradient(rendered, grad_rgb);
    if (!std::isfinite(loss)) {
      throw OptimizationFailureError("registration diverged at iteration " +
                                     std::to_string(i));
    }
    if (loss < best_loss) {
      best_loss = loss;
      best_params = params;
      best_params[0] = q.w();
      best_params[1] = q.x();
      best_params[2] = q.y();
      best_params[3] = q.z();
    }

    const std::vector<KernelGrad> kgrads =
        splat_render_backward(posed, cam, cache, grad_rgb);
    Eigen::Vector4d d_qhat = Eigen::Vector4d::Zero();
    Vec3 d_t = Vec3::Zero();
    double d_s = 0.0;
    for (std::size_t k = 0; k < cloud.size(); ++k) {
      const Vec3& g = kgrads[k].d_position;
      const double gr = kgrads[k].d_radius;
      if (g.isZero(0.0) && gr == 0.0) continue;
      const Vec3 rotated = q * cloud.kernels[k].position;
      d_t += g;
      d_s += g.dot(rotated) + gr * cloud.kernels[k].radius;
      d_qhat += s * (rotate_jacobian_quat(q, cloud.kernels[k].position).transpose() * g);
    }
    const Eigen::Vector4d d_qraw = normalize_jacobian_quat(q_raw).transpose() * d_qhat;
    const std::array<double, 8> grad = {d_qraw(0), d_qraw(1), d_qraw(2), d_qraw(3),
                                        d_t.x(),   d_t.y(),   d_t.z(),   d_s};
    for (int j = 0; j < 8; ++j) params[j] -= cfg.registration_lr * grad[j];
    // keep the quaternion on the unit sphere and the scale positive
    const double n = std::sqrt(params[0] * params[0] + params[1] * params[1] +
                               params[2] * params[2] + params[3] * params[3]);
    for (int j = 0; j < 4; ++j) params[j] /= n;
    params[7] = std::max(params[7], 1e-3);
  }

  RegistrationTransform out;
  out.rotation = Quat(best_params[0], best_params[1], best_params[2], best_params[3]);
  out.translation = Vec3(best_params[4], best_params[5], best_params[6]);
  out.scale = best_params[7];
  return out;
}

// ---------------------------------------------------------------------------
// Sequence recovery
// ---------------------------------------------------------------------------

/// Frame-by-frame recovery: frame 0 is fixed by registration; each later
/// frame minimizes the composite objective under the displacement-adaptive
/// schedule, then (when enabled) the Kalman fusion re-anchors the
/// translation. Deterministic given the inputs.
inline TrajectoryResult recover_sequence(const std::vector<FrameObservation>& frames,
                                         const IsotropicCloud& canonical_cloud,
                                         const Camera& cam, const RecoveryConfig& cfg) {
  if (frames.size() < 3) {
    throw InvalidInputError("recover_sequence: need at least 3 frames");
  }
  cfg.loss_weights.validate();
  cfg.physics.validate();
  const int n_frames = static_cast<int>(frames.size());
  const double dt = cfg.physics.frame_dt;

  TrajectoryResult result;
  result.poses.resize(n_frames);
  result.centroids.resize(n_frames);
  result.losses.resize(n_frames);

  // frame 0: registration anchor; the scale is folded into the motion cloud
  const RegistrationTransform reg =
      register_cloud(canonical_cloud, frames[0].target, cam, cfg);
  result.registration = reg;
  IsotropicCloud motion_cloud = canonical_cloud;
  for (IsotropicKernel& k : motion_cloud.kernels) {
    k.position *= reg.scale;
    k.radius *= reg.scale;
  }
  result.poses[0] = Pose{reg.rotation, reg.translation};
  const Vec3 sigma0 = centroid(motion_cloud);
  result.centroids[0] =
      result.poses[0].rotation * sigma0 + result.poses[0].translation;
  {
    PhotometricContext photo(frames[0].target, cfg.loss_weights.lambda_dssim);
    const IsotropicCloud posed = apply_pose(result.poses[0], motion_cloud);
    result.losses[0].l_gs = photo.loss(splat_render(posed, cam));
    result.losses[0].total = cfg.loss_weights.lambda_gs * result.losses[0].l_gs;
    result.losses[0].iterations = cfg.registration_iters;
    result.losses[0].lr_init = cfg.registration_lr;
  }

  AxisFilters filters = AxisFilters::with_initial_covariance(cfg.p0_ds, cfg.p0_v);
  double min_displacement = 0.0;
  bool have_reference = false;

  for (int t = 1; t < n_frames; ++t) {
    // schedule
    double lr_init = cfg.dsa.lr_base;
    int iterations = cfg.dsa.iter_base;
    if (cfg.dsa_enabled && have_reference && t >= 2) {
      const double prev_disp =
          pose_delta_translation(result.poses[t - 2], result.poses[t - 1]).norm();
      lr_init = lr_init_for_frame(prev_disp, min_displacement, cfg.dsa);
      iterations = iterations_for_frame(prev_disp, min_displacement, cfg.dsa);
    }

    // acceleration control input: latest finite-difference estimate, gravity
    // fallback for the first two recovered frames
    Vec3 accel = cfg.physics.gravity_vector();
    if (t >= 3) {
      accel = finite_diff_acceleration(result.centroids[t - 3], result.centroids[t - 2],
                                       result.centroids[t - 1], dt);
    }

    // initialization: Kalman-predicted translation (previous pose when off)
    Pose init;
    init.rotation = result.poses[t - 1].rotation;
    init.translation = result.poses[t - 1].translation;
    if (cfg.kalman_enabled) {
      Vec3 predicted;
      for (int axis = 0; axis < 3; ++axis) {
        const auto [x_pred, p_pred] = predict(filters.state[axis], filters.cov[axis],
                                              accel(axis), dt, cfg.noise);
        predicted(axis) = x_pred.displacement;
      }
      init.translation += predicted;
    }

    PhotometricContext photo(frames[t].target, cfg.loss_weights.lambda_dssim);
    detail::FrameObjective objective;
    objective.cloud = &motion_cloud;
    objective.camera = &cam;
    objective.photo = &photo;
    objective.weights = cfg.loss_weights;
    objective.canonical_centroid = sigma0;
    objective.literal_lacc = cfg.literal_lacc;
    objective.gravity_dir = cfg.physics.gravity_dir;
    objective.has_acc = cfg.loss_weights.lambda_acc > 0.0 && t >= 3;
    if (objective.has_acc) {
      objective.prev1 = result.centroids[t - 1];
      objective.prev2 = result.centroids[t - 2];
      objective.prev3 = result.centroids[t - 3];
    }
    objective.has_smooth = cfg.loss_weights.lambda_smooth > 0.0;
    if (objective.has_smooth) {
      objective.prev_translation = result.poses[t - 1].translation;
      const double depth = project(result.centroids[t - 1], cam).depth;
      objective.flow_world = backproject_flow(frames[t].flow, depth, cam);
    }

    FrameRecovery recovered = optimize_frame(objective, init, lr_init, iterations,
                                             cfg.dsa, /*use_decay=*/true, t);

    const Vec3 z_learn =
        pose_delta_translation(result.poses[t - 1], recovered.pose);
    Pose final_pose = recovered.pose;
    if (cfg.kalman_enabled) {
      const Vec3 learned_centroid =
          recovered.pose.rotation * sigma0 + recovered.pose.translation;
      const double depth = project(learned_centroid, cam).depth;
      const Vec3 z_flow = backproject_flow(frames[t].flow, depth, cam);
      const FuseResult fused =
          fuse_frame(filters, z_flow, z_learn, accel, dt, cfg.noise);
      final_pose.translation =
          result.poses[t - 1].translation + fused.fused_displacement;
      KalmanTraceRow row;
      row.frame = t;
      row.axes = fused.trace;
      result.kalman_trace.push_back(row);
    }

    result.poses[t] = final_pose;
    result.centroids[t] =
        final_pose.rotation * sigma0 + final_pose.translation;
    result.losses[t] = recovered.breakdown;

    const double disp =
        pose_delta_translation(result.poses[t - 1], result.poses[t]).norm();
    if (disp > 1e-12) {
      min_displacement = have_reference ? std::min(min_displacement, disp) : disp;
      have_reference = true;
    }
  }
  return result;
}

/// Renders the recovered poses and compares silhouettes and centroids against
/// ground truth. `registration_scale` is the uniform scale the recovery
/// folded into its motion cloud; the recovered poses only reproduce the
/// tracked object together with that scale.
inline MetricsReport evaluate_recovery(const std::vector<Pose>& recovered_poses,
                                       const IsotropicCloud& cloud, const Camera& cam,
                                       const std::vector<Mask>& truth_masks,
                                       const std::vector<Vec3>& truth_centroids,
                                       double registration_scale = 1.0) {
  if (recovered_poses.size() != truth_masks.size()) {
    throw InvalidInputError("evaluate_recovery: pose/mask count mismatch");
  }
  IsotropicCloud scaled = cloud;
  if (registration_scale != 1.0) {
    if (!(registration_scale > 0.0)) {
      throw InvalidInputError("evaluate_recovery: scale must be positive");
    }
    for (IsotropicKernel& k : scaled.kernels) {
      k.position *= registration_scale;
      k.radius *= registration_scale;
    }
  }
  const Vec3 sigma0 = centroid(scaled);
  std::vector<Mask> rec_masks;
  std::vector<Vec3> rec_centroids;
  rec_masks.reserve(recovered_poses.size());
  rec_centroids.reserve(recovered_poses.size());
  for (const Pose& pose : recovered_poses) {
    const IsotropicCloud posed = apply_pose(pose, scaled);
    rec_masks.push_back(silhouette_from_alpha(splat_render(posed, cam)));
    rec_centroids.push_back(pose.rotation * sigma0 + pose.translation);
  }
  return compute_metrics(rec_masks, truth_masks, rec_centroids, truth_centroids);
}

}  // namespace splatrack
