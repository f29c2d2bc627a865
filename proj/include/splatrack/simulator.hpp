#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "splatrack/camera.hpp"
#include "splatrack/errors.hpp"
#include "splatrack/gaussian_cloud.hpp"
#include "splatrack/image.hpp"
#include "splatrack/physics.hpp"
#include "splatrack/renderer.hpp"
#include "splatrack/rng.hpp"
#include "splatrack/se3.hpp"

namespace splatrack {

/// Object source: either a procedural shape or a cloud file path.
struct ObjectSpec {
  std::string shape = "sphere";  // sphere | box | dumbbell; empty when path set
  int count = 96;
  std::uint64_t seed = 7;
  std::string path;  // optional cloud JSON; overrides the procedural shape
};

struct SceneConfig {
  ObjectSpec object;
  Vec3 v0 = Vec3::Zero();
  Vec3 omega = Vec3::Zero();
  PhysicsConfig physics;
  Camera camera;
  int num_frames = 30;
  double flow_noise_std = 0.0;  // pixels
  std::uint64_t seed = 1;
};

/// One frame of recovery input: target render, silhouette, flow observation.
struct FrameObservation {
  RenderedImage target;
  Mask mask;
  Vec2 flow = Vec2::Zero();  // noisy centroid pixel displacement vs previous frame
};

struct GroundTruthSequence {
  std::vector<Pose> poses;
  std::vector<FrameObservation> frames;
  std::vector<Vec3> centroids;  // true world centroid per frame
};

/// Constant-gravity trajectory with body-frame autorotation:
/// t_n = v0 (n dt) + g_vec (n dt)^2 / 2, r_n = exp(omega * n dt).
inline std::vector<Pose> generate_trajectory(const SceneConfig& cfg) {
  if (cfg.num_frames < 3) {
    throw InvalidInputError("generate_trajectory: num_frames must be >= 3");
  }
  if (std::abs(cfg.physics.gravity_dir.norm() - 1.0) > 1e-9) {
    throw InvalidInputError("generate_trajectory: gravity_dir must be unit");
  }
  if (!(cfg.physics.frame_dt > 0.0)) {
    throw InvalidInputError("generate_trajectory: frame_dt must be positive");
  }
  const Vec3 g_vec = cfg.physics.gravity_vector();
  std::vector<Pose> poses(cfg.num_frames);
  for (int n = 0; n < cfg.num_frames; ++n) {
    const double t = n * cfg.physics.frame_dt;
    poses[n].rotation = axis_angle_quat(cfg.omega, t);
    poses[n].translation = cfg.v0 * t + 0.5 * g_vec * (t * t);
  }
  return poses;
}

/// Procedural object cloud: n kernels on the shape surface, radius tied to
/// surface spacing, colors distinct per octant so rotation is observable.
/// The cloud is exactly centered: the radius^3-weighted centroid is
/// subtracted, so generated trajectories are centroid-exact.
inline GaussianCloud procedural_cloud(const std::string& shape, int n,
                                      std::uint64_t seed) {
  if (n < 1) {
    throw InvalidInputError("procedural_cloud: n must be >= 1");
  }
  if (shape != "sphere" && shape != "box" && shape != "dumbbell") {
    throw InvalidInputError("procedural_cloud: unknown shape '" + shape + "'");
  }
  Rng rng(seed);
  std::vector<Vec3> positions;
  positions.reserve(n);
  double radius = 0.1;
  const double half = 0.5;  // object spans roughly a unit diameter

  if (shape == "sphere") {
    // Fibonacci lattice with a small seeded jitter
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
      if (n == 1) {
        positions.push_back(Vec3::Zero());
        break;
      }
      const double z = 1.0 - 2.0 * (i + 0.5) / n;
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * i + 0.05 * rng.gaussian();
      positions.emplace_back(half * rho * std::cos(phi), half * rho * std::sin(phi),
                             half * z);
    }
    radius = 0.6 * std::sqrt(4.0 * M_PI * half * half / std::max(n, 2));
  } else if (shape == "box") {
    for (int i = 0; i < n; ++i) {
      const int face = i % 6;
      const double u = rng.uniform(-half, half);
      const double v = rng.uniform(-half, half);
      switch (face) {
        case 0: positions.emplace_back(half, u, v); break;
        case 1: positions.emplace_back(-half, u, v); break;
        case 2: positions.emplace_back(u, half, v); break;
        case 3: positions.emplace_back(u, -half, v); break;
        case 4: positions.emplace_back(u, v, half); break;
        default: positions.emplace_back(u, v, -half); break;
      }
    }
    radius = 0.6 * std::sqrt(6.0 / std::max(n, 2));
  } else {  // dumbbell: two lobes on the x axis
    const double lobe = 0.3;
    for (int i = 0; i < n; ++i) {
      const double z = rng.uniform(-1.0, 1.0);
      const double phi = rng.uniform(0.0, 2.0 * M_PI);
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      const Vec3 on_sphere(rho * std::cos(phi), rho * std::sin(phi), z);
      const Vec3 center((i % 2 == 0) ? lobe : -lobe, 0.0, 0.0);
      positions.push_back(center + 0.2 * on_sphere);
    }
    radius = 0.6 * std::sqrt(2.0 * 4.0 * M_PI * 0.04 / std::max(n, 2));
  }
  radius = std::min(radius, half);

  static const Vec3 octant_colors[8] = {
      {0.9, 0.15, 0.15}, {0.15, 0.9, 0.15}, {0.15, 0.15, 0.9}, {0.9, 0.9, 0.15},
      {0.9, 0.15, 0.9},  {0.15, 0.9, 0.9},  {0.95, 0.55, 0.1}, {0.85, 0.85, 0.85}};

  GaussianCloud cloud;
  cloud.kernels.reserve(positions.size());
  for (const Vec3& p : positions) {
    GaussianKernel k;
    k.position = p;
    k.covariance = (radius * radius) * Mat3::Identity();
    const int octant =
        (p.x() >= 0 ? 1 : 0) | (p.y() >= 0 ? 2 : 0) | (p.z() >= 0 ? 4 : 0);
    k.color = octant_colors[octant];
    k.opacity = 0.9;
    cloud.kernels.push_back(k);
  }

  // exact centering (all radii equal, so this is the weighted centroid too)
  Vec3 mean = Vec3::Zero();
  for (const GaussianKernel& k : cloud.kernels) mean += k.position;
  mean /= static_cast<double>(cloud.size());
  for (GaussianKernel& k : cloud.kernels) k.position -= mean;
  return cloud;
}

/// Centers an isotropic cloud on its radius^3-weighted centroid.
inline IsotropicCloud centralize(const IsotropicCloud& cloud) {
  const Vec3 c = centroid(cloud);
  IsotropicCloud out = cloud;
  for (IsotropicKernel& k : out.kernels) k.position -= c;
  return out;
}

/// Renders every posed frame, derives silhouettes, and synthesizes noisy
/// centroid-displacement flow observations from a per-frame seeded stream.
inline GroundTruthSequence synthesize_frames(const SceneConfig& cfg,
                                             const std::vector<Pose>& trajectory,
                                             const IsotropicCloud& cloud) {
  if (cloud.kernels.empty()) {
    throw InvalidInputError("synthesize_frames: empty cloud");
  }
  GroundTruthSequence seq;
  seq.poses = trajectory;
  seq.frames.resize(trajectory.size());
  seq.centroids.resize(trajectory.size());
  const Vec3 canonical_centroid = centroid(cloud);

  std::vector<Vec2> centroid_px(trajectory.size());
  for (std::size_t n = 0; n < trajectory.size(); ++n) {
    const IsotropicCloud posed = apply_pose(trajectory[n], cloud);
    seq.centroids[n] =
        trajectory[n].rotation * canonical_centroid + trajectory[n].translation;
    seq.frames[n].target = splat_render(posed, cfg.camera);
    seq.frames[n].mask = silhouette_from_alpha(seq.frames[n].target);
    if (seq.frames[n].mask.foreground_count() == 0) {
      throw OutOfViewError("object fully out of frame at frame " + std::to_string(n));
    }
    centroid_px[n] = project(seq.centroids[n], cfg.camera).pixel;
  }
  for (std::size_t n = 1; n < trajectory.size(); ++n) {
    Rng stream = Rng::stream(cfg.seed, n);
    Vec2 flow = centroid_px[n] - centroid_px[n - 1];
    flow.x() += cfg.flow_noise_std * stream.gaussian();
    flow.y() += cfg.flow_noise_std * stream.gaussian();
    seq.frames[n].flow = flow;
  }
  return seq;
}

/// Builds the object cloud named by the scene (procedural only; file-backed
/// objects are resolved by the caller), isotropized and centered.
inline IsotropicCloud scene_object_cloud(const SceneConfig& cfg) {
  const GaussianCloud raw =
      procedural_cloud(cfg.object.shape, cfg.object.count, cfg.object.seed);
  return centralize(isotropize(raw));
}

/// Full scene synthesis for procedural objects.
inline GroundTruthSequence simulate_scene(const SceneConfig& cfg,
                                          IsotropicCloud* cloud_out = nullptr) {
  const IsotropicCloud cloud = scene_object_cloud(cfg);
  if (cloud_out) *cloud_out = cloud;
  return synthesize_frames(cfg, generate_trajectory(cfg), cloud);
}

}  // namespace splatrack
