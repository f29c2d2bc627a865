#include <catch2/catch.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "splatrack/pipeline_io.hpp"
#include "splatrack/recovery.hpp"
#include "splatrack/simulator.hpp"
#include "support/oracles.hpp"

using namespace splatrack;
namespace fs = std::filesystem;

namespace {

SceneConfig tiny_scene() {
  SceneConfig cfg;
  cfg.object.shape = "sphere";
  cfg.object.count = 40;
  cfg.object.seed = 2;
  cfg.v0 = Vec3(0.9, 1.4, 0.0);
  cfg.omega = Vec3(0.3, 0.5, 0.8);
  cfg.physics.gravity_dir = Vec3(0, -1, 0);
  cfg.physics.gravity_mag = 9.8;
  cfg.physics.frame_dt = 0.02;
  cfg.camera.focal = 90.0;
  cfg.camera.principal_point = Vec2(32, 32);
  cfg.camera.width = 64;
  cfg.camera.height = 64;
  cfg.camera.extrinsic.translation = Vec3(-0.2, -0.12, 6.0);
  cfg.num_frames = 8;
  cfg.flow_noise_std = 0.0;
  cfg.seed = 77;
  return cfg;
}

RecoveryConfig fast_config(const SceneConfig& scene) {
  RecoveryConfig cfg;
  cfg.physics = scene.physics;
  cfg.dsa.iter_base = 200;
  cfg.registration_iters = 120;
  // process noise sized to the per-interval model error (~a dt^2) so the
  // filter leans on the observations for this scene scale
  cfg.noise.sigma_ds_sq = 1e-4;
  cfg.noise.sigma_v_sq = 1e-2;
  cfg.noise.sigma_flow_sq = 1e-5;
  cfg.noise.sigma_learn_sq = 4e-6;
  return cfg;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    const auto tick = std::chrono::steady_clock::now().time_since_epoch().count();
    path = fs::temp_directory_path() /
           ("splatrack_rec_" + std::to_string(static_cast<unsigned long long>(tick)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("smooth_loss") {
  CHECK(smooth_loss(Vec3(0.2, 0.1, 0), Vec3(0.2, 0.1, 0)) == 0.0);
  CHECK(smooth_loss(Vec3(1, 0, 0), Vec3(0, 0, 0)) == Approx(1.0));
  Rng rng(61);
  for (int i = 0; i < 10; ++i) {
    const Vec3 a(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    const Vec3 b(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    CHECK(smooth_loss(a, b) == Approx((a - b).squaredNorm()));
  }
  CHECK_THROWS_AS(smooth_loss(Vec3(NAN, 0, 0), Vec3::Zero()), InvalidInputError);
}

TEST_CASE("registration at the optimum stays at identity") {
  const SceneConfig scene = tiny_scene();
  const IsotropicCloud cloud = scene_object_cloud(scene);
  const RenderedImage target = splat_render(cloud, scene.camera);
  RecoveryConfig cfg = fast_config(scene);
  const RegistrationTransform reg =
      register_cloud(cloud, target, scene.camera, cfg);
  CHECK(reg.rotation.angularDistance(Quat::Identity()) < 1e-2);
  CHECK(reg.translation.norm() < 1e-3);
  CHECK(reg.scale == Approx(1.0).margin(1e-3));
}

TEST_CASE("registration recovers a known scale within 2 percent") {
  const SceneConfig scene = tiny_scene();
  const IsotropicCloud cloud = scene_object_cloud(scene);
  RegistrationTransform truth;
  truth.scale = 1.5;
  const RenderedImage target =
      splat_render(apply_registration(truth, cloud), scene.camera);

  RecoveryConfig cfg = fast_config(scene);
  cfg.registration_lr = 1e-2;
  cfg.registration_iters = 4000;
  const RegistrationTransform reg =
      register_cloud(cloud, target, scene.camera, cfg);
  CHECK(reg.scale == Approx(1.5).epsilon(0.02));
}

TEST_CASE("registration recovers a known translation within 1 percent of diameter") {
  const SceneConfig scene = tiny_scene();
  const IsotropicCloud cloud = scene_object_cloud(scene);
  const double diameter = cloud_diameter(cloud);
  RegistrationTransform truth;
  truth.translation = Vec3(0.12, -0.08, 0.0);
  const RenderedImage target =
      splat_render(apply_registration(truth, cloud), scene.camera);

  RecoveryConfig cfg = fast_config(scene);
  cfg.registration_lr = 1e-2;
  cfg.registration_iters = 3000;
  const RegistrationTransform reg =
      register_cloud(cloud, target, scene.camera, cfg);
  CHECK((reg.translation - truth.translation).norm() < 0.01 * diameter);
}

TEST_CASE("frame optimization at the optimum returns the initialization") {
  const SceneConfig scene = tiny_scene();
  const IsotropicCloud cloud = scene_object_cloud(scene);
  Pose init;
  init.translation = Vec3(0.03, -0.01, 0.0);
  const RenderedImage target = splat_render(apply_pose(init, cloud), scene.camera);

  PhotometricContext photo(target, 0.2);
  detail::FrameObjective objective;
  objective.cloud = &cloud;
  objective.camera = &scene.camera;
  objective.photo = &photo;
  objective.weights = LossWeights{0.2, 1.0, 0.0, 0.0};
  objective.canonical_centroid = centroid(cloud);

  const FrameRecovery result =
      optimize_frame(objective, init, 1e-3, 50, DsaConfig{}, true, 1);
  const PoseParams a = pose_to_params(result.pose);
  const PoseParams b = pose_to_params(init);
  double dist = 0.0;
  for (int i = 0; i < 7; ++i) dist += (a[i] - b[i]) * (a[i] - b[i]);
  CHECK(std::sqrt(dist) < 1e-6);
  CHECK(result.breakdown.total == Approx(0.0).margin(1e-12));
}

TEST_CASE("weights (1,0,0) reduce to the photometric-only objective") {
  const SceneConfig scene = tiny_scene();
  const IsotropicCloud cloud = scene_object_cloud(scene);
  Pose truth;
  truth.translation = Vec3(0.02, 0.015, 0.0);
  const RenderedImage target = splat_render(apply_pose(truth, cloud), scene.camera);

  PhotometricContext photo(target, 0.2);
  detail::FrameObjective weighted;
  weighted.cloud = &cloud;
  weighted.camera = &scene.camera;
  weighted.photo = &photo;
  weighted.weights = LossWeights{0.2, 1.0, 0.0, 0.0};
  weighted.canonical_centroid = centroid(cloud);
  // acceleration and smoothness intentionally configured but weightless
  weighted.has_acc = false;
  weighted.has_smooth = true;
  weighted.prev_translation = Vec3::Zero();
  weighted.flow_world = Vec3(5, 5, 5);  // must be ignored at weight zero

  detail::FrameObjective photometric = weighted;
  photometric.has_smooth = false;

  const FrameRecovery a =
      optimize_frame(weighted, Pose::identity(), 1e-3, 120, DsaConfig{}, true, 1);
  const FrameRecovery b =
      optimize_frame(photometric, Pose::identity(), 1e-3, 120, DsaConfig{}, true, 1);
  CHECK(a.pose.translation == b.pose.translation);
  CHECK(a.pose.rotation.coeffs() == b.pose.rotation.coeffs());
  CHECK(a.breakdown.total == Approx(b.breakdown.total).margin(1e-15));
}

TEST_CASE("static scene recovery keeps every pose at the anchor") {
  SceneConfig scene = tiny_scene();
  scene.v0 = Vec3::Zero();
  scene.omega = Vec3::Zero();
  scene.physics.gravity_mag = 0.0;
  scene.num_frames = 5;
  IsotropicCloud cloud;
  const GroundTruthSequence seq = simulate_scene(scene, &cloud);

  RecoveryConfig cfg = fast_config(scene);
  cfg.dsa.iter_base = 60;
  cfg.registration_iters = 60;
  const TrajectoryResult result =
      recover_sequence(seq.frames, cloud, scene.camera, cfg);
  for (const Pose& p : result.poses) {
    CHECK((p.translation - result.poses[0].translation).norm() < 5e-3);
    CHECK(p.rotation.angularDistance(result.poses[0].rotation) < 5e-3);
  }
}

TEST_CASE("noiseless scene: recovered centroids within 1 percent of diameter") {
  const SceneConfig scene = tiny_scene();
  IsotropicCloud cloud;
  const GroundTruthSequence seq = simulate_scene(scene, &cloud);
  const double diameter = cloud_diameter(cloud);

  RecoveryConfig cfg = fast_config(scene);
  cfg.dsa.iter_base = 250;
  const TrajectoryResult result =
      recover_sequence(seq.frames, cloud, scene.camera, cfg);
  for (std::size_t n = 0; n < seq.centroids.size(); ++n) {
    CHECK((result.centroids[n] - seq.centroids[n]).norm() < 0.01 * diameter);
  }
}

TEST_CASE("frame 0 pose is bit-identical to the registration output") {
  const SceneConfig scene = tiny_scene();
  IsotropicCloud cloud;
  const GroundTruthSequence seq = simulate_scene(scene, &cloud);
  RecoveryConfig cfg = fast_config(scene);
  cfg.dsa.iter_base = 40;
  cfg.registration_iters = 50;
  const TrajectoryResult result =
      recover_sequence(seq.frames, cloud, scene.camera, cfg);
  CHECK(result.poses[0].rotation.w() == result.registration.rotation.w());
  CHECK(result.poses[0].rotation.x() == result.registration.rotation.x());
  CHECK(result.poses[0].rotation.y() == result.registration.rotation.y());
  CHECK(result.poses[0].rotation.z() == result.registration.rotation.z());
  CHECK(result.poses[0].translation == result.registration.translation);
}

TEST_CASE("per-frame total equals the configured weighted sum of components") {
  const SceneConfig scene = tiny_scene();
  IsotropicCloud cloud;
  const GroundTruthSequence seq = simulate_scene(scene, &cloud);
  RecoveryConfig cfg = fast_config(scene);
  cfg.dsa.iter_base = 80;
  cfg.registration_iters = 40;
  const TrajectoryResult result =
      recover_sequence(seq.frames, cloud, scene.camera, cfg);
  for (const FrameLossBreakdown& row : result.losses) {
    CHECK(row.total >= 0.0);
    const double weighted = cfg.loss_weights.lambda_gs * row.l_gs +
                            cfg.loss_weights.lambda_acc * row.l_acc +
                            cfg.loss_weights.lambda_smooth * row.l_smooth;
    CHECK(row.total == Approx(weighted).margin(1e-12));
  }
}

TEST_CASE("acceleration consistency of a recovered noiseless trajectory") {
  SceneConfig scene = tiny_scene();
  scene.num_frames = 10;
  IsotropicCloud cloud;
  const GroundTruthSequence seq = simulate_scene(scene, &cloud);
  RecoveryConfig cfg = fast_config(scene);
  cfg.dsa.iter_base = 250;
  const TrajectoryResult result =
      recover_sequence(seq.frames, cloud, scene.camera, cfg);

  const double dt = scene.physics.frame_dt;
  const double diameter = cloud_diameter(cloud);
  const double bound = 1e-4 * std::pow(diameter / (dt * dt), 2.0);
  for (std::size_t n = 1; n + 2 < result.centroids.size(); ++n) {
    const Vec3 a_t = finite_diff_acceleration(result.centroids[n - 1],
                                              result.centroids[n],
                                              result.centroids[n + 1], dt);
    const Vec3 a_next = finite_diff_acceleration(result.centroids[n],
                                                 result.centroids[n + 1],
                                                 result.centroids[n + 2], dt);
    CHECK(acc_consistency_loss(a_t, a_next, scene.physics.gravity_dir) < bound);
  }
}

TEST_CASE("recovery serialization is byte-identical across reruns") {
  const SceneConfig scene = tiny_scene();
  IsotropicCloud cloud;
  const GroundTruthSequence seq = simulate_scene(scene, &cloud);
  RecoveryConfig cfg = fast_config(scene);
  cfg.dsa.iter_base = 60;
  cfg.registration_iters = 40;

  TempDir a, b;
  save_recovery(a.path.string(),
                recover_sequence(seq.frames, cloud, scene.camera, cfg));
  save_recovery(b.path.string(),
                recover_sequence(seq.frames, cloud, scene.camera, cfg));
  CHECK(slurp(a.path / "recovered_poses.csv") == slurp(b.path / "recovered_poses.csv"));
  CHECK(slurp(a.path / "losses.csv") == slurp(b.path / "losses.csv"));
  CHECK(slurp(a.path / "kalman_trace.csv") == slurp(b.path / "kalman_trace.csv"));
  CHECK(!slurp(a.path / "recovered_poses.csv").empty());
  CHECK(load_recovery_scale(a.path.string()) > 0.0);
  CHECK(load_recovery_scale(a.path.string()) == load_recovery_scale(b.path.string()));
}

TEST_CASE("recover_sequence validates inputs") {
  const SceneConfig scene = tiny_scene();
  IsotropicCloud cloud;
  const GroundTruthSequence seq = simulate_scene(scene, &cloud);
  RecoveryConfig cfg = fast_config(scene);

  std::vector<FrameObservation> two(seq.frames.begin(), seq.frames.begin() + 2);
  CHECK_THROWS_AS(recover_sequence(two, cloud, scene.camera, cfg), InvalidInputError);

  RecoveryConfig bad = cfg;
  bad.loss_weights.lambda_gs = 0.5;  // sum != 1
  CHECK_THROWS_AS(recover_sequence(seq.frames, cloud, scene.camera, bad),
                  InvalidInputError);
}

TEST_CASE("optimization failure names the frame") {
  const SceneConfig scene = tiny_scene();
  IsotropicCloud cloud;
  GroundTruthSequence seq = simulate_scene(scene, &cloud);
  seq.frames[2].target.rgb[100] = std::numeric_limits<double>::quiet_NaN();

  RecoveryConfig cfg = fast_config(scene);
  cfg.dsa.iter_base = 20;
  cfg.registration_iters = 20;
  std::vector<FrameObservation> frames(seq.frames.begin(), seq.frames.end());
  try {
    recover_sequence(frames, cloud, scene.camera, cfg);
    FAIL("expected OptimizationFailureError");
  } catch (const OptimizationFailureError& e) {
    CHECK(std::string(e.what()).find("frame 2") != std::string::npos);
  }
}
