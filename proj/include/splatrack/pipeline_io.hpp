#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "splatrack/errors.hpp"
#include "splatrack/png_io.hpp"
#include "splatrack/recovery.hpp"
#include "splatrack/serialization.hpp"
#include "splatrack/simulator.hpp"

namespace splatrack {

namespace fs = std::filesystem;

namespace detail {

inline std::string frame_name(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04zu.png", index);
  return buf;
}

}  // namespace detail

/// Simulation output layout: frames/NNNN.png, masks/NNNN.png, gt_poses.csv,
/// flow_obs.csv, scene.json, cloud.json.
inline void save_simulation(const std::string& dir, const SceneConfig& cfg,
                            const GroundTruthSequence& seq, const IsotropicCloud& cloud) {
  fs::create_directories(fs::path(dir) / "frames");
  fs::create_directories(fs::path(dir) / "masks");
  std::vector<Vec2> flows;
  flows.reserve(seq.frames.size());
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    write_png_rgba((fs::path(dir) / "frames" / detail::frame_name(i)).string(),
                   seq.frames[i].target);
    write_png_mask((fs::path(dir) / "masks" / detail::frame_name(i)).string(),
                   seq.frames[i].mask);
    flows.push_back(seq.frames[i].flow);
  }
  write_pose_csv((fs::path(dir) / "gt_poses.csv").string(), seq.poses);
  write_flow_csv((fs::path(dir) / "flow_obs.csv").string(), flows);
  save_json_file((fs::path(dir) / "scene.json").string(), scene_to_json(cfg));
  save_json_file((fs::path(dir) / "cloud.json").string(), cloud_to_json(cloud));
}

struct LoadedScene {
  SceneConfig config;
  IsotropicCloud cloud;
  std::vector<FrameObservation> frames;
  std::vector<Pose> gt_poses;  // present when gt_poses.csv exists
};

/// Loads a simulation directory back as recovery input.
inline LoadedScene load_scene_dir(const std::string& dir) {
  LoadedScene scene;
  scene.config = scene_from_json(load_json_file((fs::path(dir) / "scene.json").string()));
  const LoadedCloud loaded =
      cloud_from_json(load_json_file((fs::path(dir) / "cloud.json").string()));
  if (std::holds_alternative<IsotropicCloud>(loaded)) {
    scene.cloud = std::get<IsotropicCloud>(loaded);
  } else {
    scene.cloud = isotropize(std::get<GaussianCloud>(loaded));
  }
  const std::vector<Vec2> flows =
      read_flow_csv((fs::path(dir) / "flow_obs.csv").string());
  scene.frames.resize(flows.size());
  for (std::size_t i = 0; i < flows.size(); ++i) {
    scene.frames[i].target =
        read_png_rgba((fs::path(dir) / "frames" / detail::frame_name(i)).string());
    const fs::path mask_path = fs::path(dir) / "masks" / detail::frame_name(i);
    if (fs::exists(mask_path)) scene.frames[i].mask = read_png_mask(mask_path.string());
    scene.frames[i].flow = flows[i];
  }
  const fs::path gt_path = fs::path(dir) / "gt_poses.csv";
  if (fs::exists(gt_path)) scene.gt_poses = read_pose_csv(gt_path.string());
  return scene;
}

inline void write_losses_csv(const std::string& path,
                             const std::vector<FrameLossBreakdown>& losses) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "frame,total,l_gs,l_acc,l_smooth,iterations,lr_init\n";
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const FrameLossBreakdown& row = losses[i];
    out << i << ',' << detail::fmt(row.total) << ',' << detail::fmt(row.l_gs) << ','
        << detail::fmt(row.l_acc) << ',' << detail::fmt(row.l_smooth) << ','
        << row.iterations << ',' << detail::fmt(row.lr_init) << '\n';
  }
}

inline void write_kalman_trace_csv(const std::string& path,
                                   const std::vector<KalmanTraceRow>& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "frame,axis,ds_prior,v_prior,z_flow,z_learn,gain_ds,gain_v,ds_post,v_post\n";
  const char* axis_names = "xyz";
  for (const KalmanTraceRow& row : trace) {
    for (int axis = 0; axis < 3; ++axis) {
      const FuseTraceAxis& a = row.axes[axis];
      out << row.frame << ',' << axis_names[axis] << ',' << detail::fmt(a.ds_prior)
          << ',' << detail::fmt(a.v_prior) << ',' << detail::fmt(a.z_flow) << ','
          << detail::fmt(a.z_learn) << ',' << detail::fmt(a.gain_ds) << ','
          << detail::fmt(a.gain_v) << ',' << detail::fmt(a.ds_post) << ','
          << detail::fmt(a.v_post) << '\n';
    }
  }
}

/// Recovery output layout: recovered_poses.csv, losses.csv, kalman_trace.csv,
/// plus registration.json (the frame-0 alignment, needed to re-render the
/// recovered object at its registered scale).
inline void save_recovery(const std::string& dir, const TrajectoryResult& result) {
  fs::create_directories(dir);
  write_pose_csv((fs::path(dir) / "recovered_poses.csv").string(), result.poses);
  write_losses_csv((fs::path(dir) / "losses.csv").string(), result.losses);
  write_kalman_trace_csv((fs::path(dir) / "kalman_trace.csv").string(),
                         result.kalman_trace);
  const RegistrationTransform& reg = result.registration;
  save_json_file((fs::path(dir) / "registration.json").string(),
                 Json{{"q", Json::array({reg.rotation.w(), reg.rotation.x(),
                                         reg.rotation.y(), reg.rotation.z()})},
                      {"t", detail::vec3_to_json(reg.translation)},
                      {"s", reg.scale}});
}

/// Registration scale stored alongside a recovery result; 1 when absent.
inline double load_recovery_scale(const std::string& dir) {
  const fs::path path = fs::path(dir) / "registration.json";
  if (!fs::exists(path)) return 1.0;
  return load_json_file(path.string()).at("s").get<double>();
}

// ---------------------------------------------------------------------------
// Recovery config JSON
// ---------------------------------------------------------------------------

inline Json recovery_config_to_json(const RecoveryConfig& cfg) {
  return Json{
      {"loss_weights",
       Json{{"lambda_dssim", cfg.loss_weights.lambda_dssim},
            {"lambda_gs", cfg.loss_weights.lambda_gs},
            {"lambda_acc", cfg.loss_weights.lambda_acc},
            {"lambda_smooth", cfg.loss_weights.lambda_smooth}}},
      {"dsa",
       Json{{"lr_base", cfg.dsa.lr_base},
            {"iter_base", cfg.dsa.iter_base},
            {"decay_floor_ratio", cfg.dsa.decay_floor_ratio},
            {"iter_cap_multiplier", cfg.dsa.iter_cap_multiplier}}},
      {"noise",
       Json{{"q_ds", cfg.noise.sigma_ds_sq},
            {"q_v", cfg.noise.sigma_v_sq},
            {"r_flow", cfg.noise.sigma_flow_sq},
            {"r_learn", cfg.noise.sigma_learn_sq},
            {"p0_ds", cfg.p0_ds},
            {"p0_v", cfg.p0_v}}},
      {"registration_lr", cfg.registration_lr},
      {"registration_iters", cfg.registration_iters},
      {"kalman_enabled", cfg.kalman_enabled},
      {"literal_lacc", cfg.literal_lacc},
      {"dsa_enabled", cfg.dsa_enabled}};
}

/// Partial configs are fine: absent keys keep their defaults.
inline RecoveryConfig recovery_config_from_json(const Json& j) {
  RecoveryConfig cfg;
  if (j.contains("loss_weights")) {
    const Json& w = j.at("loss_weights");
    if (w.contains("lambda_dssim")) cfg.loss_weights.lambda_dssim = w.at("lambda_dssim");
    if (w.contains("lambda_gs")) cfg.loss_weights.lambda_gs = w.at("lambda_gs");
    if (w.contains("lambda_acc")) cfg.loss_weights.lambda_acc = w.at("lambda_acc");
    if (w.contains("lambda_smooth")) cfg.loss_weights.lambda_smooth = w.at("lambda_smooth");
  }
  if (j.contains("dsa")) {
    const Json& d = j.at("dsa");
    if (d.contains("lr_base")) cfg.dsa.lr_base = d.at("lr_base");
    if (d.contains("iter_base")) cfg.dsa.iter_base = d.at("iter_base");
    if (d.contains("decay_floor_ratio")) cfg.dsa.decay_floor_ratio = d.at("decay_floor_ratio");
    if (d.contains("iter_cap_multiplier"))
      cfg.dsa.iter_cap_multiplier = d.at("iter_cap_multiplier");
  }
  if (j.contains("noise")) {
    const Json& n = j.at("noise");
    if (n.contains("q_ds")) cfg.noise.sigma_ds_sq = n.at("q_ds");
    if (n.contains("q_v")) cfg.noise.sigma_v_sq = n.at("q_v");
    if (n.contains("r_flow")) cfg.noise.sigma_flow_sq = n.at("r_flow");
    if (n.contains("r_learn")) cfg.noise.sigma_learn_sq = n.at("r_learn");
    if (n.contains("p0_ds")) cfg.p0_ds = n.at("p0_ds");
    if (n.contains("p0_v")) cfg.p0_v = n.at("p0_v");
  }
  if (j.contains("registration_lr")) cfg.registration_lr = j.at("registration_lr");
  if (j.contains("registration_iters")) cfg.registration_iters = j.at("registration_iters");
  if (j.contains("kalman_enabled")) cfg.kalman_enabled = j.at("kalman_enabled");
  if (j.contains("literal_lacc")) cfg.literal_lacc = j.at("literal_lacc");
  if (j.contains("dsa_enabled")) cfg.dsa_enabled = j.at("dsa_enabled");
  return cfg;
}

}  // namespace splatrack
