// Command-line front end: scene simulation, trajectory recovery, metric
// evaluation, and single-feature ablation runs.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "splatrack/splatrack.hpp"

namespace fs = std::filesystem;
using namespace splatrack;

namespace {

struct RecoverFlags {
  std::string scene_dir;
  std::string config_path;
  std::string out_dir;
  std::string prune_stage = "post";
  double prune_tau_l = 0.0;  // 0 disables the axial predicate
  double prune_tau_d = 0.0;  // 0 disables the outlier predicate
  // schedule / noise overrides; NaN means "keep config value"
  double lr_base = NAN, decay_floor = NAN, iter_cap = NAN;
  int iter_base = -1;
  double q_ds = NAN, q_v = NAN, r_flow = NAN, r_learn = NAN;
  double lambda_dssim = NAN;
  bool no_smooth = false;
  bool literal_lacc = false;
};

void add_recover_flags(CLI::App* cmd, RecoverFlags& flags) {
  cmd->add_option("--scene", flags.scene_dir, "simulation directory")->required();
  cmd->add_option("--config", flags.config_path, "recovery config JSON");
  cmd->add_option("--out", flags.out_dir, "output directory")->required();
  cmd->add_option("--lr-base", flags.lr_base,
                  "base learning rate at the minimal-displacement frame (default 1.0e-3)");
  cmd->add_option("--iter-base", flags.iter_base, "base iteration count (default 1000)");
  cmd->add_option("--decay-floor", flags.decay_floor,
                  "final/initial learning-rate ratio within a frame (default 0.01)");
  cmd->add_option("--iter-cap", flags.iter_cap,
                  "max iteration extension multiplier (default 4)");
  cmd->add_option("--q-ds", flags.q_ds, "process noise variance, displacement");
  cmd->add_option("--q-v", flags.q_v, "process noise variance, velocity");
  cmd->add_option("--r-flow", flags.r_flow, "observation noise variance, flow");
  cmd->add_option("--r-learn", flags.r_learn, "observation noise variance, learned");
  cmd->add_option("--lambda-dssim", flags.lambda_dssim, "D-SSIM mix in [0,1] (default 0.2)");
  cmd->add_flag("--no-smooth", flags.no_smooth,
                "drop the flow-smoothness term (remaining weights renormalized)");
  cmd->add_flag("--literal-lacc", flags.literal_lacc,
                "use the literal acceleration-consistency residual");
  cmd->add_option("--prune", flags.prune_stage,
                  "density control stage: post (before recovery) or off")
      ->check(CLI::IsMember({"post", "off"}));
  cmd->add_option("--prune-tau-l", flags.prune_tau_l,
                  "max principal-axis eigenvalue; 0 leaves the predicate unbound");
  cmd->add_option("--prune-tau-d", flags.prune_tau_d,
                  "nearest-neighbor distance factor; 0 leaves the predicate unbound");
}

/// Zeroes one composite weight and renormalizes the rest to keep the sum at 1.
void disable_weight(LossWeights& weights, const std::string& which) {
  double* target = nullptr;
  if (which == "acc") target = &weights.lambda_acc;
  if (which == "smooth") target = &weights.lambda_smooth;
  if (!target) throw InvalidInputError("unknown weight: " + which);
  *target = 0.0;
  const double rest = weights.lambda_gs + weights.lambda_acc + weights.lambda_smooth;
  if (rest <= 0.0) throw InvalidInputError("all loss weights are zero");
  weights.lambda_gs /= rest;
  weights.lambda_acc /= rest;
  weights.lambda_smooth /= rest;
}

RecoveryConfig build_config(const RecoverFlags& flags) {
  RecoveryConfig cfg;
  if (!flags.config_path.empty()) {
    cfg = recovery_config_from_json(load_json_file(flags.config_path));
  }
  if (!std::isnan(flags.lr_base)) cfg.dsa.lr_base = flags.lr_base;
  if (flags.iter_base >= 0) cfg.dsa.iter_base = flags.iter_base;
  if (!std::isnan(flags.decay_floor)) cfg.dsa.decay_floor_ratio = flags.decay_floor;
  if (!std::isnan(flags.iter_cap)) cfg.dsa.iter_cap_multiplier = flags.iter_cap;
  if (!std::isnan(flags.q_ds)) cfg.noise.sigma_ds_sq = flags.q_ds;
  if (!std::isnan(flags.q_v)) cfg.noise.sigma_v_sq = flags.q_v;
  if (!std::isnan(flags.r_flow)) cfg.noise.sigma_flow_sq = flags.r_flow;
  if (!std::isnan(flags.r_learn)) cfg.noise.sigma_learn_sq = flags.r_learn;
  if (!std::isnan(flags.lambda_dssim)) cfg.loss_weights.lambda_dssim = flags.lambda_dssim;
  if (flags.literal_lacc) cfg.literal_lacc = true;
  if (flags.no_smooth) disable_weight(cfg.loss_weights, "smooth");
  return cfg;
}

int run_simulate(const std::string& scene_path, const std::string& out_dir) {
  const SceneConfig cfg = scene_from_json(load_json_file(scene_path));
  IsotropicCloud cloud;
  if (!cfg.object.path.empty()) {
    const LoadedCloud loaded = cloud_from_json(load_json_file(cfg.object.path));
    if (std::holds_alternative<IsotropicCloud>(loaded)) {
      cloud = centralize(std::get<IsotropicCloud>(loaded));
    } else {
      cloud = centralize(isotropize(std::get<GaussianCloud>(loaded)));
    }
  } else {
    cloud = scene_object_cloud(cfg);
  }
  const GroundTruthSequence seq =
      synthesize_frames(cfg, generate_trajectory(cfg), cloud);
  save_simulation(out_dir, cfg, seq, cloud);
  std::cout << "simulated " << seq.poses.size() << " frames -> " << out_dir << "\n";
  return 0;
}

int run_recover(const RecoverFlags& flags, const RecoveryConfig& cfg) {
  LoadedScene scene = load_scene_dir(flags.scene_dir);
  RecoveryConfig config = cfg;
  config.physics = scene.config.physics;

  IsotropicCloud cloud = scene.cloud;
  if (flags.prune_stage == "post" &&
      (flags.prune_tau_l > 0.0 || flags.prune_tau_d > 0.0)) {
    // density control runs on the anisotropic form of the loaded cloud
    GaussianCloud aniso;
    for (const IsotropicKernel& k : cloud.kernels) {
      GaussianKernel g;
      g.position = k.position;
      g.covariance = (k.radius * k.radius) * Mat3::Identity();
      g.color = k.color;
      g.opacity = k.opacity;
      aniso.kernels.push_back(g);
    }
    PruneConfig prune_cfg;
    prune_cfg.tau_l = flags.prune_tau_l > 0.0 ? flags.prune_tau_l
                                              : std::numeric_limits<double>::max();
    prune_cfg.tau_d = flags.prune_tau_d > 0.0 ? flags.prune_tau_d
                                              : std::numeric_limits<double>::max();
    cloud = isotropize(prune(aniso, prune_cfg));
  }

  const TrajectoryResult result =
      recover_sequence(scene.frames, cloud, scene.config.camera, config);
  save_recovery(flags.out_dir, result);
  std::cout << "recovered " << result.poses.size() << " poses -> " << flags.out_dir
            << "\n";
  return 0;
}

int run_evaluate(const std::string& result_dir, const std::string& gt_dir,
                 const std::string& out_dir) {
  const LoadedScene scene = load_scene_dir(gt_dir);
  const std::vector<Pose> recovered =
      read_pose_csv((fs::path(result_dir) / "recovered_poses.csv").string());
  if (scene.gt_poses.empty()) throw IoError("ground-truth directory lacks gt_poses.csv");

  std::vector<Mask> truth_masks;
  truth_masks.reserve(scene.frames.size());
  for (const FrameObservation& f : scene.frames) truth_masks.push_back(f.mask);

  const Vec3 sigma0 = centroid(scene.cloud);
  std::vector<Vec3> truth_centroids;
  truth_centroids.reserve(scene.gt_poses.size());
  for (const Pose& p : scene.gt_poses) {
    truth_centroids.push_back(p.rotation * sigma0 + p.translation);
  }

  const MetricsReport report =
      evaluate_recovery(recovered, scene.cloud, scene.config.camera, truth_masks,
                        truth_centroids, load_recovery_scale(result_dir));
  fs::create_directories(out_dir);
  save_json_file((fs::path(out_dir) / "metrics.json").string(), metrics_to_json(report));
  write_metrics_csv((fs::path(out_dir) / "metrics_per_frame.csv").string(), report);
  std::cout << "mean_iou " << report.mean_iou << "  ate " << report.ate << "  rmse "
            << report.rmse << "  ate_3d " << report.ate_3d << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rigid projectile trajectory recovery over splat renders"};
  app.require_subcommand(1);

  std::string scene_path, out_dir;
  CLI::App* simulate = app.add_subcommand("simulate", "synthesize a ground-truth scene");
  simulate->add_option("--scene", scene_path, "scene config JSON")->required();
  simulate->add_option("--out", out_dir, "output directory")->required();

  RecoverFlags recover_flags;
  CLI::App* recover = app.add_subcommand("recover", "recover the trajectory");
  add_recover_flags(recover, recover_flags);

  std::string result_dir, gt_dir, eval_out;
  CLI::App* evaluate = app.add_subcommand("evaluate", "compute IoU/ATE/RMSE metrics");
  evaluate->add_option("--result", result_dir, "recovery output directory")->required();
  evaluate->add_option("--gt", gt_dir, "simulation (ground truth) directory")->required();
  evaluate->add_option("--out", eval_out, "metrics output directory (default: result)");

  RecoverFlags ablate_flags;
  std::string mode;
  CLI::App* ablate = app.add_subcommand("ablate", "recover with one feature disabled");
  ablate->add_option("--mode", mode, "feature to disable")
      ->required()
      ->check(CLI::IsMember({"no-dsa", "no-lacc", "no-kalman", "no-smooth"}));
  add_recover_flags(ablate, ablate_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      return run_simulate(scene_path, out_dir);
    }
    if (recover->parsed()) {
      return run_recover(recover_flags, build_config(recover_flags));
    }
    if (evaluate->parsed()) {
      return run_evaluate(result_dir, gt_dir, eval_out.empty() ? result_dir : eval_out);
    }
    if (ablate->parsed()) {
      RecoveryConfig cfg = build_config(ablate_flags);
      if (mode == "no-dsa") cfg.dsa_enabled = false;
      if (mode == "no-kalman") cfg.kalman_enabled = false;
      if (mode == "no-lacc") disable_weight(cfg.loss_weights, "acc");
      if (mode == "no-smooth") disable_weight(cfg.loss_weights, "smooth");
      return run_recover(ablate_flags, cfg);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
