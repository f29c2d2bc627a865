#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "splatrack/camera.hpp"
#include "splatrack/errors.hpp"
#include "splatrack/gaussian_cloud.hpp"
#include "splatrack/kalman.hpp"
#include "splatrack/metrics.hpp"
#include "splatrack/physics.hpp"
#include "splatrack/se3.hpp"
#include "splatrack/simulator.hpp"

namespace splatrack {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// small helpers
// ---------------------------------------------------------------------------

namespace detail {

inline Vec3 vec3_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw IoError("expected a 3-element array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline Json vec3_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

/// %.17g round-trips doubles exactly and keeps CSV output byte-stable.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Gaussian cloud JSON: array of kernels, anisotropic ({cov: 9 row-major}) or
// isotropic ({radius}) form; the loader auto-detects which.
// ---------------------------------------------------------------------------

inline Json cloud_to_json(const GaussianCloud& cloud) {
  Json arr = Json::array();
  for (const GaussianKernel& k : cloud.kernels) {
    Json cov = Json::array();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) cov.push_back(k.covariance(r, c));
    arr.push_back(Json{{"pos", detail::vec3_to_json(k.position)},
                       {"cov", cov},
                       {"rgb", detail::vec3_to_json(k.color)},
                       {"alpha", k.opacity}});
  }
  return arr;
}

inline Json cloud_to_json(const IsotropicCloud& cloud) {
  Json arr = Json::array();
  for (const IsotropicKernel& k : cloud.kernels) {
    arr.push_back(Json{{"pos", detail::vec3_to_json(k.position)},
                       {"radius", k.radius},
                       {"rgb", detail::vec3_to_json(k.color)},
                       {"alpha", k.opacity}});
  }
  return arr;
}

using LoadedCloud = std::variant<GaussianCloud, IsotropicCloud>;

inline LoadedCloud cloud_from_json(const Json& arr) {
  if (!arr.is_array() || arr.empty()) {
    throw IoError("cloud JSON must be a non-empty array");
  }
  const bool isotropic = arr[0].contains("radius");
  if (isotropic) {
    IsotropicCloud cloud;
    for (const Json& j : arr) {
      if (!j.contains("radius")) throw IoError("mixed kernel forms in cloud JSON");
      IsotropicKernel k;
      k.position = detail::vec3_from_json(j.at("pos"));
      k.radius = j.at("radius").get<double>();
      k.color = detail::vec3_from_json(j.at("rgb"));
      k.opacity = j.at("alpha").get<double>();
      if (!(k.radius > 0.0)) throw IoError("kernel radius must be positive");
      if (!(k.opacity > 0.0) || k.opacity > 1.0) {
        throw IoError("kernel opacity must be in (0, 1]");
      }
      cloud.kernels.push_back(k);
    }
    return cloud;
  }
  GaussianCloud cloud;
  for (const Json& j : arr) {
    if (!j.contains("cov")) throw IoError("mixed kernel forms in cloud JSON");
    GaussianKernel k;
    k.position = detail::vec3_from_json(j.at("pos"));
    const Json& cov = j.at("cov");
    if (!cov.is_array() || cov.size() != 9) throw IoError("cov must have 9 entries");
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) k.covariance(r, c) = cov[3 * r + c].get<double>();
    k.color = detail::vec3_from_json(j.at("rgb"));
    k.opacity = j.at("alpha").get<double>();
    cloud.kernels.push_back(k);
  }
  return cloud;
}

// ---------------------------------------------------------------------------
// Camera / physics / scene config JSON
// ---------------------------------------------------------------------------

inline Json camera_to_json(const Camera& cam) {
  return Json{{"focal", cam.focal},
              {"cx", cam.principal_point.x()},
              {"cy", cam.principal_point.y()},
              {"width", cam.width},
              {"height", cam.height},
              {"extrinsic",
               Json{{"q", Json::array({cam.extrinsic.rotation.w(), cam.extrinsic.rotation.x(),
                                       cam.extrinsic.rotation.y(), cam.extrinsic.rotation.z()})},
                    {"t", detail::vec3_to_json(cam.extrinsic.translation)}}}};
}

inline Camera camera_from_json(const Json& j) {
  Camera cam;
  cam.focal = j.at("focal").get<double>();
  cam.principal_point = Vec2(j.at("cx").get<double>(), j.at("cy").get<double>());
  cam.width = j.at("width").get<int>();
  cam.height = j.at("height").get<int>();
  if (j.contains("extrinsic")) {
    const Json& e = j.at("extrinsic");
    const Json& q = e.at("q");
    cam.extrinsic.rotation =
        Quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>())
            .normalized();
    cam.extrinsic.translation = detail::vec3_from_json(e.at("t"));
  }
  return cam;
}

inline Json physics_to_json(const PhysicsConfig& p) {
  return Json{{"gravity_dir", detail::vec3_to_json(p.gravity_dir)},
              {"dt", p.frame_dt},
              {"gravity_mag", p.gravity_mag}};
}

inline PhysicsConfig physics_from_json(const Json& j) {
  PhysicsConfig p;
  p.gravity_dir = detail::vec3_from_json(j.at("gravity_dir")).normalized();
  p.frame_dt = j.at("dt").get<double>();
  if (j.contains("gravity_mag")) p.gravity_mag = j.at("gravity_mag").get<double>();
  return p;
}

inline Json scene_to_json(const SceneConfig& cfg) {
  Json object;
  if (!cfg.object.path.empty()) {
    object = Json{{"path", cfg.object.path}};
  } else {
    object = Json{{"shape", cfg.object.shape},
                  {"count", cfg.object.count},
                  {"seed", cfg.object.seed}};
  }
  return Json{{"object", object},
              {"v0", detail::vec3_to_json(cfg.v0)},
              {"omega", detail::vec3_to_json(cfg.omega)},
              {"physics", physics_to_json(cfg.physics)},
              {"camera", camera_to_json(cfg.camera)},
              {"num_frames", cfg.num_frames},
              {"flow_noise_std", cfg.flow_noise_std},
              {"seed", cfg.seed}};
}

inline SceneConfig scene_from_json(const Json& j) {
  SceneConfig cfg;
  const Json& object = j.at("object");
  if (object.contains("path")) {
    cfg.object.path = object.at("path").get<std::string>();
  } else {
    cfg.object.shape = object.at("shape").get<std::string>();
    cfg.object.count = object.at("count").get<int>();
    if (object.contains("seed")) cfg.object.seed = object.at("seed").get<std::uint64_t>();
  }
  cfg.v0 = detail::vec3_from_json(j.at("v0"));
  cfg.omega = detail::vec3_from_json(j.at("omega"));
  cfg.physics = physics_from_json(j.at("physics"));
  cfg.camera = camera_from_json(j.at("camera"));
  cfg.num_frames = j.at("num_frames").get<int>();
  cfg.flow_noise_std = j.at("flow_noise_std").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

// ---------------------------------------------------------------------------
// CSV: pose sequences, flow observations
// ---------------------------------------------------------------------------

inline void write_pose_csv(const std::string& path, const std::vector<Pose>& poses) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "frame,qw,qx,qy,qz,tx,ty,tz\n";
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const Pose& p = poses[i];
    out << i << ',' << detail::fmt(p.rotation.w()) << ',' << detail::fmt(p.rotation.x())
        << ',' << detail::fmt(p.rotation.y()) << ',' << detail::fmt(p.rotation.z()) << ','
        << detail::fmt(p.translation.x()) << ',' << detail::fmt(p.translation.y()) << ','
        << detail::fmt(p.translation.z()) << '\n';
  }
}

inline std::vector<Pose> read_pose_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::vector<Pose> poses;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 8) throw IoError("bad pose CSV row in " + path);
    Pose p;
    p.rotation = Quat(std::stod(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4]));
    p.translation = Vec3(std::stod(f[5]), std::stod(f[6]), std::stod(f[7]));
    poses.push_back(p);
  }
  return poses;
}

inline void write_flow_csv(const std::string& path, const std::vector<Vec2>& flows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "frame,du,dv\n";
  for (std::size_t i = 0; i < flows.size(); ++i) {
    out << i << ',' << detail::fmt(flows[i].x()) << ',' << detail::fmt(flows[i].y()) << '\n';
  }
}

inline std::vector<Vec2> read_flow_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::vector<Vec2> flows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 3) throw IoError("bad flow CSV row in " + path);
    flows.emplace_back(std::stod(f[1]), std::stod(f[2]));
  }
  return flows;
}

// ---------------------------------------------------------------------------
// metrics.json + plot CSV
// ---------------------------------------------------------------------------

inline Json metrics_to_json(const MetricsReport& report) {
  Json per_frame = Json::array();
  for (std::size_t i = 0; i < report.per_frame.size(); ++i) {
    per_frame.push_back(Json{{"frame", i},
                             {"iou", report.per_frame[i].iou},
                             {"err", report.per_frame[i].err_2d},
                             {"err_3d", report.per_frame[i].err_3d}});
  }
  return Json{{"mean_iou", report.mean_iou}, {"ate", report.ate},
              {"rmse", report.rmse},         {"ate_3d", report.ate_3d},
              {"rmse_3d", report.rmse_3d},   {"per_frame", per_frame}};
}

inline void write_metrics_csv(const std::string& path, const MetricsReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "frame,iou,err,err_3d\n";
  for (std::size_t i = 0; i < report.per_frame.size(); ++i) {
    out << i << ',' << detail::fmt(report.per_frame[i].iou) << ','
        << detail::fmt(report.per_frame[i].err_2d) << ','
        << detail::fmt(report.per_frame[i].err_3d) << '\n';
  }
}

// ---------------------------------------------------------------------------
// generic file helpers
// ---------------------------------------------------------------------------

inline Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  Json j;
  in >> j;
  return j;
}

inline void save_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace splatrack
