#pragma once

#include <cmath>
#include <vector>

#include "splatrack/errors.hpp"
#include "splatrack/gaussian_cloud.hpp"

namespace splatrack {

/// Gravity direction (unit), inter-frame interval, and the magnitude the
/// simulator applies (recovery only needs it as a control-input fallback).
struct PhysicsConfig {
  Vec3 gravity_dir = Vec3(0.0, -1.0, 0.0);
  double frame_dt = 0.02;
  double gravity_mag = 9.8;

  Vec3 gravity_vector() const { return gravity_mag * gravity_dir; }

  void validate() const {
    if (std::abs(gravity_dir.norm() - 1.0) > 1e-9) {
      throw InvalidInputError("gravity_dir must be a unit vector");
    }
    if (!(frame_dt > 0.0)) {
      throw InvalidInputError("frame_dt must be positive");
    }
  }
};

/// Uniformly sampled centroid trajectory.
struct CentroidSeries {
  std::vector<double> timestamps;
  std::vector<Vec3> centroids;

  void validate(double frame_dt) const {
    if (timestamps.size() != centroids.size()) {
      throw InvalidInputError("centroid series: size mismatch");
    }
    for (std::size_t i = 1; i < timestamps.size(); ++i) {
      const double step = timestamps[i] - timestamps[i - 1];
      if (!(step > 0.0) || std::abs(step - frame_dt) > 1e-9) {
        throw InvalidInputError("centroid series: non-uniform timestamps");
      }
    }
  }

  static CentroidSeries sampled(const std::vector<Vec3>& centroids, double frame_dt) {
    CentroidSeries series;
    series.centroids = centroids;
    series.timestamps.reserve(centroids.size());
    for (std::size_t i = 0; i < centroids.size(); ++i) {
      series.timestamps.push_back(static_cast<double>(i) * frame_dt);
    }
    return series;
  }
};

/// Central second difference: a = ((next - cur) - (cur - prev)) / dt^2.
inline Vec3 finite_diff_acceleration(const Vec3& prev, const Vec3& cur,
                                     const Vec3& next, double dt) {
  if (!(dt > 0.0)) {
    throw InvalidInputError("finite_diff_acceleration: dt must be positive");
  }
  return ((next - cur) - (cur - prev)) / (dt * dt);
}

struct AccelerationSplit {
  Vec3 parallel;
  Vec3 orthogonal;
};

/// Split into components parallel and orthogonal to the unit gravity
/// direction; parallel + orthogonal reproduces the input exactly.
inline AccelerationSplit decompose_acceleration(const Vec3& a, const Vec3& g) {
  if (std::abs(g.norm() - 1.0) > 1e-6) {
    throw InvalidInputError("decompose_acceleration: gravity direction must be unit");
  }
  AccelerationSplit split;
  split.parallel = a.dot(g) * g;
  split.orthogonal = a - split.parallel;
  return split;
}

/// Consistency penalty between two consecutive accelerations. The default
/// reading penalizes the frame-to-frame change of both components, which is
/// the constancy the constraint is meant to enforce; the literal form keeps
/// the raw parallel component in the residual instead of its change.
inline double acc_consistency_loss(const Vec3& a_t, const Vec3& a_next, const Vec3& g,
                                   bool literal = false) {
  const AccelerationSplit cur = decompose_acceleration(a_t, g);
  const AccelerationSplit next = decompose_acceleration(a_next, g);
  const Vec3 parallel_term =
      literal ? cur.parallel : (next.parallel - cur.parallel);
  const Vec3 residual = parallel_term + (next.orthogonal - cur.orthogonal);
  return residual.squaredNorm();
}

/// Displacement over [t, t + dt] under constant acceleration:
/// ds(t) = (a dt) t + (a dt^2 / 2 + v0 dt). Affine in t with slope a dt^2.
inline double predicted_displacement(double v0, double a, double t, double dt) {
  if (!(dt > 0.0)) {
    throw InvalidInputError("predicted_displacement: dt must be positive");
  }
  return (a * dt) * t + (0.5 * a * dt * dt + v0 * dt);
}

}  // namespace splatrack
