#pragma once

#include <cmath>
#include <vector>

#include "splatrack/errors.hpp"
#include "splatrack/image.hpp"
#include "splatrack/gaussian_cloud.hpp"

namespace splatrack {

/// Axis-aligned pixel bounding box, inclusive on both ends.
struct BBox {
  Vec2 min;
  Vec2 max;

  Vec2 center() const { return 0.5 * (min + max); }
  double area() const {
    return (max.x() - min.x() + 1.0) * (max.y() - min.y() + 1.0);
  }
};

/// Tight box over the mask's foreground pixels.
inline BBox silhouette_bbox(const Mask& mask) {
  int min_x = mask.width, min_y = mask.height, max_x = -1, max_y = -1;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      min_x = std::min(min_x, x);
      min_y = std::min(min_y, y);
      max_x = std::max(max_x, x);
      max_y = std::max(max_y, y);
    }
  }
  if (max_x < 0) {
    throw EmptySilhouetteError("silhouette_bbox: mask has no foreground pixels");
  }
  return BBox{Vec2(min_x, min_y), Vec2(max_x, max_y)};
}

/// Intersection-over-union of pixel areas (inclusive integer convention).
inline double iou(const BBox& a, const BBox& b) {
  const double ix = std::min(a.max.x(), b.max.x()) - std::max(a.min.x(), b.min.x()) + 1.0;
  const double iy = std::min(a.max.y(), b.max.y()) - std::max(a.min.y(), b.min.y()) + 1.0;
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

struct TrajectoryErrors {
  double ate = 0.0;
  double rmse = 0.0;
  std::vector<double> per_frame;
};

/// Per-frame normalized errors e_n = ||rec - true|| / normalizer;
/// ATE = mean(e), RMSE = sqrt(mean(e^2)).
template <typename VectorT>
TrajectoryErrors trajectory_errors(const std::vector<VectorT>& recovered,
                                   const std::vector<VectorT>& truth,
                                   double normalizer) {
  if (recovered.size() != truth.size()) {
    throw InvalidInputError("trajectory_errors: series length mismatch");
  }
  if (!(normalizer > 0.0)) {
    throw InvalidInputError("trajectory_errors: normalizer must be positive");
  }
  TrajectoryErrors out;
  out.per_frame.reserve(recovered.size());
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < recovered.size(); ++i) {
    const double e = (recovered[i] - truth[i]).norm() / normalizer;
    out.per_frame.push_back(e);
    sum += e;
    sum_sq += e * e;
  }
  const double n = static_cast<double>(recovered.size());
  out.ate = sum / n;
  out.rmse = std::sqrt(sum_sq / n);
  return out;
}

struct FrameMetrics {
  double iou = 0.0;
  double err_2d = 0.0;  // normalized bbox-center error
  double err_3d = 0.0;  // world centroid error (raw units)
};

struct MetricsReport {
  double mean_iou = 0.0;
  double ate = 0.0;       // normalized 2D
  double rmse = 0.0;      // normalized 2D
  double ate_3d = 0.0;    // world units, supplementary
  double rmse_3d = 0.0;   // world units, supplementary
  std::vector<FrameMetrics> per_frame;
};

/// Full report from per-frame silhouette masks (recovered vs truth) and 3D
/// centroid series. 2D errors are bbox-center distances normalized by the
/// image diagonal; 3D errors are raw world-unit centroid distances.
inline MetricsReport compute_metrics(const std::vector<Mask>& recovered_masks,
                                     const std::vector<Mask>& truth_masks,
                                     const std::vector<Vec3>& recovered_centroids,
                                     const std::vector<Vec3>& truth_centroids) {
  if (recovered_masks.size() != truth_masks.size() ||
      recovered_centroids.size() != truth_centroids.size() ||
      recovered_masks.size() != recovered_centroids.size()) {
    throw InvalidInputError("compute_metrics: series length mismatch");
  }
  MetricsReport report;
  const std::size_t n = recovered_masks.size();
  if (n == 0) return report;

  const double diag = std::hypot(static_cast<double>(truth_masks[0].width),
                                 static_cast<double>(truth_masks[0].height));
  std::vector<Vec2> rec_centers, true_centers;
  rec_centers.reserve(n);
  true_centers.reserve(n);
  report.per_frame.resize(n);
  double iou_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const BBox rec_box = silhouette_bbox(recovered_masks[i]);
    const BBox true_box = silhouette_bbox(truth_masks[i]);
    report.per_frame[i].iou = iou(rec_box, true_box);
    iou_sum += report.per_frame[i].iou;
    rec_centers.push_back(rec_box.center());
    true_centers.push_back(true_box.center());
  }
  report.mean_iou = iou_sum / static_cast<double>(n);

  const TrajectoryErrors e2d = trajectory_errors(rec_centers, true_centers, diag);
  const TrajectoryErrors e3d =
      trajectory_errors(recovered_centroids, truth_centroids, 1.0);
  report.ate = e2d.ate;
  report.rmse = e2d.rmse;
  report.ate_3d = e3d.ate;
  report.rmse_3d = e3d.rmse;
  for (std::size_t i = 0; i < n; ++i) {
    report.per_frame[i].err_2d = e2d.per_frame[i];
    report.per_frame[i].err_3d = e3d.per_frame[i];
  }
  return report;
}

}  // namespace splatrack
