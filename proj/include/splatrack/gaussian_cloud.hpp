#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "splatrack/errors.hpp"

namespace splatrack {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// One anisotropic Gaussian primitive: position, SPD covariance, color, opacity.
struct GaussianKernel {
  Vec3 position = Vec3::Zero();
  Mat3 covariance = Mat3::Identity();
  Vec3 color = Vec3::Ones();
  double opacity = 1.0;
};

/// Isotropic form used after isotropization: covariance collapsed to a radius.
struct IsotropicKernel {
  Vec3 position = Vec3::Zero();
  double radius = 1.0;
  Vec3 color = Vec3::Ones();
  double opacity = 1.0;
};

struct GaussianCloud {
  std::vector<GaussianKernel> kernels;
  std::size_t size() const { return kernels.size(); }
};

struct IsotropicCloud {
  std::vector<IsotropicKernel> kernels;
  std::size_t size() const { return kernels.size(); }
};

/// Density-control thresholds: tau_l bounds the principal-axis eigenvalue,
/// tau_d scales the mean pairwise distance for outlier removal.
struct PruneConfig {
  double tau_l = 1.0;
  double tau_d = 1.0;
};

namespace detail {

inline Mat3 symmetrized(const Mat3& m) { return 0.5 * (m + m.transpose()); }

inline Eigen::Vector3d covariance_eigenvalues(const Mat3& covariance) {
  if (!covariance.allFinite()) {
    throw InvalidInputError("covariance has non-finite entries");
  }
  Eigen::SelfAdjointEigenSolver<Mat3> solver;
  solver.computeDirect(symmetrized(covariance), Eigen::EigenvaluesOnly);
  return solver.eigenvalues();  // ascending
}

}  // namespace detail

/// Largest eigenvalue of the kernel covariance (squared principal-axis length).
inline double principal_axis_length(const GaussianKernel& kernel) {
  const Eigen::Vector3d eig = detail::covariance_eigenvalues(kernel.covariance);
  return eig(2);
}

/// Mean pairwise distance over all ordered pairs, self-pairs included:
/// D_avg = (1/N^2) * sum_{m,n} ||mu_m - mu_n||.
inline double mean_pairwise_distance(const GaussianCloud& cloud) {
  const std::size_t n = cloud.size();
  if (n < 2) {
    throw InsufficientPointsError("mean_pairwise_distance needs at least 2 kernels");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      sum += (cloud.kernels[i].position - cloud.kernels[j].position).norm();
    }
  }
  // each unordered pair appears twice in the double sum; diagonal adds zero
  return 2.0 * sum / (static_cast<double>(n) * static_cast<double>(n));
}

/// Density control: keep kernels whose principal-axis eigenvalue is within
/// tau_l and whose nearest-neighbor distance (self excluded) is within
/// tau_d * D_avg. D_avg is computed once on the input cloud.
inline GaussianCloud prune(const GaussianCloud& cloud, const PruneConfig& cfg) {
  const std::size_t n = cloud.size();
  if (n < 2) {
    throw InsufficientPointsError("prune needs at least 2 kernels");
  }
  if (!(cfg.tau_l > 0.0) || !(cfg.tau_d > 0.0)) {
    throw InvalidInputError("prune thresholds must be positive");
  }
  const double d_avg = mean_pairwise_distance(cloud);

  GaussianCloud out;
  out.kernels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (principal_axis_length(cloud.kernels[i]) > cfg.tau_l) continue;
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      nearest = std::min(
          nearest, (cloud.kernels[i].position - cloud.kernels[j].position).norm());
    }
    if (nearest > cfg.tau_d * d_avg) continue;
    out.kernels.push_back(cloud.kernels[i]);
  }
  if (out.kernels.empty()) {
    throw AllPrunedError("prune removed every kernel");
  }
  return out;
}

/// Collapse each covariance to a single radius R = det(Sigma)^(1/6), the
/// volume-preserving standard-deviation scale (reduces to sqrt(lambda) for
/// isotropic inputs). Position, color and opacity are unchanged.
inline IsotropicCloud isotropize(const GaussianCloud& cloud) {
  IsotropicCloud out;
  out.kernels.reserve(cloud.size());
  for (const GaussianKernel& k : cloud.kernels) {
    const Eigen::Vector3d eig = detail::covariance_eigenvalues(k.covariance);
    if (!(eig(0) > 0.0)) {
      throw InvalidInputError("isotropize requires SPD covariances");
    }
    IsotropicKernel iso;
    iso.position = k.position;
    iso.radius = std::pow(eig(0) * eig(1) * eig(2), 1.0 / 6.0);
    iso.color = k.color;
    iso.opacity = k.opacity;
    out.kernels.push_back(iso);
  }
  return out;
}

/// Radius-cubed weighted mean of kernel positions (center-of-mass proxy).
inline Vec3 centroid(const IsotropicCloud& cloud) {
  if (cloud.kernels.empty()) {
    throw InsufficientPointsError("centroid of an empty cloud");
  }
  Vec3 weighted = Vec3::Zero();
  double total = 0.0;
  for (const IsotropicKernel& k : cloud.kernels) {
    if (!(k.radius > 0.0)) {
      throw InvalidInputError("centroid requires positive radii");
    }
    const double w = k.radius * k.radius * k.radius;
    weighted += w * k.position;
    total += w;
  }
  return weighted / total;
}

/// Max pairwise distance between kernel positions; a practical object scale.
inline double cloud_diameter(const IsotropicCloud& cloud) {
  double d = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (std::size_t j = i + 1; j < cloud.size(); ++j) {
      d = std::max(d, (cloud.kernels[i].position - cloud.kernels[j].position).norm());
    }
  }
  return d;
}

}  // namespace splatrack
