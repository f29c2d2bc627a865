#pragma once

// Independent oracles for the test suites. Everything here is implemented
// from first principles, separate from the library code paths it checks:
// characteristic-polynomial eigenvalues, brute-force prune predicates,
// direct windowed SSIM, batch weighted-least-squares filtering, and central
// finite differences.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "splatrack/gaussian_cloud.hpp"
#include "splatrack/image.hpp"
#include "splatrack/kalman.hpp"
#include "splatrack/rng.hpp"

namespace oracles {

using splatrack::GaussianCloud;
using splatrack::GaussianKernel;
using splatrack::IsotropicCloud;
using splatrack::IsotropicKernel;
using splatrack::Mat3;
using splatrack::RenderedImage;
using splatrack::Rng;
using splatrack::Vec3;

// ---------------------------------------------------------------------------
// Symmetric 3x3 eigenvalues via the trigonometric solution of the
// characteristic polynomial (independent of Eigen's solver).
// ---------------------------------------------------------------------------

inline std::array<double, 3> symmetric_eigenvalues(const Mat3& a_in) {
  const Mat3 a = 0.5 * (a_in + a_in.transpose());
  const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
  if (p1 == 0.0) {
    std::array<double, 3> eig = {a(0, 0), a(1, 1), a(2, 2)};
    std::sort(eig.begin(), eig.end());
    return eig;
  }
  const double q = a.trace() / 3.0;
  const double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) +
                    (a(2, 2) - q) * (a(2, 2) - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  const Mat3 b = (a - q * Mat3::Identity()) / p;
  double r = b.determinant() / 2.0;
  r = std::clamp(r, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double e1 = q + 2.0 * p * std::cos(phi);
  const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
  const double e2 = 3.0 * q - e1 - e3;
  std::array<double, 3> eig = {e3, e2, e1};
  std::sort(eig.begin(), eig.end());
  return eig;
}

inline double max_eigenvalue(const Mat3& a) { return symmetric_eigenvalues(a)[2]; }

// ---------------------------------------------------------------------------
// Brute-force evaluation of the two density-control predicates.
// ---------------------------------------------------------------------------

inline std::vector<bool> prune_keep_flags(const GaussianCloud& cloud, double tau_l,
                                          double tau_d) {
  const std::size_t n = cloud.size();
  double d_avg = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    for (std::size_t k = 0; k < n; ++k) {
      d_avg += (cloud.kernels[m].position - cloud.kernels[k].position).norm();
    }
  }
  d_avg /= static_cast<double>(n) * static_cast<double>(n);

  std::vector<bool> keep(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const bool axial_ok = max_eigenvalue(cloud.kernels[i].covariance) <= tau_l;
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      nearest = std::min(nearest,
                         (cloud.kernels[i].position - cloud.kernels[j].position).norm());
    }
    keep[i] = axial_ok && nearest <= tau_d * d_avg;
  }
  return keep;
}

// ---------------------------------------------------------------------------
// Reference SSIM: direct 11x11 windowed loops with zero padding, averaged
// over pixels and channels. Matches the standard formulation with
// C1 = 0.01^2, C2 = 0.03^2 and a sigma-1.5 Gaussian window.
// ---------------------------------------------------------------------------

inline double reference_ssim(const RenderedImage& img1, const RenderedImage& img2) {
  constexpr int window = 11;
  constexpr int half = window / 2;
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  double weights[window][window];
  double wsum = 0.0;
  for (int i = 0; i < window; ++i) {
    for (int j = 0; j < window; ++j) {
      const double d2 = (i - half) * (i - half) + (j - half) * (j - half);
      weights[i][j] = std::exp(-d2 / (2.0 * 1.5 * 1.5));
      wsum += weights[i][j];
    }
  }
  for (int i = 0; i < window; ++i)
    for (int j = 0; j < window; ++j) weights[i][j] /= wsum;

  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < img1.height; ++y) {
      for (int x = 0; x < img1.width; ++x) {
        double mu1 = 0, mu2 = 0, e11 = 0, e22 = 0, e12 = 0;
        for (int dy = -half; dy <= half; ++dy) {
          for (int dx = -half; dx <= half; ++dx) {
            const int sx = x + dx, sy = y + dy;
            if (sx < 0 || sx >= img1.width || sy < 0 || sy >= img1.height) continue;
            const double w = weights[dy + half][dx + half];
            const double v1 = img1.rgb_at(sx, sy)[c];
            const double v2 = img2.rgb_at(sx, sy)[c];
            mu1 += w * v1;
            mu2 += w * v2;
            e11 += w * v1 * v1;
            e22 += w * v2 * v2;
            e12 += w * v1 * v2;
          }
        }
        const double s1 = e11 - mu1 * mu1;
        const double s2 = e22 - mu2 * mu2;
        const double s12 = e12 - mu1 * mu2;
        const double num = (2 * mu1 * mu2 + c1) * (2 * s12 + c2);
        const double den = (mu1 * mu1 + mu2 * mu2 + c1) * (s1 + s2 + c2);
        total += num / den;
      }
    }
  }
  return total / (3.0 * img1.width * img1.height);
}

// ---------------------------------------------------------------------------
// Batch weighted-least-squares trajectory estimate for the linear-Gaussian
// model; the smoothed final state equals the filter's posterior exactly.
// ---------------------------------------------------------------------------

struct BatchStep {
  double a = 0.0;       // control input into this transition
  double z_flow = 0.0;  // observations at the resulting state
  double z_learn = 0.0;
};

inline Eigen::Vector2d batch_wls_final_state(const Eigen::Vector2d& x0,
                                             const Eigen::Matrix2d& p0,
                                             const std::vector<BatchStep>& steps,
                                             double dt, const splatrack::NoiseConfig& noise) {
  const int t = static_cast<int>(steps.size());
  const int n = 2 * (t + 1);
  const int rows = 2 + 2 * t + 2 * t;  // prior + process + observations
  Eigen::MatrixXd a_mat = Eigen::MatrixXd::Zero(rows, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);

  Eigen::Matrix2d f;
  f << 1, dt, 0, 1;
  const Eigen::Vector2d bu(0.5 * dt * dt, dt);
  const Eigen::Matrix2d h = (Eigen::Matrix2d() << 1, 0, 1, 0).finished();

  const Eigen::Matrix2d p0_half = Eigen::LLT<Eigen::Matrix2d>(p0.inverse()).matrixL().transpose();
  Eigen::Matrix2d q_inv = Eigen::Matrix2d::Zero();
  q_inv(0, 0) = 1.0 / noise.sigma_ds_sq;
  q_inv(1, 1) = 1.0 / noise.sigma_v_sq;
  const Eigen::Matrix2d q_half = Eigen::LLT<Eigen::Matrix2d>(q_inv).matrixL().transpose();
  Eigen::Matrix2d r_inv = Eigen::Matrix2d::Zero();
  r_inv(0, 0) = 1.0 / noise.sigma_flow_sq;
  r_inv(1, 1) = 1.0 / noise.sigma_learn_sq;
  const Eigen::Matrix2d r_half = Eigen::LLT<Eigen::Matrix2d>(r_inv).matrixL().transpose();

  int row = 0;
  a_mat.block<2, 2>(row, 0) = p0_half;
  b.segment<2>(row) = p0_half * x0;
  row += 2;
  for (int k = 0; k < t; ++k) {
    // x_{k+1} - F x_k = B a_k
    a_mat.block<2, 2>(row, 2 * k) = -q_half * f;
    a_mat.block<2, 2>(row, 2 * (k + 1)) = q_half;
    b.segment<2>(row) = q_half * (bu * steps[k].a);
    row += 2;
  }
  for (int k = 0; k < t; ++k) {
    a_mat.block<2, 2>(row, 2 * (k + 1)) = r_half * h;
    b.segment<2>(row) = r_half * Eigen::Vector2d(steps[k].z_flow, steps[k].z_learn);
    row += 2;
  }
  const Eigen::VectorXd solution = a_mat.colPivHouseholderQr().solve(b);
  return solution.segment<2>(2 * t);
}

// ---------------------------------------------------------------------------
// Central finite differences.
// ---------------------------------------------------------------------------

inline double central_difference(const std::function<double(double)>& f, double x,
                                 double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// ---------------------------------------------------------------------------
// Randomized builders.
// ---------------------------------------------------------------------------

inline Mat3 random_spd(Rng& rng, double scale = 1.0) {
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = rng.uniform(-1.0, 1.0);
  return scale * (m * m.transpose()) + 0.05 * scale * Mat3::Identity();
}

inline GaussianCloud random_cloud(Rng& rng, int n, double extent = 1.0) {
  GaussianCloud cloud;
  for (int i = 0; i < n; ++i) {
    GaussianKernel k;
    k.position = Vec3(rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                      rng.uniform(-extent, extent));
    k.covariance = random_spd(rng, 0.05);
    k.color = Vec3(rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0));
    k.opacity = rng.uniform(0.2, 1.0);
    cloud.kernels.push_back(k);
  }
  return cloud;
}

inline IsotropicCloud random_iso_cloud(Rng& rng, int n, double extent = 0.5,
                                       double radius_lo = 0.05, double radius_hi = 0.15) {
  IsotropicCloud cloud;
  for (int i = 0; i < n; ++i) {
    IsotropicKernel k;
    k.position = Vec3(rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                      rng.uniform(-extent, extent));
    k.radius = rng.uniform(radius_lo, radius_hi);
    k.color = Vec3(rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0));
    k.opacity = rng.uniform(0.3, 0.95);
    cloud.kernels.push_back(k);
  }
  return cloud;
}

inline RenderedImage random_image(Rng& rng, int width, int height) {
  RenderedImage img(width, height);
  for (double& v : img.rgb) v = rng.uniform();
  for (double& v : img.alpha) v = rng.uniform();
  return img;
}

}  // namespace oracles
