#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "splatrack/camera.hpp"
#include "splatrack/gaussian_cloud.hpp"
#include "splatrack/image.hpp"
#include "splatrack/se3.hpp"
#include "splatrack/ssim.hpp"

namespace splatrack {

// Footprint profile: a 2D isotropic Gaussian with pixel-space std
// r_px = focal * R / depth and peak weight equal to the kernel opacity,
// truncated at 3 * r_px. In squared-sigma units u = d^2 / r^2 the profile is
// exactly exp(-u/2) up to 2.5 sigma; over [2.5^2, 3^2] a quintic Hermite
// tail matches the Gaussian's value, slope and curvature and reaches zero
// with zero slope and curvature at the cut. That keeps the rendered image
// C^2 in the kernel parameters through the truncation circle, which the
// finite-difference checks of the pose gradients rely on.
inline constexpr double kFootprintCut = 3.0;
inline constexpr double kFootprintCut2 = kFootprintCut * kFootprintCut;
inline constexpr double kFootprintBlendStart = 2.5 * 2.5;  // u where the tail begins

namespace detail {

struct ProfileEval {
  double value;       // q(u)
  double derivative;  // dq/du
};

inline ProfileEval footprint_profile(double u) {
  if (u >= kFootprintCut2) return {0.0, 0.0};
  if (u <= kFootprintBlendStart) {
    const double g = std::exp(-0.5 * u);
    return {g, -0.5 * g};
  }
  static const double kBlendValue = std::exp(-0.5 * kFootprintBlendStart);
  static const double kBlendLength = kFootprintCut2 - kFootprintBlendStart;
  const double t = (u - kFootprintBlendStart) / kBlendLength;
  // quintic Hermite basis for (value, slope, curvature) at t = 0; the t = 1
  // end conditions are all zero, so those basis functions drop out
  const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
  const double h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
  const double h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
  const double h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
  const double d_h0 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
  const double d_h1 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
  const double d_h2 = 0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4);
  // Gaussian derivatives at the blend start in t units: -v L / 2, +v L^2 / 4
  const double s1 = -0.5 * kBlendLength;
  const double s2 = 0.25 * kBlendLength * kBlendLength;
  const double value = kBlendValue * (h0 + s1 * h1 + s2 * h2);
  const double dvalue_dt = kBlendValue * (d_h0 + s1 * d_h1 + s2 * d_h2);
  return {value, dvalue_dt / kBlendLength};
}

}  // namespace detail

/// Splat weight at squared pixel distance d2 from the center.
inline double footprint_weight(double opacity, double d2, double r_px_sq) {
  return opacity * detail::footprint_profile(d2 / r_px_sq).value;
}

/// One projected kernel, cached for the backward pass.
struct Splat {
  int kernel = 0;    // index into the cloud
  Vec2 center;       // pixel coordinates
  double depth = 0;  // camera-frame z
  double r_px = 0;   // pixel-space std
};

/// Forward-render byproducts reused by the backward pass: the visible splats
/// in depth order plus, per pixel, the covering splats in the same order.
struct RenderCache {
  std::vector<Splat> splats;
  std::vector<int> offsets;  // width*height + 1 CSR offsets
  std::vector<int> entries;  // splat indices per pixel, front-to-back
};

/// d(loss)/d(world position) and d(loss)/d(world radius) for one kernel.
struct KernelGrad {
  Vec3 d_position = Vec3::Zero();
  double d_radius = 0.0;
};

namespace detail {

struct FootprintBox {
  int x0, x1, y0, y1;
  bool empty;
};

inline FootprintBox footprint_box(const Splat& s, int width, int height) {
  const double reach = kFootprintCut * s.r_px;
  FootprintBox box;
  box.x0 = std::max(0, static_cast<int>(std::ceil(s.center.x() - reach)));
  box.x1 = std::min(width - 1, static_cast<int>(std::floor(s.center.x() + reach)));
  box.y0 = std::max(0, static_cast<int>(std::ceil(s.center.y() - reach)));
  box.y1 = std::min(height - 1, static_cast<int>(std::floor(s.center.y() + reach)));
  box.empty = box.x0 > box.x1 || box.y0 > box.y1;
  return box;
}

inline std::vector<Splat> project_splats(const IsotropicCloud& cloud, const Camera& cam) {
  std::vector<Splat> splats;
  splats.reserve(cloud.size());
  const Mat3 r_cam = cam.extrinsic.rotation.toRotationMatrix();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const IsotropicKernel& k = cloud.kernels[i];
    const Vec3 p_c = r_cam * k.position + cam.extrinsic.translation;
    if (p_c.z() <= kMinDepth) continue;  // behind the camera: skipped, not an error
    Splat s;
    s.kernel = static_cast<int>(i);
    s.depth = p_c.z();
    s.center = cam.focal * Vec2(p_c.x() / p_c.z(), p_c.y() / p_c.z()) +
               cam.principal_point;
    s.r_px = cam.focal * k.radius / p_c.z();
    splats.push_back(s);
  }
  // ascending depth; ties broken by kernel index for determinism
  std::sort(splats.begin(), splats.end(), [](const Splat& a, const Splat& b) {
    return a.depth != b.depth ? a.depth < b.depth : a.kernel < b.kernel;
  });
  return splats;
}

inline void build_pixel_lists(const std::vector<Splat>& splats, int width, int height,
                              RenderCache& cache) {
  const std::size_t n_px = static_cast<std::size_t>(width) * height;
  cache.offsets.assign(n_px + 1, 0);
  for (const Splat& s : splats) {
    const FootprintBox box = footprint_box(s, width, height);
    if (box.empty) continue;
    const double rr = kFootprintCut * kFootprintCut * s.r_px * s.r_px;
    for (int y = box.y0; y <= box.y1; ++y) {
      const double dy = y - s.center.y();
      for (int x = box.x0; x <= box.x1; ++x) {
        const double dx = x - s.center.x();
        if (dx * dx + dy * dy <= rr) {
          ++cache.offsets[static_cast<std::size_t>(y) * width + x + 1];
        }
      }
    }
  }
  for (std::size_t i = 1; i <= n_px; ++i) cache.offsets[i] += cache.offsets[i - 1];
  cache.entries.assign(cache.offsets[n_px], 0);
  std::vector<int> cursor(cache.offsets.begin(), cache.offsets.end() - 1);
  for (std::size_t si = 0; si < splats.size(); ++si) {
    const Splat& s = splats[si];
    const FootprintBox box = footprint_box(s, width, height);
    if (box.empty) continue;
    const double rr = kFootprintCut * kFootprintCut * s.r_px * s.r_px;
    for (int y = box.y0; y <= box.y1; ++y) {
      const double dy = y - s.center.y();
      for (int x = box.x0; x <= box.x1; ++x) {
        const double dx = x - s.center.x();
        if (dx * dx + dy * dy <= rr) {
          cache.entries[cursor[static_cast<std::size_t>(y) * width + x]++] =
              static_cast<int>(si);
        }
      }
    }
  }
}

inline double splat_weight(const Splat& s, double dx, double dy, double opacity) {
  const double d2 = dx * dx + dy * dy;
  return opacity * footprint_profile(d2 / (s.r_px * s.r_px)).value;
}

}  // namespace detail

/// Depth-sorted front-to-back alpha compositing of isotropic splats over a
/// black, alpha-zero background. An empty visible set yields a blank image.
inline RenderedImage splat_render(const IsotropicCloud& cloud, const Camera& cam,
                                  RenderCache* cache_out = nullptr) {
  RenderedImage image(cam.width, cam.height);
  RenderCache local;
  RenderCache& cache = cache_out ? *cache_out : local;
  cache.splats = detail::project_splats(cloud, cam);
  detail::build_pixel_lists(cache.splats, cam.width, cam.height, cache);

  const std::size_t n_px = static_cast<std::size_t>(cam.width) * cam.height;
  for (std::size_t px = 0; px < n_px; ++px) {
    const int begin = cache.offsets[px];
    const int end = cache.offsets[px + 1];
    if (begin == end) continue;
    const double x = static_cast<double>(px % cam.width);
    const double y = static_cast<double>(px / cam.width);
    double t = 1.0;
    double c0 = 0.0, c1 = 0.0, c2 = 0.0;
    for (int e = begin; e < end; ++e) {
      const Splat& s = cache.splats[cache.entries[e]];
      const IsotropicKernel& k = cloud.kernels[s.kernel];
      const double w =
          detail::splat_weight(s, x - s.center.x(), y - s.center.y(), k.opacity);
      const double tw = t * w;
      c0 += tw * k.color(0);
      c1 += tw * k.color(1);
      c2 += tw * k.color(2);
      t *= 1.0 - w;
    }
    image.rgb[3 * px + 0] = c0;
    image.rgb[3 * px + 1] = c1;
    image.rgb[3 * px + 2] = c2;
    image.alpha[px] = 1.0 - t;
  }
  return image;
}

/// Backward pass: pushes d(loss)/d(rendered rgb) through the compositing and
/// projection, producing per-kernel gradients w.r.t. world position and
/// world radius. `grad_rgb` is interleaved like RenderedImage::rgb.
inline std::vector<KernelGrad> splat_render_backward(const IsotropicCloud& cloud,
                                                     const Camera& cam,
                                                     const RenderCache& cache,
                                                     const std::vector<double>& grad_rgb) {
  std::vector<KernelGrad> grads(cloud.size());
  std::vector<Vec2> d_center(cache.splats.size(), Vec2::Zero());
  std::vector<double> d_rpx(cache.splats.size(), 0.0);

  const std::size_t n_px = static_cast<std::size_t>(cam.width) * cam.height;
  std::vector<double> weights;
  std::vector<Vec3> suffix;  // composite of splats i.. with unit transmittance
  for (std::size_t px = 0; px < n_px; ++px) {
    const int begin = cache.offsets[px];
    const int end = cache.offsets[px + 1];
    if (begin == end) continue;
    const int count = end - begin;
    const double x = static_cast<double>(px % cam.width);
    const double y = static_cast<double>(px / cam.width);
    const Vec3 gpix(grad_rgb[3 * px + 0], grad_rgb[3 * px + 1], grad_rgb[3 * px + 2]);
    if (gpix.isZero(0.0)) continue;

    weights.resize(count);
    suffix.assign(count + 1, Vec3::Zero());
    for (int i = 0; i < count; ++i) {
      const Splat& s = cache.splats[cache.entries[begin + i]];
      weights[i] = detail::splat_weight(s, x - s.center.x(), y - s.center.y(),
                                        cloud.kernels[s.kernel].opacity);
    }
    for (int i = count - 1; i >= 0; --i) {
      const Splat& s = cache.splats[cache.entries[begin + i]];
      suffix[i] = weights[i] * cloud.kernels[s.kernel].color +
                  (1.0 - weights[i]) * suffix[i + 1];
    }
    double t = 1.0;
    for (int i = 0; i < count; ++i) {
      const int si = cache.entries[begin + i];
      const Splat& s = cache.splats[si];
      const IsotropicKernel& k = cloud.kernels[s.kernel];
      // dC/dw_i = T_i (c_i - composite_behind_i)
      const double dl_dw = gpix.dot(t * (k.color - suffix[i + 1]));
      const double dx = x - s.center.x();
      const double dy = y - s.center.y();
      const double d2 = dx * dx + dy * dy;
      const double r2 = s.r_px * s.r_px;
      // w = opacity * q(u) with u = d^2 / r^2, d = pixel - center:
      // du/d(center) = -2 (dx, dy)/r^2 and du/dr = -2 d^2 / r^3.
      const double dw_du = k.opacity * detail::footprint_profile(d2 / r2).derivative;
      d_center[si].x() += dl_dw * dw_du * (-2.0 * dx / r2);
      d_center[si].y() += dl_dw * dw_du * (-2.0 * dy / r2);
      d_rpx[si] += dl_dw * dw_du * (-2.0 * d2 / (r2 * s.r_px));
      t *= 1.0 - weights[i];
    }
  }

  // chain pixel-space gradients through the pinhole projection
  const Mat3 r_cam = cam.extrinsic.rotation.toRotationMatrix();
  for (std::size_t si = 0; si < cache.splats.size(); ++si) {
    const Splat& s = cache.splats[si];
    if (d_center[si].isZero(0.0) && d_rpx[si] == 0.0) continue;
    const IsotropicKernel& k = cloud.kernels[s.kernel];
    const Vec3 p_c = r_cam * k.position + cam.extrinsic.translation;
    const double z = p_c.z();
    Vec3 d_pc;
    d_pc.x() = d_center[si].x() * cam.focal / z;
    d_pc.y() = d_center[si].y() * cam.focal / z;
    d_pc.z() = -(d_center[si].x() * cam.focal * p_c.x() +
                 d_center[si].y() * cam.focal * p_c.y() +
                 d_rpx[si] * cam.focal * k.radius) /
               (z * z);
    grads[s.kernel].d_position += r_cam.transpose() * d_pc;
    grads[s.kernel].d_radius += d_rpx[si] * cam.focal / z;
  }
  return grads;
}

/// Gradient of loss_gs(splat_render(apply_pose(pose, cloud)), target) w.r.t.
/// the raw 7-vector pose parameters (qw qx qy qz tx ty tz). The quaternion is
/// normalized internally, and the returned gradient includes the
/// normalization Jacobian, so it matches finite differences on the raw
/// parameters. Returns the loss; writes the gradient.
inline double pose_loss_and_gradient(const PoseParams& params, const IsotropicCloud& cloud,
                                     const Camera& cam, PhotometricContext& ctx,
                                     PoseParams& grad_out) {
  const Pose pose = params_to_pose(params);
  const IsotropicCloud posed = apply_pose(pose, cloud);
  RenderCache cache;
  const RenderedImage rendered = splat_render(posed, cam, &cache);
  std::vector<double> grad_rgb;
  const double loss = ctx.loss_with_gradient(rendered, grad_rgb);
  const std::vector<KernelGrad> kgrads =
      splat_render_backward(posed, cam, cache, grad_rgb);

  Eigen::Vector4d d_qhat = Eigen::Vector4d::Zero();
  Vec3 d_t = Vec3::Zero();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& g = kgrads[i].d_position;
    if (g.isZero(0.0)) continue;
    d_t += g;
    d_qhat += rotate_jacobian_quat(pose.rotation, cloud.kernels[i].position).transpose() * g;
  }
  const Quat q_raw(params[0], params[1], params[2], params[3]);
  const Eigen::Vector4d d_qraw = normalize_jacobian_quat(q_raw).transpose() * d_qhat;
  grad_out = {d_qraw(0), d_qraw(1), d_qraw(2), d_qraw(3), d_t.x(), d_t.y(), d_t.z()};
  return loss;
}

/// Analytic gradient of the photometric loss w.r.t. the 7 pose parameters.
/// Errors if any component is non-finite.
inline PoseParams pose_photometric_gradient(const Pose& pose, const IsotropicCloud& cloud,
                                            const Camera& cam, const RenderedImage& target,
                                            double lambda_dssim) {
  detail::require_unit(pose.rotation, "pose_photometric_gradient");
  PhotometricContext ctx(target, lambda_dssim);
  PoseParams grad{};
  pose_loss_and_gradient(pose_to_params(pose), cloud, cam, ctx, grad);
  for (double g : grad) {
    if (!std::isfinite(g)) {
      throw NumericalFailureError("pose_photometric_gradient: non-finite gradient");
    }
  }
  return grad;
}

}  // namespace splatrack
