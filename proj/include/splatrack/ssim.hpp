#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "splatrack/errors.hpp"
#include "splatrack/image.hpp"

namespace splatrack {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

// The absolute-error term is exact |v| for residuals at or above this bound;
// below it a C^1 cubic (2t^2/d - t^3/d^2) removes the kink at zero. Keeps the
// photometric objective finite-difference clean without changing any residual
// larger than the bound.
inline constexpr double kAbsSmoothingDelta = 1e-2;

namespace detail {

inline double smoothed_abs(double v) {
  const double t = std::abs(v);
  if (t >= kAbsSmoothingDelta) return t;
  const double d = kAbsSmoothingDelta;
  return (2.0 / d - t / (d * d)) * t * t;
}

inline double smoothed_abs_derivative(double v) {
  const double t = std::abs(v);
  if (t >= kAbsSmoothingDelta) return v > 0.0 ? 1.0 : -1.0;
  const double d = kAbsSmoothingDelta;
  const double slope = 4.0 * t / d - 3.0 * t * t / (d * d);
  return v >= 0.0 ? slope : -slope;
}

inline const std::array<double, kSsimWindow>& ssim_window_1d() {
  static const std::array<double, kSsimWindow> window = [] {
    std::array<double, kSsimWindow> w{};
    const int center = kSsimWindow / 2;
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
      w[i] = std::exp(-static_cast<double>((i - center) * (i - center)) /
                      (2.0 * kSsimSigma * kSsimSigma));
      sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
  }();
  return window;
}

/// Separable zero-padded Gaussian blur; `tmp` must have width*height capacity.
inline void gaussian_blur(const double* in, double* out, double* tmp, int width,
                          int height) {
  const auto& w = ssim_window_1d();
  const int half = kSsimWindow / 2;
  for (int y = 0; y < height; ++y) {
    const double* row = in + static_cast<std::size_t>(y) * width;
    double* trow = tmp + static_cast<std::size_t>(y) * width;
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      const int k0 = std::max(-half, -x);
      const int k1 = std::min(half, width - 1 - x);
      for (int k = k0; k <= k1; ++k) acc += w[k + half] * row[x + k];
      trow[x] = acc;
    }
  }
  for (int y = 0; y < height; ++y) {
    const int k0 = std::max(-half, -y);
    const int k1 = std::min(half, height - 1 - y);
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int k = k0; k <= k1; ++k) {
        acc += w[k + half] * tmp[static_cast<std::size_t>(y + k) * width + x];
      }
      out[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
}

}  // namespace detail

/// Scratch buffers and cached target statistics for repeated loss evaluations
/// against one target image. Channel planes are deinterleaved once.
class PhotometricContext {
 public:
  PhotometricContext(const RenderedImage& target, double lambda_dssim)
      : width_(target.width), height_(target.height), lambda_(lambda_dssim) {
    if (lambda_ < 0.0 || lambda_ > 1.0) {
      throw InvalidInputError("lambda_dssim must be in [0, 1]");
    }
    const std::size_t n = plane_size();
    for (int c = 0; c < 3; ++c) {
      target_[c].resize(n);
      mu2_[c].resize(n);
      e22_[c].resize(n);
    }
    std::vector<double> tmp(n), sq(n);
    for (int c = 0; c < 3; ++c) {
      for (std::size_t i = 0; i < n; ++i) target_[c][i] = target.rgb[3 * i + c];
      detail::gaussian_blur(target_[c].data(), mu2_[c].data(), tmp.data(), width_, height_);
      for (std::size_t i = 0; i < n; ++i) sq[i] = target_[c][i] * target_[c][i];
      detail::gaussian_blur(sq.data(), e22_[c].data(), tmp.data(), width_, height_);
    }
    for (auto& b : scratch_) b.resize(n);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  double lambda() const { return lambda_; }

  /// Loss only.
  double loss(const RenderedImage& rendered) { return run(rendered, nullptr); }

  /// Loss plus d(loss)/d(rendered rgb), interleaved like RenderedImage::rgb.
  double loss_with_gradient(const RenderedImage& rendered, std::vector<double>& grad_rgb) {
    grad_rgb.assign(rendered.rgb.size(), 0.0);
    return run(rendered, &grad_rgb);
  }

 private:
  std::size_t plane_size() const {
    return static_cast<std::size_t>(width_) * height_;
  }

  double run(const RenderedImage& rendered, std::vector<double>* grad_rgb) {
    if (rendered.width != width_ || rendered.height != height_) {
      throw InvalidInputError("loss_gs: image dimensions do not match");
    }
    const std::size_t n = plane_size();
    const double inv_count = 1.0 / (3.0 * static_cast<double>(n));

    double l1_sum = 0.0;
    double ssim_sum = 0.0;  // accumulated over channels and pixels

    std::vector<double>& x = scratch_[0];
    std::vector<double>& tmp = scratch_[1];
    std::vector<double>& mu1 = scratch_[2];
    std::vector<double>& e11 = scratch_[3];
    std::vector<double>& e12 = scratch_[4];
    std::vector<double>& p_mu1 = scratch_[5];
    std::vector<double>& p_e11 = scratch_[6];
    std::vector<double>& p_e12 = scratch_[7];
    std::vector<double>& blurred = scratch_[8];

    for (int c = 0; c < 3; ++c) {
      const std::vector<double>& y = target_[c];
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = rendered.rgb[3 * i + c];
        const double diff = x[i] - y[i];
        l1_sum += detail::smoothed_abs(diff);
        if (grad_rgb) {
          (*grad_rgb)[3 * i + c] =
              (1.0 - lambda_) * inv_count * detail::smoothed_abs_derivative(diff);
        }
      }
      if (lambda_ == 0.0) continue;

      detail::gaussian_blur(x.data(), mu1.data(), tmp.data(), width_, height_);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] * x[i];
      detail::gaussian_blur(tmp.data(), e11.data(), scratch_[9].data(), width_, height_);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] * y[i];
      detail::gaussian_blur(tmp.data(), e12.data(), scratch_[9].data(), width_, height_);

      for (std::size_t i = 0; i < n; ++i) {
        const double m1 = mu1[i];
        const double m2 = mu2_[c][i];
        const double s12 = e12[i] - m1 * m2;
        const double a1 = 2.0 * m1 * m2 + kSsimC1;
        const double a2 = 2.0 * s12 + kSsimC2;
        const double b1 = m1 * m1 + m2 * m2 + kSsimC1;
        const double b2 = (e11[i] - m1 * m1) + (e22_[c][i] - m2 * m2) + kSsimC2;
        const double inv_b = 1.0 / (b1 * b2);
        const double s = a1 * a2 * inv_b;
        ssim_sum += s;
        if (grad_rgb) {
          const double ds_da1 = a2 * inv_b;
          const double ds_da2 = a1 * inv_b;
          const double ds_db1 = -s / b1;
          const double ds_db2 = -s / b2;
          p_mu1[i] = 2.0 * m2 * (ds_da1 - ds_da2) + 2.0 * m1 * (ds_db1 - ds_db2);
          p_e11[i] = ds_db2;
          p_e12[i] = 2.0 * ds_da2;
        }
      }
      if (grad_rgb) {
        // d(ssim_sum)/dx = blur(p_mu1) + 2x blur(p_e11) + y blur(p_e12);
        // the window is symmetric, so correlation equals convolution.
        detail::gaussian_blur(p_mu1.data(), blurred.data(), tmp.data(), width_, height_);
        std::swap(p_mu1, blurred);
        detail::gaussian_blur(p_e11.data(), blurred.data(), tmp.data(), width_, height_);
        std::swap(p_e11, blurred);
        detail::gaussian_blur(p_e12.data(), blurred.data(), tmp.data(), width_, height_);
        for (std::size_t i = 0; i < n; ++i) {
          const double dssim_dx = p_mu1[i] + 2.0 * x[i] * p_e11[i] + y[i] * blurred[i];
          // loss carries lambda * (1 - mean ssim)/2
          (*grad_rgb)[3 * i + c] += -0.5 * lambda_ * inv_count * dssim_dx;
        }
      }
    }

    const double mae = l1_sum * inv_count;
    double loss = (1.0 - lambda_) * mae;
    if (lambda_ != 0.0) {
      const double mean_ssim = ssim_sum * inv_count;
      loss += lambda_ * 0.5 * (1.0 - mean_ssim);
    }
    return loss;
  }

  int width_;
  int height_;
  double lambda_;
  std::vector<double> target_[3];
  std::vector<double> mu2_[3];
  std::vector<double> e22_[3];
  std::vector<double> scratch_[10];
};

/// (1-lambda) * MAE + lambda * (1 - SSIM)/2 with an 11x11 Gaussian window
/// (sigma 1.5, zero padding) and the standard stabilization constants,
/// averaged over the three channels. Per-pixel absolute errors use the C^1
/// relaxation above (exact for residuals >= kAbsSmoothingDelta).
inline double loss_gs(const RenderedImage& rendered, const RenderedImage& target,
                      double lambda_dssim) {
  if (!rendered.same_size(target)) {
    throw InvalidInputError("loss_gs: image dimensions do not match");
  }
  PhotometricContext ctx(target, lambda_dssim);
  return ctx.loss(rendered);
}

}  // namespace splatrack
