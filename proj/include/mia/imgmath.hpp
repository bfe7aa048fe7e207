#pragma once

#include <string_view>
#include <utility>

#include "mia/image.hpp"

namespace mia {

enum class Metric { psnr, rmse, dssim, vector_distance };

std::string_view to_string(Metric metric);  // "psnr", "rmse", "dssim", "vecdist"
Metric parse_metric(std::string_view text);  // throws ConfigError

struct MetricKind {
  Metric kind = Metric::rmse;
  // Unit-radius box blur applied to both images before comparing.
  bool smooth = false;

  friend bool operator==(const MetricKind&, const MetricKind&) = default;
};

namespace imgmath {

// SSIM stabilizers (K1 L)^2 and (K2 L)^2 with K1 = 0.01, K2 = 0.03, L = 255.
inline constexpr double kSsimA = (0.01 * 255.0) * (0.01 * 255.0);
inline constexpr double kSsimB = (0.03 * 255.0) * (0.03 * 255.0);
// MSE floor; caps PSNR of identical images at 10 log10(65025 / 1e-10).
inline constexpr double kMseFloor = 1e-10;

// Bilinear resampling to the requested size (pixel-center aligned, edge clamped).
ImageBuf resize_bilinear(const ImageBuf& image, std::size_t height, std::size_t width);

// Upscales the image with the smaller area to the other's size. Equal sizes
// return both unchanged.
std::pair<ImageBuf, ImageBuf> resize_to_match(const ImageBuf& a, const ImageBuf& b);

// Rounded mean over the (2r+1)^2 window per channel, edge-replicate padding.
ImageBuf box_blur(const ImageBuf& image, unsigned radius);

// The pixel metrics below require equal dimensions and throw
// DimensionMismatch otherwise.
double mse(const ImageBuf& a, const ImageBuf& b);
double rmse(const ImageBuf& a, const ImageBuf& b);
double psnr(const ImageBuf& a, const ImageBuf& b);
// Global-statistics SSIM per channel; DSSIM_c = (1 - SSIM_c) / 2, averaged.
double dssim(const ImageBuf& a, const ImageBuf& b);

}  // namespace imgmath
}  // namespace mia
