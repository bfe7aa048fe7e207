#include "mia/imgmath.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "mia/error.hpp"

namespace mia {

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::psnr: return "psnr";
    case Metric::rmse: return "rmse";
    case Metric::dssim: return "dssim";
    case Metric::vector_distance: return "vecdist";
  }
  return "?";
}

Metric parse_metric(std::string_view text) {
  if (text == "psnr") return Metric::psnr;
  if (text == "rmse") return Metric::rmse;
  if (text == "dssim") return Metric::dssim;
  if (text == "vecdist" || text == "vector_distance") return Metric::vector_distance;
  throw Error(ErrorCode::ConfigError, "unknown metric '" + std::string(text) + "'");
}

namespace imgmath {

namespace {

void require_same_shape(const ImageBuf& a, const ImageBuf& b) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(a.height()) + "x" + std::to_string(a.width()) + " vs " +
                    std::to_string(b.height()) + "x" + std::to_string(b.width()));
  }
}

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

ImageBuf resize_bilinear(const ImageBuf& image, std::size_t height, std::size_t width) {
  if (image.height() == height && image.width() == width) return image;
  ImageBuf out(height, width);
  const double sy = static_cast<double>(image.height()) / static_cast<double>(height);
  const double sx = static_cast<double>(image.width()) / static_cast<double>(width);
  const double max_y = static_cast<double>(image.height() - 1);
  const double max_x = static_cast<double>(image.width() - 1);
  for (std::size_t r = 0; r < height; ++r) {
    const double fy = std::clamp((static_cast<double>(r) + 0.5) * sy - 0.5, 0.0, max_y);
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, image.height() - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t c = 0; c < width; ++c) {
      const double fx = std::clamp((static_cast<double>(c) + 0.5) * sx - 0.5, 0.0, max_x);
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, image.width() - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < ImageBuf::kChannels; ++ch) {
        const double top = (1.0 - wx) * image.at(y0, x0, ch) + wx * image.at(y0, x1, ch);
        const double bottom = (1.0 - wx) * image.at(y1, x0, ch) + wx * image.at(y1, x1, ch);
        out.at(r, c, ch) = to_u8((1.0 - wy) * top + wy * bottom);
      }
    }
  }
  return out;
}

std::pair<ImageBuf, ImageBuf> resize_to_match(const ImageBuf& a, const ImageBuf& b) {
  if (a.same_shape(b)) return {a, b};
  if (a.area() < b.area()) return {resize_bilinear(a, b.height(), b.width()), b};
  return {a, resize_bilinear(b, a.height(), a.width())};
}

ImageBuf box_blur(const ImageBuf& image, unsigned radius) {
  if (radius == 0) return image;
  const auto h = static_cast<long>(image.height());
  const auto w = static_cast<long>(image.width());
  const long r = radius;
  const double n = static_cast<double>((2 * r + 1) * (2 * r + 1));
  ImageBuf out(image.height(), image.width());
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      std::array<long, ImageBuf::kChannels> sum{};
      for (long dy = -r; dy <= r; ++dy) {
        const auto yy = static_cast<std::size_t>(std::clamp(y + dy, 0L, h - 1));
        for (long dx = -r; dx <= r; ++dx) {
          const auto xx = static_cast<std::size_t>(std::clamp(x + dx, 0L, w - 1));
          for (std::size_t ch = 0; ch < ImageBuf::kChannels; ++ch) sum[ch] += image.at(yy, xx, ch);
        }
      }
      for (std::size_t ch = 0; ch < ImageBuf::kChannels; ++ch) {
        out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), ch) =
            to_u8(static_cast<double>(sum[ch]) / n);
      }
    }
  }
  return out;
}

double mse(const ImageBuf& a, const ImageBuf& b) {
  require_same_shape(a, b);
  const auto pa = a.pixels();
  const auto pb = b.pixels();
  // Integer accumulation is exact; 255^2 * 3HW fits in 64 bits for any sane image.
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const int d = static_cast<int>(pa[i]) - static_cast<int>(pb[i]);
    sum += static_cast<std::uint64_t>(d * d);
  }
  return static_cast<double>(sum) / static_cast<double>(pa.size());
}

double rmse(const ImageBuf& a, const ImageBuf& b) { return std::sqrt(mse(a, b)); }

double psnr(const ImageBuf& a, const ImageBuf& b) {
  return 10.0 * std::log10(255.0 * 255.0 / std::max(mse(a, b), kMseFloor));
}

double dssim(const ImageBuf& a, const ImageBuf& b) {
  require_same_shape(a, b);
  const auto pa = a.pixels();
  const auto pb = b.pixels();
  const std::size_t n = a.area();
  const auto nd = static_cast<double>(n);
  double total = 0.0;
  for (std::size_t ch = 0; ch < ImageBuf::kChannels; ++ch) {
    double mean_a = 0.0, mean_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mean_a += pa[i * 3 + ch];
      mean_b += pb[i * 3 + ch];
    }
    mean_a /= nd;
    mean_b /= nd;
    double var_a = 0.0, var_b = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double da = pa[i * 3 + ch] - mean_a;
      const double db = pb[i * 3 + ch] - mean_b;
      var_a += da * da;
      var_b += db * db;
      cov += da * db;
    }
    var_a /= nd;
    var_b /= nd;
    cov /= nd;
    const double ssim = ((2.0 * mean_a * mean_b + kSsimA) * (2.0 * cov + kSsimB)) /
                        ((mean_a * mean_a + mean_b * mean_b + kSsimA) * (var_a + var_b + kSsimB));
    total += (1.0 - ssim) / 2.0;
  }
  return total / static_cast<double>(ImageBuf::kChannels);
}

}  // namespace imgmath
}  // namespace mia
