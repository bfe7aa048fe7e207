#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace mia {

/// Interleaved 8-bit RGB image, row-major, H x W x 3.
class ImageBuf {
 public:
  static constexpr std::size_t kChannels = 3;

  ImageBuf() = default;
  ImageBuf(std::size_t height, std::size_t width, std::uint8_t fill = 0);
  ImageBuf(std::size_t height, std::size_t width, std::vector<std::uint8_t> pixels);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t area() const noexcept { return height_ * width_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  std::uint8_t at(std::size_t row, std::size_t col, std::size_t ch) const {
    return pixels_[(row * width_ + col) * kChannels + ch];
  }
  std::uint8_t& at(std::size_t row, std::size_t col, std::size_t ch) {
    return pixels_[(row * width_ + col) * kChannels + ch];
  }

  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<std::uint8_t> pixels() noexcept { return pixels_; }

  bool same_shape(const ImageBuf& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const ImageBuf&, const ImageBuf&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> pixels_;
};

// PNG codec. Decoding always yields 8-bit RGB: alpha is dropped, gray and
// palette images are expanded, 16-bit samples are stripped.
ImageBuf decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const ImageBuf& image);

ImageBuf read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImageBuf& image);

}  // namespace mia
