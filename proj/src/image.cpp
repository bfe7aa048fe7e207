#include "mia/image.hpp"

#include <png.h>

#include <cstring>

#include "mia/error.hpp"
#include "mia/util.hpp"

namespace mia {

ImageBuf::ImageBuf(std::size_t height, std::size_t width, std::uint8_t fill)
    : height_(height), width_(width), pixels_(height * width * kChannels, fill) {
  if (height == 0 || width == 0) {
    throw Error(ErrorCode::ShapeError, "image dimensions must be positive");
  }
}

ImageBuf::ImageBuf(std::size_t height, std::size_t width, std::vector<std::uint8_t> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
  if (height == 0 || width == 0) {
    throw Error(ErrorCode::ShapeError, "image dimensions must be positive");
  }
  if (pixels_.size() != height * width * kChannels) {
    throw Error(ErrorCode::ShapeError,
                "pixel buffer holds " + std::to_string(pixels_.size()) + " values, expected " +
                    std::to_string(height * width * kChannels));
  }
}

ImageBuf decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::ShapeError, "not a decodable PNG: " + msg);
  }
  // Read as RGBA so alpha is dropped rather than composited.
  image.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgba.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::ShapeError, "PNG decode failed: " + msg);
  }
  const std::size_t h = image.height;
  const std::size_t w = image.width;
  std::vector<std::uint8_t> rgb(h * w * 3);
  for (std::size_t i = 0; i < h * w; ++i) {
    rgb[i * 3 + 0] = rgba[i * 4 + 0];
    rgb[i * 3 + 1] = rgba[i * 4 + 1];
    rgb[i * 3 + 2] = rgba[i * 4 + 2];
  }
  return ImageBuf(h, w, std::move(rgb));
}

std::vector<std::uint8_t> encode_png(const ImageBuf& img) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  const auto* data = img.pixels().data();
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, data, 0, nullptr)) {
    throw Error(ErrorCode::IoError, std::string("PNG encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, data, 0, nullptr)) {
    throw Error(ErrorCode::IoError, std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

ImageBuf read_png(const std::filesystem::path& path) {
  return decode_png(read_binary(path));
}

void write_png(const std::filesystem::path& path, const ImageBuf& image) {
  auto bytes = encode_png(image);
  write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace mia
