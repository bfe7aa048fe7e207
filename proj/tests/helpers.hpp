#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "mia/image.hpp"
#include "mia/util.hpp"

namespace testutil {

inline mia::ImageBuf random_image(mia::Rng& rng, std::size_t h, std::size_t w) {
  std::vector<std::uint8_t> px(h * w * 3);
  for (auto& p : px) p = static_cast<std::uint8_t>(rng.below(256));
  return mia::ImageBuf(h, w, std::move(px));
}

inline mia::ImageBuf pixel(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return mia::ImageBuf(1, 1, std::vector<std::uint8_t>{r, g, b});
}

// Fresh directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "mia-test-XXXXXX").string();
    path_ = ::mkdtemp(tmpl.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil

namespace testutil {

// Two classes split by the line x + 0.5 y = 0, with a margin of 0.1.
struct Task {
  std::vector<std::vector<double>> x;
  std::vector<bool> y;
};

inline Task separable_2d(std::uint64_t seed, std::size_t n) {
  mia::Rng rng(seed);
  Task t;
  while (t.x.size() < n) {
    const double a = rng.uniform() * 2 - 1, b = rng.uniform() * 2 - 1;
    const double side = a + 0.5 * b;
    if (std::abs(side) < 0.1) continue;
    t.x.push_back({a, b});
    t.y.push_back(side > 0);
  }
  return t;
}

}  // namespace testutil
