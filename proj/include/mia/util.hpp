#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mia {

class ImageBuf;

// Hex SHA-256 of arbitrary bytes.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

// First 8 bytes of SHA-256, big-endian. Used to derive seeds from strings and
// image contents so that they are stable across platforms and runs.
std::uint64_t digest64(std::string_view text);
std::uint64_t digest64(const ImageBuf& image);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string read_file(const std::filesystem::path& path);
std::vector<std::uint8_t> read_binary(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Seeded generator used everywhere randomness is needed. The engine output is
/// fixed by the standard; range reduction is done here rather than through
/// <random> distributions, whose results differ between library vendors.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, bound); bound > 0. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t bound);
  // Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  // Standard normal via Box-Muller.
  double normal();
  bool coin() { return (next() >> 63) != 0; }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Combines seeds order-dependently (splitmix64 finalizer over the mix).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// printf-style "%.17g"; shortest form that round-trips a double.
std::string format_double(double value);
// Fixed precision for human-facing tables.
std::string format_fixed(double value, int digits);

}  // namespace mia
