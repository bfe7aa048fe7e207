#pragma once

#include <cstddef>
#include <mutex>
#include <string>
#include <vector>

#include "mia/image.hpp"

namespace mia {

struct FeatureEmbedding {
  std::vector<double> values;
  std::string extractor_id;

  std::size_t dim() const noexcept { return values.size(); }
};

// Throws DimensionMismatch when the dimensions differ.
double euclid(const FeatureEmbedding& a, const FeatureEmbedding& b);

class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual FeatureEmbedding extract(const ImageBuf& image) = 0;
  virtual std::size_t dim() const = 0;
  virtual std::string id() const = 0;
};

/// Dependency-free 512-d descriptor: 8x8 grid of per-channel means (192),
/// per-channel 16-bin histograms (48), per-cell luminance std (64), zero
/// padded. Computed on a 64x64 bilinear resample, every value in [0, 1].
class BuiltinExtractor final : public FeatureExtractor {
 public:
  static constexpr std::size_t kDim = 512;
  static constexpr std::size_t kSide = 64;
  static constexpr std::size_t kGrid = 8;
  static constexpr std::size_t kBins = 16;

  FeatureEmbedding extract(const ImageBuf& image) override;
  std::size_t dim() const override { return kDim; }
  std::string id() const override { return "builtin-grid-v1"; }
};

FeatureEmbedding extract_builtin(const ImageBuf& image);

/// Child process speaking line-delimited JSON on stdin/stdout:
///   {"op":"hello"}               -> {"ok":true,"dim":2048,"extractor_id":"..."}
///   {"op":"embed","png_b64":"…"} -> {"ok":true,"values":[...]}
///   failures                     -> {"ok":false,"error":"..."}
/// The handshake runs in the constructor. Requests are serialized per handle.
class SidecarExtractor final : public FeatureExtractor {
 public:
  static constexpr std::size_t kExpectedDim = 2048;

  explicit SidecarExtractor(std::vector<std::string> command, std::size_t expected_dim = kExpectedDim);
  ~SidecarExtractor() override;

  SidecarExtractor(const SidecarExtractor&) = delete;
  SidecarExtractor& operator=(const SidecarExtractor&) = delete;

  FeatureEmbedding extract(const ImageBuf& image) override;
  std::size_t dim() const override { return dim_; }
  std::string id() const override { return extractor_id_; }

 private:
  std::string roundtrip(const std::string& request_line);
  void shutdown();

  std::vector<std::string> command_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string read_buffer_;
  std::size_t dim_ = 0;
  std::string extractor_id_;
  std::mutex mutex_;
};

FeatureEmbedding extract_external(SidecarExtractor& sidecar, const ImageBuf& image);

}  // namespace mia
