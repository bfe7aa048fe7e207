#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "mia/dataset.hpp"
#include "mia/image.hpp"

namespace mia {

enum class ThreatModel { black_box, gray_box };

std::string_view to_string(ThreatModel threat);  // "black_box" / "gray_box"
ThreatModel parse_threat(std::string_view text);  // also accepts "black" / "gray"

struct DiffusionParams {
  unsigned steps = 8;
  double guidance = 7.5;
  double strength = 0.75;
  std::uint64_t seed = 0;

  // Throws InvalidParams unless steps >= 1 and 0 <= strength <= 1.
  void validate() const;
  // Stable short digest of the canonical parameter string.
  std::string digest() const;

  friend bool operator==(const DiffusionParams&, const DiffusionParams&) = default;
};

/// Frames ordered t = 1..T; the last frame is the final output.
/// Black-box traces hold exactly one frame, gray-box traces exactly T.
struct DiffusionTrace {
  std::vector<ImageBuf> frames;
  DiffusionParams params;
  ThreatModel threat = ThreatModel::gray_box;

  const ImageBuf& final_frame() const { return frames.back(); }
  // Gray-box -> black-box keeps only the final frame. Requesting gray-box
  // from a black-box trace throws ThreatDowngrade.
  DiffusionTrace masked(ThreatModel target) const;
  // Throws ShapeError when the frame count contradicts the threat model.
  void validate() const;
};

class VictimOracle {
 public:
  virtual ~VictimOracle() = default;
  virtual DiffusionTrace query(const Sample& sample, const DiffusionParams& params, ThreatModel threat) = 0;
};

// ---------------------------------------------------------------------------
// Simulated victim

enum class DecoyStrategy { prompt_hash_image, shuffled_partner };

std::string_view to_string(DecoyStrategy strategy);
DecoyStrategy parse_decoy(std::string_view text);

struct SimVictimConfig {
  double memorization_mu = 1.0;
  std::uint64_t noise_seed = 0;
  DecoyStrategy decoy_strategy = DecoyStrategy::prompt_hash_image;

  void validate() const;
};

// Smooth random scene (gradient background, a few soft shapes, grain).
// Used for decoys and for synthetic datasets.
ImageBuf synthetic_image(std::size_t height, std::size_t width, std::uint64_t seed);

// The image the simulator converges to when it has not memorized x.
// `partners` is consulted only by the shuffled_partner strategy.
ImageBuf decoy_image(const SimVictimConfig& config, const ImageBuf& x, std::string_view prompt,
                     const std::vector<ImageBuf>& partners = {});

// Gray-box trace; frame t = clamp(round((1 - t/T) noise + (t/T) target)),
// target = mu x + (1 - mu) decoy for members and decoy for nonmembers.
DiffusionTrace simulate(const SimVictimConfig& config, const ImageBuf& x, std::string_view prompt,
                        bool is_member, const DiffusionParams& params,
                        const std::vector<ImageBuf>& partners = {});

/// Simulated victim whose training set is a set of images. Membership is
/// decided by image content, never by the attacker-visible id or prompt.
class SimulatedOracle final : public VictimOracle {
 public:
  SimulatedOracle(SimVictimConfig config, const std::vector<ImageBuf>& training_images,
                  std::vector<ImageBuf> partners = {});
  // Training set = the member-labeled samples of `population`; partners are
  // every image in it.
  static SimulatedOracle from_dataset(SimVictimConfig config, const MembershipDataset& population);

  DiffusionTrace query(const Sample& sample, const DiffusionParams& params, ThreatModel threat) override;
  bool is_member(const ImageBuf& image) const;

 private:
  SimVictimConfig config_;
  std::unordered_set<std::uint64_t> training_digests_;
  std::vector<ImageBuf> partners_;
};

// ---------------------------------------------------------------------------
// Trace store and replay

struct TraceKey {
  std::string sample_id;
  std::string params_digest;
  ThreatModel threat = ThreatModel::gray_box;

  TraceKey() = default;
  TraceKey(std::string id, const DiffusionParams& params, ThreatModel t)
      : sample_id(std::move(id)), params_digest(params.digest()), threat(t) {}

  std::string digest() const;
  std::string describe() const;
};

/// On-disk cache: one directory per key digest holding t_0001.png ... and a
/// trace.json sidecar with the parameters and a content checksum.
/// Last writer wins.
class TraceStore {
 public:
  explicit TraceStore(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }
  void record(const TraceKey& key, const DiffusionTrace& trace);
  DiffusionTrace replay(const TraceKey& key) const;  // TraceMiss / CorruptTrace
  bool contains(const TraceKey& key) const;

 private:
  std::filesystem::path root_;
  mutable std::mutex mutex_;
};

void record_trace(TraceStore& store, const TraceKey& key, const DiffusionTrace& trace);
DiffusionTrace replay_trace(const TraceStore& store, const TraceKey& key);

class ReplayOracle final : public VictimOracle {
 public:
  explicit ReplayOracle(std::filesystem::path store_root) : store_(std::move(store_root)) {}
  DiffusionTrace query(const Sample& sample, const DiffusionParams& params, ThreatModel threat) override;

 private:
  TraceStore store_;
};

/// Queries the oracle once and records the trace; later calls with the same
/// key are served from the store.
class CachingOracle final : public VictimOracle {
 public:
  CachingOracle(VictimOracle& upstream, TraceStore& store) : upstream_(upstream), store_(store) {}
  DiffusionTrace query(const Sample& sample, const DiffusionParams& params, ThreatModel threat) override;

 private:
  VictimOracle& upstream_;
  TraceStore& store_;
};

// ---------------------------------------------------------------------------
// Remote victim

struct HttpOracleConfig {
  std::string base_url = "http://127.0.0.1:8080";  // scheme://host:port
  unsigned max_in_flight = 4;
  unsigned timeout_seconds = 300;
};

/// POST {base_url}/v1/generate with
///   {image: base64 PNG, prompt, steps, guidance, strength, seed, return_intermediates}
/// and expects {frames: [base64 PNG, ...]}. A gray-box request answered with
/// fewer than T frames is a ThreatDowngrade, never silently masked.
class HttpOracle final : public VictimOracle {
 public:
  explicit HttpOracle(HttpOracleConfig config);
  DiffusionTrace query(const Sample& sample, const DiffusionParams& params, ThreatModel threat) override;

 private:
  HttpOracleConfig config_;
  std::counting_semaphore<1024> in_flight_;
};

}  // namespace mia
