#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mia/dataset.hpp"
#include "mia/features.hpp"
#include "mia/imgmath.hpp"
#include "mia/victim.hpp"

namespace mia {

enum class Observer { one_shot, progressive, complete };

std::string_view to_string(Observer observer);  // "one-shot", "progressive", "complete"
Observer parse_observer(std::string_view text);

// one-shot works with either threat model; the other two need intermediates.
bool compatible(Observer observer, ThreatModel threat);

struct FeatureVec {
  std::vector<double> values;
  Observer observer = Observer::one_shot;
  MetricKind metric;
  std::string sample_id;
  std::optional<bool> label;
};

/// Image distance d(a, b) for one MetricKind. Pixel metrics resize the smaller
/// image up to the larger one; smoothing (when set) happens before resizing.
/// Vector distance embeds both images with `extractor`, or with the builtin
/// extractor when none is given.
class Distance {
 public:
  explicit Distance(MetricKind kind, FeatureExtractor* extractor = nullptr);

  const MetricKind& kind() const noexcept { return kind_; }
  double operator()(const ImageBuf& a, const ImageBuf& b) const;

  // Distances from `reference` to each of `others`; the reference is
  // prepared (and embedded) once.
  std::vector<double> from_reference(const ImageBuf& reference, const std::vector<const ImageBuf*>& others) const;
  // d(frames[i-1], frames[i]) for i = 1..n-1.
  std::vector<double> consecutive(const std::vector<ImageBuf>& frames) const;

 private:
  ImageBuf prepare(const ImageBuf& image) const;
  double compare_prepared(const ImageBuf& a, const ImageBuf& b) const;

  MetricKind kind_;
  FeatureExtractor* extractor_;
};

FeatureVec observe_one_shot(const ImageBuf& x, const DiffusionTrace& trace, const Distance& d);
FeatureVec observe_progressive(const DiffusionTrace& trace, const Distance& d);
FeatureVec observe_complete(const ImageBuf& x, const DiffusionTrace& trace, const Distance& d);
FeatureVec observe(Observer observer, const ImageBuf& x, const DiffusionTrace& trace, const Distance& d);

// One feature vector per sample, aligned with the dataset order. Throws
// ThreatMismatch up front for an incompatible observer/threat pair; per-sample
// failures are rethrown with the sample id in the message.
std::vector<FeatureVec> encode_dataset(VictimOracle& oracle, const MembershipDataset& dataset, Observer observer,
                                       const Distance& d, const DiffusionParams& params, ThreatModel threat,
                                       unsigned jobs = 1);

// CSV with header `sample_id,label,v1..vF`; label is 1, 0 or empty.
void write_features_csv(const std::filesystem::path& path, const std::vector<FeatureVec>& features);
std::vector<FeatureVec> read_features_csv(const std::filesystem::path& path);

}  // namespace mia
