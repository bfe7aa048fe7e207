#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mia/image.hpp"

namespace mia {

enum class Pool { member_pool, nonmember_pool, unknown };

std::string_view to_string(Pool pool);
Pool parse_pool(std::string_view text);  // throws SchemaError

struct Sample {
  std::string id;
  ImageBuf image;
  std::string prompt;
  Pool pool = Pool::unknown;
  std::optional<bool> label;
  // Absolute location of the PNG the image was decoded from; empty for
  // in-memory samples.
  std::filesystem::path image_path;

  // Membership implied by the explicit label, falling back to the pool tag.
  std::optional<bool> membership() const;
};

/// Ordered, id-unique collection of samples. Constructing one validates the
/// id-uniqueness and label/pool consistency invariants.
class MembershipDataset {
 public:
  MembershipDataset() = default;
  explicit MembershipDataset(std::vector<Sample> samples, std::filesystem::path source_manifest = {});

  const std::vector<Sample>& samples() const noexcept { return samples_; }
  const std::filesystem::path& source_manifest() const noexcept { return source_manifest_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }

  auto begin() const { return samples_.begin(); }
  auto end() const { return samples_.end(); }

  std::size_t count(Pool pool) const;

 private:
  std::vector<Sample> samples_;
  std::filesystem::path source_manifest_;
};

// Reads a line-delimited JSON manifest. Image paths resolve against the
// manifest's directory. `jobs` > 1 decodes images on worker threads.
MembershipDataset load_manifest(const std::filesystem::path& manifest_path, unsigned jobs = 1);

// Writes `dataset` as a manifest at `manifest_path`. Samples that carry an
// image_path are referenced relative to the new manifest's directory; samples
// without one get their image written to `<manifest stem>_images/<id>.png`.
void write_manifest(const std::filesystem::path& manifest_path, const MembershipDataset& dataset);

// Exactly n members and n nonmembers, chosen by a seeded permutation of each
// pool. Selected samples keep their original relative order.
MembershipDataset sample_balanced(const MembershipDataset& dataset, std::size_t n_per_pool,
                                  std::uint64_t seed);

}  // namespace mia
