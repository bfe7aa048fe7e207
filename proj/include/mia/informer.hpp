#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>

#include "mia/dataset.hpp"
#include "mia/victim.hpp"

namespace mia {

// What the attacker is allowed to see of the victim.
struct MaskedOracleSpec {
  ThreatModel threat = ThreatModel::gray_box;
};

/// The attacker's labeled training material plus the evaluation set.
/// leak_member / leak_nonmember are disjoint, label-pure, and disjoint from
/// holdout. Holdout labels stay attached for scoring only.
struct LeakSplit {
  MembershipDataset leak_member;
  MembershipDataset leak_nonmember;
  MembershipDataset holdout;

  // leak_member followed by leak_nonmember, each sample labeled.
  MembershipDataset leaked() const;
};

// Per pool, a seeded permutation leaks floor(leak_fraction * pool size)
// samples; the rest of both pools becomes the holdout. Unlabeled samples
// (pool unknown, no label) are ignored. Throws InsufficientPool when a pool
// would leak nothing or hold out nothing, InvalidParams for a fraction
// outside (0, 1).
std::pair<MaskedOracleSpec, LeakSplit> inform(ThreatModel threat, const MembershipDataset& pool,
                                              double leak_fraction, std::uint64_t seed);

// Persists the split as leak_member.jsonl, leak_nonmember.jsonl and
// holdout.jsonl under `dir`, and reads it back.
void write_split(const std::filesystem::path& dir, const LeakSplit& split);
LeakSplit read_split(const std::filesystem::path& dir, unsigned jobs = 1);

}  // namespace mia
