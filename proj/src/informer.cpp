#include "mia/informer.hpp"

#include <algorithm>
#include <cmath>

#include "mia/error.hpp"
#include "mia/util.hpp"

namespace mia {

MembershipDataset LeakSplit::leaked() const {
  std::vector<Sample> all(leak_member.begin(), leak_member.end());
  all.insert(all.end(), leak_nonmember.begin(), leak_nonmember.end());
  for (auto& s : all) s.label = s.membership();
  return MembershipDataset(std::move(all));
}

std::pair<MaskedOracleSpec, LeakSplit> inform(ThreatModel threat, const MembershipDataset& pool,
                                              double leak_fraction, std::uint64_t seed) {
  if (!(leak_fraction > 0.0 && leak_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidParams, "leak_fraction must be in (0,1)");
  }
  std::vector<std::size_t> members, nonmembers;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    auto m = pool[i].membership();
    if (!m) continue;
    (*m ? members : nonmembers).push_back(i);
  }

  Rng rng(seed);
  std::vector<bool> leaked(pool.size(), false);
  std::vector<Sample> leak_member, leak_nonmember;
  auto draw = [&](std::vector<std::size_t>& idx, std::vector<Sample>& out, std::string_view name) {
    const auto n_leak = static_cast<std::size_t>(std::floor(leak_fraction * static_cast<double>(idx.size())));
    if (n_leak == 0 || n_leak == idx.size()) {
      throw Error(ErrorCode::InsufficientPool, std::string(name) + ": " + std::to_string(idx.size()) +
                                                   " samples leave " + std::to_string(n_leak) + " leaked and " +
                                                   std::to_string(idx.size() - n_leak) + " held out");
    }
    rng.shuffle(idx);
    idx.resize(n_leak);
    std::sort(idx.begin(), idx.end());
    for (std::size_t i : idx) {
      leaked[i] = true;
      Sample s = pool[i];
      s.label = s.membership();
      out.push_back(std::move(s));
    }
  };
  draw(members, leak_member, "member_pool");
  draw(nonmembers, leak_nonmember, "nonmember_pool");

  std::vector<Sample> holdout;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (leaked[i]) continue;
    auto m = pool[i].membership();
    if (!m) continue;
    Sample s = pool[i];
    s.label = m;
    holdout.push_back(std::move(s));
  }

  LeakSplit split{MembershipDataset(std::move(leak_member)), MembershipDataset(std::move(leak_nonmember)),
                  MembershipDataset(std::move(holdout))};
  return {MaskedOracleSpec{threat}, std::move(split)};
}

void write_split(const std::filesystem::path& dir, const LeakSplit& split) {
  write_manifest(dir / "leak_member.jsonl", split.leak_member);
  write_manifest(dir / "leak_nonmember.jsonl", split.leak_nonmember);
  write_manifest(dir / "holdout.jsonl", split.holdout);
}

LeakSplit read_split(const std::filesystem::path& dir, unsigned jobs) {
  return LeakSplit{load_manifest(dir / "leak_member.jsonl", jobs), load_manifest(dir / "leak_nonmember.jsonl", jobs),
                   load_manifest(dir / "holdout.jsonl", jobs)};
}

}  // namespace mia
