#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "mia/error.hpp"
#include "mia/informer.hpp"

using namespace mia;
using testutil::TempDir;

namespace {

MembershipDataset pools(std::size_t members, std::size_t nonmembers, std::size_t unlabeled = 0) {
  std::vector<Sample> v;
  auto add = [&](const std::string& id, Pool pool) {
    Sample s;
    s.id = id;
    s.image = ImageBuf(2, 2, static_cast<std::uint8_t>(v.size() % 256));
    s.prompt = id;
    s.pool = pool;
    v.push_back(std::move(s));
  };
  for (std::size_t i = 0; i < members; ++i) add("m" + std::to_string(i), Pool::member_pool);
  for (std::size_t i = 0; i < nonmembers; ++i) add("n" + std::to_string(i), Pool::nonmember_pool);
  for (std::size_t i = 0; i < unlabeled; ++i) add("u" + std::to_string(i), Pool::unknown);
  return MembershipDataset(std::move(v));
}

std::set<std::string> ids(const MembershipDataset& ds) {
  std::set<std::string> out;
  for (const auto& s : ds) out.insert(s.id);
  return out;
}

}  // namespace

TEST_CASE("split sizes") {
  const auto [spec, split] = inform(ThreatModel::gray_box, pools(1000, 1000), 0.5, 0);
  CHECK(spec.threat == ThreatModel::gray_box);
  CHECK(split.leak_member.size() == 500);
  CHECK(split.leak_nonmember.size() == 500);
  CHECK(split.holdout.size() == 1000);
  CHECK(split.holdout.count(Pool::member_pool) == 500);
  CHECK(split.leaked().size() == 1000);

  const auto black = inform(ThreatModel::black_box, pools(10, 10), 0.5, 0);
  CHECK(black.first.threat == ThreatModel::black_box);
}

TEST_CASE("split invariants across fractions and seeds") {
  const auto pool = pools(37, 23, 5);
  for (double f : {0.05, 0.3, 0.5, 0.77, 0.95}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto [spec, s] = inform(ThreatModel::gray_box, pool, f, seed);
      const auto lm = ids(s.leak_member), ln = ids(s.leak_nonmember), h = ids(s.holdout);
      for (const auto& id : lm) {
        CHECK(!ln.contains(id));
        CHECK(!h.contains(id));
      }
      for (const auto& id : ln) CHECK(!h.contains(id));
      for (const auto& x : s.leak_member) CHECK(x.label == true);
      for (const auto& x : s.leak_nonmember) CHECK(x.label == false);
      for (const auto& x : s.holdout) CHECK(x.membership().has_value());
      CHECK(s.leak_member.size() == static_cast<std::size_t>(f * 37));
      CHECK(s.leak_nonmember.size() == static_cast<std::size_t>(f * 23));
      CHECK(lm.size() + ln.size() + h.size() == 60);

      const auto again = inform(ThreatModel::gray_box, pool, f, seed).second;
      CHECK(ids(again.leak_member) == lm);
      CHECK(ids(again.holdout) == h);
    }
  }
}

TEST_CASE("split errors") {
  auto code = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  CHECK(code([] { inform(ThreatModel::gray_box, pools(10, 10), 0.0, 0); }) == ErrorCode::InvalidParams);
  CHECK(code([] { inform(ThreatModel::gray_box, pools(10, 10), 1.0, 0); }) == ErrorCode::InvalidParams);
  CHECK(code([] { inform(ThreatModel::gray_box, pools(10, 1), 0.5, 0); }) == ErrorCode::InsufficientPool);
  CHECK(code([] { inform(ThreatModel::gray_box, pools(0, 10), 0.5, 0); }) == ErrorCode::InsufficientPool);
}

TEST_CASE("split persists as three manifests") {
  TempDir dir;
  const auto [spec, s] = inform(ThreatModel::gray_box, pools(8, 6), 0.5, 3);
  write_split(dir.path(), s);
  for (const char* f : {"leak_member.jsonl", "leak_nonmember.jsonl", "holdout.jsonl"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  const auto back = read_split(dir.path(), 2);
  CHECK(ids(back.leak_member) == ids(s.leak_member));
  CHECK(ids(back.leak_nonmember) == ids(s.leak_nonmember));
  CHECK(ids(back.holdout) == ids(s.holdout));
  for (std::size_t i = 0; i < s.holdout.size(); ++i) CHECK(back.holdout[i].image == s.holdout[i].image);
}
