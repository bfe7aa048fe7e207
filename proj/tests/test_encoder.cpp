#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "mia/encoder.hpp"
#include "mia/error.hpp"

using namespace mia;
using testutil::random_image;
using testutil::TempDir;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IoError;
}

DiffusionTrace gray(std::vector<ImageBuf> frames) {
  DiffusionTrace t;
  t.frames = std::move(frames);
  t.threat = ThreatModel::gray_box;
  t.params.steps = static_cast<unsigned>(t.frames.size());
  return t;
}

DiffusionParams steps(unsigned t) {
  DiffusionParams p;
  p.steps = t;
  return p;
}

MembershipDataset synthetic(std::size_t members, std::size_t nonmembers, std::uint64_t seed) {
  std::vector<Sample> v;
  for (std::size_t i = 0; i < members + nonmembers; ++i) {
    Sample s;
    const bool member = i < members;
    s.id = (member ? "m" : "n") + std::to_string(i);
    s.image = synthetic_image(12, 12, mix_seed(seed, i));
    s.prompt = "scene " + s.id;
    s.pool = member ? Pool::member_pool : Pool::nonmember_pool;
    v.push_back(std::move(s));
  }
  return MembershipDataset(std::move(v));
}

const Distance kRmse(MetricKind{Metric::rmse, false});

}  // namespace

TEST_CASE("one-shot observer") {
  Rng rng(1);
  const auto x = random_image(rng, 6, 6);
  auto fv = observe_one_shot(x, gray({random_image(rng, 6, 6), x}), kRmse);
  REQUIRE(fv.values.size() == 1);
  CHECK(fv.values[0] == 0.0);
  fv = observe_one_shot(ImageBuf(4, 4, 0), gray({ImageBuf(4, 4, 255)}), kRmse);
  CHECK(fv.values == std::vector<double>{255.0});
  CHECK(fv.observer == Observer::one_shot);
  CHECK(code_of([&] { observe_one_shot(x, DiffusionTrace{}, kRmse); }) == ErrorCode::DegenerateTrace);
}

TEST_CASE("progressive observer") {
  Rng rng(2);
  std::vector<ImageBuf> frames;
  for (int i = 0; i < 5; ++i) frames.push_back(random_image(rng, 5, 5));
  const auto fv = observe_progressive(gray(frames), kRmse);
  REQUIRE(fv.values.size() == 4);
  for (std::size_t t = 1; t < 5; ++t) CHECK(fv.values[t - 1] == imgmath::rmse(frames[t - 1], frames[t]));

  const auto same = observe_progressive(gray(std::vector<ImageBuf>(6, frames[0])), kRmse);
  CHECK(same.values == std::vector<double>(5, 0.0));

  auto black = gray({frames[0]});
  black.threat = ThreatModel::black_box;
  CHECK(code_of([&] { observe_progressive(black, kRmse); }) == ErrorCode::ThreatMismatch);
  CHECK(code_of([&] { observe_progressive(gray({frames[0]}), kRmse); }) == ErrorCode::DegenerateTrace);
}

TEST_CASE("complete observer") {
  Rng rng(3);
  const auto x = random_image(rng, 5, 5);
  std::vector<ImageBuf> frames;
  for (int i = 0; i < 8; ++i) frames.push_back(i == 3 ? x : random_image(rng, 5, 5));
  const auto fv = observe_complete(x, gray(frames), kRmse);
  REQUIRE(fv.values.size() == 8);
  CHECK(fv.values[3] == 0.0);
  for (std::size_t t = 0; t < 8; ++t) CHECK(fv.values[t] == imgmath::rmse(x, frames[t]));

  const auto one = gray({frames[0]});
  CHECK(observe_complete(x, one, kRmse).values == observe_one_shot(x, one, kRmse).values);

  auto black = one;
  black.threat = ThreatModel::black_box;
  CHECK(code_of([&] { observe_complete(x, black, kRmse); }) == ErrorCode::ThreatMismatch);
}

TEST_CASE("length laws hold for every metric") {
  Rng rng(4);
  const auto x = random_image(rng, 6, 6);
  for (unsigned T : {2u, 3u, 8u, 20u}) {
    std::vector<ImageBuf> frames;
    for (unsigned t = 0; t < T; ++t) frames.push_back(random_image(rng, 6, 6));
    for (Metric m : {Metric::psnr, Metric::rmse, Metric::dssim, Metric::vector_distance}) {
      const Distance d(MetricKind{m, false});
      CHECK(observe(Observer::one_shot, x, gray(frames), d).values.size() == 1);
      CHECK(observe(Observer::complete, x, gray(frames), d).values.size() == T);
      CHECK(observe(Observer::progressive, x, gray(frames), d).values.size() == T - 1);
    }
  }
}

TEST_CASE("distances resize and smooth") {
  Rng rng(5);
  const ImageBuf small(4, 4, 90), big(8, 8, 90);
  CHECK(kRmse(small, big) == 0.0);
  const auto a = random_image(rng, 7, 7), b = random_image(rng, 7, 7);
  const Distance smooth(MetricKind{Metric::rmse, true});
  CHECK(smooth(a, b) == imgmath::rmse(imgmath::box_blur(a, 1), imgmath::box_blur(b, 1)));
  const Distance vec(MetricKind{Metric::vector_distance, false});
  CHECK(vec(a, b) == euclid(extract_builtin(a), extract_builtin(b)));
  CHECK(vec(a, a) == 0.0);
  const auto many = kRmse.from_reference(a, {&a, &b});
  CHECK(many == std::vector<double>{0.0, imgmath::rmse(a, b)});
}

TEST_CASE("encode_dataset") {
  const auto ds = synthetic(5, 5, 1);
  SimulatedOracle oracle = SimulatedOracle::from_dataset(SimVictimConfig{}, ds);
  auto fv = encode_dataset(oracle, ds, Observer::complete, kRmse, steps(4), ThreatModel::gray_box, 3);
  REQUIRE(fv.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(fv[i].sample_id == ds[i].id);
    CHECK(fv[i].label == ds[i].membership());
    CHECK(fv[i].values.size() == 4);
  }
  CHECK(encode_dataset(oracle, MembershipDataset{}, Observer::complete, kRmse, steps(4), ThreatModel::gray_box).empty());
  for (const auto& f : encode_dataset(oracle, ds, Observer::one_shot, kRmse, steps(4), ThreatModel::black_box)) {
    CHECK(f.values.size() == 1);
  }
  CHECK(code_of([&] {
          encode_dataset(oracle, ds, Observer::progressive, kRmse, steps(4), ThreatModel::black_box);
        }) == ErrorCode::ThreatMismatch);

  ReplayOracle empty("/nonexistent/store");
  try {
    encode_dataset(empty, ds, Observer::one_shot, kRmse, steps(4), ThreatModel::gray_box);
    FAIL("expected TraceMiss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TraceMiss);
    CHECK(e.detail().find("sample m0") != std::string::npos);
  }
}

TEST_CASE("mu 1 one-shot rmse separates members exactly") {
  const auto ds = synthetic(50, 50, 9);
  SimulatedOracle oracle = SimulatedOracle::from_dataset(SimVictimConfig{}, ds);
  for (const auto& f : encode_dataset(oracle, ds, Observer::one_shot, kRmse, steps(8), ThreatModel::black_box, 4)) {
    if (*f.label) CHECK(f.values[0] == 0.0);
    else CHECK(f.values[0] > 0.0);
  }
}

TEST_CASE("features csv") {
  TempDir dir;
  const auto ds = synthetic(3, 3, 2);
  SimulatedOracle oracle = SimulatedOracle::from_dataset(SimVictimConfig{}, ds);
  const Distance d(MetricKind{Metric::psnr, false});
  auto fv = encode_dataset(oracle, ds, Observer::complete, d, steps(3), ThreatModel::gray_box);
  fv[2].label.reset();
  fv[1].sample_id = "needs,\"quotes\"";
  write_features_csv(dir / "f.csv", fv);
  const auto text = read_file(dir / "f.csv");
  CHECK(text.rfind("sample_id,label,v1,v2,v3\n", 0) == 0);
  const auto back = read_features_csv(dir / "f.csv");
  REQUIRE(back.size() == fv.size());
  for (std::size_t i = 0; i < fv.size(); ++i) {
    CHECK(back[i].sample_id == fv[i].sample_id);
    CHECK(back[i].label == fv[i].label);
    CHECK(back[i].values == fv[i].values);
  }
  write_features_csv(dir / "g.csv", back);
  CHECK(read_file(dir / "g.csv") == text);

  write_file(dir / "bad.csv", "sample_id,label,v1\na,1,notanumber\n");
  CHECK(code_of([&] { read_features_csv(dir / "bad.csv"); }) == ErrorCode::SchemaError);
}

TEST_CASE("observer names") {
  CHECK(parse_observer("one-shot") == Observer::one_shot);
  CHECK(to_string(Observer::progressive) == "progressive");
  CHECK(compatible(Observer::one_shot, ThreatModel::black_box));
  CHECK(compatible(Observer::one_shot, ThreatModel::gray_box));
  CHECK(!compatible(Observer::complete, ThreatModel::black_box));
  CHECK(!compatible(Observer::progressive, ThreatModel::black_box));
}
