#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "mia/error.hpp"
#include "mia/features.hpp"

using namespace mia;
using testutil::random_image;

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

std::vector<std::string> fake(const std::string& mode) { return {FAKE_SIDECAR_PATH, mode}; }

}  // namespace

TEST_CASE("euclid") {
  FeatureEmbedding a{{1, 2, 3}, "t"};
  CHECK(euclid(a, a) == 0.0);
  FeatureEmbedding e1{{1, 0}, "t"}, e2{{0, 1}, "t"};
  CHECK(std::abs(euclid(e1, e2) - std::sqrt(2.0)) < 1e-15);
  CHECK(code_of([&] { euclid(a, e1); }) == ErrorCode::DimensionMismatch);

  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    FeatureEmbedding x, y, z;
    for (int i = 0; i < 2048; ++i) {
      x.values.push_back(rng.normal());
      y.values.push_back(rng.normal());
      z.values.push_back(rng.normal());
    }
    long double acc = 0;
    for (int i = 0; i < 2048; ++i) {
      const long double d = static_cast<long double>(x.values[i]) - y.values[i];
      acc += d * d;
    }
    const double oracle = static_cast<double>(std::sqrt(acc));
    CHECK(std::abs(euclid(x, y) - oracle) <= 1e-9 * oracle);
    CHECK(euclid(x, y) == euclid(y, x));
    CHECK(euclid(x, z) <= euclid(x, y) + euclid(y, z) + 1e-12);
    CHECK(euclid(x, y) > 0);
  }
}

TEST_CASE("builtin extractor") {
  const auto flat = extract_builtin(ImageBuf(40, 30, 128));
  REQUIRE(flat.dim() == 512);
  for (std::size_t i = 0; i < 192; ++i) CHECK(flat.values[i] == doctest::Approx(128.0 / 255.0).epsilon(1e-12));
  for (std::size_t i = 240; i < 304; ++i) CHECK(flat.values[i] == 0.0);

  Rng rng(2);
  for (int i = 0; i < 10; ++i) {
    const auto img = random_image(rng, 17 + i, 23);
    const auto e = extract_builtin(img);
    CHECK(e.dim() == 512);
    CHECK(e.extractor_id == "builtin-grid-v1");
    for (double v : e.values) {
      CHECK(std::isfinite(v));
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(extract_builtin(img).values == e.values);
    CHECK(extract_builtin(decode_png(encode_png(img))).values == e.values);
  }
}

TEST_CASE("sidecar handshake and embeddings") {
  SidecarExtractor sidecar(fake("good"));
  CHECK(sidecar.dim() == 2048);
  CHECK(sidecar.id() == "fake-good");
  Rng rng(4);
  const auto img = random_image(rng, 12, 12);
  const auto a = extract_external(sidecar, img);
  const auto b = extract_external(sidecar, img);
  CHECK(a.dim() == 2048);
  CHECK(a.values == b.values);
  ImageBuf other = img;
  for (auto& p : other.pixels()) p = static_cast<std::uint8_t>(255 - p);
  CHECK(euclid(a, extract_external(sidecar, other)) > 0.0);
  for (int i = 0; i < 100; ++i) CHECK(sidecar.extract(random_image(rng, 8, 8)).dim() == 2048);
}

TEST_CASE("sidecar failures") {
  CHECK(code_of([] { SidecarExtractor s(fake("bad-dim")); }) == ErrorCode::DimensionMismatch);
  CHECK(code_of([] { SidecarExtractor s({"/nonexistent/sidecar-binary"}); }) == ErrorCode::SidecarUnavailable);
  CHECK(code_of([] { SidecarExtractor s(std::vector<std::string>{}); }) == ErrorCode::SidecarUnavailable);

  const ImageBuf img(4, 4, 9);
  {
    SidecarExtractor s(fake("short"));
    CHECK(code_of([&] { s.extract(img); }) == ErrorCode::DimensionMismatch);
  }
  {
    SidecarExtractor s(fake("crash"));
    CHECK(code_of([&] { s.extract(img); }) == ErrorCode::SidecarUnavailable);
    CHECK(code_of([&] { s.extract(img); }) == ErrorCode::SidecarUnavailable);
  }
  {
    SidecarExtractor s(fake("garbage"));
    CHECK(code_of([&] { s.extract(img); }) == ErrorCode::ProtocolError);
  }
  {
    // An error reply leaves the session usable.
    SidecarExtractor s(fake("flaky"));
    CHECK(code_of([&] { s.extract(img); }) == ErrorCode::ProtocolError);
    CHECK(s.extract(img).dim() == 2048);
  }
}
