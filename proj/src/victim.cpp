#include "mia/victim.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unistd.h>

#include "json.hpp"
#include "mia/error.hpp"
#include "mia/util.hpp"

namespace mia {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(ThreatModel threat) {
  return threat == ThreatModel::black_box ? "black_box" : "gray_box";
}

ThreatModel parse_threat(std::string_view text) {
  if (text == "black_box" || text == "black") return ThreatModel::black_box;
  if (text == "gray_box" || text == "gray") return ThreatModel::gray_box;
  throw Error(ErrorCode::ConfigError, "unknown threat model '" + std::string(text) + "'");
}

void DiffusionParams::validate() const {
  if (steps < 1) throw Error(ErrorCode::InvalidParams, "steps must be >= 1");
  if (!(strength >= 0.0 && strength <= 1.0)) throw Error(ErrorCode::InvalidParams, "strength must be in [0,1]");
  if (!(guidance >= 0.0) || !std::isfinite(guidance)) {
    throw Error(ErrorCode::InvalidParams, "guidance must be a finite nonnegative number");
  }
}

std::string DiffusionParams::digest() const {
  std::string canonical = "steps=" + std::to_string(steps) + ";guidance=" + format_double(guidance) +
                          ";strength=" + format_double(strength) + ";seed=" + std::to_string(seed);
  return sha256_hex(canonical).substr(0, 16);
}

DiffusionTrace DiffusionTrace::masked(ThreatModel target) const {
  if (target == threat) return *this;
  if (target == ThreatModel::gray_box) {
    throw Error(ErrorCode::ThreatDowngrade, "cannot recover intermediates from a black-box trace");
  }
  return DiffusionTrace{{frames.back()}, params, ThreatModel::black_box};
}

void DiffusionTrace::validate() const {
  const std::size_t expected = threat == ThreatModel::black_box ? 1 : params.steps;
  if (frames.size() != expected) {
    throw Error(ErrorCode::ShapeError, std::string(to_string(threat)) + " trace has " +
                                           std::to_string(frames.size()) + " frames, expected " +
                                           std::to_string(expected));
  }
}

// ---------------------------------------------------------------------------

std::string_view to_string(DecoyStrategy strategy) {
  return strategy == DecoyStrategy::prompt_hash_image ? "prompt_hash_image" : "shuffled_partner";
}

DecoyStrategy parse_decoy(std::string_view text) {
  if (text == "prompt_hash_image") return DecoyStrategy::prompt_hash_image;
  if (text == "shuffled_partner") return DecoyStrategy::shuffled_partner;
  throw Error(ErrorCode::ConfigError, "unknown decoy strategy '" + std::string(text) + "'");
}

void SimVictimConfig::validate() const {
  if (!(memorization_mu >= 0.0 && memorization_mu <= 1.0)) {
    throw Error(ErrorCode::InvalidParams, "memorization_mu must be in [0,1]");
  }
}

ImageBuf synthetic_image(std::size_t height, std::size_t width, std::uint64_t seed) {
  Rng rng(seed);
  const double h = static_cast<double>(height);
  const double w = static_cast<double>(width);

  std::array<double, 3> c0{}, c1{};
  for (auto& c : c0) c = rng.uniform() * 255.0;
  for (auto& c : c1) c = rng.uniform() * 255.0;
  const double angle = rng.uniform() * 2.0 * M_PI;
  const double gx = std::cos(angle), gy = std::sin(angle);

  struct Blob {
    double cy, cx, ry, rx, alpha;
    std::array<double, 3> color;
  };
  std::vector<Blob> blobs(2 + rng.below(4));
  for (auto& b : blobs) {
    b.cy = rng.uniform() * h;
    b.cx = rng.uniform() * w;
    b.ry = (0.1 + 0.35 * rng.uniform()) * h;
    b.rx = (0.1 + 0.35 * rng.uniform()) * w;
    b.alpha = 0.4 + 0.6 * rng.uniform();
    for (auto& c : b.color) c = rng.uniform() * 255.0;
  }
  const double grain = 12.0 * rng.uniform();

  ImageBuf out(height, width);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const double u = (static_cast<double>(c) + 0.5) / w - 0.5;
      const double v = (static_cast<double>(r) + 0.5) / h - 0.5;
      const double t = std::clamp(0.5 + (u * gx + v * gy), 0.0, 1.0);
      std::array<double, 3> px{};
      for (std::size_t ch = 0; ch < 3; ++ch) px[ch] = (1.0 - t) * c0[ch] + t * c1[ch];
      for (const auto& b : blobs) {
        const double dy = (static_cast<double>(r) - b.cy) / b.ry;
        const double dx = (static_cast<double>(c) - b.cx) / b.rx;
        const double d2 = dx * dx + dy * dy;
        if (d2 >= 1.0) continue;
        const double a = b.alpha * (1.0 - d2);
        for (std::size_t ch = 0; ch < 3; ++ch) px[ch] = (1.0 - a) * px[ch] + a * b.color[ch];
      }
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double noisy = px[ch] + grain * (2.0 * rng.uniform() - 1.0);
        out.at(r, c, ch) = static_cast<std::uint8_t>(std::clamp(std::lround(noisy), 0L, 255L));
      }
    }
  }
  return out;
}

ImageBuf decoy_image(const SimVictimConfig& config, const ImageBuf& x, std::string_view prompt,
                     const std::vector<ImageBuf>& partners) {
  const std::uint64_t prompt_hash = digest64(prompt);
  if (config.decoy_strategy == DecoyStrategy::prompt_hash_image) {
    return synthetic_image(x.height(), x.width(), prompt_hash);
  }
  if (partners.empty()) {
    throw Error(ErrorCode::InvalidParams, "shuffled_partner decoys need a partner pool");
  }
  const std::size_t n = partners.size();
  std::size_t idx = prompt_hash % n;
  // Never hand back x itself; with a single partner equal to x there is no choice.
  for (std::size_t tries = 0; tries < n && partners[idx] == x; ++tries) idx = (idx + 1) % n;
  const ImageBuf& partner = partners[idx];
  if (partner.same_shape(x)) return partner;
  // Partner dimensions follow x so that blending is pixelwise.
  ImageBuf resized(x.height(), x.width());
  for (std::size_t r = 0; r < x.height(); ++r) {
    for (std::size_t c = 0; c < x.width(); ++c) {
      const std::size_t pr = r * partner.height() / x.height();
      const std::size_t pc = c * partner.width() / x.width();
      for (std::size_t ch = 0; ch < 3; ++ch) resized.at(r, c, ch) = partner.at(pr, pc, ch);
    }
  }
  return resized;
}

DiffusionTrace simulate(const SimVictimConfig& config, const ImageBuf& x, std::string_view prompt,
                        bool is_member, const DiffusionParams& params, const std::vector<ImageBuf>& partners) {
  config.validate();
  params.validate();
  const ImageBuf decoy = decoy_image(config, x, prompt, partners);
  const std::size_t n = x.size();
  const auto xs = x.pixels();
  const auto ds = decoy.pixels();

  std::vector<double> target(n);
  const double mu = is_member ? config.memorization_mu : 0.0;
  for (std::size_t i = 0; i < n; ++i) target[i] = mu * xs[i] + (1.0 - mu) * ds[i];

  // Noise depends on the image and parameters, not on membership.
  Rng rng(mix_seed(config.noise_seed, mix_seed(params.seed, digest64(x))));
  std::vector<double> noise(n);
  for (auto& v : noise) v = static_cast<double>(rng.below(256));

  DiffusionTrace trace;
  trace.params = params;
  trace.threat = ThreatModel::gray_box;
  trace.frames.reserve(params.steps);
  const double steps = static_cast<double>(params.steps);
  for (unsigned t = 1; t <= params.steps; ++t) {
    const double alpha = static_cast<double>(t) / steps;
    std::vector<std::uint8_t> px(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = (1.0 - alpha) * noise[i] + alpha * target[i];
      px[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    trace.frames.emplace_back(x.height(), x.width(), std::move(px));
  }
  return trace;
}

SimulatedOracle::SimulatedOracle(SimVictimConfig config, const std::vector<ImageBuf>& training_images,
                                 std::vector<ImageBuf> partners)
    : config_(config), partners_(std::move(partners)) {
  config_.validate();
  for (const auto& img : training_images) training_digests_.insert(digest64(img));
}

SimulatedOracle SimulatedOracle::from_dataset(SimVictimConfig config, const MembershipDataset& population) {
  std::vector<ImageBuf> training, partners;
  for (const auto& s : population) {
    if (s.membership().value_or(false)) training.push_back(s.image);
    if (config.decoy_strategy == DecoyStrategy::shuffled_partner) partners.push_back(s.image);
  }
  return SimulatedOracle(config, training, std::move(partners));
}

bool SimulatedOracle::is_member(const ImageBuf& image) const {
  return training_digests_.contains(digest64(image));
}

DiffusionTrace SimulatedOracle::query(const Sample& sample, const DiffusionParams& params, ThreatModel threat) {
  auto trace = simulate(config_, sample.image, sample.prompt, is_member(sample.image), params, partners_);
  return trace.masked(threat);
}

// ---------------------------------------------------------------------------

std::string TraceKey::digest() const {
  return sha256_hex(sample_id + "\n" + params_digest + "\n" + std::string(to_string(threat))).substr(0, 24);
}

std::string TraceKey::describe() const {
  return sample_id + "/" + params_digest + "/" + std::string(to_string(threat));
}

namespace {

std::string frames_checksum(const std::vector<ImageBuf>& frames) {
  std::string buf;
  for (const auto& f : frames) {
    buf += std::to_string(f.height()) + "x" + std::to_string(f.width()) + ":";
    buf.append(reinterpret_cast<const char*>(f.pixels().data()), f.size());
  }
  return sha256_hex(buf);
}

std::string frame_name(std::size_t t) {
  char name[32];
  std::snprintf(name, sizeof(name), "t_%04zu.png", t);
  return name;
}

json params_to_json(const DiffusionParams& p) {
  return {{"steps", p.steps}, {"guidance", p.guidance}, {"strength", p.strength}, {"seed", p.seed}};
}

DiffusionParams params_from_json(const json& j) {
  DiffusionParams p;
  p.steps = j.at("steps").get<unsigned>();
  p.guidance = j.at("guidance").get<double>();
  p.strength = j.at("strength").get<double>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

}  // namespace

TraceStore::TraceStore(fs::path root) : root_(std::move(root)) {}

bool TraceStore::contains(const TraceKey& key) const {
  return fs::exists(root_ / key.digest() / "trace.json");
}

void TraceStore::record(const TraceKey& key, const DiffusionTrace& trace) {
  trace.validate();
  static std::atomic<std::uint64_t> counter{0};
  const fs::path final_dir = root_ / key.digest();
  const fs::path tmp_dir = root_ / (".tmp-" + key.digest() + "-" + std::to_string(::getpid()) + "-" +
                                    std::to_string(counter++));
  fs::create_directories(tmp_dir);
  for (std::size_t t = 0; t < trace.frames.size(); ++t) {
    write_png(tmp_dir / frame_name(t + 1), trace.frames[t]);
  }
  json meta = {{"sample_id", key.sample_id},
               {"params_digest", key.params_digest},
               {"threat", std::string(to_string(trace.threat))},
               {"params", params_to_json(trace.params)},
               {"frames", trace.frames.size()},
               {"checksum", frames_checksum(trace.frames)}};
  write_file(tmp_dir / "trace.json", meta.dump(2) + "\n");

  std::lock_guard lock(mutex_);
  std::error_code ec;
  fs::remove_all(final_dir, ec);
  fs::rename(tmp_dir, final_dir);
}

DiffusionTrace TraceStore::replay(const TraceKey& key) const {
  const fs::path dir = root_ / key.digest();
  std::lock_guard lock(mutex_);
  if (!fs::exists(dir / "trace.json")) throw Error(ErrorCode::TraceMiss, key.describe());
  try {
    const json meta = json::parse(read_file(dir / "trace.json"));
    DiffusionTrace trace;
    trace.params = params_from_json(meta.at("params"));
    trace.threat = parse_threat(meta.at("threat").get<std::string>());
    const auto count = meta.at("frames").get<std::size_t>();
    for (std::size_t t = 1; t <= count; ++t) trace.frames.push_back(read_png(dir / frame_name(t)));
    if (frames_checksum(trace.frames) != meta.at("checksum").get<std::string>()) {
      throw Error(ErrorCode::CorruptTrace, key.describe() + ": checksum mismatch");
    }
    trace.validate();
    return trace;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptTrace) throw;
    throw Error(ErrorCode::CorruptTrace, key.describe() + ": " + e.detail());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptTrace, key.describe() + ": " + e.what());
  }
}

void record_trace(TraceStore& store, const TraceKey& key, const DiffusionTrace& trace) { store.record(key, trace); }

DiffusionTrace replay_trace(const TraceStore& store, const TraceKey& key) { return store.replay(key); }

DiffusionTrace ReplayOracle::query(const Sample& sample, const DiffusionParams& params, ThreatModel threat) {
  return store_.replay(TraceKey(sample.id, params, threat));
}

DiffusionTrace CachingOracle::query(const Sample& sample, const DiffusionParams& params, ThreatModel threat) {
  const TraceKey key(sample.id, params, threat);
  if (store_.contains(key)) return store_.replay(key);
  auto trace = upstream_.query(sample, params, threat);
  trace.validate();
  store_.record(key, trace);
  return trace;
}

}  // namespace mia
