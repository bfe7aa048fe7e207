#include "mia/encoder.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "mia/csv.hpp"
#include "mia/error.hpp"
#include "mia/parallel.hpp"
#include "mia/util.hpp"

namespace mia {

std::string_view to_string(Observer observer) {
  switch (observer) {
    case Observer::one_shot: return "one-shot";
    case Observer::progressive: return "progressive";
    case Observer::complete: return "complete";
  }
  return "?";
}

Observer parse_observer(std::string_view text) {
  if (text == "one-shot" || text == "one_shot") return Observer::one_shot;
  if (text == "progressive") return Observer::progressive;
  if (text == "complete") return Observer::complete;
  throw Error(ErrorCode::ConfigError, "unknown observer '" + std::string(text) + "'");
}

bool compatible(Observer observer, ThreatModel threat) {
  return observer == Observer::one_shot || threat == ThreatModel::gray_box;
}

Distance::Distance(MetricKind kind, FeatureExtractor* extractor) : kind_(kind), extractor_(extractor) {}

ImageBuf Distance::prepare(const ImageBuf& image) const {
  return kind_.smooth ? imgmath::box_blur(image, 1) : image;
}

double Distance::compare_prepared(const ImageBuf& a, const ImageBuf& b) const {
  if (kind_.kind == Metric::vector_distance) {
    if (extractor_) return euclid(extractor_->extract(a), extractor_->extract(b));
    return euclid(extract_builtin(a), extract_builtin(b));
  }
  auto [ra, rb] = imgmath::resize_to_match(a, b);
  switch (kind_.kind) {
    case Metric::psnr: return imgmath::psnr(ra, rb);
    case Metric::rmse: return imgmath::rmse(ra, rb);
    case Metric::dssim: return imgmath::dssim(ra, rb);
    case Metric::vector_distance: break;
  }
  return 0.0;
}

double Distance::operator()(const ImageBuf& a, const ImageBuf& b) const {
  return compare_prepared(prepare(a), prepare(b));
}

std::vector<double> Distance::from_reference(const ImageBuf& reference,
                                             const std::vector<const ImageBuf*>& others) const {
  const ImageBuf ref = prepare(reference);
  std::vector<double> out;
  out.reserve(others.size());
  if (kind_.kind == Metric::vector_distance) {
    auto embed = [&](const ImageBuf& img) { return extractor_ ? extractor_->extract(img) : extract_builtin(img); };
    const FeatureEmbedding ref_vec = embed(ref);
    for (const ImageBuf* other : others) out.push_back(euclid(ref_vec, embed(prepare(*other))));
    return out;
  }
  for (const ImageBuf* other : others) out.push_back(compare_prepared(ref, prepare(*other)));
  return out;
}

std::vector<double> Distance::consecutive(const std::vector<ImageBuf>& frames) const {
  std::vector<double> out;
  if (frames.size() < 2) return out;
  out.reserve(frames.size() - 1);
  if (kind_.kind == Metric::vector_distance) {
    auto embed = [&](const ImageBuf& img) { return extractor_ ? extractor_->extract(img) : extract_builtin(img); };
    FeatureEmbedding prev = embed(prepare(frames[0]));
    for (std::size_t t = 1; t < frames.size(); ++t) {
      FeatureEmbedding cur = embed(prepare(frames[t]));
      out.push_back(euclid(prev, cur));
      prev = std::move(cur);
    }
    return out;
  }
  ImageBuf prev = prepare(frames[0]);
  for (std::size_t t = 1; t < frames.size(); ++t) {
    ImageBuf cur = prepare(frames[t]);
    out.push_back(compare_prepared(prev, cur));
    prev = std::move(cur);
  }
  return out;
}

FeatureVec observe_one_shot(const ImageBuf& x, const DiffusionTrace& trace, const Distance& d) {
  if (trace.frames.empty()) throw Error(ErrorCode::DegenerateTrace, "trace has no frames");
  return FeatureVec{{d(x, trace.final_frame())}, Observer::one_shot, d.kind(), {}, {}};
}

FeatureVec observe_progressive(const DiffusionTrace& trace, const Distance& d) {
  if (trace.threat != ThreatModel::gray_box) {
    throw Error(ErrorCode::ThreatMismatch, "progressive observer needs a gray-box trace");
  }
  if (trace.frames.size() < 2) {
    throw Error(ErrorCode::DegenerateTrace, "progressive observer needs at least 2 frames");
  }
  return FeatureVec{d.consecutive(trace.frames), Observer::progressive, d.kind(), {}, {}};
}

FeatureVec observe_complete(const ImageBuf& x, const DiffusionTrace& trace, const Distance& d) {
  if (trace.threat != ThreatModel::gray_box) {
    throw Error(ErrorCode::ThreatMismatch, "complete observer needs a gray-box trace");
  }
  if (trace.frames.empty()) throw Error(ErrorCode::DegenerateTrace, "trace has no frames");
  std::vector<const ImageBuf*> frames;
  frames.reserve(trace.frames.size());
  for (const auto& f : trace.frames) frames.push_back(&f);
  return FeatureVec{d.from_reference(x, frames), Observer::complete, d.kind(), {}, {}};
}

FeatureVec observe(Observer observer, const ImageBuf& x, const DiffusionTrace& trace, const Distance& d) {
  switch (observer) {
    case Observer::one_shot: return observe_one_shot(x, trace, d);
    case Observer::progressive: return observe_progressive(trace, d);
    case Observer::complete: return observe_complete(x, trace, d);
  }
  throw Error(ErrorCode::ConfigError, "unknown observer");
}

std::vector<FeatureVec> encode_dataset(VictimOracle& oracle, const MembershipDataset& dataset, Observer observer,
                                       const Distance& d, const DiffusionParams& params, ThreatModel threat,
                                       unsigned jobs) {
  if (!compatible(observer, threat)) {
    throw Error(ErrorCode::ThreatMismatch,
                std::string(to_string(observer)) + " observer is not available under " + std::string(to_string(threat)));
  }
  std::vector<FeatureVec> out(dataset.size());
  parallel_for(dataset.size(), jobs, [&](std::size_t i) {
    const Sample& s = dataset[i];
    try {
      const DiffusionTrace trace = oracle.query(s, params, threat);
      FeatureVec e = observe(observer, s.image, trace, d);
      for (double v : e.values) {
        if (!std::isfinite(v)) throw Error(ErrorCode::ShapeError, "non-finite feature value");
      }
      e.sample_id = s.id;
      e.label = s.membership();
      out[i] = std::move(e);
    } catch (const Error& e) {
      throw Error(e.code(), "sample " + s.id + ": " + e.detail());
    }
  });
  return out;
}

void write_features_csv(const std::filesystem::path& path, const std::vector<FeatureVec>& features) {
  std::ostringstream out;
  const std::size_t dim = features.empty() ? 0 : features.front().values.size();
  out << "sample_id,label";
  for (std::size_t i = 1; i <= dim; ++i) out << ",v" << i;
  out << '\n';
  for (const auto& f : features) {
    if (f.values.size() != dim) {
      throw Error(ErrorCode::DimensionMismatch, "feature rows of differing length in " + path.string());
    }
    out << csv::escape(f.sample_id) << ',' << (f.label ? (*f.label ? "1" : "0") : "");
    for (double v : f.values) out << ',' << format_double(v);
    out << '\n';
  }
  write_file(path, out.str());
}

std::vector<FeatureVec> read_features_csv(const std::filesystem::path& path) {
  const auto rows = csv::parse(read_file(path));
  if (rows.empty() || rows[0].size() < 2 || rows[0][0] != "sample_id" || rows[0][1] != "label") {
    throw Error(ErrorCode::SchemaError, path.string() + ": missing sample_id,label header");
  }
  const std::size_t dim = rows[0].size() - 2;
  std::vector<FeatureVec> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != dim + 2) {
      throw Error(ErrorCode::SchemaError, path.string() + ": row " + std::to_string(r + 1) + " has wrong width");
    }
    FeatureVec f;
    f.sample_id = row[0];
    if (row[1] == "1") f.label = true;
    else if (row[1] == "0") f.label = false;
    else if (!row[1].empty()) throw Error(ErrorCode::SchemaError, path.string() + ": bad label '" + row[1] + "'");
    f.values.reserve(dim);
    for (std::size_t i = 0; i < dim; ++i) f.values.push_back(csv::to_double(row[i + 2]));
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace mia
