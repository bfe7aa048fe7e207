#include "mia/dataset.hpp"

#include <algorithm>
#include <fstream>
#include "json.hpp"
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "mia/error.hpp"
#include "mia/parallel.hpp"
#include "mia/util.hpp"

namespace mia {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(Pool pool) {
  switch (pool) {
    case Pool::member_pool: return "member_pool";
    case Pool::nonmember_pool: return "nonmember_pool";
    case Pool::unknown: return "unknown";
  }
  return "unknown";
}

Pool parse_pool(std::string_view text) {
  if (text == "member_pool") return Pool::member_pool;
  if (text == "nonmember_pool") return Pool::nonmember_pool;
  if (text == "unknown") return Pool::unknown;
  throw Error(ErrorCode::SchemaError, "unknown pool '" + std::string(text) + "'");
}

std::optional<bool> Sample::membership() const {
  if (label) return label;
  if (pool == Pool::member_pool) return true;
  if (pool == Pool::nonmember_pool) return false;
  return std::nullopt;
}

namespace {

void check_label_pool(const Sample& s) {
  if (!s.label) return;
  if ((s.pool == Pool::member_pool && !*s.label) || (s.pool == Pool::nonmember_pool && *s.label)) {
    throw Error(ErrorCode::LabelPoolConflict, s.id);
  }
}

}  // namespace

MembershipDataset::MembershipDataset(std::vector<Sample> samples, fs::path source_manifest)
    : samples_(std::move(samples)), source_manifest_(std::move(source_manifest)) {
  std::unordered_set<std::string> seen;
  seen.reserve(samples_.size());
  for (const auto& s : samples_) {
    if (!seen.insert(s.id).second) throw Error(ErrorCode::DuplicateId, s.id);
    check_label_pool(s);
  }
}

std::size_t MembershipDataset::count(Pool pool) const {
  return static_cast<std::size_t>(
      std::count_if(samples_.begin(), samples_.end(), [&](const Sample& s) { return s.pool == pool; }));
}

MembershipDataset load_manifest(const fs::path& manifest_path, unsigned jobs) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open manifest " + manifest_path.string());
  const fs::path base = fs::absolute(manifest_path).parent_path();

  static const std::unordered_set<std::string> kAllowed = {"id", "image_path", "prompt", "pool", "label"};

  std::vector<Sample> samples;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::SchemaError, where + ": " + e.what());
    }
    if (!obj.is_object()) throw Error(ErrorCode::SchemaError, where + ": not a JSON object");
    for (const auto& [key, _] : obj.items()) {
      if (!kAllowed.contains(key)) throw Error(ErrorCode::SchemaError, where + ": unexpected key '" + key + "'");
    }
    for (const char* key : {"id", "image_path", "prompt", "pool"}) {
      if (!obj.contains(key) || !obj[key].is_string()) {
        throw Error(ErrorCode::SchemaError, where + ": missing or non-string '" + key + "'");
      }
    }
    Sample s;
    s.id = obj["id"].get<std::string>();
    s.prompt = obj["prompt"].get<std::string>();
    try {
      s.pool = parse_pool(obj["pool"].get<std::string>());
    } catch (const Error&) {
      throw Error(ErrorCode::SchemaError, where + ": invalid pool");
    }
    if (obj.contains("label") && !obj["label"].is_null()) {
      if (!obj["label"].is_boolean()) throw Error(ErrorCode::SchemaError, where + ": label must be boolean");
      s.label = obj["label"].get<bool>();
    }
    s.image_path = (base / obj["image_path"].get<std::string>()).lexically_normal();
    if (!seen.insert(s.id).second) throw Error(ErrorCode::DuplicateId, s.id);
    check_label_pool(s);
    samples.push_back(std::move(s));
  }

  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    Sample& s = samples[i];
    std::vector<std::uint8_t> bytes;
    try {
      bytes = read_binary(s.image_path);
    } catch (const Error&) {
      throw Error(ErrorCode::MissingImage, s.id);
    }
    try {
      s.image = decode_png(bytes);
    } catch (const Error& e) {
      throw Error(ErrorCode::ShapeError, s.id + ": " + e.detail());
    }
  });

  return MembershipDataset(std::move(samples), manifest_path);
}

void write_manifest(const fs::path& manifest_path, const MembershipDataset& dataset) {
  const fs::path base = fs::absolute(manifest_path).parent_path();
  fs::create_directories(base);
  std::ostringstream out;
  for (const auto& s : dataset) {
    fs::path image_path = s.image_path;
    if (image_path.empty()) {
      image_path = base / (manifest_path.stem().string() + "_images") / (s.id + ".png");
      write_png(image_path, s.image);
    }
    json obj;
    obj["id"] = s.id;
    obj["image_path"] = fs::absolute(image_path).lexically_relative(base).generic_string();
    obj["prompt"] = s.prompt;
    obj["pool"] = std::string(to_string(s.pool));
    if (s.label) obj["label"] = *s.label;
    out << obj.dump() << '\n';
  }
  write_file(manifest_path, out.str());
}

MembershipDataset sample_balanced(const MembershipDataset& dataset, std::size_t n_per_pool,
                                  std::uint64_t seed) {
  std::vector<std::size_t> members, nonmembers;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    auto m = dataset[i].membership();
    if (!m) continue;
    (*m ? members : nonmembers).push_back(i);
  }
  if (members.size() < n_per_pool) {
    throw Error(ErrorCode::InsufficientPool, "member_pool: have " + std::to_string(members.size()) +
                                                 ", need " + std::to_string(n_per_pool));
  }
  if (nonmembers.size() < n_per_pool) {
    throw Error(ErrorCode::InsufficientPool, "nonmember_pool: have " + std::to_string(nonmembers.size()) +
                                                 ", need " + std::to_string(n_per_pool));
  }
  Rng rng(seed);
  rng.shuffle(members);
  rng.shuffle(nonmembers);
  std::vector<std::size_t> chosen(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_per_pool));
  chosen.insert(chosen.end(), nonmembers.begin(), nonmembers.begin() + static_cast<std::ptrdiff_t>(n_per_pool));
  std::sort(chosen.begin(), chosen.end());

  std::vector<Sample> out;
  out.reserve(chosen.size());
  for (std::size_t i : chosen) out.push_back(dataset[i]);
  return MembershipDataset(std::move(out), dataset.source_manifest());
}

}  // namespace mia
