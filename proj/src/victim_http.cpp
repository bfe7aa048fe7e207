#include <algorithm>
#include <regex>

#include "httplib.h"
#include "json.hpp"
#include "mia/error.hpp"
#include "mia/util.hpp"
#include "mia/victim.hpp"

namespace mia {

using json = nlohmann::json;

HttpOracle::HttpOracle(HttpOracleConfig config)
    : config_(std::move(config)), in_flight_(std::max<std::ptrdiff_t>(1, std::min<std::ptrdiff_t>(config_.max_in_flight, 1024))) {
  static const std::regex kUrl(R"(^https?://[^/]+$)");
  if (!std::regex_match(config_.base_url, kUrl)) {
    throw Error(ErrorCode::ConfigError, "oracle url must look like http://host:port, got '" + config_.base_url + "'");
  }
}

DiffusionTrace HttpOracle::query(const Sample& sample, const DiffusionParams& params, ThreatModel threat) {
  params.validate();
  const bool gray = threat == ThreatModel::gray_box;
  const json body = {{"image", base64_encode(encode_png(sample.image))},
                     {"prompt", sample.prompt},
                     {"steps", params.steps},
                     {"guidance", params.guidance},
                     {"strength", params.strength},
                     {"seed", params.seed},
                     {"return_intermediates", gray}};

  httplib::Result res;
  {
    in_flight_.acquire();
    struct Release {
      std::counting_semaphore<1024>& s;
      ~Release() { s.release(); }
    } release{in_flight_};
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(10);
    client.set_read_timeout(static_cast<time_t>(config_.timeout_seconds));
    client.set_write_timeout(60);
    res = client.Post("/v1/generate", body.dump(), "application/json");
  }
  if (!res) {
    throw Error(ErrorCode::OracleUnavailable, sample.id + ": " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::OracleUnavailable,
                sample.id + ": HTTP " + std::to_string(res->status) + " " + res->body.substr(0, 200));
  }

  json reply;
  try {
    reply = json::parse(res->body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ShapeError, sample.id + ": response is not JSON");
  }
  if (!reply.contains("frames") || !reply["frames"].is_array() || reply["frames"].empty()) {
    throw Error(ErrorCode::ShapeError, sample.id + ": response has no frames");
  }

  DiffusionTrace trace;
  trace.params = params;
  trace.threat = ThreatModel::gray_box;
  for (const auto& f : reply["frames"]) {
    if (!f.is_string()) throw Error(ErrorCode::ShapeError, sample.id + ": frame is not a string");
    try {
      trace.frames.push_back(decode_png(base64_decode(f.get<std::string>())));
    } catch (const Error& e) {
      throw Error(ErrorCode::ShapeError, sample.id + ": " + e.detail());
    }
  }

  if (gray) {
    if (trace.frames.size() < params.steps) {
      throw Error(ErrorCode::ThreatDowngrade, sample.id + ": asked for " + std::to_string(params.steps) +
                                                  " intermediate frames, got " +
                                                  std::to_string(trace.frames.size()));
    }
    if (trace.frames.size() > params.steps) {
      throw Error(ErrorCode::ShapeError, sample.id + ": more frames than steps");
    }
    return trace;
  }
  return DiffusionTrace{{trace.frames.back()}, params, ThreatModel::black_box};
}

}  // namespace mia
