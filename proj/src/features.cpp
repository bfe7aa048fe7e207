#include "mia/features.hpp"

#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cmath>
#include <csignal>

#include "json.hpp"
#include "mia/error.hpp"
#include "mia/imgmath.hpp"
#include "mia/util.hpp"

namespace mia {

using json = nlohmann::json;

double euclid(const FeatureEmbedding& a, const FeatureEmbedding& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "embedding dims " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double d = a.values[i] - b.values[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

FeatureEmbedding BuiltinExtractor::extract(const ImageBuf& image) {
  const ImageBuf small = imgmath::resize_bilinear(image, kSide, kSide);
  constexpr std::size_t cell = kSide / kGrid;
  constexpr double cell_n = static_cast<double>(cell * cell);

  std::vector<double> v;
  v.reserve(kDim);

  for (std::size_t gy = 0; gy < kGrid; ++gy) {
    for (std::size_t gx = 0; gx < kGrid; ++gx) {
      std::array<double, 3> sum{};
      for (std::size_t y = gy * cell; y < (gy + 1) * cell; ++y) {
        for (std::size_t x = gx * cell; x < (gx + 1) * cell; ++x) {
          for (std::size_t ch = 0; ch < 3; ++ch) sum[ch] += small.at(y, x, ch);
        }
      }
      for (double s : sum) v.push_back(s / cell_n / 255.0);
    }
  }

  std::array<std::array<double, kBins>, 3> hist{};
  for (std::size_t i = 0; i < small.area(); ++i) {
    for (std::size_t ch = 0; ch < 3; ++ch) {
      hist[ch][small.pixels()[i * 3 + ch] * kBins / 256] += 1.0;
    }
  }
  for (const auto& h : hist) {
    for (double count : h) v.push_back(count / static_cast<double>(small.area()));
  }

  for (std::size_t gy = 0; gy < kGrid; ++gy) {
    for (std::size_t gx = 0; gx < kGrid; ++gx) {
      std::array<double, cell * cell> lum{};
      std::size_t k = 0;
      for (std::size_t y = gy * cell; y < (gy + 1) * cell; ++y) {
        for (std::size_t x = gx * cell; x < (gx + 1) * cell; ++x) {
          lum[k++] = 0.299 * small.at(y, x, 0) + 0.587 * small.at(y, x, 1) + 0.114 * small.at(y, x, 2);
        }
      }
      double mean = 0.0;
      for (double l : lum) mean += l;
      mean /= cell_n;
      double var = 0.0;
      for (double l : lum) var += (l - mean) * (l - mean);
      var /= cell_n;
      v.push_back(std::sqrt(var) / 255.0);
    }
  }

  v.resize(kDim, 0.0);
  return {std::move(v), id()};
}

FeatureEmbedding extract_builtin(const ImageBuf& image) { return BuiltinExtractor{}.extract(image); }

SidecarExtractor::SidecarExtractor(std::vector<std::string> command, std::size_t expected_dim)
    : command_(std::move(command)) {
  if (command_.empty()) throw Error(ErrorCode::SidecarUnavailable, "empty sidecar command");

  int in_pair[2];
  int out_pair[2];
  if (socketpair(AF_UNIX, SOCK_STREAM, 0, in_pair) != 0 || socketpair(AF_UNIX, SOCK_STREAM, 0, out_pair) != 0) {
    throw Error(ErrorCode::SidecarUnavailable, "socketpair failed");
  }
  std::vector<char*> argv;
  for (auto& arg : command_) argv.push_back(arg.data());
  argv.push_back(nullptr);

  pid_ = fork();
  if (pid_ < 0) throw Error(ErrorCode::SidecarUnavailable, "fork failed");
  if (pid_ == 0) {
    dup2(in_pair[1], STDIN_FILENO);
    dup2(out_pair[1], STDOUT_FILENO);
    close(in_pair[0]);
    close(in_pair[1]);
    close(out_pair[0]);
    close(out_pair[1]);
    execvp(argv[0], argv.data());
    _exit(127);
  }
  close(in_pair[1]);
  close(out_pair[1]);
  to_child_ = in_pair[0];
  from_child_ = out_pair[0];

  json reply;
  try {
    reply = json::parse(roundtrip(R"({"op":"hello"})"));
  } catch (const json::exception& e) {
    shutdown();
    throw Error(ErrorCode::ProtocolError, std::string("bad handshake: ") + e.what());
  } catch (...) {
    shutdown();
    throw;
  }
  if (!reply.value("ok", false) || !reply.contains("dim")) {
    shutdown();
    throw Error(ErrorCode::ProtocolError, "handshake rejected: " + reply.dump());
  }
  dim_ = reply["dim"].get<std::size_t>();
  extractor_id_ = reply.value("extractor_id", std::string("sidecar"));
  if (dim_ != expected_dim) {
    shutdown();
    throw Error(ErrorCode::DimensionMismatch,
                "sidecar reports dim " + std::to_string(dim_) + ", expected " + std::to_string(expected_dim));
  }
}

SidecarExtractor::~SidecarExtractor() { shutdown(); }

void SidecarExtractor::shutdown() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    // Closing stdin ends a well-behaved sidecar; don't wait on one that ignores it.
    for (int i = 0; i < 50; ++i) {
      if (waitpid(pid_, &status, WNOHANG) != 0) {
        pid_ = -1;
        return;
      }
      usleep(10000);
    }
    kill(pid_, SIGKILL);
    waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

std::string SidecarExtractor::roundtrip(const std::string& request_line) {
  if (to_child_ < 0) throw Error(ErrorCode::SidecarUnavailable, "sidecar closed");
  std::string msg = request_line + "\n";
  std::size_t sent = 0;
  while (sent < msg.size()) {
    ssize_t n = send(to_child_, msg.data() + sent, msg.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(ErrorCode::SidecarUnavailable, "write to sidecar failed");
    sent += static_cast<std::size_t>(n);
  }
  for (;;) {
    auto nl = read_buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = read_buffer_.substr(0, nl);
      read_buffer_.erase(0, nl + 1);
      return line;
    }
    char buf[65536];
    ssize_t n = recv(from_child_, buf, sizeof(buf), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(ErrorCode::SidecarUnavailable, "sidecar closed its output");
    read_buffer_.append(buf, static_cast<std::size_t>(n));
  }
}

FeatureEmbedding SidecarExtractor::extract(const ImageBuf& image) {
  json request = {{"op", "embed"}, {"png_b64", base64_encode(encode_png(image))}};
  std::string line;
  {
    std::lock_guard lock(mutex_);
    line = roundtrip(request.dump());
  }
  json reply;
  try {
    reply = json::parse(line);
  } catch (const json::exception&) {
    throw Error(ErrorCode::ProtocolError, line.substr(0, 200));
  }
  if (!reply.value("ok", false)) {
    throw Error(ErrorCode::ProtocolError, reply.value("error", std::string("sidecar error")));
  }
  if (!reply.contains("values") || !reply["values"].is_array()) {
    throw Error(ErrorCode::ProtocolError, "reply without values");
  }
  FeatureEmbedding out;
  out.extractor_id = extractor_id_;
  out.values = reply["values"].get<std::vector<double>>();
  if (out.dim() != dim_) {
    throw Error(ErrorCode::DimensionMismatch,
                "expected " + std::to_string(dim_) + " values, got " + std::to_string(out.dim()));
  }
  for (double v : out.values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::ProtocolError, "non-finite embedding value");
  }
  return out;
}

FeatureEmbedding extract_external(SidecarExtractor& sidecar, const ImageBuf& image) {
  return sidecar.extract(image);
}

}  // namespace mia
