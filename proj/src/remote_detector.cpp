#include <httplib.h>
#include <spdlog/spdlog.h>

#include <thread>

#include "bodem/detector.hpp"
#include "bodem/image_io.hpp"
#include "bodem/wire.hpp"

namespace bodem {
namespace {

httplib::Client make_client(const std::string& host, const AdapterOptions& opts) {
  httplib::Client cli(host);
  const auto secs = opts.timeout.count() / 1000;
  const auto usecs = (opts.timeout.count() % 1000) * 1000;
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  return cli;
}

}  // namespace

RemoteDetector::RemoteDetector(std::string base_url, AdapterOptions opts)
    : base_url_(std::move(base_url)), opts_(opts) {
  const auto scheme_end = base_url_.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("detector URL lacks a scheme");
  const auto path_start = base_url_.find('/', scheme_end + 3);
  host_ = base_url_.substr(0, path_start);
  if (path_start != std::string::npos) prefix_ = base_url_.substr(path_start);
  while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
}

bool RemoteDetector::healthy() const {
  auto cli = make_client(host_, opts_);
  auto res = cli.Get(prefix_ + "/health");
  return res && res->status == 200 && res->body == "ok";
}

std::vector<RawBox> RemoteDetector::detect_raw(const Image& img) {
  const auto png = encode_png(img);
  const std::string body(png.begin(), png.end());
  const std::string path = prefix_ + "/detect";

  DetectorError last(DetectorErrorKind::transport, "no attempt made");
  for (int attempt = 0; attempt <= opts_.retries; ++attempt) {
    if (attempt > 0) {
      spdlog::warn("retrying {} (attempt {}): {}", base_url_, attempt + 1, last.what());
      std::this_thread::sleep_for(opts_.backoff);
    }
    auto cli = make_client(host_, opts_);
    const auto started = std::chrono::steady_clock::now();
    auto res = cli.Post(path, body, "image/png");
    if (!res) {
      const auto err = res.error();
      const bool timed_out =
          err == httplib::Error::ConnectionTimeout ||
          (err == httplib::Error::Read &&
           std::chrono::steady_clock::now() - started >= opts_.timeout);
      last = DetectorError(timed_out ? DetectorErrorKind::timeout : DetectorErrorKind::transport,
                           base_url_ + ": " + httplib::to_string(err));
      continue;
    }
    if (res->status >= 500) {
      last = DetectorError(DetectorErrorKind::transport,
                           base_url_ + ": HTTP " + std::to_string(res->status));
      continue;
    }
    if (res->status != 200) {
      throw DetectorError(DetectorErrorKind::rejected,
                          base_url_ + ": HTTP " + std::to_string(res->status) + " " + res->body);
    }
    const auto json = nlohmann::json::parse(res->body, nullptr, false);
    if (json.is_discarded()) {
      throw DetectorError(DetectorErrorKind::malformed, base_url_ + ": response is not JSON");
    }
    return wire::parse_boxes(json);
  }
  throw last;
}

}  // namespace bodem
