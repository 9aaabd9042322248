#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bodem/core.hpp"

namespace bodem {

enum class DetectorErrorKind {
  transport,  // unreachable, connection dropped, 5xx after the retry budget
  rejected,   // detector refused the request (4xx)
  malformed,  // response is not the expected JSON shape
  timeout,
};

const char* to_string(DetectorErrorKind kind);

class DetectorError : public std::runtime_error {
 public:
  DetectorError(DetectorErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  DetectorErrorKind kind() const { return kind_; }

 private:
  DetectorErrorKind kind_;
};

/// Box exactly as reported by a detector, before clamping to the image.
struct RawBox {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;
  std::optional<std::string> label;
  std::optional<double> score;

  friend bool operator==(const RawBox&, const RawBox&) = default;
};

/// A black-box object detector: image in, boxes out.
class Detector {
 public:
  virtual ~Detector() = default;

  virtual std::vector<RawBox> detect_raw(const Image& img) = 0;

  /// Adapters that cannot serve concurrent calls return true; the inquiry runner
  /// then probes them from a single worker.
  virtual bool single_flight() const { return false; }

  virtual std::string describe() const = 0;
};

/// Runs the detector and normalises its output: boxes are clamped to the image and
/// boxes left empty by clamping are dropped with a warning.
DetectionSet detect(Detector& detector, const Image& img);

enum class SyntheticMode { plain, strict };

/// Reference detector. Background is the color of pixel (0,0); every 4-connected
/// component of other pixels is one object, reported by its tight box, sorted by (y1, x1).
/// Strict mode drops components that are not a single color or cover fewer than 25 pixels.
DetectionSet synthetic_detect(const Image& img, SyntheticMode mode);

class SyntheticDetector final : public Detector {
 public:
  explicit SyntheticDetector(SyntheticMode mode = SyntheticMode::plain) : mode_(mode) {}
  std::vector<RawBox> detect_raw(const Image& img) override;
  std::string describe() const override;

 private:
  SyntheticMode mode_;
};

struct AdapterOptions {
  std::chrono::milliseconds timeout{30000};
  int retries = 2;
  std::chrono::milliseconds backoff{100};
};

/// {base}/detect over HTTP, PNG request body, JSON response.
class RemoteDetector final : public Detector {
 public:
  explicit RemoteDetector(std::string base_url, AdapterOptions opts = {});
  std::vector<RawBox> detect_raw(const Image& img) override;
  std::string describe() const override { return base_url_; }

  /// GET {base}/health; true when the service answers 200 "ok".
  bool healthy() const;

 private:
  std::string base_url_;
  std::string host_;    // scheme://host:port
  std::string prefix_;  // path prefix without trailing slash
  AdapterOptions opts_;
};

/// Long-lived child process speaking newline-delimited JSON on stdin/stdout.
class SubprocessDetector final : public Detector {
 public:
  explicit SubprocessDetector(std::string command, AdapterOptions opts = {});
  ~SubprocessDetector() override;
  SubprocessDetector(const SubprocessDetector&) = delete;
  SubprocessDetector& operator=(const SubprocessDetector&) = delete;

  std::vector<RawBox> detect_raw(const Image& img) override;
  bool single_flight() const override { return true; }
  std::string describe() const override { return "cmd:" + command_; }

 private:
  struct Process;
  std::string command_;
  AdapterOptions opts_;
  std::unique_ptr<Process> proc_;
};

/// "synthetic", "synthetic:strict", "http(s)://..." or "cmd:<shell command>".
/// Throws std::invalid_argument for anything else.
std::unique_ptr<Detector> make_detector(const std::string& spec, AdapterOptions opts = {});

}  // namespace bodem
