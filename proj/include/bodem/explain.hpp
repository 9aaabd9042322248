#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bodem/detector.hpp"
#include "bodem/heatmap.hpp"
#include "bodem/maskgen.hpp"

namespace bodem {

enum ExitCode : int {
  kExitOk = 0,
  kExitSelftestFailed = 1,
  kExitDetectorUnreachable = 2,
  kExitNoDetections = 3,
  kExitInvalidConfig = 4,
  kExitOutputUnwritable = 5,
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  std::string detector = "synthetic";
  AdapterOptions adapter;
  double iou_threshold = 0.8;
  bool dynamic = false;
  double threshold_step = 0.05;
  MaskGenConfig masks;
  std::optional<std::vector<int>> boxes;  // nullopt: every baseline detection
  int parallelism = 8;
  ColorMapSpec cmap;
  std::filesystem::path out_dir = "bodem_out";

  void validate() const;  // throws ConfigError
  /// Config echo for report.json. Execution-only settings (parallelism, output directory)
  /// are left out so reports from equivalent runs compare equal.
  nlohmann::json to_json() const;
};

/// "all", or a comma-separated list of detection indices.
std::optional<std::vector<int>> parse_box_selector(const std::string& text);
/// Comma-separated cell sizes; "" or "none" gives local-only mode.
std::vector<int> parse_cell_list(const std::string& text);

struct ExplainOutcome {
  int exit_code = kExitOk;
  std::string message;
  nlohmann::json report;
};

/// Full pipeline for one image: baseline detection, masks, inquiry, saliency, heatmaps.
/// Writes heatmap_<i>.png, saliency_<i>.csv, saliency_<i>.json and report.json to out_dir.
ExplainOutcome cmd_explain(const RunConfig& cfg, const std::filesystem::path& image_path);

}  // namespace bodem
