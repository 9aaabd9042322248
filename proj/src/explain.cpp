#include "bodem/explain.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <fstream>
#include <sstream>

#include "bodem/image_io.hpp"
#include "bodem/inquiry.hpp"
#include "bodem/saliency.hpp"
#include "bodem/wire.hpp"

namespace bodem {
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(part, &used);
    } catch (const std::exception&) {
      throw ConfigError(std::string("bad ") + what + " '" + part + "'");
    }
    if (used != part.size()) throw ConfigError(std::string("bad ") + what + " '" + part + "'");
    out.push_back(v);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  out << text;
  if (!out) throw ImageIoError("cannot write " + path.string());
}

}  // namespace

void RunConfig::validate() const {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw ConfigError("IOU threshold must be in (0, 1]");
  }
  if (!(threshold_step > 0.0)) throw ConfigError("threshold step must be positive");
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  if (adapter.retries < 0) throw ConfigError("retries must be >= 0");
  if (adapter.timeout.count() <= 0) throw ConfigError("timeout must be positive");
  try {
    masks.validate();
    cmap.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (boxes) {
    if (boxes->empty()) throw ConfigError("box selector is empty");
    for (int i : *boxes) {
      if (i < 0) throw ConfigError("box indices must be >= 0");
    }
  }
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j{
      {"detector", detector},
      {"iou_threshold", iou_threshold},
      {"dynamic", dynamic},
      {"threshold_step", threshold_step},
      {"margin", masks.margin},
      {"min_subarea", masks.min_subarea},
      {"global_cells", masks.global_cells},
      {"palette", cmap.to_string()},
      {"alpha", cmap.alpha},
      {"timeout_ms", adapter.timeout.count()},
      {"retries", adapter.retries},
  };
  if (boxes) {
    j["boxes"] = *boxes;
  } else {
    j["boxes"] = "all";
  }
  return j;
}

std::optional<std::vector<int>> parse_box_selector(const std::string& text) {
  if (text.empty() || text == "all") return std::nullopt;
  return parse_int_list(text, "box index");
}

std::vector<int> parse_cell_list(const std::string& text) {
  if (text.empty() || text == "none") return {};
  return parse_int_list(text, "global cell size");
}

ExplainOutcome cmd_explain(const RunConfig& cfg, const fs::path& image_path) {
  const auto started = Clock::now();
  ExplainOutcome outcome;
  const auto fail = [&](int code, std::string msg) {
    outcome.exit_code = code;
    outcome.message = std::move(msg);
    return outcome;
  };

  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    return fail(kExitInvalidConfig, std::string("invalid config: ") + e.what());
  }

  Image img;
  try {
    img = load_image(image_path);
  } catch (const ImageIoError& e) {
    return fail(kExitInvalidConfig, e.what());
  }
  const ImageDims dims{img.width(), img.height()};

  std::unique_ptr<Detector> detector;
  try {
    detector = make_detector(cfg.detector, cfg.adapter);
  } catch (const DetectorError& e) {
    return fail(kExitDetectorUnreachable, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(kExitInvalidConfig, e.what());
  }
  if (auto* remote = dynamic_cast<RemoteDetector*>(detector.get()); remote && !remote->healthy()) {
    return fail(kExitDetectorUnreachable, "detector " + cfg.detector + " failed its health check");
  }

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) return fail(kExitOutputUnwritable, "cannot create " + cfg.out_dir.string() + ": " + ec.message());

  ImageInquiry inquiry(*detector, img, cfg.masks.global_cells, cfg.parallelism);
  DetectionSet baseline;
  try {
    baseline = inquiry.baseline();
  } catch (const DetectorError& e) {
    return fail(kExitDetectorUnreachable, e.what());
  }
  if (baseline.empty()) return fail(kExitNoDetections, "no objects detected in " + image_path.string());

  std::vector<int> selected;
  if (cfg.boxes) {
    for (int i : *cfg.boxes) {
      if (std::size_t(i) >= baseline.size()) {
        return fail(kExitInvalidConfig, "box index " + std::to_string(i) + " out of range (" +
                                            std::to_string(baseline.size()) + " detections)");
      }
    }
    selected = *cfg.boxes;
  } else {
    for (std::size_t i = 0; i < baseline.size(); ++i) selected.push_back(int(i));
  }

  const ThresholdSchedule schedule{cfg.iou_threshold, cfg.threshold_step, 1.0};
  nlohmann::json explained = nlohmann::json::array();
  nlohmann::json per_box_seconds = nlohmann::json::array();

  for (int index : selected) {
    const auto box_started = Clock::now();
    const BBox& b = baseline[std::size_t(index)];
    const auto local = local_masks(b.rect, dims, cfg.masks);
    InquiryResult result;
    try {
      result = inquiry.for_box(local);
    } catch (const DetectorError& e) {
      return fail(kExitDetectorUnreachable, "box " + std::to_string(index) + ": " + e.what());
    }
    std::vector<MaskSpec> masks = local;
    masks.insert(masks.end(), inquiry.global_masks().begin(), inquiry.global_masks().end());

    DynamicEstimate<double> est;
    if (cfg.dynamic) {
      est = estimate_dynamic<double>(b, masks, result, dims, schedule);
    } else {
      est.threshold_used = cfg.iou_threshold;
      est.map = estimate<double>(b, masks, result, dims, cfg.iou_threshold);
    }
    const double peak = est.map.values.maxCoeff();
    const auto sm = normalize(est.map);

    const std::string suffix = std::to_string(index);
    const nlohmann::json box_json = wire::box_to_json(b);
    try {
      render_explanation(img, b, sm, cfg.cmap, cfg.out_dir / ("heatmap_" + suffix + ".png"));
      std::ostringstream csv;
      write_csv(sm, csv);
      write_text(cfg.out_dir / ("saliency_" + suffix + ".csv"), csv.str());
      const nlohmann::json sidecar{
          {"box", box_json}, {"threshold_used", est.threshold_used}, {"normalized", sm.normalized}};
      write_text(cfg.out_dir / ("saliency_" + suffix + ".json"), sidecar.dump(2) + "\n");
    } catch (const ImageIoError& e) {
      return fail(kExitOutputUnwritable, e.what());
    }

    explained.push_back({{"index", index},
                         {"box", box_json},
                         {"threshold_used", est.threshold_used},
                         {"local_masks", local.size()},
                         {"query_count", result.query_count},
                         {"peak_saliency", peak}});
    per_box_seconds.push_back(seconds_since(box_started));
  }

  nlohmann::json globals = nlohmann::json::object();
  for (const MaskSpec& m : inquiry.global_masks()) {
    auto& count = globals[std::to_string(*m.global_cell)];
    count = count.is_null() ? 1 : count.get<int>() + 1;
  }
  nlohmann::json detections = nlohmann::json::array();
  for (const BBox& b : baseline) detections.push_back(wire::box_to_json(b));

  outcome.report = {
      {"config", cfg.to_json()},
      {"image", {{"path", image_path.generic_string()}, {"width", dims.width}, {"height", dims.height}}},
      {"detections", detections},
      {"explained", explained},
      {"global_masks", globals},
      {"query_count", inquiry.query_count()},
      {"runtime",
       {{"parallelism", cfg.parallelism},
        {"wall_seconds", seconds_since(started)},
        {"per_box_seconds", per_box_seconds}}},
  };
  try {
    write_text(cfg.out_dir / "report.json", outcome.report.dump(2) + "\n");
  } catch (const ImageIoError& e) {
    return fail(kExitOutputUnwritable, e.what());
  }
  outcome.message = "explained " + std::to_string(selected.size()) + " box(es), " +
                    std::to_string(inquiry.query_count()) + " detector queries";
  return outcome;
}

}  // namespace bodem
