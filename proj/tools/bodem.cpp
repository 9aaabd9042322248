// bodem: black-box saliency explanations for object detectors.
//
//   bodem explain IMAGE [--detector SPEC] [--out DIR] ...
//   bodem augment ANNOTATIONS --out DIR [--classes A,B] [--per-image N] [--seed S]
//   bodem selftest

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>

#include "bodem/augment.hpp"
#include "bodem/explain.hpp"
#include "bodem/image_io.hpp"
#include "bodem/selftest.hpp"

namespace {

using namespace bodem;

const std::string kDefaultPalette = ColorMapSpec{}.to_string();

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, ',')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

struct ExplainArgs {
  std::string image;
  std::string detector;
  double iou_threshold = 0.8;
  bool dynamic = false;
  double step = 0.05;
  int margin = 5;
  int min_subarea = 20;
  std::string cells = "20,50";
  bool local_only = false;
  std::string boxes = "all";
  int parallel = 8;
  std::string palette = kDefaultPalette;
  double alpha = 0.4;
  std::string out = "bodem_out";
  long timeout_ms = 30000;
  int retries = 2;
};

int run_explain(const ExplainArgs& a) {
  RunConfig cfg;
  try {
    cfg.detector = a.detector;
    if (cfg.detector.empty()) {
      const char* env = std::getenv("BODEM_DETECTOR_URL");
      cfg.detector = env && *env ? env : "synthetic";
    }
    cfg.iou_threshold = a.iou_threshold;
    cfg.dynamic = a.dynamic;
    cfg.threshold_step = a.step;
    cfg.masks.margin = a.margin;
    cfg.masks.min_subarea = a.min_subarea;
    cfg.masks.global_cells = a.local_only ? std::vector<int>{} : parse_cell_list(a.cells);
    cfg.boxes = parse_box_selector(a.boxes);
    cfg.parallelism = a.parallel;
    cfg.cmap = ColorMapSpec::parse(a.palette, a.alpha);
    cfg.out_dir = a.out;
    cfg.adapter.timeout = std::chrono::milliseconds(a.timeout_ms);
    cfg.adapter.retries = a.retries;
  } catch (const std::invalid_argument& e) {
    std::cerr << "bodem explain: invalid config: " << e.what() << '\n';
    return kExitInvalidConfig;
  }
  const auto outcome = cmd_explain(cfg, a.image);
  if (outcome.exit_code != kExitOk) {
    std::cerr << "bodem explain: " << outcome.message << '\n';
  } else {
    std::cout << outcome.message << " -> " << cfg.out_dir.string() << '\n';
  }
  return outcome.exit_code;
}

struct AugmentArgs {
  std::string annotations;
  std::string out;
  std::string classes;
  int per_image = 20;
  std::uint64_t seed = 0;
  int margin = 5;
  int min_subarea = 20;
};

int run_augment(const AugmentArgs& a) {
  AugmentPlan plan;
  plan.target_classes = split_csv(a.classes);
  plan.total_per_image = a.per_image;
  plan.seed = a.seed;
  MaskGenConfig cfg;
  cfg.margin = a.margin;
  cfg.min_subarea = a.min_subarea;
  try {
    cfg.validate();
    if (plan.total_per_image < 1) throw PlanError("--per-image must be >= 1");
    const auto inputs = load_annotations(a.annotations);
    AugmentSummary s;
    generate_set(inputs, plan, cfg, a.out, &s);
    if (s.outputs == 0) spdlog::warn("no instances of the target classes; no images written");
    std::cout << "images " << s.images << ", skipped " << s.skipped_images << ", instances "
              << s.instances << ", outputs " << s.outputs << ", shortfalls " << s.shortfalls << '\n';
    return kExitOk;
  } catch (const OutputError& e) {
    std::cerr << "bodem augment: " << e.what() << '\n';
    return kExitOutputUnwritable;
  } catch (const std::exception& e) {
    std::cerr << "bodem augment: " << e.what() << '\n';
    return kExitInvalidConfig;
  }
}

int run_selftest_cmd(const std::string& palette, double alpha, const std::string& work, bool keep) {
  SelftestOptions opts;
  try {
    opts.cmap = ColorMapSpec::parse(palette, alpha);
  } catch (const std::invalid_argument& e) {
    std::cerr << "bodem selftest: invalid palette: " << e.what() << '\n';
    return kExitInvalidConfig;
  }
  opts.work_dir = work;
  opts.keep_work_dir = keep;
  bool all = true;
  for (const auto& r : run_selftest(opts)) {
    std::cout << (r.passed ? "PASS" : "FAIL") << "  " << r.name << "  (" << r.seconds << " s)  "
              << r.detail << '\n';
    all = all && r.passed;
  }
  return all ? kExitOk : kExitSelftestFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Black-box saliency explanations for object detectors"};
  app.require_subcommand(1);

  ExplainArgs ex;
  auto* explain = app.add_subcommand("explain", "Explain every (or selected) detection in an image");
  explain->add_option("image", ex.image, "Input PNG")->required();
  explain->add_option("--detector", ex.detector,
                      "synthetic[:strict] | http://host:port | cmd:<command> "
                      "(default: $BODEM_DETECTOR_URL, else synthetic)");
  explain->add_option("--iou-threshold", ex.iou_threshold, "IOU threshold")->capture_default_str();
  explain->add_flag("--dynamic", ex.dynamic, "Raise the threshold until some mask registers a change");
  explain->add_option("--threshold-step", ex.step, "Dynamic threshold increment")->capture_default_str();
  explain->add_option("--margin", ex.margin, "Masking-area margin in pixels")->capture_default_str();
  explain->add_option("--min-subarea", ex.min_subarea, "Smallest divisible span")->capture_default_str();
  explain->add_option("--global-cells", ex.cells, "Global grid cell sizes, or 'none'")->capture_default_str();
  explain->add_flag("--local-only", ex.local_only, "Skip global masks");
  explain->add_option("--boxes", ex.boxes, "'all' or comma-separated detection indices")->capture_default_str();
  explain->add_option("--parallel", ex.parallel, "Concurrent detector queries")->capture_default_str();
  explain->add_option("--palette", ex.palette, "pos:r,g,b;... heatmap anchors")->capture_default_str();
  explain->add_option("--alpha", ex.alpha, "Heatmap overlay opacity")->capture_default_str();
  explain->add_option("--out", ex.out, "Output directory")->capture_default_str();
  explain->add_option("--timeout-ms", ex.timeout_ms, "Per-query detector timeout")->capture_default_str();
  explain->add_option("--retries", ex.retries, "Retries for remote transport failures")->capture_default_str();

  AugmentArgs aug;
  auto* augment = app.add_subcommand("augment", "Write a locally masked augmentation set");
  augment->add_option("annotations", aug.annotations, "Annotation JSON")->required();
  augment->add_option("--out", aug.out, "Output directory")->required();
  augment->add_option("--classes", aug.classes, "Target labels, comma-separated (default: all)");
  augment->add_option("--per-image", aug.per_image, "Masked versions per image")->capture_default_str();
  augment->add_option("--seed", aug.seed, "Sampling seed")->capture_default_str();
  augment->add_option("--margin", aug.margin, "Masking-area margin")->capture_default_str();
  augment->add_option("--min-subarea", aug.min_subarea, "Smallest divisible span")->capture_default_str();

  std::string st_palette = kDefaultPalette;
  double st_alpha = 0.4;
  std::string st_work;
  bool st_keep = false;
  auto* selftest = app.add_subcommand("selftest", "Run the built-in synthetic scenario suite");
  selftest->add_option("--palette", st_palette, "Palette used for rendering checks");
  selftest->add_option("--alpha", st_alpha, "Overlay opacity used for rendering checks");
  selftest->add_option("--work-dir", st_work, "Scratch directory");
  selftest->add_flag("--keep", st_keep, "Keep the scratch directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalidConfig;
  }

  if (explain->parsed()) return run_explain(ex);
  if (augment->parsed()) return run_augment(aug);
  if (selftest->parsed()) return run_selftest_cmd(st_palette, st_alpha, st_work, st_keep);
  return kExitInvalidConfig;
}
