#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bodem/core.hpp"
#include "bodem/maskgen.hpp"

namespace bodem {

class AnnotationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PlanError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Output directory could not be created or written.
class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AnnotatedImage {
  std::string image;               // as written in the annotation file
  std::filesystem::path resolved;  // image path relative to the annotation file
  std::vector<BBox> boxes;         // every box carries a non-empty label
  nlohmann::json raw_boxes;        // the annotation's "boxes" array, verbatim
};

/// Reads [{"image": path, "boxes": [{"x1","y1","x2","y2","label"}]}]. Relative image paths
/// resolve against the annotation file's directory.
std::vector<AnnotatedImage> load_annotations(const std::filesystem::path& path);
std::vector<AnnotatedImage> parse_annotations(const nlohmann::json& doc,
                                              const std::filesystem::path& base_dir);

struct AugmentPlan {
  std::vector<std::string> target_classes;  // empty: every label
  int total_per_image = 20;
  std::uint64_t seed = 0;
};

/// Masked versions per target instance: ceil(total / instances).
int plan_counts(int instances, int total);

/// Seed for one (image, instance) draw; independent of processing order.
std::uint64_t instance_seed(std::uint64_t seed, const std::string& image, int instance);

/// k distinct indices from [0, n), in draw order. Deterministic for a given seed on every
/// platform. k is capped at n.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                    std::uint64_t seed);

struct AugmentSummary {
  int images = 0;
  int skipped_images = 0;
  int instances = 0;
  int outputs = 0;
  int shortfalls = 0;
};

/// Writes one masked image per drawn local sub-area under out_dir/images, plus
/// out_dir/annotations.json and out_dir/manifest.json. Returns the manifest.
nlohmann::json generate_set(const std::vector<AnnotatedImage>& inputs, const AugmentPlan& plan,
                            const MaskGenConfig& cfg, const std::filesystem::path& out_dir,
                            AugmentSummary* summary = nullptr);

}  // namespace bodem
