#include "bodem/augment.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <limits>
#include <random>

#include "bodem/image_io.hpp"

namespace bodem {
namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Unbiased draw from [0, bound) by rejection; std::uniform_int_distribution is not
// specified bit-for-bit across standard libraries.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % bound;
}

int box_int(const nlohmann::json& box, const char* key) {
  const auto it = box.find(key);
  if (it == box.end() || !it->is_number_integer()) {
    throw AnnotationError(std::string("annotation box field '") + key + "' missing or not an integer");
  }
  return it->get<int>();
}

void write_json(const fs::path& path, const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw OutputError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw OutputError("short write to " + path.string());
}

}  // namespace

std::vector<AnnotatedImage> parse_annotations(const nlohmann::json& doc, const fs::path& base_dir) {
  if (!doc.is_array()) throw AnnotationError("annotation file must hold a JSON array");
  std::vector<AnnotatedImage> out;
  for (const auto& entry : doc) {
    if (!entry.is_object() || !entry.contains("image") || !entry["image"].is_string()) {
      throw AnnotationError("annotation entry lacks an 'image' string");
    }
    if (!entry.contains("boxes") || !entry["boxes"].is_array()) {
      throw AnnotationError("annotation entry lacks a 'boxes' array");
    }
    AnnotatedImage a;
    a.image = entry["image"].get<std::string>();
    const fs::path p(a.image);
    a.resolved = p.is_absolute() ? p : base_dir / p;
    a.raw_boxes = entry["boxes"];
    for (const auto& b : a.raw_boxes) {
      if (!b.is_object()) throw AnnotationError("annotation box is not an object");
      const int x1 = box_int(b, "x1"), y1 = box_int(b, "y1");
      const int x2 = box_int(b, "x2"), y2 = box_int(b, "y2");
      if (x1 < 0 || y1 < 0 || x1 >= x2 || y1 >= y2) {
        throw AnnotationError("invalid annotation box in " + a.image);
      }
      if (!b.contains("label") || !b["label"].is_string() || b["label"].get<std::string>().empty()) {
        throw AnnotationError("annotation box lacks a non-empty label in " + a.image);
      }
      a.boxes.emplace_back(Rect(x1, y1, x2, y2), b["label"].get<std::string>());
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<AnnotatedImage> load_annotations(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw AnnotationError("cannot open " + path.string());
  const auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw AnnotationError(path.string() + " is not valid JSON");
  return parse_annotations(doc, path.parent_path());
}

int plan_counts(int instances, int total) {
  if (instances < 1) throw PlanError("no target instances");
  if (total < 1) throw PlanError("total masked versions must be >= 1");
  return (total + instances - 1) / instances;
}

std::uint64_t instance_seed(std::uint64_t seed, const std::string& image, int instance) {
  return splitmix64(seed ^ splitmix64(fnv1a(image) ^ splitmix64(std::uint64_t(instance))));
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                    std::uint64_t seed) {
  k = std::min(k, n);
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + std::size_t(bounded(rng, n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

nlohmann::json generate_set(const std::vector<AnnotatedImage>& inputs, const AugmentPlan& plan,
                            const MaskGenConfig& cfg, const fs::path& out_dir,
                            AugmentSummary* summary) {
  cfg.validate();
  if (plan.total_per_image < 1) throw PlanError("total masked versions must be >= 1");

  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (ec) throw OutputError("cannot create " + (out_dir / "images").string() + ": " + ec.message());

  const auto is_target = [&](const BBox& b) {
    return plan.target_classes.empty() ||
           std::find(plan.target_classes.begin(), plan.target_classes.end(), *b.label) !=
               plan.target_classes.end();
  };

  AugmentSummary sum;
  nlohmann::json records = nlohmann::json::array();
  nlohmann::json shortfalls = nlohmann::json::array();
  nlohmann::json per_image = nlohmann::json::array();
  nlohmann::json out_annotations = nlohmann::json::array();

  for (std::size_t img_idx = 0; img_idx < inputs.size(); ++img_idx) {
    const AnnotatedImage& src = inputs[img_idx];
    ++sum.images;
    std::vector<int> targets;
    for (std::size_t i = 0; i < src.boxes.size(); ++i) {
      if (is_target(src.boxes[i])) targets.push_back(int(i));
    }
    if (targets.empty()) {
      spdlog::warn("{}: no target instances, skipped", src.image);
      ++sum.skipped_images;
      continue;
    }
    const int per_object = plan_counts(int(targets.size()), plan.total_per_image);
    per_image.push_back({{"source", src.image}, {"instances", targets.size()}, {"per_object", per_object}});

    const Image img = load_image(src.resolved);
    const ImageDims dims{img.width(), img.height()};
    const std::string stem = fs::path(src.image).stem().string();

    for (int instance : targets) {
      ++sum.instances;
      const BBox& box = src.boxes[std::size_t(instance)];
      if (!img.bounds().contains(box.rect)) {
        throw AnnotationError("annotation box " + to_string(box.rect) + " outside " + src.image);
      }
      const auto areas = local_mask_areas(box.rect, dims, cfg);
      const std::uint64_t seed = instance_seed(plan.seed, src.image, instance);
      const auto picks = sample_without_replacement(areas.size(), std::size_t(per_object), seed);
      if (picks.size() < std::size_t(per_object)) {
        ++sum.shortfalls;
        shortfalls.push_back({{"source", src.image}, {"instance", instance},
                              {"requested", per_object}, {"available", areas.size()}});
      }
      for (std::size_t j = 0; j < picks.size(); ++j) {
        const Rect& area = areas[picks[j]];
        const std::string name = std::to_string(img_idx) + "_" + stem + "_obj" +
                                 std::to_string(instance) + "_m" + std::to_string(j) + ".png";
        const fs::path rel = fs::path("images") / name;
        try {
          write_image(apply_mask(img, area), out_dir / rel);
        } catch (const ImageIoError& e) {
          throw OutputError(e.what());
        }
        records.push_back({{"file", rel.generic_string()},
                           {"source", src.image},
                           {"instance", instance},
                           {"label", *box.label},
                           {"mask", {{"x1", area.x1}, {"y1", area.y1}, {"x2", area.x2}, {"y2", area.y2}}},
                           {"seed", seed}});
        out_annotations.push_back({{"image", rel.generic_string()}, {"boxes", src.raw_boxes}});
        ++sum.outputs;
      }
    }
  }

  nlohmann::json manifest{
      {"plan",
       {{"target_classes", plan.target_classes},
        {"total_per_image", plan.total_per_image},
        {"seed", plan.seed},
        {"margin", cfg.margin},
        {"min_subarea", cfg.min_subarea}}},
      {"images", per_image},
      {"outputs", records},
      {"shortfalls", shortfalls},
  };
  write_json(out_dir / "annotations.json", out_annotations);
  write_json(out_dir / "manifest.json", manifest);
  if (summary) *summary = sum;
  return manifest;
}

}  // namespace bodem
