#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bodem/heatmap.hpp"

namespace bodem {

struct CriterionResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct SelftestOptions {
  ColorMapSpec cmap;
  std::filesystem::path work_dir;  // empty: a fresh directory under the system temp dir
  bool keep_work_dir = false;
};

/// Synthetic end-to-end scenarios covering mask generation, inquiry, saliency, rendering
/// and augmentation. Runs every scenario even when an earlier one fails.
std::vector<CriterionResult> run_selftest(const SelftestOptions& opts = {});

}  // namespace bodem
