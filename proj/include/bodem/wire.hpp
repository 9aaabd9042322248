#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "bodem/core.hpp"
#include "bodem/detector.hpp"

namespace bodem::wire {

// {"boxes":[{"x1":int,"y1":int,"x2":int,"y2":int,"label":string?,"score":number?}, ...]}
// Throws DetectorError(malformed) on any schema violation.
std::vector<RawBox> parse_boxes(const nlohmann::json& body);
nlohmann::json boxes_to_json(std::span<const RawBox> boxes);
nlohmann::json box_to_json(const BBox& box);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace bodem::wire
