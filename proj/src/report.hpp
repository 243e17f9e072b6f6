#pragma once

#include <optional>
#include <string>
#include <vector>

#include "facelift/scene.hpp"
#include "facelift/scene_io.hpp"

namespace facelift::detail {

struct GalleryItem {
  Json record;
  Scene original;
  Scene retrieved;
  std::optional<Scene> templ;
};

struct ReportInputs {
  std::string fingerprint;
  Json config;
  int gallery = 8;
  std::vector<std::string> missing;
  std::optional<Json> partition;
  std::optional<Json> augmentation;
  std::optional<Json> training;
  std::optional<Json> summary;
  std::optional<Json> regression;
  std::optional<Json> evaluation;
  std::optional<std::string> propensity_csv;
  std::vector<Json> records;
  std::vector<GalleryItem> items;
};

/// Self-contained HTML page (inline CSS and SVG). Output depends only on the inputs.
std::string render_report(const ReportInputs& in);

/// Hex colour used for an element in rasters and the legend.
const char* element_color(Element e);

}  // namespace facelift::detail
