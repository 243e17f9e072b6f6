#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "facelift/rng.hpp"
#include "facelift/scene.hpp"

namespace testing {

using facelift::Element;
using facelift::Scene;

/// Fills cells in row-major order: the first n0 cells get e0, the next n1 get e1, ...
inline Scene striped(const std::string& id, int w, int h,
                     const std::vector<std::pair<Element, int>>& runs) {
  std::vector<std::uint8_t> labels;
  for (const auto& [e, n] : runs)
    for (int i = 0; i < n; ++i) labels.push_back(static_cast<std::uint8_t>(e));
  labels.resize(static_cast<std::size_t>(w) * h,
                labels.empty() ? 0 : labels.back());
  return Scene(id, w, h, std::move(labels));
}

inline Scene random_scene(const std::string& id, int w, int h, std::uint64_t seed) {
  facelift::Rng rng(seed);
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(w) * h);
  for (auto& l : labels) l = static_cast<std::uint8_t>(rng.below(facelift::kNumElements));
  return Scene(id, w, h, std::move(labels));
}

inline std::vector<std::uint8_t> cells(const Scene& s) {
  return {s.labels().begin(), s.labels().end()};
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("facelift_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::filesystem::path source_dir() { return FACELIFT_SOURCE_DIR; }

}  // namespace testing
