#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "facelift/ranking.hpp"
#include "facelift/scene.hpp"

namespace facelift {

enum class AugmentationMode { None, Rotation, RotationPlusTranslation, RotationPlusConservativeTranslation };

std::string_view mode_name(AugmentationMode m);
AugmentationMode mode_from_name(std::string_view name);

struct AugmentationConfig {
  std::vector<double> angles = {-30.0, -15.0, 15.0, 30.0};
  std::vector<double> distances = {10.0, 20.0, 40.0, 60.0};
  AugmentationMode mode = AugmentationMode::RotationPlusConservativeTranslation;
  /// Per-cell relabel probability is distance / relabel_scale.
  double relabel_scale = 100.0;
  /// Chebyshev radius of the neighbourhood a relabelled cell samples from.
  int neighbor_radius = 24;

  void validate() const;
};

struct AugmentedScene {
  Scene scene;
  std::string parent;
  ClassLabel inherited_class = ClassLabel::Ugly;
  double similarity_to_parent = 0.0;
};

/// Panorama-style camera turn: cyclic column shift by round(θ/90·width).
/// Positive angles move content to the right. θ = 0 is rejected.
Scene rotate(const Scene& s, double degrees);

/// Distance analog: each cell is relabelled with probability d/relabel_scale
/// to the label of a random cell in its neighbourhood. Tags are recomputed.
Scene translate(const Scene& s, double meters, std::uint64_t seed, const AugmentationConfig& cfg,
                const Taxonomy& taxonomy);

using FeatureExtractor = std::function<std::vector<double>(const Scene&)>;

/// 1 / (1 + ‖feat(a) − feat(b)‖₂).
double feature_similarity(const Scene& a, const Scene& b, const FeatureExtractor& extractor);
double feature_similarity(const std::vector<double>& fa, const std::vector<double>& fb);

struct FilterResult {
  std::vector<AugmentedScene> taken;
  std::vector<AugmentedScene> filtered;
  double threshold = 0.0;
};

/// Keeps translated scenes whose similarity is at least the median
/// similarity of the rotated set. Throws when `rotated` is empty.
FilterResult conservative_filter(std::vector<AugmentedScene> translated,
                                 const std::vector<AugmentedScene>& rotated);

double median(std::vector<double> values);

/// Per tag: fraction of taken scenes carrying it minus fraction of filtered
/// scenes carrying it.
std::map<std::string, double> propensity(const std::vector<AugmentedScene>& taken,
                                         const std::vector<AugmentedScene>& filtered);

/// Output of augmenting a labelled corpus.
struct CuratedCorpus {
  std::vector<AugmentedScene> rotated;
  std::vector<AugmentedScene> translated;  // every translated scene, before filtering
  FilterResult filter;
};

/// Rotates every labelled scene by every angle and translates it by every
/// distance, scoring each against its parent with `extractor`, then applies
/// the conservative filter. `labels` maps scene id to class.
CuratedCorpus augment(const std::vector<Scene>& labelled,
                      const std::map<std::string, ClassLabel>& labels,
                      const AugmentationConfig& cfg, const FeatureExtractor& extractor,
                      const Taxonomy& taxonomy, std::uint64_t seed);

/// Augmented scenes admitted to training under `mode` (originals excluded).
std::vector<const AugmentedScene*> training_additions(const CuratedCorpus& curated,
                                                      AugmentationMode mode);

/// Filter report CSV: id,parent,similarity,taken.
std::string filter_report_csv(const FilterResult& f, const std::string& fingerprint);

}  // namespace facelift
