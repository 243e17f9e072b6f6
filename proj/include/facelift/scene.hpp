#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace facelift {

inline constexpr int kNumElements = 12;

/// Segmentation labels, in code order 0..11.
enum class Element : std::uint8_t {
  Road = 0,
  Sky,
  Trees,
  Buildings,
  Poles,
  Signage,
  Pedestrians,
  Vehicles,
  Bicycles,
  Pavement,
  Fences,
  RoadMarkings,
};

std::string_view element_name(Element e);
std::optional<Element> element_from_name(std::string_view name);
constexpr int code(Element e) { return static_cast<int>(e); }

enum class TagCategory { Architectural, Walkable, Landmark, Natural };

std::string_view category_name(TagCategory c);
std::optional<TagCategory> category_from_name(std::string_view name);

struct SceneTag {
  std::string name;
  TagCategory category = TagCategory::Natural;
  double confidence = 0.0;

  bool operator==(const SceneTag&) const = default;
};

inline constexpr std::size_t kMaxTags = 5;

struct Provenance {
  enum class Kind { Original, Rotated, Translated, Synthetic };
  Kind kind = Kind::Original;
  double amount = 0.0;  // degrees when rotated, meters when translated

  bool operator==(const Provenance&) const = default;
};

std::string provenance_label(const Provenance& p);

class InvalidScene : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A labelled raster: one element code per cell, row-major.
class Scene {
 public:
  Scene() = default;
  Scene(std::string id, int width, int height, std::vector<std::uint8_t> labels,
        std::vector<SceneTag> tags = {}, Provenance provenance = {});

  /// Uniformly filled scene.
  static Scene filled(std::string id, int width, int height, Element e);

  const std::string& id() const { return id_; }
  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t cell_count() const { return labels_.size(); }
  std::span<const std::uint8_t> labels() const { return labels_; }
  const std::vector<SceneTag>& tags() const { return tags_; }
  const Provenance& provenance() const { return provenance_; }

  std::uint8_t at(int row, int col) const {
    return labels_[static_cast<std::size_t>(row) * width_ + col];
  }

  void set_id(std::string id) { id_ = std::move(id); }
  void set_tags(std::vector<SceneTag> tags);
  void set_provenance(Provenance p) { provenance_ = p; }

  bool operator==(const Scene&) const = default;

 private:
  std::string id_;
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> labels_;
  std::vector<SceneTag> tags_;
  Provenance provenance_;
};

/// Fraction of cells carrying each label.
struct ElementHistogram {
  std::array<double, kNumElements> fractions{};

  double operator[](Element e) const { return fractions[static_cast<std::size_t>(e)]; }
  double operator[](int c) const { return fractions[static_cast<std::size_t>(c)]; }
};

ElementHistogram element_histogram(const Scene& s);

/// Natural-log Shannon entropy; 0 log 0 is taken as 0.
double shannon_entropy(const ElementHistogram& h);

// ---------------------------------------------------------------------------
// Taxonomy and rule-based tagging

/// A tag fires when the summed fraction of `elements` reaches `min_fraction`
/// and every extra constraint holds. Its confidence is that summed fraction.
struct TagRule {
  std::string tag;
  std::vector<Element> elements;
  double min_fraction = 0.0;
  std::map<Element, double> require_min;
  std::map<Element, double> require_max;
  std::optional<double> min_complexity;
  std::optional<double> max_complexity;
};

class Taxonomy {
 public:
  Taxonomy() = default;
  Taxonomy(std::map<std::string, TagCategory> categories, std::vector<TagRule> rules);

  /// Built-in taxonomy: category table plus the default tagging rules.
  static const Taxonomy& standard();

  std::optional<TagCategory> category_of(std::string_view tag) const;
  const std::map<std::string, TagCategory>& categories() const { return categories_; }
  const std::vector<TagRule>& rules() const { return rules_; }

  /// Up to five highest-confidence tags; ties broken by tag name.
  std::vector<SceneTag> tag(const Scene& s) const;

 private:
  std::map<std::string, TagCategory> categories_;
  std::vector<TagRule> rules_;
};

// ---------------------------------------------------------------------------
// Hidden beauty oracle (stands in for human raters; never seen by training)

struct OracleConfig {
  std::array<double, kNumElements> weights{};
  double entropy_penalty = 0.0;
  double noise_scale = 0.0;

  static OracleConfig standard();
};

/// Σ w_i p_i − penalty·H plus noise_scale·N(0,1) drawn from `seed`.
double oracle_score(const OracleConfig& o, const Scene& s, std::uint64_t seed);
double oracle_score_noise_free(const OracleConfig& o, const Scene& s);

// ---------------------------------------------------------------------------
// Corpus generation

struct CorpusConfig {
  int count = 1000;
  int width = 32;
  int height = 32;
  std::uint64_t seed = 1;
};

std::vector<Scene> generate_corpus(const CorpusConfig& cfg, const Taxonomy& taxonomy);

}  // namespace facelift
