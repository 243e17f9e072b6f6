#include "facelift/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

#include "facelift/rng.hpp"

namespace facelift {

namespace {

constexpr std::array<std::string_view, kNumElements> kElementNames = {
    "road",    "sky",         "trees",    "buildings", "poles",  "signage",
    "pedestrians", "vehicles", "bicycles", "pavement",  "fences", "road markings",
};

constexpr std::array<std::string_view, 4> kCategoryNames = {
    "Architectural", "Walkable", "Landmark", "Natural"};

}  // namespace

std::string_view element_name(Element e) {
  return kElementNames[static_cast<std::size_t>(e)];
}

std::optional<Element> element_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kElementNames.size(); ++i) {
    if (kElementNames[i] == name) return static_cast<Element>(i);
  }
  return std::nullopt;
}

std::string_view category_name(TagCategory c) {
  return kCategoryNames[static_cast<std::size_t>(c)];
}

std::optional<TagCategory> category_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
    if (kCategoryNames[i] == name) return static_cast<TagCategory>(i);
  }
  return std::nullopt;
}

std::string provenance_label(const Provenance& p) {
  char buf[64];
  switch (p.kind) {
    case Provenance::Kind::Original:
      return "original";
    case Provenance::Kind::Synthetic:
      return "synthetic";
    case Provenance::Kind::Rotated:
      std::snprintf(buf, sizeof buf, "rotated(%g)", p.amount);
      return buf;
    case Provenance::Kind::Translated:
      std::snprintf(buf, sizeof buf, "translated(%g)", p.amount);
      return buf;
  }
  return "original";
}

// ---------------------------------------------------------------------------

Scene::Scene(std::string id, int width, int height, std::vector<std::uint8_t> labels,
             std::vector<SceneTag> tags, Provenance provenance)
    : id_(std::move(id)),
      width_(width),
      height_(height),
      labels_(std::move(labels)),
      provenance_(provenance) {
  if (width_ <= 0 || height_ <= 0) {
    throw InvalidScene("scene '" + id_ + "': dimensions must be positive");
  }
  if (labels_.size() != static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_)) {
    throw InvalidScene("scene '" + id_ + "': label grid length " +
                       std::to_string(labels_.size()) + " != width*height");
  }
  for (const auto c : labels_) {
    if (c >= kNumElements) {
      throw InvalidScene("scene '" + id_ + "': label code " + std::to_string(c) + " >= 12");
    }
  }
  set_tags(std::move(tags));
}

Scene Scene::filled(std::string id, int width, int height, Element e) {
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(std::max(height, 0));
  return Scene(std::move(id), width, height, std::vector<std::uint8_t>(n, code(e)));
}

void Scene::set_tags(std::vector<SceneTag> tags) {
  if (tags.size() > kMaxTags) {
    throw InvalidScene("scene '" + id_ + "': more than 5 tags");
  }
  tags_ = std::move(tags);
}

ElementHistogram element_histogram(const Scene& s) {
  std::array<std::size_t, kNumElements> counts{};
  for (const auto c : s.labels()) ++counts[c];
  ElementHistogram h;
  const auto n = static_cast<double>(s.cell_count());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    h.fractions[i] = static_cast<double>(counts[i]) / n;
  }
  return h;
}

double shannon_entropy(const ElementHistogram& h) {
  double total = 0.0;
  for (const double p : h.fractions) {
    if (p > 0.0) total -= p * std::log(p);
  }
  return total;
}

// ---------------------------------------------------------------------------

Taxonomy::Taxonomy(std::map<std::string, TagCategory> categories, std::vector<TagRule> rules)
    : categories_(std::move(categories)), rules_(std::move(rules)) {
  for (const auto& r : rules_) {
    if (!categories_.contains(r.tag)) {
      throw std::invalid_argument("tag rule '" + r.tag + "' names a tag missing from the taxonomy");
    }
    if (r.elements.empty()) {
      throw std::invalid_argument("tag rule '" + r.tag + "' has no elements");
    }
  }
}

std::optional<TagCategory> Taxonomy::category_of(std::string_view tag) const {
  const auto it = categories_.find(std::string(tag));
  if (it == categories_.end()) return std::nullopt;
  return it->second;
}

std::vector<SceneTag> Taxonomy::tag(const Scene& s) const {
  const auto hist = element_histogram(s);
  const double h = shannon_entropy(hist);
  std::vector<SceneTag> fired;
  for (const auto& rule : rules_) {
    double conf = 0.0;
    for (const auto e : rule.elements) conf += hist[e];
    if (conf < rule.min_fraction) continue;
    bool ok = true;
    for (const auto& [e, lo] : rule.require_min) ok = ok && hist[e] >= lo;
    for (const auto& [e, hi] : rule.require_max) ok = ok && hist[e] <= hi;
    if (rule.min_complexity) ok = ok && h >= *rule.min_complexity;
    if (rule.max_complexity) ok = ok && h <= *rule.max_complexity;
    if (!ok) continue;
    fired.push_back({rule.tag, categories_.at(rule.tag), conf});
  }
  std::sort(fired.begin(), fired.end(), [](const SceneTag& a, const SceneTag& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.name < b.name;
  });
  if (fired.size() > kMaxTags) fired.resize(kMaxTags);
  return fired;
}

const Taxonomy& Taxonomy::standard() {
  static const Taxonomy taxonomy = [] {
    using C = TagCategory;
    std::map<std::string, TagCategory> cats;
    const auto add = [&](C c, std::initializer_list<const char*> names) {
      for (const char* n : names) cats.emplace(n, c);
    };
    add(C::Architectural,
        {"Apartment building", "Building Facade", "Construction Site", "Courthouse", "Drive way",
         "Door way", "Forest road", "Garbage dump", "Golf course", "Highway", "Hotel", "Inn",
         "Ice skating rink", "Motel", "Office building", "Parking Lot", "Railroad track",
         "Residential neighbourhood", "Restaurant", "Runway", "School House", "Skyscraper", "Slum",
         "Supermarket", "Outdoor swimming pool", "Tower", "Water tower", "Wind farm"});
    add(C::Walkable,
        {"Abbey", "Alley", "Boardwalk", "Botanical Garden", "Corridor", "Cottage garden",
         "Courtyard", "Crosswalk", "Fairway", "Food court", "Forest path", "Formal Garden",
         "Herb Garden", "Outdoor Market", "Nursery", "Patio", "Pavilion", "Picnic area",
         "Playground", "Plaza", "Shopfront", "Topiary garden", "Tree farm", "Veranda",
         "Vegetable garden", "Yard"});
    add(C::Landmark,
        {"Airport", "Amphitheatre", "Amusement Park", "Arch", "Baseball Field", "Basilica",
         "Bridge", "Castle", "Wind mill", "Cathedral", "Church", "Dam", "Dock", "Cemetery",
         "Fire station", "Fountain", "Gas Station", "Harbour", "Hospital", "Lighthouse",
         "Mansion", "Mausoleum", "Pagoda", "Palace", "Racecourse", "Ruin", "Rope Bridge",
         "Ski Resort", "Baseball stadium", "Football stadium", "Subway Station", "Train Station",
         "Temple"});
    add(C::Natural,
        {"Badlands", "Bamboo Forest", "Canyon", "Coast", "Corn field", "Creek", "Desert (Sand)",
         "Field (cultivated)", "Field (wild)", "Mountain", "Snowy Mountain", "Ocean", "Orchard",
         "Pond", "Rainforest", "Rice paddy", "River", "Rock arch", "Sand bar", "Sea Cliff",
         "Ski slope", "Sky", "Snow field", "Swamp", "Valley", "Wheat field",
         "Desert (vegetation)"});

    using E = Element;
    std::vector<TagRule> rules;
    const auto rule = [&](std::string tag, std::vector<E> els, double min) -> TagRule& {
      rules.push_back(TagRule{std::move(tag), std::move(els), min, {}, {}, {}, {}});
      return rules.back();
    };
    // Walkable
    rule("Botanical Garden", {E::Trees, E::Pedestrians}, 0.38).require_min = {{E::Pedestrians, 0.004}};
    rule("Forest path", {E::Trees, E::Pavement}, 0.45).require_min = {{E::Pavement, 0.05}};
    rule("Yard", {E::Trees, E::Pavement}, 0.30).require_max = {{E::Vehicles, 0.02}};
    rule("Plaza", {E::Pavement, E::Pedestrians}, 0.13);
    rule("Picnic area", {E::Trees}, 0.30).max_complexity = 1.55;
    rule("Courtyard", {E::Pavement, E::Buildings}, 0.30).require_min = {{E::Pavement, 0.08}};
    rule("Cottage garden", {E::Trees, E::Bicycles}, 0.25).require_min = {{E::Bicycles, 0.002}};
    rule("Shopfront", {E::Buildings, E::Signage}, 0.35).require_min = {{E::Signage, 0.02}};
    // Architectural
    rule("Highway", {E::Road, E::Vehicles, E::RoadMarkings}, 0.30);
    rule("Parking Lot", {E::Vehicles}, 0.06);
    rule("Skyscraper", {E::Buildings}, 0.45);
    rule("Office building", {E::Buildings, E::Signage}, 0.30).require_min = {{E::Signage, 0.01}};
    rule("Apartment building", {E::Buildings}, 0.28);
    auto& resid = rule("Residential neighbourhood", {E::Buildings, E::Trees}, 0.40);
    resid.require_min = {{E::Buildings, 0.12}, {E::Trees, 0.12}};
    resid.min_complexity = 1.5;
    // Landmark
    auto& bridge = rule("Bridge", {E::Road, E::Sky}, 0.65);
    bridge.max_complexity = 1.45;
    rule("Tower", {E::Buildings, E::Sky}, 0.60).require_min = {{E::Sky, 0.3}};
    rule("Fountain", {E::Pavement, E::Pedestrians}, 0.10).require_min = {{E::Pedestrians, 0.01}};
    // Natural
    rule("Sky", {E::Sky}, 0.40).max_complexity = 1.45;
    rule("Field (wild)", {E::Trees, E::Sky}, 0.70).max_complexity = 1.35;
    rule("Orchard", {E::Trees}, 0.48);
    rule("Valley", {E::Trees, E::Sky}, 0.55).require_min = {{E::Sky, 0.2}, {E::Trees, 0.2}};
    return Taxonomy(std::move(cats), std::move(rules));
  }();
  return taxonomy;
}

// ---------------------------------------------------------------------------

OracleConfig OracleConfig::standard() {
  OracleConfig o;
  o.weights = {
      -1.0,  // road
      -0.4,  // sky
      +1.6,  // trees
      -0.5,  // buildings
      -0.8,  // poles
      -1.0,  // signage
      +1.0,  // pedestrians
      -2.0,  // vehicles
      +0.8,  // bicycles
      +1.2,  // pavement
      -0.4,  // fences
      -0.8,  // road markings
  };
  o.entropy_penalty = 0.15;
  o.noise_scale = 0.15;
  return o;
}

double oracle_score_noise_free(const OracleConfig& o, const Scene& s) {
  const auto h = element_histogram(s);
  double score = 0.0;
  for (std::size_t i = 0; i < h.fractions.size(); ++i) score += o.weights[i] * h.fractions[i];
  return score - o.entropy_penalty * shannon_entropy(h);
}

double oracle_score(const OracleConfig& o, const Scene& s, std::uint64_t seed) {
  const double base = oracle_score_noise_free(o, s);
  if (o.noise_scale == 0.0) return base;
  Rng rng(seed);
  return base + o.noise_scale * rng.normal();
}

// ---------------------------------------------------------------------------

namespace {

class Canvas {
 public:
  Canvas(int w, int h, Element fill)
      : w_(w), h_(h), cells_(static_cast<std::size_t>(w) * h, code(fill)) {}

  void put(int r, int c, Element e) {
    if (r < 0 || c < 0 || r >= h_ || c >= w_) return;
    cells_[static_cast<std::size_t>(r) * w_ + c] = code(e);
  }
  Element get(int r, int c) const {
    return static_cast<Element>(cells_[static_cast<std::size_t>(r) * w_ + c]);
  }
  void rect(int r0, int c0, int rows, int cols, Element e) {
    for (int r = r0; r < r0 + rows; ++r)
      for (int c = c0; c < c0 + cols; ++c) put(r, c, e);
  }
  int width() const { return w_; }
  int height() const { return h_; }
  std::vector<std::uint8_t> release() { return std::move(cells_); }

 private:
  int w_, h_;
  std::vector<std::uint8_t> cells_;
};

double clamp01(double x, double lo = 0.0, double hi = 1.0) { return std::clamp(x, lo, hi); }

// One street-like scene. `urban` in [0,1] moves the layout from leafy and
// pedestrian towards wide roads, tall buildings and street clutter.
std::vector<std::uint8_t> draw_scene(int w, int h, Rng& rng) {
  const double urban = rng.uniform();
  const double sky_frac = clamp01(0.12 + 0.30 * urban + rng.normal(0, 0.08), 0.02, 0.55);
  const double road_frac = clamp01(0.08 + 0.28 * urban + rng.normal(0, 0.05), 0.03, 0.45);
  const double pave_frac = clamp01(0.12 - 0.08 * urban + rng.normal(0, 0.03), 0.0, 0.20);
  const double green = clamp01(0.85 - 0.95 * urban + rng.normal(0, 0.22));
  const double clutter = clamp01(urban + rng.normal(0, 0.15));

  int sky_rows = static_cast<int>(std::lround(sky_frac * h));
  int road_rows = std::max(1, static_cast<int>(std::lround(road_frac * h)));
  int pave_rows = static_cast<int>(std::lround(pave_frac * h));
  while (sky_rows + road_rows + pave_rows > h - 2) {
    if (sky_rows > 1) --sky_rows;
    else if (pave_rows > 0) --pave_rows;
    else --road_rows;
  }
  const int road_top = h - road_rows;
  const int pave_top = road_top - pave_rows;

  Canvas cv(w, h, Element::Buildings);
  cv.rect(0, 0, sky_rows, w, Element::Sky);
  cv.rect(pave_top, 0, pave_rows, w, Element::Pavement);
  cv.rect(road_top, 0, road_rows, w, Element::Road);

  // Middle band: alternating runs of trees and buildings.
  for (int c = 0; c < w;) {
    const int run = std::min(w - c, rng.between(3, 8));
    if (rng.bernoulli(green)) {
      cv.rect(sky_rows, c, pave_top - sky_rows, run, Element::Trees);
      const int canopy = static_cast<int>(std::lround(rng.uniform(0.0, green) * sky_rows));
      cv.rect(sky_rows - canopy, c, canopy, run, Element::Trees);
    } else {
      // Tall buildings eat into the sky, short ones leave it above.
      const double height_bias = rng.uniform(-0.5, 1.0) * urban;
      const int delta = static_cast<int>(std::lround(height_bias * sky_rows));
      if (delta > 0) {
        cv.rect(sky_rows - delta, c, delta, run, Element::Buildings);
      } else if (delta < 0) {
        const int gap = std::min(-delta, std::max(0, pave_top - sky_rows - 2));
        cv.rect(sky_rows, c, gap, run, Element::Sky);
      }
    }
    c += run;
  }

  const double scale = static_cast<double>(w) / 32.0;
  const auto count = [&](double mean) {
    return std::max(0, static_cast<int>(std::lround(mean * scale + rng.normal(0, 0.7))));
  };

  if (road_rows >= 3 && rng.bernoulli(0.2 + 0.7 * urban)) {
    const int r = road_top + road_rows / 2;
    for (int c = rng.between(0, 2); c < w; c += 4) cv.rect(r, c, 1, 2, Element::RoadMarkings);
  }
  for (int i = count(7.0 * clutter); i > 0; --i) {
    const int r = road_top + rng.between(0, std::max(0, road_rows - 2));
    cv.rect(r, rng.between(0, w - 3), std::min(2, road_rows), 3, Element::Vehicles);
  }
  for (int i = count(4.0 * clutter); i > 0; --i) {
    const int c = rng.between(0, w - 1);
    const int len = rng.between(4, 9);
    cv.rect(pave_top - len, c, len, 1, Element::Poles);
  }
  for (int i = count(6.0 * clutter); i > 0; --i) {
    const int r = rng.between(sky_rows, std::max(sky_rows, pave_top - 2));
    const int c = rng.between(0, w - 2);
    if (cv.get(std::min(r, h - 1), c) == Element::Buildings) cv.rect(r, c, 2, 2, Element::Signage);
  }
  if (rng.bernoulli(0.15 + 0.55 * clutter)) {
    const int c0 = rng.between(0, w / 2);
    cv.rect(pave_top - 1, c0, 1, rng.between(w / 4, w - c0), Element::Fences);
  }
  const int walk_row = pave_rows > 0 ? pave_top : road_top - 1;
  for (int i = count(5.0 * (1.0 - urban)); i > 0; --i) {
    cv.rect(walk_row - 1, rng.between(0, w - 1), 2, 1, Element::Pedestrians);
  }
  for (int i = count(2.0 * (1.0 - urban)); i > 0; --i) {
    cv.rect(walk_row, rng.between(0, w - 2), 1, 2, Element::Bicycles);
  }
  return cv.release();
}

}  // namespace

std::vector<Scene> generate_corpus(const CorpusConfig& cfg, const Taxonomy& taxonomy) {
  if (cfg.count < 2) throw std::invalid_argument("generate_corpus: need at least 2 scenes");
  if (cfg.width < 8 || cfg.height < 8) {
    throw std::invalid_argument("generate_corpus: width and height must be >= 8 (got " +
                                std::to_string(cfg.width) + "x" + std::to_string(cfg.height) +
                                ")");
  }
  Rng rng(mix_seed(cfg.seed, 0x5ce7e));
  std::vector<Scene> out;
  out.reserve(static_cast<std::size_t>(cfg.count));
  char id[32];
  for (int i = 0; i < cfg.count; ++i) {
    std::snprintf(id, sizeof id, "s%05d", i);
    Scene s(id, cfg.width, cfg.height, draw_scene(cfg.width, cfg.height, rng));
    s.set_tags(taxonomy.tag(s));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace facelift
