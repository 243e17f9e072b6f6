#include "facelift/curation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

#include "facelift/rng.hpp"

namespace facelift {

std::string_view mode_name(AugmentationMode m) {
  switch (m) {
    case AugmentationMode::None: return "none";
    case AugmentationMode::Rotation: return "rotation";
    case AugmentationMode::RotationPlusTranslation: return "rotation+translation";
    case AugmentationMode::RotationPlusConservativeTranslation:
      return "rotation+conservative-translation";
  }
  return "none";
}

AugmentationMode mode_from_name(std::string_view name) {
  for (const auto m : {AugmentationMode::None, AugmentationMode::Rotation,
                       AugmentationMode::RotationPlusTranslation,
                       AugmentationMode::RotationPlusConservativeTranslation}) {
    if (mode_name(m) == name) return m;
  }
  throw std::invalid_argument("unknown augmentation mode '" + std::string(name) + "'");
}

void AugmentationConfig::validate() const {
  for (const double a : angles) {
    if (a == 0.0 || !std::isfinite(a)) throw std::invalid_argument("augmentation angles must be non-zero");
  }
  for (std::size_t i = 0; i < distances.size(); ++i) {
    if (!(distances[i] > 0.0)) throw std::invalid_argument("augmentation distances must be positive");
    if (i > 0 && !(distances[i] > distances[i - 1])) {
      throw std::invalid_argument("augmentation distances must be strictly increasing");
    }
  }
  if (!(relabel_scale > 0.0) || neighbor_radius < 1) {
    throw std::invalid_argument("invalid translation noise parameters");
  }
}

Scene rotate(const Scene& s, double degrees) {
  if (degrees == 0.0) throw std::invalid_argument("rotate: identity rotation (0 degrees) is not an augmentation");
  const int w = s.width();
  const long shift_raw = std::lround(degrees / 90.0 * w);
  const int shift = static_cast<int>(((shift_raw % w) + w) % w);
  std::vector<std::uint8_t> out(s.cell_count());
  for (int r = 0; r < s.height(); ++r)
    for (int c = 0; c < w; ++c)
      out[static_cast<std::size_t>(r) * w + (c + shift) % w] = s.at(r, c);
  char suffix[32];
  std::snprintf(suffix, sizeof suffix, "_r%+g", degrees);
  return Scene(s.id() + suffix, w, s.height(), std::move(out), s.tags(),
               {Provenance::Kind::Rotated, degrees});
}

Scene translate(const Scene& s, double meters, std::uint64_t seed, const AugmentationConfig& cfg,
                const Taxonomy& taxonomy) {
  const double p = std::clamp(meters / cfg.relabel_scale, 0.0, 1.0);
  const int w = s.width(), h = s.height(), rad = cfg.neighbor_radius;
  Rng rng(seed);
  std::vector<std::uint8_t> out(s.labels().begin(), s.labels().end());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!rng.bernoulli(p)) continue;
      const int nr = std::clamp(r + rng.between(-rad, rad), 0, h - 1);
      const int nc = std::clamp(c + rng.between(-rad, rad), 0, w - 1);
      out[static_cast<std::size_t>(r) * w + c] = s.at(nr, nc);
    }
  }
  char suffix[32];
  std::snprintf(suffix, sizeof suffix, "_t%g", meters);
  Scene t(s.id() + suffix, w, h, std::move(out), {}, {Provenance::Kind::Translated, meters});
  t.set_tags(taxonomy.tag(t));
  return t;
}

double feature_similarity(const std::vector<double>& fa, const std::vector<double>& fb) {
  if (fa.size() != fb.size()) throw std::invalid_argument("feature_similarity: dimension mismatch");
  double d2 = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) d2 += (fa[i] - fb[i]) * (fa[i] - fb[i]);
  return 1.0 / (1.0 + std::sqrt(d2));
}

double feature_similarity(const Scene& a, const Scene& b, const FeatureExtractor& extractor) {
  return feature_similarity(extractor(a), extractor(b));
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

FilterResult conservative_filter(std::vector<AugmentedScene> translated,
                                 const std::vector<AugmentedScene>& rotated) {
  if (rotated.empty()) {
    throw std::invalid_argument("conservative_filter: no rotated scenes, threshold undefined");
  }
  std::vector<double> sims;
  sims.reserve(rotated.size());
  for (const auto& r : rotated) sims.push_back(r.similarity_to_parent);
  FilterResult out;
  out.threshold = median(std::move(sims));
  for (auto& t : translated) {
    (t.similarity_to_parent >= out.threshold ? out.taken : out.filtered).push_back(std::move(t));
  }
  return out;
}

std::map<std::string, double> propensity(const std::vector<AugmentedScene>& taken,
                                         const std::vector<AugmentedScene>& filtered) {
  std::map<std::string, double> in_taken, in_filtered;
  const auto tally = [](const std::vector<AugmentedScene>& set, std::map<std::string, double>& out) {
    for (const auto& a : set) {
      std::set<std::string> seen;
      for (const auto& t : a.scene.tags()) {
        if (seen.insert(t.name).second) out[t.name] += 1.0;
      }
    }
    for (auto& [_, v] : out) v /= static_cast<double>(set.size());
  };
  if (!taken.empty()) tally(taken, in_taken);
  if (!filtered.empty()) tally(filtered, in_filtered);
  std::map<std::string, double> out;
  for (const auto& [tag, f] : in_taken) out[tag] += f;
  for (const auto& [tag, f] : in_filtered) out[tag] -= f;
  return out;
}

CuratedCorpus augment(const std::vector<Scene>& labelled,
                      const std::map<std::string, ClassLabel>& labels,
                      const AugmentationConfig& cfg, const FeatureExtractor& extractor,
                      const Taxonomy& taxonomy, std::uint64_t seed) {
  cfg.validate();
  CuratedCorpus out;
  std::vector<AugmentedScene> translated;
  for (const auto& s : labelled) {
    const auto lab = labels.find(s.id());
    if (lab == labels.end()) throw std::invalid_argument("augment: scene '" + s.id() + "' has no class");
    const auto parent_feat = extractor(s);
    for (const double a : cfg.angles) {
      Scene r = rotate(s, a);
      const double sim = feature_similarity(parent_feat, extractor(r));
      out.rotated.push_back({std::move(r), s.id(), lab->second, sim});
    }
    for (const double d : cfg.distances) {
      const std::uint64_t sub = mix_seed(mix_seed(seed, fnv1a(s.id())), static_cast<std::uint64_t>(d * 1000.0));
      Scene t = translate(s, d, sub, cfg, taxonomy);
      const double sim = feature_similarity(parent_feat, extractor(t));
      translated.push_back({std::move(t), s.id(), lab->second, sim});
    }
  }
  out.translated = translated;
  if (!out.rotated.empty()) out.filter = conservative_filter(std::move(translated), out.rotated);
  return out;
}

std::vector<const AugmentedScene*> training_additions(const CuratedCorpus& curated,
                                                      AugmentationMode mode) {
  std::vector<const AugmentedScene*> out;
  if (mode == AugmentationMode::None) return out;
  for (const auto& r : curated.rotated) out.push_back(&r);
  if (mode == AugmentationMode::RotationPlusTranslation) {
    for (const auto& t : curated.translated) out.push_back(&t);
  } else if (mode == AugmentationMode::RotationPlusConservativeTranslation) {
    for (const auto& t : curated.filter.taken) out.push_back(&t);
  }
  return out;
}

std::string filter_report_csv(const FilterResult& f, const std::string& fingerprint) {
  std::vector<std::pair<const AugmentedScene*, bool>> rows;
  for (const auto& t : f.taken) rows.emplace_back(&t, true);
  for (const auto& t : f.filtered) rows.emplace_back(&t, false);
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.first->scene.id() < b.first->scene.id(); });
  std::ostringstream out;
  out << "# fingerprint=" << fingerprint << '\n';
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", f.threshold);
  out << "# threshold=" << buf << '\n';
  out << "id,parent,similarity,taken\n";
  for (const auto& [a, taken] : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", a->similarity_to_parent);
    out << a->scene.id() << ',' << a->parent << ',' << buf << ',' << (taken ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace facelift
