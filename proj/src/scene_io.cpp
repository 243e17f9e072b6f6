#include "facelift/scene_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace facelift {

namespace fs = std::filesystem;

namespace {

Provenance provenance_from_json(const Json& j) {
  Provenance p;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "original") p.kind = Provenance::Kind::Original;
  else if (kind == "rotated") p.kind = Provenance::Kind::Rotated;
  else if (kind == "translated") p.kind = Provenance::Kind::Translated;
  else if (kind == "synthetic") p.kind = Provenance::Kind::Synthetic;
  else throw std::invalid_argument("unknown provenance kind '" + kind + "'");
  if (j.contains("amount")) p.amount = j.at("amount").get<double>();
  return p;
}

Json provenance_to_json(const Provenance& p) {
  switch (p.kind) {
    case Provenance::Kind::Original:
      return {{"kind", "original"}};
    case Provenance::Kind::Synthetic:
      return {{"kind", "synthetic"}};
    case Provenance::Kind::Rotated:
      return {{"kind", "rotated"}, {"amount", p.amount}, {"unit", "degrees"}};
    case Provenance::Kind::Translated:
      return {{"kind", "translated"}, {"amount", p.amount}, {"unit", "meters"}};
  }
  return {};
}

Element element_or_throw(const std::string& name) {
  const auto e = element_from_name(name);
  if (!e) throw std::invalid_argument("unknown element '" + name + "'");
  return *e;
}

}  // namespace

Json scene_to_json(const Scene& s) {
  Json tags = Json::array();
  for (const auto& t : s.tags()) {
    tags.push_back({{"name", t.name},
                    {"category", std::string(category_name(t.category))},
                    {"confidence", t.confidence}});
  }
  Json labels = Json::array();
  for (const auto c : s.labels()) labels.push_back(static_cast<int>(c));
  return {{"id", s.id()},
          {"width", s.width()},
          {"height", s.height()},
          {"labels", std::move(labels)},
          {"tags", std::move(tags)},
          {"provenance", provenance_to_json(s.provenance())}};
}

Scene scene_from_json(const Json& j) {
  std::vector<std::uint8_t> labels;
  const auto& arr = j.at("labels");
  labels.reserve(arr.size());
  for (const auto& v : arr) {
    const int c = v.get<int>();
    if (c < 0 || c >= kNumElements) {
      throw InvalidScene("label code " + std::to_string(c) + " out of range");
    }
    labels.push_back(static_cast<std::uint8_t>(c));
  }
  std::vector<SceneTag> tags;
  for (const auto& t : j.value("tags", Json::array())) {
    const auto cat = category_from_name(t.at("category").get<std::string>());
    if (!cat) throw std::invalid_argument("unknown tag category");
    tags.push_back({t.at("name").get<std::string>(), *cat, t.value("confidence", 0.0)});
  }
  Provenance prov;
  if (j.contains("provenance")) prov = provenance_from_json(j.at("provenance"));
  return Scene(j.at("id").get<std::string>(), j.at("width").get<int>(),
               j.at("height").get<int>(), std::move(labels), std::move(tags), prov);
}

Json taxonomy_to_json(const Taxonomy& t) {
  Json cats = Json::object();
  for (const auto c : {TagCategory::Architectural, TagCategory::Walkable, TagCategory::Landmark,
                       TagCategory::Natural}) {
    cats[std::string(category_name(c))] = Json::array();
  }
  for (const auto& [name, c] : t.categories()) {
    cats[std::string(category_name(c))].push_back(name);
  }
  Json rules = Json::array();
  for (const auto& r : t.rules()) {
    Json jr = {{"tag", r.tag}, {"min_fraction", r.min_fraction}};
    Json els = Json::array();
    for (const auto e : r.elements) els.push_back(std::string(element_name(e)));
    jr["elements"] = std::move(els);
    if (!r.require_min.empty()) {
      for (const auto& [e, v] : r.require_min) jr["require_min"][std::string(element_name(e))] = v;
    }
    if (!r.require_max.empty()) {
      for (const auto& [e, v] : r.require_max) jr["require_max"][std::string(element_name(e))] = v;
    }
    if (r.min_complexity) jr["min_complexity"] = *r.min_complexity;
    if (r.max_complexity) jr["max_complexity"] = *r.max_complexity;
    rules.push_back(std::move(jr));
  }
  return {{"categories", std::move(cats)}, {"rules", std::move(rules)}};
}

Taxonomy taxonomy_from_json(const Json& j) {
  std::map<std::string, TagCategory> cats;
  for (const auto& [cname, names] : j.at("categories").items()) {
    const auto c = category_from_name(cname);
    if (!c) throw std::invalid_argument("unknown taxonomy category '" + cname + "'");
    for (const auto& n : names) {
      const auto [it, inserted] = cats.emplace(n.get<std::string>(), *c);
      if (!inserted && it->second != *c) {
        throw std::invalid_argument("tag '" + it->first + "' listed under two categories");
      }
    }
  }
  std::vector<TagRule> rules;
  for (const auto& jr : j.value("rules", Json::array())) {
    TagRule r;
    r.tag = jr.at("tag").get<std::string>();
    r.min_fraction = jr.at("min_fraction").get<double>();
    for (const auto& e : jr.at("elements")) r.elements.push_back(element_or_throw(e.get<std::string>()));
    if (jr.contains("require_min")) {
      for (const auto& [e, v] : jr["require_min"].items()) r.require_min[element_or_throw(e)] = v.get<double>();
    }
    if (jr.contains("require_max")) {
      for (const auto& [e, v] : jr["require_max"].items()) r.require_max[element_or_throw(e)] = v.get<double>();
    }
    if (jr.contains("min_complexity")) r.min_complexity = jr["min_complexity"].get<double>();
    if (jr.contains("max_complexity")) r.max_complexity = jr["max_complexity"].get<double>();
    rules.push_back(std::move(r));
  }
  return Taxonomy(std::move(cats), std::move(rules));
}

Taxonomy load_taxonomy(const fs::path& path) { return taxonomy_from_json(read_json_file(path)); }

Json oracle_to_json(const OracleConfig& o) {
  Json w = Json::object();
  for (int i = 0; i < kNumElements; ++i) {
    w[std::string(element_name(static_cast<Element>(i)))] = o.weights[static_cast<std::size_t>(i)];
  }
  return {{"weights", std::move(w)},
          {"entropy_penalty", o.entropy_penalty},
          {"noise_scale", o.noise_scale}};
}

OracleConfig oracle_from_json(const Json& j) {
  OracleConfig o = OracleConfig::standard();
  if (j.contains("weights")) {
    for (const auto& [name, v] : j["weights"].items()) {
      o.weights[static_cast<std::size_t>(code(element_or_throw(name)))] = v.get<double>();
    }
  }
  o.entropy_penalty = j.value("entropy_penalty", o.entropy_penalty);
  o.noise_scale = j.value("noise_scale", o.noise_scale);
  return o;
}

// ---------------------------------------------------------------------------

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::runtime_error("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json_file(const fs::path& path, const Json& j) {
  write_text_file(path, j.dump(1) + "\n");
}

void write_corpus(const fs::path& dir, const std::vector<Scene>& scenes, const Json& generation,
                  const std::string& fingerprint) {
  fs::create_directories(dir);
  Json ids = Json::array();
  for (const auto& s : scenes) {
    Json j = scene_to_json(s);
    if (!fingerprint.empty()) j["fingerprint"] = fingerprint;
    write_text_file(dir / (s.id() + ".json"), j.dump() + "\n");
    ids.push_back(s.id());
  }
  Json manifest = {{"ids", std::move(ids)}, {"generation", generation}};
  if (!fingerprint.empty()) manifest["fingerprint"] = fingerprint;
  write_json_file(dir / "manifest.json", manifest);
}

Json read_manifest(const fs::path& dir) { return read_json_file(dir / "manifest.json"); }

std::vector<Scene> read_corpus(const fs::path& dir) {
  const auto manifest = read_manifest(dir);
  std::vector<Scene> scenes;
  for (const auto& id : manifest.at("ids")) {
    scenes.push_back(scene_from_json(read_json_file(dir / (id.get<std::string>() + ".json"))));
  }
  return scenes;
}

}  // namespace facelift
