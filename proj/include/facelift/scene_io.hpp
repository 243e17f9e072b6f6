#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "facelift/scene.hpp"

namespace facelift {

using Json = nlohmann::json;

Json scene_to_json(const Scene& s);
Scene scene_from_json(const Json& j);

Json taxonomy_to_json(const Taxonomy& t);
Taxonomy taxonomy_from_json(const Json& j);
Taxonomy load_taxonomy(const std::filesystem::path& path);

Json oracle_to_json(const OracleConfig& o);
OracleConfig oracle_from_json(const Json& j);

/// Writes `<dir>/<id>.json` per scene and `<dir>/manifest.json` listing ids and
/// `generation`. A non-empty fingerprint is stamped into every file. Existing
/// scene files in `dir` are left alone.
void write_corpus(const std::filesystem::path& dir, const std::vector<Scene>& scenes,
                  const Json& generation, const std::string& fingerprint = {});

/// Reads the scenes named in `<dir>/manifest.json`, in manifest order.
std::vector<Scene> read_corpus(const std::filesystem::path& dir);
Json read_manifest(const std::filesystem::path& dir);

Json read_json_file(const std::filesystem::path& path);
/// Pretty-printed, trailing newline; byte-stable for equal documents.
void write_json_file(const std::filesystem::path& path, const Json& j);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace facelift
