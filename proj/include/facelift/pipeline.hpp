#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "facelift/beautify.hpp"
#include "facelift/curation.hpp"
#include "facelift/metrics.hpp"
#include "facelift/networks.hpp"
#include "facelift/ranking.hpp"
#include "facelift/scene.hpp"
#include "facelift/scene_io.hpp"

namespace facelift {

struct EvaluationConfig {
  int count = 100;           // scenes per direction
  int votes = 3;             // rounded up to odd, at least 3
  double rater_noise = 0.5;
  double lower = 10.0;       // source percentiles: bottom decile is beautified,
  double upper = 90.0;       // top decile uglified
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  CorpusConfig corpus;
  OracleConfig oracle;
  int pairs_per_scene = 8;
  TrueSkillConfig trueskill;
  int min_judgments = 3;
  double lower_percentile = 33.0;
  double upper_percentile = 67.0;
  AugmentationConfig augmentation;
  nn::TrainConfig classifier_train;
  nn::ClassifierArch classifier_arch;
  nn::TrainConfig generator_train;
  nn::GeneratorArch generator_arch;
  MaximizeConfig maximize;
  EvaluationConfig evaluation;
  std::vector<std::pair<Element, Element>> regression_pairs;
  RegressionOptions regression;
  int gallery = 8;
  Taxonomy taxonomy;

  static PipelineConfig defaults();
  /// Missing keys keep their defaults; unknown sections or keys are errors.
  /// A "taxonomy" string is a path resolved against `base_dir`.
  static PipelineConfig from_json(const Json& j, const std::filesystem::path& base_dir = {});
  static PipelineConfig load(const std::filesystem::path& path);
  Json to_json() const;

  void validate() const;
  /// FNV-1a of the canonical JSON form, as 16 hex digits.
  std::string fingerprint() const;
  std::uint64_t fingerprint_value() const;
};

/// Exit status 2.
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exit status 3.
class FingerprintMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Stage { Gen, Rate, Rank, Curate, Train, Beautify, Metrics, Analyze, Evaluate, Report, All };

std::string_view stage_name(Stage s);
std::optional<Stage> stage_from_name(std::string_view name);
/// Stages executed by `all`, in dependency order.
const std::vector<Stage>& pipeline_order();

// ---------------------------------------------------------------------------
// Simulated A/B evaluation

struct EvaluationPair {
  Scene original;
  Scene transformed;
  bool transformed_should_win = true;  // beautification; false for uglification
};

struct PairVotes {
  std::string original;
  std::string transformed;
  bool transformed_should_win = true;
  int votes = 0;
  int votes_for_intended = 0;
  bool correct = false;
};

struct EvaluationResult {
  std::size_t pairs_judged = 0;
  double correct_pick_rate = 0.0;
  int votes_per_pair = 0;
  std::vector<PairVotes> per_pair;
};

/// Each pair is shown to `votes` (rounded up to odd, at least 3) raters who
/// perceive noise-free oracle scores plus rater_noise·N(0,1); the majority
/// decides. Needs at least two pairs per direction.
EvaluationResult evaluate(const std::vector<EvaluationPair>& pairs, const OracleConfig& oracle,
                          int votes, double rater_noise, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Augmentation ladder

struct LadderEntry {
  AugmentationMode mode = AugmentationMode::None;
  std::size_t train_size = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

struct SplitLabelled {
  std::vector<Scene> train;
  std::vector<Scene> test;
  std::map<std::string, ClassLabel> labels;
};

/// Labelled originals from a partition, split by scene with `split`.
SplitLabelled split_labelled(const std::vector<Scene>& corpus, const Partition& part, double split,
                             std::uint64_t seed);

/// Trains one classifier per augmentation mode on train + additions and tests
/// each on the held-out originals. The feature extractor used for the filter
/// is the `none` model.
std::vector<LadderEntry> accuracy_ladder(const SplitLabelled& data, const PipelineConfig& cfg,
                                         std::uint64_t seed);

// ---------------------------------------------------------------------------

/// Raises glibc's mmap/trim thresholds; the autodiff tape allocates and frees
/// large blocks at a high rate. No-op elsewhere.
void tune_allocator();

/// Runs pipeline stages against a workspace directory.
class Pipeline {
 public:
  Pipeline(PipelineConfig cfg, std::filesystem::path workspace, int workers = 1);

  void run(Stage stage);

  const PipelineConfig& config() const { return cfg_; }
  const std::filesystem::path& workspace() const { return ws_; }
  std::filesystem::path path(const std::string& relative) const { return ws_ / relative; }

 private:
  void gen();
  void rate();
  void rank();
  void curate();
  void train();
  void beautify();
  void metrics();
  void analyze();
  void evaluate_stage();
  void report();

  void require(const std::string& relative, std::string_view producer) const;
  void check_fingerprint(const std::string& relative) const;

  PipelineConfig cfg_;
  std::filesystem::path ws_;
  int workers_ = 1;
  std::string fp_;
};

/// Fingerprint recorded in an artifact (JSON key, CSV/NDJSON header line,
/// or binary header), or nullopt when the file carries none.
std::optional<std::string> artifact_fingerprint(const std::filesystem::path& p);

}  // namespace facelift
