#include "facelift/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "facelift/rng.hpp"
#include "report.hpp"

namespace facelift {

namespace fs = std::filesystem;

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);
#endif
}

// ---------------------------------------------------------------------------
// Config

namespace {

// Reads keys from one config section and rejects anything it did not consume.
class Section {
 public:
  Section(const Json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw std::invalid_argument("config section '" + name_ + "' must be an object");
  }
  template <typename T>
  void get(const char* key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const Json::exception& e) {
      throw std::invalid_argument("config " + name_ + "." + key + ": " + e.what());
    }
  }
  bool has(const char* key) {
    used_.insert(key);
    return j_.contains(key);
  }
  const Json& at(const char* key) const { return j_.at(key); }
  void finish() const {
    for (const auto& [k, _] : j_.items()) {
      if (!used_.count(k)) throw std::invalid_argument("unknown config key '" + name_ + "." + k + "'");
    }
  }

 private:
  const Json& j_;
  std::string name_;
  std::set<std::string> used_;
};

Element element_or_throw(const std::string& name) {
  const auto e = element_from_name(name);
  if (!e) throw std::invalid_argument("unknown element '" + name + "'");
  return *e;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Sub-seed streams derived from the global seed.
enum : std::uint64_t {
  kSeedJudgments = 0x1001,
  kSeedSplit = 0x1002,
  kSeedAugment = 0x1003,
  kSeedEvaluate = 0x1004,
};

}  // namespace

PipelineConfig PipelineConfig::defaults() {
  PipelineConfig c;
  c.oracle = OracleConfig::standard();
  c.oracle.noise_scale = 0.5;
  c.classifier_train.learning_rate = 0.03;
  c.classifier_train.epochs = 40;
  c.classifier_train.batch_size = 32;
  c.generator_train.learning_rate = 0.5;
  c.generator_train.epochs = 20;
  c.generator_train.batch_size = 16;
  c.regression_pairs = default_regression_pairs();
  c.taxonomy = Taxonomy::standard();
  return c;
}

PipelineConfig PipelineConfig::from_json(const Json& j, const fs::path& base_dir) {
  PipelineConfig c = defaults();
  Section top(j, "config");
  top.get("seed", c.seed);

  if (top.has("corpus")) {
    Section s(top.at("corpus"), "corpus");
    s.get("count", c.corpus.count);
    s.get("width", c.corpus.width);
    s.get("height", c.corpus.height);
    s.finish();
  }
  if (top.has("oracle")) {
    Section s(top.at("oracle"), "oracle");
    s.has("weights");
    s.has("entropy_penalty");
    s.has("noise_scale");
    s.finish();
    const double noise = c.oracle.noise_scale;
    c.oracle = oracle_from_json(top.at("oracle"));
    if (!top.at("oracle").contains("noise_scale")) c.oracle.noise_scale = noise;
  }
  if (top.has("rating")) {
    Section s(top.at("rating"), "rating");
    s.get("pairs_per_scene", c.pairs_per_scene);
    s.get("mu0", c.trueskill.mu0);
    s.get("sigma0", c.trueskill.sigma0);
    s.get("beta", c.trueskill.beta);
    s.get("tau", c.trueskill.tau);
    s.get("draw_probability", c.trueskill.draw_probability);
    s.get("min_judgments", c.min_judgments);
    s.get("lower_percentile", c.lower_percentile);
    s.get("upper_percentile", c.upper_percentile);
    s.finish();
  }
  if (top.has("augmentation")) {
    Section s(top.at("augmentation"), "augmentation");
    s.get("angles", c.augmentation.angles);
    s.get("distances", c.augmentation.distances);
    std::string mode(mode_name(c.augmentation.mode));
    s.get("mode", mode);
    c.augmentation.mode = mode_from_name(mode);
    s.get("relabel_scale", c.augmentation.relabel_scale);
    s.get("neighbor_radius", c.augmentation.neighbor_radius);
    s.finish();
  }
  const auto train_section = [&](const char* name, nn::TrainConfig& t, Section& s) {
    (void)name;
    s.get("learning_rate", t.learning_rate);
    s.get("epochs", t.epochs);
    s.get("batch_size", t.batch_size);
    s.get("weight_decay", t.weight_decay);
    s.get("split", t.split);
  };
  if (top.has("classifier")) {
    Section s(top.at("classifier"), "classifier");
    train_section("classifier", c.classifier_train, s);
    s.get("grid", c.classifier_arch.grid);
    s.get("hidden", c.classifier_arch.hidden);
    s.finish();
  }
  if (top.has("generator")) {
    Section s(top.at("generator"), "generator");
    train_section("generator", c.generator_train, s);
    s.get("encoder_grid", c.generator_arch.encoder_grid);
    s.get("encoder_hidden", c.generator_arch.encoder_hidden);
    s.get("latent", c.generator_arch.latent);
    s.get("decoder_hidden", c.generator_arch.decoder_hidden);
    s.get("decoder_grid", c.generator_arch.decoder_grid);
    s.finish();
  }
  if (top.has("maximize")) {
    Section s(top.at("maximize"), "maximize");
    s.get("lambda", c.maximize.lambda);
    s.get("steps", c.maximize.steps);
    s.get("step_size", c.maximize.step_size);
    s.get("max_halvings", c.maximize.max_halvings);
    s.get("min_relative_gain", c.maximize.min_relative_gain);
    s.get("patience", c.maximize.patience);
    s.finish();
  }
  if (top.has("evaluation")) {
    Section s(top.at("evaluation"), "evaluation");
    s.get("count", c.evaluation.count);
    s.get("votes", c.evaluation.votes);
    s.get("rater_noise", c.evaluation.rater_noise);
    s.get("lower_percentile", c.evaluation.lower);
    s.get("upper_percentile", c.evaluation.upper);
    s.finish();
  }
  if (top.has("metrics")) {
    Section s(top.at("metrics"), "metrics");
    if (s.has("pairs")) {
      c.regression_pairs.clear();
      for (const auto& p : top.at("metrics").at("pairs")) {
        if (!p.is_array() || p.size() != 2) throw std::invalid_argument("metrics.pairs entries must be [a, b]");
        c.regression_pairs.emplace_back(element_or_throw(p[0].get<std::string>()),
                                        element_or_throw(p[1].get<std::string>()));
      }
    }
    s.get("ridge", c.regression.ridge);
    s.get("tolerance", c.regression.tolerance);
    s.get("max_iterations", c.regression.max_iterations);
    s.get("scale", c.regression.scale);
    s.finish();
  }
  if (top.has("report")) {
    Section s(top.at("report"), "report");
    s.get("gallery", c.gallery);
    s.finish();
  }
  if (top.has("taxonomy")) {
    const Json& t = top.at("taxonomy");
    if (t.is_string()) {
      fs::path p = t.get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      c.taxonomy = load_taxonomy(p);
    } else {
      c.taxonomy = taxonomy_from_json(t);
    }
  }
  top.finish();
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  if (!fs::exists(path)) throw std::invalid_argument("config file " + path.string() + " does not exist");
  return from_json(read_json_file(path), path.parent_path());
}

Json PipelineConfig::to_json() const {
  const auto train = [](const nn::TrainConfig& t) {
    return Json{{"learning_rate", t.learning_rate}, {"epochs", t.epochs},
                {"batch_size", t.batch_size},       {"weight_decay", t.weight_decay},
                {"split", t.split}};
  };
  Json cls = train(classifier_train);
  cls["grid"] = classifier_arch.grid;
  cls["hidden"] = classifier_arch.hidden;
  Json gen = train(generator_train);
  gen["encoder_grid"] = generator_arch.encoder_grid;
  gen["encoder_hidden"] = generator_arch.encoder_hidden;
  gen["latent"] = generator_arch.latent;
  gen["decoder_hidden"] = generator_arch.decoder_hidden;
  gen["decoder_grid"] = generator_arch.decoder_grid;
  Json pairs = Json::array();
  for (const auto& [a, b] : regression_pairs) {
    pairs.push_back({std::string(element_name(a)), std::string(element_name(b))});
  }
  return {
      {"seed", seed},
      {"corpus", {{"count", corpus.count}, {"width", corpus.width}, {"height", corpus.height}}},
      {"oracle", oracle_to_json(oracle)},
      {"rating",
       {{"pairs_per_scene", pairs_per_scene},
        {"mu0", trueskill.mu0},
        {"sigma0", trueskill.sigma0},
        {"beta", trueskill.beta},
        {"tau", trueskill.tau},
        {"draw_probability", trueskill.draw_probability},
        {"min_judgments", min_judgments},
        {"lower_percentile", lower_percentile},
        {"upper_percentile", upper_percentile}}},
      {"augmentation",
       {{"angles", augmentation.angles},
        {"distances", augmentation.distances},
        {"mode", std::string(mode_name(augmentation.mode))},
        {"relabel_scale", augmentation.relabel_scale},
        {"neighbor_radius", augmentation.neighbor_radius}}},
      {"classifier", cls},
      {"generator", gen},
      {"maximize",
       {{"lambda", maximize.lambda},
        {"steps", maximize.steps},
        {"step_size", maximize.step_size},
        {"max_halvings", maximize.max_halvings},
        {"min_relative_gain", maximize.min_relative_gain},
        {"patience", maximize.patience}}},
      {"evaluation",
       {{"count", evaluation.count},
        {"votes", evaluation.votes},
        {"rater_noise", evaluation.rater_noise},
        {"lower_percentile", evaluation.lower},
        {"upper_percentile", evaluation.upper}}},
      {"metrics",
       {{"pairs", pairs},
        {"ridge", regression.ridge},
        {"tolerance", regression.tolerance},
        {"max_iterations", regression.max_iterations},
        {"scale", regression.scale}}},
      {"report", {{"gallery", gallery}}},
      {"taxonomy", taxonomy_to_json(taxonomy)},
  };
}

void PipelineConfig::validate() const {
  if (corpus.count < 2 || corpus.width < 8 || corpus.height < 8) {
    throw std::invalid_argument("corpus needs count >= 2 and width, height >= 8");
  }
  trueskill.validate();
  augmentation.validate();
  classifier_train.validate();
  generator_train.validate();
  maximize.validate();
  if (pairs_per_scene < 1) throw std::invalid_argument("rating.pairs_per_scene must be >= 1");
  if (!(0.0 <= lower_percentile && lower_percentile < upper_percentile && upper_percentile <= 100.0)) {
    throw std::invalid_argument("rating percentiles must satisfy 0 <= lower < upper <= 100");
  }
  if (!(0.0 <= evaluation.lower && evaluation.lower < evaluation.upper && evaluation.upper <= 100.0)) {
    throw std::invalid_argument("evaluation percentiles must satisfy 0 <= lower < upper <= 100");
  }
  if (evaluation.count < 2) throw std::invalid_argument("evaluation.count must be >= 2");
  if (evaluation.votes < 3) throw std::invalid_argument("evaluation.votes must be >= 3");
  if (!(evaluation.rater_noise >= 0.0)) throw std::invalid_argument("evaluation.rater_noise must be >= 0");
  if (regression_pairs.empty()) throw std::invalid_argument("metrics.pairs must not be empty");
  if (gallery < 0) throw std::invalid_argument("report.gallery must be >= 0");
}

std::uint64_t PipelineConfig::fingerprint_value() const { return fnv1a(to_json().dump()); }

std::string PipelineConfig::fingerprint() const { return hex64(fingerprint_value()); }

// ---------------------------------------------------------------------------
// Stages

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::Gen: return "gen";
    case Stage::Rate: return "rate";
    case Stage::Rank: return "rank";
    case Stage::Curate: return "curate";
    case Stage::Train: return "train";
    case Stage::Beautify: return "beautify";
    case Stage::Metrics: return "metrics";
    case Stage::Analyze: return "analyze";
    case Stage::Evaluate: return "evaluate";
    case Stage::Report: return "report";
    case Stage::All: return "all";
  }
  return "all";
}

std::optional<Stage> stage_from_name(std::string_view name) {
  for (const auto s : {Stage::Gen, Stage::Rate, Stage::Rank, Stage::Curate, Stage::Train,
                       Stage::Beautify, Stage::Metrics, Stage::Analyze, Stage::Evaluate,
                       Stage::Report, Stage::All}) {
    if (stage_name(s) == name) return s;
  }
  return std::nullopt;
}

const std::vector<Stage>& pipeline_order() {
  static const std::vector<Stage> order = {Stage::Gen,      Stage::Rate,    Stage::Rank,
                                           Stage::Curate,   Stage::Train,   Stage::Beautify,
                                           Stage::Metrics,  Stage::Analyze, Stage::Evaluate,
                                           Stage::Report};
  return order;
}

// ---------------------------------------------------------------------------
// Evaluation

EvaluationResult evaluate(const std::vector<EvaluationPair>& pairs, const OracleConfig& oracle,
                          int votes, double rater_noise, std::uint64_t seed) {
  if (votes < 3) throw std::invalid_argument("evaluate: at least 3 votes per pair are required");
  if (votes % 2 == 0) ++votes;
  std::size_t up = 0, down = 0;
  for (const auto& p : pairs) (p.transformed_should_win ? up : down) += 1;
  if (up < 2 || down < 2) {
    throw std::invalid_argument("evaluate: need at least 2 pairs per class (got " +
                                std::to_string(up) + " beautified, " + std::to_string(down) +
                                " uglified)");
  }
  EvaluationResult res;
  res.votes_per_pair = votes;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    const double t_orig = oracle_score_noise_free(oracle, p.original);
    const double t_new = oracle_score_noise_free(oracle, p.transformed);
    Rng rng(mix_seed(seed, i));
    PairVotes pv{p.original.id(), p.transformed.id(), p.transformed_should_win, votes, 0, false};
    for (int v = 0; v < votes; ++v) {
      const double a = t_orig + rater_noise * rng.normal();
      const double b = t_new + rater_noise * rng.normal();
      const bool transformed_wins = b > a;
      pv.votes_for_intended += transformed_wins == p.transformed_should_win;
    }
    pv.correct = 2 * pv.votes_for_intended > votes;
    correct += pv.correct;
    res.per_pair.push_back(pv);
  }
  res.pairs_judged = res.per_pair.size();
  res.correct_pick_rate = static_cast<double>(correct) / static_cast<double>(res.pairs_judged);
  return res;
}

// ---------------------------------------------------------------------------
// Ladder

namespace {

nn::TrainConfig seeded(nn::TrainConfig t, std::uint64_t seed) {
  t.seed = seed;
  return t;
}

nn::ClassifierArch classifier_arch_for(const PipelineConfig& cfg) {
  auto a = cfg.classifier_arch;
  a.height = cfg.corpus.height;
  a.width = cfg.corpus.width;
  return a;
}

nn::GeneratorArch generator_arch_for(const PipelineConfig& cfg) {
  auto a = cfg.generator_arch;
  a.height = cfg.corpus.height;
  a.width = cfg.corpus.width;
  return a;
}

std::vector<ClassLabel> labels_of(const std::vector<Scene>& scenes,
                                  const std::map<std::string, ClassLabel>& labels) {
  std::vector<ClassLabel> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back(labels.at(s.id()));
  return out;
}

struct LadderModels {
  std::vector<LadderEntry> entries;
  std::map<AugmentationMode, nn::Classifier> models;
};

LadderModels fit_ladder(const SplitLabelled& data, const CuratedCorpus& curated,
                        const nn::Classifier& base, const PipelineConfig& cfg, std::uint64_t seed) {
  const auto tc = seeded(cfg.classifier_train, seed);
  const auto arch = classifier_arch_for(cfg);
  const auto test_labels = labels_of(data.test, data.labels);
  LadderModels out;
  for (const auto mode : {AugmentationMode::None, AugmentationMode::Rotation,
                          AugmentationMode::RotationPlusTranslation,
                          AugmentationMode::RotationPlusConservativeTranslation}) {
    std::vector<Scene> scenes = data.train;
    std::vector<ClassLabel> labels = labels_of(data.train, data.labels);
    for (const auto* a : training_additions(curated, mode)) {
      scenes.push_back(a->scene);
      labels.push_back(a->inherited_class);
    }
    nn::Classifier model =
        mode == AugmentationMode::None ? base : nn::fit_classifier(scenes, labels, tc, arch);
    LadderEntry e;
    e.mode = mode;
    e.train_size = scenes.size();
    e.train_accuracy = nn::accuracy(model, scenes, labels);
    e.test_accuracy = nn::accuracy(model, data.test, test_labels);
    out.entries.push_back(e);
    out.models.emplace(mode, std::move(model));
  }
  return out;
}

FeatureExtractor extractor_of(const nn::Classifier& c) {
  return [&c](const Scene& s) { return c.features(s); };
}

}  // namespace

SplitLabelled split_labelled(const std::vector<Scene>& corpus, const Partition& part, double split,
                             std::uint64_t seed) {
  SplitLabelled out;
  std::vector<const Scene*> labelled;
  for (const auto& s : corpus) {
    if (part.beautiful.count(s.id())) {
      out.labels[s.id()] = ClassLabel::Beautiful;
    } else if (part.ugly.count(s.id())) {
      out.labels[s.id()] = ClassLabel::Ugly;
    } else {
      continue;
    }
    labelled.push_back(&s);
  }
  if (labelled.size() < 2) throw std::invalid_argument("split_labelled: fewer than 2 labelled scenes");
  Rng rng(mix_seed(seed, kSeedSplit));
  rng.shuffle(std::span<const Scene*>(labelled));
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(split * static_cast<double>(labelled.size()))), 1,
      labelled.size() - 1);
  for (std::size_t i = 0; i < labelled.size(); ++i) {
    (i < n_train ? out.train : out.test).push_back(*labelled[i]);
  }
  return out;
}

std::vector<LadderEntry> accuracy_ladder(const SplitLabelled& data, const PipelineConfig& cfg,
                                         std::uint64_t seed) {
  const auto train_labels = labels_of(data.train, data.labels);
  const nn::Classifier base = nn::fit_classifier(data.train, train_labels,
                                                 seeded(cfg.classifier_train, seed),
                                                 classifier_arch_for(cfg));
  const CuratedCorpus curated = augment(data.train, data.labels, cfg.augmentation,
                                        extractor_of(base), cfg.taxonomy,
                                        mix_seed(seed, kSeedAugment));
  return fit_ladder(data, curated, base, cfg, seed).entries;
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

template <typename F>
void parallel_for(std::size_t n, int workers, F&& fn) {
  const auto w = static_cast<std::size_t>(std::max(1, workers));
  if (w == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < std::min(w, n); ++t) {
    threads.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += w) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

constexpr const char* kManifest = "corpus/manifest.json";
constexpr const char* kJudgments = "ratings/judgments.ndjson";
constexpr const char* kRatings = "ratings/ratings.csv";
constexpr const char* kPartition = "ratings/partition.json";
constexpr const char* kAugManifest = "corpus/augmented/manifest.json";
constexpr const char* kAugmentation = "corpus/augmented/augmentation.json";
constexpr const char* kFilterReport = "corpus/augmented/filter_report.csv";
constexpr const char* kPropensity = "corpus/augmented/propensity.csv";
constexpr const char* kExtractor = "models/extractor.bin";
constexpr const char* kClassifier = "models/classifier.bin";
constexpr const char* kGenerator = "models/generator.bin";
constexpr const char* kTraining = "models/training.json";
constexpr const char* kIndex = "index/features.idx";
constexpr const char* kRecords = "beautified/records.ndjson";
constexpr const char* kMetricsCsv = "metrics/metrics.csv";
constexpr const char* kSummary = "metrics/summary.json";
constexpr const char* kRegressionCsv = "metrics/regression.csv";
constexpr const char* kRegressionJson = "metrics/regression.json";
constexpr const char* kRegressionTxt = "metrics/regression.txt";
constexpr const char* kEvaluation = "metrics/evaluation.json";
constexpr const char* kReport = "report/index.html";

struct Scored {
  std::map<std::string, ScoredScene> scores;
  Partition partition;
};

Scored read_partition(const fs::path& p) {
  const Json j = read_json_file(p);
  Scored out;
  for (const auto& e : j.at("scores")) {
    out.scores[e.at("id").get<std::string>()] = {e.at("score").get<double>(),
                                                 e.at("judgments").get<int>()};
  }
  for (const auto& id : j.at("beautiful")) out.partition.beautiful.insert(id.get<std::string>());
  for (const auto& id : j.at("ugly")) out.partition.ugly.insert(id.get<std::string>());
  for (const auto& id : j.at("discarded")) out.partition.discarded.insert(id.get<std::string>());
  return out;
}

Json explanation_to_json(const Explanation& ex) {
  Json deltas = Json::array();
  for (const auto& d : ex.deltas) {
    deltas.push_back({{"element", std::string(element_name(d.element))}, {"delta", d.delta}});
  }
  return {{"elementDeltas", deltas}, {"tagsAdded", ex.tags_added}, {"tagsRemoved", ex.tags_removed}};
}

std::vector<Json> read_ndjson_records(const fs::path& p) {
  std::istringstream in(read_text_file(p));
  std::string line;
  std::vector<Json> out;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Json j = Json::parse(line);
    if (first && j.contains("meta")) {
      first = false;
      continue;
    }
    first = false;
    out.push_back(std::move(j));
  }
  return out;
}

bool is_descendant(const std::string& id, const std::string& parent) {
  return id == parent || (id.size() > parent.size() && id.compare(0, parent.size(), parent) == 0 &&
                          id[parent.size()] == '_');
}

}  // namespace

std::optional<std::string> artifact_fingerprint(const fs::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".bin") return hex64(nn::model_config_hash(p));
  if (ext == ".idx") {
    std::uint64_t fp = 0;
    FeatureIndex::load(p, &fp);
    return hex64(fp);
  }
  if (ext == ".csv" || ext == ".txt") {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    const std::string key = "# fingerprint=";
    if (line.rfind(key, 0) == 0) return line.substr(key.size());
    return std::nullopt;
  }
  if (ext == ".ndjson") {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    const Json j = Json::parse(line, nullptr, false);
    if (j.is_object() && j.contains("meta") && j["meta"].contains("fingerprint")) {
      return j["meta"]["fingerprint"].get<std::string>();
    }
    return std::nullopt;
  }
  if (ext == ".html") {
    const std::string text = read_text_file(p);
    const std::string key = "<meta name=\"facelift-fingerprint\" content=\"";
    const auto pos = text.find(key);
    if (pos == std::string::npos) return std::nullopt;
    return text.substr(pos + key.size(), 16);
  }
  const Json j = read_json_file(p);
  if (j.is_object() && j.contains("fingerprint")) return j["fingerprint"].get<std::string>();
  return std::nullopt;
}

Pipeline::Pipeline(PipelineConfig cfg, fs::path workspace, int workers)
    : cfg_(std::move(cfg)), ws_(std::move(workspace)), workers_(std::max(1, workers)) {
  cfg_.validate();
  fp_ = cfg_.fingerprint();
}

void Pipeline::require(const std::string& relative, std::string_view producer) const {
  if (!fs::exists(ws_ / relative)) {
    throw MissingArtifact("missing artifact " + relative + " (produced by `facelift " +
                          std::string(producer) + "`)");
  }
  check_fingerprint(relative);
}

void Pipeline::check_fingerprint(const std::string& relative) const {
  const auto fp = artifact_fingerprint(ws_ / relative);
  if (!fp) throw FingerprintMismatch(relative + " carries no config fingerprint");
  if (*fp != fp_) {
    throw FingerprintMismatch(relative + " was produced with config fingerprint " + *fp +
                              ", current config is " + fp_);
  }
}

void Pipeline::run(Stage stage) {
  switch (stage) {
    case Stage::Gen: return gen();
    case Stage::Rate: return rate();
    case Stage::Rank: return rank();
    case Stage::Curate: return curate();
    case Stage::Train: return train();
    case Stage::Beautify: return beautify();
    case Stage::Metrics: return metrics();
    case Stage::Analyze: return analyze();
    case Stage::Evaluate: return evaluate_stage();
    case Stage::Report: return report();
    case Stage::All:
      for (const auto s : pipeline_order()) run(s);
      return;
  }
}

void Pipeline::gen() {
  CorpusConfig cc = cfg_.corpus;
  cc.seed = cfg_.seed;
  const auto corpus = generate_corpus(cc, cfg_.taxonomy);
  const Json generation = {{"count", cc.count},
                           {"width", cc.width},
                           {"height", cc.height},
                           {"seed", cc.seed},
                           {"oracle", oracle_to_json(cfg_.oracle)}};
  write_corpus(ws_ / "corpus", corpus, generation, fp_);
  std::cout << "gen: " << corpus.size() << " scenes -> corpus/\n";
}

void Pipeline::rate() {
  require(kManifest, "gen");
  const auto corpus = read_corpus(ws_ / "corpus");
  const auto js = simulate_judgments(corpus, cfg_.oracle, cfg_.pairs_per_scene,
                                     mix_seed(cfg_.seed, kSeedJudgments));
  write_text_file(ws_ / kJudgments, judgments_to_ndjson(js, fp_));
  std::cout << "rate: " << js.size() << " judgments -> " << kJudgments << "\n";
}

void Pipeline::rank() {
  require(kManifest, "gen");
  require(kJudgments, "rate");
  const auto manifest = read_manifest(ws_ / "corpus");
  std::vector<std::string> ids;
  for (const auto& id : manifest.at("ids")) ids.push_back(id.get<std::string>());
  const auto js = judgments_from_ndjson(read_text_file(ws_ / kJudgments));
  const auto ratings = apply_judgments(ids, js, cfg_.trueskill);
  write_text_file(ws_ / kRatings, ratings_to_csv(ratings, fp_));

  std::map<std::string, ScoredScene> scores;
  for (const auto& [id, r] : ratings) scores[id] = {score(r), r.judgments};
  const auto part =
      partition(scores, cfg_.min_judgments, cfg_.lower_percentile, cfg_.upper_percentile);
  Json jscores = Json::array();
  for (const auto& [id, s] : scores) {
    jscores.push_back({{"id", id}, {"score", s.score}, {"judgments", s.judgments}});
  }
  write_json_file(ws_ / kPartition, {{"fingerprint", fp_},
                                     {"min_judgments", cfg_.min_judgments},
                                     {"lower_percentile", cfg_.lower_percentile},
                                     {"upper_percentile", cfg_.upper_percentile},
                                     {"beautiful", part.beautiful},
                                     {"ugly", part.ugly},
                                     {"discarded", part.discarded},
                                     {"scores", jscores}});
  std::cout << "rank: " << part.beautiful.size() << " beautiful, " << part.ugly.size()
            << " ugly, " << part.discarded.size() << " discarded -> " << kPartition << "\n";
}

void Pipeline::curate() {
  require(kManifest, "gen");
  require(kPartition, "rank");
  const auto corpus = read_corpus(ws_ / "corpus");
  const auto scored = read_partition(ws_ / kPartition);
  const auto data = split_labelled(corpus, scored.partition, cfg_.classifier_train.split, cfg_.seed);
  const auto train_labels = labels_of(data.train, data.labels);
  nn::Classifier base = nn::fit_classifier(data.train, train_labels,
                                           seeded(cfg_.classifier_train, cfg_.seed),
                                           classifier_arch_for(cfg_));
  base.set_config_hash(cfg_.fingerprint_value());
  fs::create_directories(ws_ / "models");
  nn::save_classifier(ws_ / kExtractor, base);

  const auto curated = augment(data.train, data.labels, cfg_.augmentation, extractor_of(base),
                               cfg_.taxonomy, mix_seed(cfg_.seed, kSeedAugment));
  std::vector<Scene> scenes;
  Json entries = Json::array();
  std::set<std::string> taken;
  for (const auto& t : curated.filter.taken) taken.insert(t.scene.id());
  const auto add = [&](const AugmentedScene& a) {
    scenes.push_back(a.scene);
    const bool rotated = a.scene.provenance().kind == Provenance::Kind::Rotated;
    entries.push_back({{"id", a.scene.id()},
                       {"parent", a.parent},
                       {"class", std::string(class_name(a.inherited_class))},
                       {"similarity", a.similarity_to_parent},
                       {"kind", rotated ? "rotated" : "translated"},
                       {"taken", rotated || taken.count(a.scene.id()) > 0}});
  };
  for (const auto& a : curated.rotated) add(a);
  for (const auto& a : curated.translated) add(a);
  write_corpus(ws_ / "corpus/augmented", scenes,
               {{"source", "augmentation"}, {"mode", std::string(mode_name(cfg_.augmentation.mode))}},
               fp_);
  Json train_ids = Json::array(), test_ids = Json::array();
  for (const auto& s : data.train) train_ids.push_back(s.id());
  for (const auto& s : data.test) test_ids.push_back(s.id());
  write_json_file(ws_ / kAugmentation, {{"fingerprint", fp_},
                                        {"threshold", curated.filter.threshold},
                                        {"train", train_ids},
                                        {"test", test_ids},
                                        {"entries", entries}});
  write_text_file(ws_ / kFilterReport, filter_report_csv(curated.filter, fp_));

  std::ostringstream prop;
  prop << "# fingerprint=" << fp_ << "\ntag,category,propensity\n";
  for (const auto& [tag, v] : propensity(curated.filter.taken, curated.filter.filtered)) {
    const auto cat = cfg_.taxonomy.category_of(tag);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    prop << tag << ',' << (cat ? category_name(*cat) : std::string_view(kUnclassified)) << ','
         << buf << '\n';
  }
  write_text_file(ws_ / kPropensity, prop.str());
  const double frac = curated.translated.empty()
                          ? 0.0
                          : static_cast<double>(curated.filter.taken.size()) /
                                static_cast<double>(curated.translated.size());
  std::cout << "curate: " << curated.rotated.size() << " rotated, " << curated.translated.size()
            << " translated (" << curated.filter.taken.size() << " taken, fraction " << frac
            << ", threshold " << curated.filter.threshold << ")\n";
}

void Pipeline::train() {
  require(kManifest, "gen");
  require(kPartition, "rank");
  require(kAugmentation, "curate");
  require(kAugManifest, "curate");
  require(kExtractor, "curate");
  const auto corpus = read_corpus(ws_ / "corpus");
  std::map<std::string, const Scene*> by_id;
  for (const auto& s : corpus) by_id[s.id()] = &s;
  const auto augmented = read_corpus(ws_ / "corpus/augmented");
  std::map<std::string, const Scene*> aug_by_id;
  for (const auto& s : augmented) aug_by_id[s.id()] = &s;

  const Json aug = read_json_file(ws_ / kAugmentation);
  const auto scored = read_partition(ws_ / kPartition);
  SplitLabelled data;
  for (const auto& id : scored.partition.beautiful) data.labels[id] = ClassLabel::Beautiful;
  for (const auto& id : scored.partition.ugly) data.labels[id] = ClassLabel::Ugly;
  for (const auto& id : aug.at("train")) data.train.push_back(*by_id.at(id.get<std::string>()));
  for (const auto& id : aug.at("test")) data.test.push_back(*by_id.at(id.get<std::string>()));

  CuratedCorpus curated;
  curated.filter.threshold = aug.at("threshold").get<double>();
  for (const auto& e : aug.at("entries")) {
    const std::string cls = e.at("class").get<std::string>();
    AugmentedScene a{*aug_by_id.at(e.at("id").get<std::string>()), e.at("parent").get<std::string>(),
                     cls == "beautiful" ? ClassLabel::Beautiful : ClassLabel::Ugly,
                     e.at("similarity").get<double>()};
    if (e.at("kind").get<std::string>() == "rotated") {
      curated.rotated.push_back(std::move(a));
    } else {
      curated.translated.push_back(a);
      (e.at("taken").get<bool>() ? curated.filter.taken : curated.filter.filtered).push_back(std::move(a));
    }
  }

  const nn::Classifier base = nn::load_classifier(ws_ / kExtractor);
  auto ladder = fit_ladder(data, curated, base, cfg_, cfg_.seed);
  nn::Classifier final_model = ladder.models.at(cfg_.augmentation.mode);
  final_model.set_config_hash(cfg_.fingerprint_value());
  nn::save_classifier(ws_ / kClassifier, final_model);

  auto gen = nn::train_generator(corpus, seeded(cfg_.generator_train, cfg_.seed),
                                 generator_arch_for(cfg_));
  gen.model.set_config_hash(cfg_.fingerprint_value());
  nn::save_generator(ws_ / kGenerator, gen.model);

  Json jl = Json::array();
  for (const auto& e : ladder.entries) {
    jl.push_back({{"mode", std::string(mode_name(e.mode))},
                  {"train_size", e.train_size},
                  {"train_accuracy", e.train_accuracy},
                  {"test_accuracy", e.test_accuracy}});
  }
  const auto& chosen = *std::find_if(ladder.entries.begin(), ladder.entries.end(),
                                     [&](const LadderEntry& e) { return e.mode == cfg_.augmentation.mode; });
  write_json_file(ws_ / kTraining,
                  {{"fingerprint", fp_},
                   {"ladder", jl},
                   {"test_size", data.test.size()},
                   {"classifier",
                    {{"mode", std::string(mode_name(chosen.mode))},
                     {"train_size", chosen.train_size},
                     {"train_accuracy", chosen.train_accuracy},
                     {"test_accuracy", chosen.test_accuracy},
                     {"parameters", final_model.parameter_count()}}},
                   {"generator",
                    {{"train_accuracy", gen.report.train_accuracy},
                     {"heldout_accuracy", gen.report.heldout_accuracy},
                     {"train_size", gen.report.train_size},
                     {"heldout_size", gen.report.heldout_size},
                     {"final_loss", gen.report.final_loss}}}});
  std::cout << "train:";
  for (const auto& e : ladder.entries) std::cout << ' ' << mode_name(e.mode) << '=' << e.test_accuracy;
  std::cout << "; generator held-out reconstruction " << gen.report.heldout_accuracy << "\n";
}

void Pipeline::beautify() {
  require(kManifest, "gen");
  require(kPartition, "rank");
  require(kAugmentation, "curate");
  require(kAugManifest, "curate");
  require(kClassifier, "train");
  require(kGenerator, "train");
  const auto corpus = read_corpus(ws_ / "corpus");
  const auto augmented = read_corpus(ws_ / "corpus/augmented");
  const Json aug = read_json_file(ws_ / kAugmentation);
  const auto scored = read_partition(ws_ / kPartition);
  const auto clf = nn::load_classifier(ws_ / kClassifier);
  const auto gen = nn::load_generator(ws_ / kGenerator);

  // Searchable set: originals plus the augmented scenes admitted under the configured mode.
  std::map<std::string, const Scene*> by_id;
  for (const auto& s : corpus) by_id[s.id()] = &s;
  for (const auto& s : augmented) by_id[s.id()] = &s;
  std::vector<Scene> searchable = corpus;
  const auto mode = cfg_.augmentation.mode;
  for (const auto& e : aug.at("entries")) {
    const bool rotated = e.at("kind").get<std::string>() == "rotated";
    const bool keep = mode != AugmentationMode::None &&
                      (rotated || mode == AugmentationMode::RotationPlusTranslation ||
                       (mode == AugmentationMode::RotationPlusConservativeTranslation &&
                        e.at("taken").get<bool>()));
    if (keep) searchable.push_back(*by_id.at(e.at("id").get<std::string>()));
  }
  std::vector<std::vector<double>> feats(searchable.size());
  parallel_for(searchable.size(), workers_, [&](std::size_t i) { feats[i] = clf.features(searchable[i]); });
  std::vector<std::string> ids;
  std::vector<double> flat;
  for (std::size_t i = 0; i < searchable.size(); ++i) {
    ids.push_back(searchable[i].id());
    flat.insert(flat.end(), feats[i].begin(), feats[i].end());
  }
  const FeatureIndex index(static_cast<std::size_t>(clf.arch().feature_dim()), std::move(ids),
                           std::move(flat));
  fs::create_directories(ws_ / "index");
  index.save(ws_ / kIndex, cfg_.fingerprint_value());

  // Inputs: walk from the extreme of the score ranking inward, skipping scenes
  // the classifier already assigns to the target class.
  const auto order = rank_order(scored.scores, cfg_.min_judgments);
  const auto n = order.size();
  const auto lower_n = static_cast<std::size_t>(std::lround(static_cast<double>(n) * cfg_.evaluation.lower / 100.0));
  const auto upper_n = static_cast<std::size_t>(std::lround(static_cast<double>(n) * (100.0 - cfg_.evaluation.upper) / 100.0));
  struct Job {
    const Scene* scene;
    ClassLabel target;
  };
  std::vector<Job> jobs;
  std::size_t skipped[2] = {0, 0}, beyond[2] = {0, 0};
  for (const auto target : {ClassLabel::Beautiful, ClassLabel::Ugly}) {
    const int t = static_cast<int>(target);
    const std::size_t pool = target == ClassLabel::Beautiful ? lower_n : upper_n;
    int taken = 0;
    for (std::size_t k = 0; k < n && taken < cfg_.evaluation.count; ++k) {
      const auto& id = target == ClassLabel::Beautiful ? order[k] : order[n - 1 - k];
      const Scene* s = by_id.at(id);
      if (clf.predict(*s) == target) {
        ++skipped[t];
        continue;
      }
      jobs.push_back({s, target});
      ++taken;
      if (k >= pool) ++beyond[t];
    }
    if (taken < cfg_.evaluation.count) {
      std::cerr << "warning: only " << taken << " scenes available to "
                << (target == ClassLabel::Beautiful ? "beautify" : "uglify") << "\n";
    }
    if (beyond[t] > 0) {
      std::cerr << "warning: " << beyond[t] << " " << (target == ClassLabel::Beautiful ? "beautification" : "uglification")
                << " input(s) taken from outside the " << (target == ClassLabel::Beautiful ? "bottom" : "top")
                << " percentile pool after the saturation guard skipped " << skipped[t] << "\n";
    }
  }

  std::vector<MaximizationResult> results(jobs.size());
  std::vector<Neighbor> found(jobs.size());
  parallel_for(jobs.size(), workers_, [&](std::size_t i) {
    results[i] = maximize(*jobs[i].scene, jobs[i].target, clf, gen, cfg_.maximize);
    Scene& templ = results[i].templ;
    templ.set_tags(cfg_.taxonomy.tag(templ));
    const std::string parent = jobs[i].scene->id();
    found[i] = retrieve(index, templ, clf, 1,
                        [&](const std::string& id) { return is_descendant(id, parent); })
                   .front();
  });

  fs::create_directories(ws_ / "beautified/templates");
  std::ostringstream out;
  out << Json{{"meta",
               {{"fingerprint", fp_},
                {"records", jobs.size()},
                {"skipped_saturated", {{"beautify", skipped[1]}, {"uglify", skipped[0]}}}}}}
             .dump()
      << '\n';
  std::size_t increased = 0;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& r = results[i];
    const Scene& original = *jobs[i].scene;
    const Scene& retrieved = *by_id.at(found[i].id);
    const std::string tfile = "beautified/templates/" + r.templ.id() + ".json";
    Json tj = scene_to_json(r.templ);
    tj["fingerprint"] = fp_;
    write_text_file(ws_ / tfile, tj.dump() + "\n");
    increased += r.final_probability > r.initial_probability;
    out << Json{{"direction", jobs[i].target == ClassLabel::Beautiful ? "beautify" : "uglify"},
                {"originalId", original.id()},
                {"templateFile", tfile},
                {"retrievedId", retrieved.id()},
                {"distance", found[i].distance},
                {"objectiveTrace", r.objective_trace},
                {"initialProbability", r.initial_probability},
                {"finalProbability", r.final_probability},
                {"iterations", r.iterations},
                {"stalled", r.stalled},
                {"rolledBack", r.rolled_back},
                {"explanation", explanation_to_json(explain(original, retrieved))}}
               .dump()
        << '\n';
  }
  write_text_file(ws_ / kRecords, out.str());
  std::cout << "beautify: " << jobs.size() << " scenes optimized (" << increased
            << " with increased target probability) -> " << kRecords << "\n";
}

namespace {

struct RecordSets {
  std::vector<Json> records;
  std::vector<Scene> ugly_original, beautified, beautiful_original, uglified;
};

RecordSets load_record_sets(const fs::path& ws) {
  RecordSets rs;
  rs.records = read_ndjson_records(ws / kRecords);
  std::map<std::string, Scene> cache;
  const auto scene = [&](const std::string& id) -> const Scene& {
    auto it = cache.find(id);
    if (it != cache.end()) return it->second;
    fs::path p = ws / "corpus" / (id + ".json");
    if (!fs::exists(p)) p = ws / "corpus/augmented" / (id + ".json");
    return cache.emplace(id, scene_from_json(read_json_file(p))).first->second;
  };
  for (const auto& r : rs.records) {
    const bool up = r.at("direction").get<std::string>() == "beautify";
    const Scene& o = scene(r.at("originalId").get<std::string>());
    const Scene& t = scene(r.at("retrievedId").get<std::string>());
    (up ? rs.ugly_original : rs.beautiful_original).push_back(o);
    (up ? rs.beautified : rs.uglified).push_back(t);
  }
  return rs;
}

Json set_summary(const std::vector<Scene>& set, const Taxonomy& taxonomy) {
  std::vector<int> sky(kSkyBins, 0), cx(kSkyBins, 0);
  double tree = 0, skyf = 0, h = 0;
  const double top = std::log(static_cast<double>(kNumElements));
  for (const auto& s : set) {
    const auto m = metric_report(s, taxonomy);
    tree += m.tree_fraction;
    skyf += m.sky_fraction;
    h += m.complexity;
    ++sky[static_cast<std::size_t>(m.sky_bin)];
    ++cx[static_cast<std::size_t>(std::min(kSkyBins - 1, static_cast<int>(m.complexity / top * kSkyBins)))];
  }
  const double n = set.empty() ? 1.0 : static_cast<double>(set.size());
  return {{"count", set.size()},
          {"taxonomy", taxonomy_counts(set, taxonomy)},
          {"mean_tree_fraction", tree / n},
          {"mean_sky_fraction", skyf / n},
          {"mean_complexity", h / n},
          {"sky_bins", sky},
          {"complexity_bins", cx}};
}

}  // namespace

void Pipeline::metrics() {
  require(kRecords, "beautify");
  const auto rs = load_record_sets(ws_);
  std::vector<std::pair<std::string, Scene>> rows;
  for (const auto& s : rs.ugly_original) rows.emplace_back("ugly-original", s);
  for (const auto& s : rs.beautified) rows.emplace_back("beautified", s);
  for (const auto& s : rs.beautiful_original) rows.emplace_back("beautiful-original", s);
  for (const auto& s : rs.uglified) rows.emplace_back("uglified", s);
  write_text_file(ws_ / kMetricsCsv, metrics_csv(rows, cfg_.taxonomy, fp_));

  const Json b = set_summary(rs.beautified, cfg_.taxonomy);
  const Json u = set_summary(rs.uglified, cfg_.taxonomy);
  const Json bo = set_summary(rs.ugly_original, cfg_.taxonomy);
  const Json uo = set_summary(rs.beautiful_original, cfg_.taxonomy);
  const auto diff = [&](const char* key) { return b[key].get<double>() - u[key].get<double>(); };
  const Json summary = {
      {"fingerprint", fp_},
      {"sets", {{"beautified", b}, {"uglified", u}, {"ugly-original", bo}, {"beautiful-original", uo}}},
      {"beautified_minus_uglified",
       {{"walkable", b["taxonomy"]["Walkable"].get<int>() - u["taxonomy"]["Walkable"].get<int>()},
        {"tree_fraction", diff("mean_tree_fraction")},
        {"sky_fraction", diff("mean_sky_fraction")},
        {"complexity", diff("mean_complexity")}}},
      {"tree_change",
       {{"beautification", b["mean_tree_fraction"].get<double>() - bo["mean_tree_fraction"].get<double>()},
        {"uglification", u["mean_tree_fraction"].get<double>() - uo["mean_tree_fraction"].get<double>()}}}};
  write_json_file(ws_ / kSummary, summary);
  std::cout << "metrics: walkable " << b["taxonomy"]["Walkable"] << " vs " << u["taxonomy"]["Walkable"]
            << ", tree " << b["mean_tree_fraction"] << " vs " << u["mean_tree_fraction"] << " -> "
            << kSummary << "\n";
}

void Pipeline::analyze() {
  require(kManifest, "gen");
  require(kPartition, "rank");
  const auto corpus = read_corpus(ws_ / "corpus");
  const auto scored = read_partition(ws_ / kPartition);
  std::vector<RegressionSample> data;
  for (const auto& s : corpus) {
    if (scored.partition.beautiful.count(s.id())) data.push_back({element_histogram(s), ClassLabel::Beautiful});
    else if (scored.partition.ugly.count(s.id())) data.push_back({element_histogram(s), ClassLabel::Ugly});
  }
  std::vector<RegressionModel> models(cfg_.regression_pairs.size());
  parallel_for(models.size(), workers_, [&](std::size_t i) {
    models[i] = fit_pair_regression(data, cfg_.regression_pairs[i], cfg_.regression);
  });
  write_text_file(ws_ / kRegressionCsv, regression_csv(models, fp_));
  write_text_file(ws_ / kRegressionTxt, "# fingerprint=" + fp_ + "\n" + regression_table(models));
  Json rows = Json::array();
  for (const auto& m : models) {
    const auto q = divide_by_four(m);
    rows.push_back({{"pair", pair_label(m.first, m.second)},
                    {"alpha", m.alpha},
                    {"beta1", m.beta1},
                    {"beta2", m.beta2},
                    {"beta3", m.beta3},
                    {"divide_by_four", {q[0], q[1], q[2]}},
                    {"error_rate", m.error_rate},
                    {"converged", m.converged},
                    {"iterations", m.iterations},
                    {"log_likelihood", model_log_likelihood(m, data)}});
  }
  write_json_file(ws_ / kRegressionJson, {{"fingerprint", fp_},
                                          {"samples", data.size()},
                                          {"ridge", cfg_.regression.ridge},
                                          {"predictor_unit", "percent of scene cells"},
                                          {"models", rows}});
  std::cout << "analyze: " << models.size() << " regressions on " << data.size() << " scenes -> "
            << kRegressionCsv << "\n";
}

void Pipeline::evaluate_stage() {
  require(kRecords, "beautify");
  const auto rs = load_record_sets(ws_);
  std::vector<EvaluationPair> pairs;
  for (std::size_t i = 0; i < rs.ugly_original.size(); ++i) {
    pairs.push_back({rs.ugly_original[i], rs.beautified[i], true});
  }
  for (std::size_t i = 0; i < rs.beautiful_original.size(); ++i) {
    pairs.push_back({rs.beautiful_original[i], rs.uglified[i], false});
  }
  const auto res = evaluate(pairs, cfg_.oracle, cfg_.evaluation.votes, cfg_.evaluation.rater_noise,
                            mix_seed(cfg_.seed, kSeedEvaluate));
  Json per = Json::array();
  std::size_t up = 0, up_ok = 0, down = 0, down_ok = 0;
  for (const auto& p : res.per_pair) {
    (p.transformed_should_win ? up : down) += 1;
    (p.transformed_should_win ? up_ok : down_ok) += p.correct;
    per.push_back({{"original", p.original},
                   {"transformed", p.transformed},
                   {"direction", p.transformed_should_win ? "beautify" : "uglify"},
                   {"votes", p.votes},
                   {"votes_for_intended", p.votes_for_intended},
                   {"correct", p.correct}});
  }
  write_json_file(ws_ / kEvaluation,
                  {{"fingerprint", fp_},
                   {"pairs_judged", res.pairs_judged},
                   {"correct_pick_rate", res.correct_pick_rate},
                   {"beautify_rate", up ? static_cast<double>(up_ok) / static_cast<double>(up) : 0.0},
                   {"uglify_rate", down ? static_cast<double>(down_ok) / static_cast<double>(down) : 0.0},
                   {"votes_per_pair", res.votes_per_pair},
                   {"rater_noise", cfg_.evaluation.rater_noise},
                   {"per_pair", per}});
  std::cout << "evaluate: correct pick rate " << res.correct_pick_rate << " over "
            << res.pairs_judged << " pairs -> " << kEvaluation << "\n";
}

void Pipeline::report() {
  const std::vector<std::pair<std::string, std::string>> artifacts = {
      {kManifest, "gen"},          {kRatings, "rank"},     {kPartition, "rank"},
      {kAugmentation, "curate"},   {kFilterReport, "curate"}, {kPropensity, "curate"},
      {kTraining, "train"},        {kRecords, "beautify"}, {kSummary, "metrics"},
      {kRegressionJson, "analyze"}, {kEvaluation, "evaluate"}};
  std::vector<std::string> missing;
  for (const auto& [rel, stage] : artifacts) {
    if (!fs::exists(ws_ / rel)) missing.push_back(rel + " (" + stage + ")");
  }
  if (missing.size() == artifacts.size()) {
    std::string msg = "nothing to report; missing stages:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw MissingArtifact(msg);
  }
  for (const auto& [rel, _] : artifacts) {
    if (fs::exists(ws_ / rel)) check_fingerprint(rel);
  }
  for (const auto& m : missing) std::cerr << "warning: report gap, missing " << m << "\n";

  detail::ReportInputs in;
  in.fingerprint = fp_;
  in.config = cfg_.to_json();
  in.gallery = cfg_.gallery;
  in.missing = missing;
  const auto load = [&](const char* rel) -> std::optional<Json> {
    if (!fs::exists(ws_ / rel)) return std::nullopt;
    return read_json_file(ws_ / rel);
  };
  in.partition = load(kPartition);
  in.augmentation = load(kAugmentation);
  in.training = load(kTraining);
  in.summary = load(kSummary);
  in.regression = load(kRegressionJson);
  in.evaluation = load(kEvaluation);
  if (fs::exists(ws_ / kPropensity)) in.propensity_csv = read_text_file(ws_ / kPropensity);
  if (fs::exists(ws_ / kRecords)) {
    const auto rs = load_record_sets(ws_);
    in.records = rs.records;
    for (std::size_t i = 0, bi = 0, ui = 0; i < rs.records.size(); ++i) {
      const bool up = rs.records[i].at("direction").get<std::string>() == "beautify";
      detail::GalleryItem g;
      g.record = rs.records[i];
      g.original = up ? rs.ugly_original[bi] : rs.beautiful_original[ui];
      g.retrieved = up ? rs.beautified[bi] : rs.uglified[ui];
      const fs::path tp = ws_ / rs.records[i].at("templateFile").get<std::string>();
      if (fs::exists(tp)) g.templ = scene_from_json(read_json_file(tp));
      (up ? bi : ui) += 1;
      in.items.push_back(std::move(g));
    }
  }
  write_text_file(ws_ / kReport, detail::render_report(in));
  std::cout << "report: " << kReport << (missing.empty() ? "" : " (with gaps)") << "\n";
}

}  // namespace facelift
