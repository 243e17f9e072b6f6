#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "facelift/autodiff.hpp"
#include "facelift/ranking.hpp"
#include "facelift/scene.hpp"

namespace facelift::nn {

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 40;
  int batch_size = 32;
  double weight_decay = 1e-4;
  std::uint64_t seed = 1;
  double split = 0.7;

  void validate() const;
  std::uint64_t hash() const;
};

/// Per-cell one-hot labels, 1×(h·w·12).
Tensor one_hot(const Scene& s);
/// Stacks one_hot rows for the selected scenes.
Tensor one_hot_batch(std::span<const Scene> scenes, std::span<const std::size_t> rows);

/// Fully connected layer; weights in×out, bias 1×out.
struct Dense {
  Tensor weight;
  Tensor bias;

  bool operator==(const Dense&) const = default;
};

/// Parameters registered on a graph for one forward pass.
struct BoundDense {
  Var weight;
  Var bias;
};

/// Registers d on g; frozen parameters are bound as constants.
BoundDense bind(Graph& g, const Dense& d, bool trainable = true);
Var apply(Graph& g, const BoundDense& d, Var x);

// ---------------------------------------------------------------------------
// Beauty classifier

struct ClassifierArch {
  int height = 32;
  int width = 32;
  int grid = 4;                   // patch grid of the label embedding
  std::vector<int> hidden = {32, 64};  // the last hidden layer is the feature layer

  int input_dim() const { return grid * grid * kNumElements; }
  int feature_dim() const { return hidden.empty() ? input_dim() : hidden.back(); }
  PatchGeometry geometry() const { return {height, width, kNumElements, grid, grid}; }
  bool operator==(const ClassifierArch&) const = default;
};

class Classifier {
 public:
  Classifier() = default;
  static Classifier initialize(const ClassifierArch& arch, std::uint64_t seed);

  const ClassifierArch& arch() const { return arch_; }
  std::vector<Dense>& layers() { return layers_; }
  const std::vector<Dense>& layers() const { return layers_; }
  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t config_hash() const { return config_hash_; }
  void set_config_hash(std::uint64_t h) { config_hash_ = h; }
  std::size_t parameter_count() const;

  struct Outputs {
    Var features;
    Var logits;
    Var probabilities;
  };
  /// Forward from per-cell label distributions (rows × h·w·12).
  Outputs forward(Graph& g, Var cells, const std::vector<BoundDense>& bound) const;
  std::vector<BoundDense> bind_all(Graph& g, bool trainable = true) const;

  /// (P(ugly), P(beautiful)).
  std::array<double, 2> probabilities(const Scene& s) const;
  ClassLabel predict(const Scene& s) const;
  std::vector<double> features(const Scene& s) const;

  bool operator==(const Classifier&) const = default;

 private:
  friend Classifier load_classifier(const std::filesystem::path&);
  ClassifierArch arch_;
  std::vector<Dense> layers_;
  bool trained_ = false;
  std::uint64_t seed_ = 0;
  std::uint64_t config_hash_ = 0;
};

struct ClassifierReport {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  double final_loss = 0.0;
};

struct TrainedClassifier {
  Classifier model;
  ClassifierReport report;
};

/// Fits on every given scene (no split).
Classifier fit_classifier(std::span<const Scene> scenes, std::span<const ClassLabel> labels,
                          const TrainConfig& cfg, const ClassifierArch& arch);

/// Shuffles with cfg.seed, trains on the first cfg.split fraction and reports
/// accuracy on both parts. Throws when only one class is present.
TrainedClassifier train_classifier(std::span<const Scene> scenes,
                                   std::span<const ClassLabel> labels, const TrainConfig& cfg,
                                   const ClassifierArch& arch);

double accuracy(const Classifier& c, std::span<const Scene> scenes,
                std::span<const ClassLabel> labels);

/// Mean cross-entropy (no weight decay term) over the given scenes.
double classifier_loss(const Classifier& c, std::span<const Scene> scenes,
                       std::span<const ClassLabel> labels);

// ---------------------------------------------------------------------------
// Encoder / decoder

struct GeneratorArch {
  int height = 32;
  int width = 32;
  int encoder_grid = 8;
  int encoder_hidden = 96;
  int latent = 32;
  int decoder_hidden = 96;
  int decoder_grid = 8;

  PatchGeometry encoder_geometry() const {
    return {height, width, kNumElements, encoder_grid, encoder_grid};
  }
  PatchGeometry decoder_geometry() const {
    return {height, width, kNumElements, decoder_grid, decoder_grid};
  }
  bool operator==(const GeneratorArch&) const = default;
};

/// Encoder E: pooled labels → latent code. Decoder G: latent → per-cell
/// logits built from row, column and patch factors plus a per-cell bias.
class Generator {
 public:
  Generator() = default;
  static Generator initialize(const GeneratorArch& arch, std::uint64_t seed);

  const GeneratorArch& arch() const { return arch_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t config_hash() const { return config_hash_; }
  void set_config_hash(std::uint64_t h) { config_hash_ = h; }
  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }

  std::vector<Dense>& encoder() { return encoder_; }
  std::vector<Dense>& decoder() { return decoder_; }
  Tensor& cell_bias() { return cell_bias_; }
  const std::vector<Dense>& encoder() const { return encoder_; }
  const std::vector<Dense>& decoder() const { return decoder_; }
  const Tensor& cell_bias() const { return cell_bias_; }

  struct Bound {
    std::vector<BoundDense> encoder;
    std::vector<BoundDense> decoder;
    Var cell_bias;
  };
  Bound bind_all(Graph& g, bool trainable = true) const;

  Var encode(Graph& g, Var cells, const Bound& b) const;
  /// Logits, rows × (h·w·12).
  Var decode_logits(Graph& g, Var latent, const Bound& b) const;
  /// Per-cell distributions, rows × (h·w·12).
  Var decode_distribution(Graph& g, Var latent, const Bound& b) const;

  std::vector<double> encode(const Scene& s) const;
  Tensor decode(std::span<const double> latent) const;
  /// Per-cell argmax of the decoded distribution, as a synthetic scene.
  Scene decode_scene(std::span<const double> latent, const std::string& id) const;

  bool operator==(const Generator&) const = default;

 private:
  friend Generator load_generator(const std::filesystem::path&);
  GeneratorArch arch_;
  std::vector<Dense> encoder_;
  std::vector<Dense> decoder_;
  Tensor cell_bias_;
  bool trained_ = false;
  std::uint64_t seed_ = 0;
  std::uint64_t config_hash_ = 0;
};

struct GeneratorReport {
  double train_accuracy = 0.0;     // mean per-cell reconstruction accuracy
  double heldout_accuracy = 0.0;
  std::size_t train_size = 0;
  std::size_t heldout_size = 0;
  double final_loss = 0.0;
};

struct TrainedGenerator {
  Generator model;
  GeneratorReport report;
};

/// Reconstruction training (per-cell cross-entropy). Uses a cfg.split
/// train/held-out split when the corpus has more than one scene; a single
/// scene is both trained and evaluated on.
TrainedGenerator train_generator(std::span<const Scene> scenes, const TrainConfig& cfg,
                                 const GeneratorArch& arch);

double reconstruction_accuracy(const Generator& g, const Scene& s);

// ---------------------------------------------------------------------------
// Model files

void save_classifier(const std::filesystem::path& path, const Classifier& c);
Classifier load_classifier(const std::filesystem::path& path);
void save_generator(const std::filesystem::path& path, const Generator& g);
Generator load_generator(const std::filesystem::path& path);

/// Config hash recorded in a model file header, without loading parameters.
std::uint64_t model_config_hash(const std::filesystem::path& path);

}  // namespace facelift::nn
