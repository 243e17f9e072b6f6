#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "facelift/networks.hpp"
#include "facelift/ranking.hpp"
#include "facelift/scene.hpp"

namespace facelift {

struct LatentCode {
  std::vector<double> f;
  double lambda = 0.0;

  double norm() const;
};

struct MaximizeConfig {
  double lambda = 0.01;
  int steps = 200;
  double step_size = 0.5;
  int max_halvings = 20;
  /// Stop once the objective gained less than this (relative) over `patience` steps.
  double min_relative_gain = 1e-7;
  int patience = 10;

  void validate() const;
};

struct MaximizationResult {
  LatentCode initial;
  LatentCode final;
  Scene templ;  // argmax-decoded G(f_final)
  std::vector<double> objective_trace;
  ClassLabel target = ClassLabel::Beautiful;
  /// Target-class probability of the soft decoded scene, before and after.
  double initial_probability = 0.0;
  double final_probability = 0.0;
  int iterations = 0;
  bool stalled = false;  // line search failed to improve before the budget ran out
  /// Accepted steps discarded because they lowered the target probability
  /// below its initial value; the result is the last iterate that did not.
  int rolled_back = 0;
};

class SaturatedInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int iteration)
      : std::runtime_error(what), iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

/// Objective C_target(G(f)) − λ‖f‖₂ and its gradient with respect to f.
struct ObjectiveValue {
  double value = 0.0;
  double probability = 0.0;
  std::vector<double> gradient;
};
ObjectiveValue maximization_objective(const nn::Classifier& c, const nn::Generator& g,
                                      const std::vector<double>& f, double lambda,
                                      ClassLabel target);

/// Gradient ascent on the latent code, starting from E(input), with a
/// normalized step and halving line search. Throws SaturatedInput when the
/// classifier already assigns `input` to `target`.
MaximizationResult maximize(const Scene& input, ClassLabel target, const nn::Classifier& c,
                            const nn::Generator& g, const MaximizeConfig& cfg);

// ---------------------------------------------------------------------------
// Realistic-scene retrieval

struct Neighbor {
  std::string id;
  double distance = 0.0;

  bool operator==(const Neighbor&) const = default;
};

/// Exact Euclidean index over classifier feature vectors.
class FeatureIndex {
 public:
  FeatureIndex() = default;
  FeatureIndex(std::size_t dim, std::vector<std::string> ids, std::vector<double> features);

  static FeatureIndex build(const std::vector<Scene>& corpus, const nn::Classifier& c);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const double> features(std::size_t i) const;

  /// k nearest entries by (distance, id). Entries for which `exclude`
  /// returns true are skipped. k beyond the candidate count is truncated.
  std::vector<Neighbor> query(std::span<const double> q, std::size_t k,
                              const std::function<bool(const std::string&)>& exclude = {}) const;

  void save(const std::filesystem::path& path, std::uint64_t fingerprint) const;
  static FeatureIndex load(const std::filesystem::path& path, std::uint64_t* fingerprint = nullptr);

  bool operator==(const FeatureIndex&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<double> features_;
};

std::vector<Neighbor> retrieve(const FeatureIndex& index, const Scene& templ,
                               const nn::Classifier& c, std::size_t k = 1,
                               const std::function<bool(const std::string&)>& exclude = {});

// ---------------------------------------------------------------------------
// Explanation

struct ElementDelta {
  Element element = Element::Road;
  double delta = 0.0;
};

struct Explanation {
  std::vector<ElementDelta> deltas;  // all 12, by |Δ| descending, ties by code
  std::vector<std::string> tags_added;
  std::vector<std::string> tags_removed;
};

/// p_beautified(i) − p_original(i) per element plus tag set differences.
Explanation explain(const Scene& original, const Scene& beautified);

}  // namespace facelift
