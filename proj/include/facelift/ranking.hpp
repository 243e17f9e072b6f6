#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "facelift/scene.hpp"

namespace facelift {

enum class ClassLabel : int { Ugly = 0, Beautiful = 1 };

inline ClassLabel opposite(ClassLabel c) {
  return c == ClassLabel::Ugly ? ClassLabel::Beautiful : ClassLabel::Ugly;
}
std::string_view class_name(ClassLabel c);

enum class Outcome { LeftWins, RightWins, Draw };

struct Judgment {
  std::string left;
  std::string right;
  Outcome outcome = Outcome::LeftWins;
  std::uint64_t rater_seed = 0;

  bool operator==(const Judgment&) const = default;
};

struct TrueSkillConfig {
  double mu0 = 25.0;
  double sigma0 = 25.0 / 3.0;
  double beta = 25.0 / 6.0;
  double tau = 25.0 / 300.0;
  double draw_probability = 0.0;

  void validate() const;
};

struct RatingState {
  double mu = 25.0;
  double sigma = 25.0 / 3.0;
  int judgments = 0;

  static RatingState fresh(const TrueSkillConfig& cfg) { return {cfg.mu0, cfg.sigma0, 0}; }
  bool operator==(const RatingState&) const = default;
};

/// One decisive TrueSkill update. Returns (winner', loser').
std::pair<RatingState, RatingState> update(const RatingState& winner, const RatingState& loser,
                                           const TrueSkillConfig& cfg);

/// Conservative skill estimate μ − 3σ.
inline double score(const RatingState& r) { return r.mu - 3.0 * r.sigma; }

/// Applies judgments in order. Unknown ids are an error; draws are skipped
/// with a warning (the decisive update has no draw margin).
std::map<std::string, RatingState> apply_judgments(const std::vector<std::string>& ids,
                                                   const std::vector<Judgment>& judgments,
                                                   const TrueSkillConfig& cfg);

struct Partition {
  std::set<std::string> beautiful;
  std::set<std::string> ugly;
  std::set<std::string> discarded;
};

struct ScoredScene {
  double score = 0.0;
  int judgments = 0;
};

/// Rank-based split of the eligible scenes (≥ min_judgments): the lowest
/// round(n·lower/100) are ugly, the highest round(n·(100−upper)/100) are
/// beautiful, the rest are discarded along with under-judged scenes.
Partition partition(const std::map<std::string, ScoredScene>& scores, int min_judgments,
                    double lower_percentile, double upper_percentile);

/// Eligible ids sorted by ascending score (ties by id).
std::vector<std::string> rank_order(const std::map<std::string, ScoredScene>& scores,
                                    int min_judgments);

/// Round-robin simulated crowd: each round pairs a fresh permutation of the
/// corpus, so every scene takes part in `pairs_per_scene` comparisons. A rater
/// perceives oracle score + noise_scale·N(0,1) for each side.
std::vector<Judgment> simulate_judgments(const std::vector<Scene>& corpus,
                                         const OracleConfig& oracle, int pairs_per_scene,
                                         std::uint64_t seed);

/// Spearman rank correlation (average ranks for ties).
double spearman(const std::vector<double>& a, const std::vector<double>& b);

// I/O
std::string judgments_to_ndjson(const std::vector<Judgment>& js, const std::string& fingerprint);
std::vector<Judgment> judgments_from_ndjson(const std::string& text);
std::string ratings_to_csv(const std::map<std::string, RatingState>& ratings,
                           const std::string& fingerprint);

}  // namespace facelift
