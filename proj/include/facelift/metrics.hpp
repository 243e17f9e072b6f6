#pragma once

#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "facelift/ranking.hpp"
#include "facelift/scene.hpp"

namespace facelift {

struct MetricReport {
  int walkable = 0;
  int natural = 0;
  int landmark = 0;
  int architectural = 0;
  double tree_fraction = 0.0;
  double sky_fraction = 0.0;
  int sky_bin = 0;
  double complexity = 0.0;
};

/// Shannon entropy (natural log) of the element histogram, in [0, ln 12].
double complexity(const Scene& s);

inline constexpr int kSkyBins = 6;
/// min(floor(6·fraction), 5).
int sky_bin(double sky_fraction);
int sky_bin(const Scene& s);

MetricReport metric_report(const Scene& s, const Taxonomy& taxonomy);

inline constexpr const char* kUnclassified = "unclassified";

/// Tag occurrences per category over the set, plus an "unclassified" bucket
/// for tags the taxonomy does not know (each reported once as a warning).
std::map<std::string, int> taxonomy_counts(const std::vector<Scene>& scenes,
                                           const Taxonomy& taxonomy);

// ---------------------------------------------------------------------------
// Pairwise-interaction logistic regression

struct RegressionSample {
  ElementHistogram histogram;
  ClassLabel label = ClassLabel::Ugly;
};

struct RegressionOptions {
  double ridge = 1e-6;       // on β1..β3, not on α
  double tolerance = 1e-8;   // max |Δcoefficient|
  int max_iterations = 100;
  double scale = 100.0;      // predictors enter as percentages of the scene
};

struct RegressionModel {
  double alpha = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double beta3 = 0.0;
  Element first = Element::Road;
  Element second = Element::Road;
  double error_rate = 0.0;
  bool converged = false;
  int iterations = 0;
  double scale = 100.0;
  std::size_t samples = 0;

  std::array<double, 4> coefficients() const { return {alpha, beta1, beta2, beta3}; }
};

/// Logistic fit by IRLS on rows x = (1, v1, v2, v1·v2). Returns
/// (coefficients, converged, iterations). Separated data ends unconverged
/// with the last iterate.
struct LogisticFit {
  std::array<double, 4> beta{};
  bool converged = false;
  int iterations = 0;
};
LogisticFit fit_logistic(const std::vector<std::array<double, 4>>& x, const std::vector<int>& y,
                         const RegressionOptions& opt);

/// Σ y log p + (1 − y) log(1 − p) for the design rows.
double log_likelihood(const std::array<double, 4>& beta,
                      const std::vector<std::array<double, 4>>& x, const std::vector<int>& y);

std::vector<std::array<double, 4>> design_matrix(const std::vector<RegressionSample>& data,
                                                 Element a, Element b, double scale);

/// Requires ≥ 20 samples with both classes present.
RegressionModel fit_pair_regression(const std::vector<RegressionSample>& data,
                                    std::pair<Element, Element> pair,
                                    const RegressionOptions& opt = {});

double model_log_likelihood(const RegressionModel& m, const std::vector<RegressionSample>& data);

/// Upper bound on the change in probability per unit predictor change.
inline double divide_by_four(double beta) { return beta / 4.0; }
std::array<double, 3> divide_by_four(const RegressionModel& m);

/// The six predictor pairs reported by default.
std::vector<std::pair<Element, Element>> default_regression_pairs();

/// "Buildings - Trees" style label.
std::string pair_label(Element a, Element b);
std::string element_display_name(Element e);

/// Fixed-width text table: Pair, β1, β2, β3, Error rate.
std::string regression_table(const std::vector<RegressionModel>& models);
std::string regression_csv(const std::vector<RegressionModel>& models, const std::string& fingerprint);

/// One row per scene; `set` names the group the scene belongs to.
std::string metrics_csv(const std::vector<std::pair<std::string, Scene>>& rows,
                        const Taxonomy& taxonomy, const std::string& fingerprint);

}  // namespace facelift
