#include "facelift/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace facelift {

double complexity(const Scene& s) { return shannon_entropy(element_histogram(s)); }

int sky_bin(double sky_fraction) {
  if (!(sky_fraction >= 0.0 && sky_fraction <= 1.0)) {
    throw std::invalid_argument("sky fraction outside [0, 1]");
  }
  return std::min(static_cast<int>(std::floor(sky_fraction * kSkyBins)), kSkyBins - 1);
}

int sky_bin(const Scene& s) { return sky_bin(element_histogram(s)[Element::Sky]); }

MetricReport metric_report(const Scene& s, const Taxonomy& taxonomy) {
  const auto h = element_histogram(s);
  MetricReport m;
  for (const auto& t : s.tags()) {
    const auto cat = taxonomy.category_of(t.name);
    if (!cat) continue;
    switch (*cat) {
      case TagCategory::Walkable: ++m.walkable; break;
      case TagCategory::Natural: ++m.natural; break;
      case TagCategory::Landmark: ++m.landmark; break;
      case TagCategory::Architectural: ++m.architectural; break;
    }
  }
  m.tree_fraction = h[Element::Trees];
  m.sky_fraction = h[Element::Sky];
  m.sky_bin = sky_bin(m.sky_fraction);
  m.complexity = shannon_entropy(h);
  return m;
}

std::map<std::string, int> taxonomy_counts(const std::vector<Scene>& scenes,
                                           const Taxonomy& taxonomy) {
  std::map<std::string, int> out;
  for (const auto c : {TagCategory::Architectural, TagCategory::Walkable, TagCategory::Landmark,
                       TagCategory::Natural}) {
    out[std::string(category_name(c))] = 0;
  }
  out[kUnclassified] = 0;
  std::set<std::string> unknown;
  for (const auto& s : scenes) {
    for (const auto& t : s.tags()) {
      if (const auto cat = taxonomy.category_of(t.name)) {
        ++out[std::string(category_name(*cat))];
      } else {
        ++out[kUnclassified];
        if (unknown.insert(t.name).second) {
          std::cerr << "warning: tag '" << t.name << "' is not in the taxonomy\n";
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double dot(const std::array<double, 4>& a, const std::array<double, 4>& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3];
}

// Solves A x = b for a 4x4 system by Gaussian elimination with partial pivoting.
bool solve4(std::array<std::array<double, 4>, 4> a, std::array<double, 4> b,
            std::array<double, 4>& x) {
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (!(std::abs(a[piv][col]) > 0.0)) return false;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (int r = col + 1; r < 4; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int k = col; k < 4; ++k) a[r][k] -= f * a[col][k];
      b[r] -= f * b[col];
    }
  }
  for (int r = 3; r >= 0; --r) {
    double s = b[r];
    for (int k = r + 1; k < 4; ++k) s -= a[r][k] * x[k];
    x[r] = s / a[r][r];
  }
  return true;
}

}  // namespace

double log_likelihood(const std::array<double, 4>& beta,
                      const std::vector<std::array<double, 4>>& x, const std::vector<int>& y) {
  double ll = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = dot(beta, x[i]);
    ll += y[i] ? -softplus(-z) : -softplus(z);
  }
  return ll;
}

LogisticFit fit_logistic(const std::vector<std::array<double, 4>>& x, const std::vector<int>& y,
                         const RegressionOptions& opt) {
  if (x.size() != y.size()) throw std::invalid_argument("fit_logistic: size mismatch");
  LogisticFit fit;
  auto& beta = fit.beta;
  for (fit.iterations = 1; fit.iterations <= opt.max_iterations; ++fit.iterations) {
    std::array<std::array<double, 4>, 4> h{};
    std::array<double, 4> g{};
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double p = sigmoid(dot(beta, x[i]));
      const double w = std::max(p * (1.0 - p), 1e-12);
      for (int a = 0; a < 4; ++a) {
        g[a] += (y[i] - p) * x[i][a];
        for (int b = 0; b < 4; ++b) h[a][b] += w * x[i][a] * x[i][b];
      }
    }
    for (int a = 1; a < 4; ++a) {
      h[a][a] += opt.ridge;
      g[a] -= opt.ridge * beta[a];
    }
    std::array<double, 4> step{};
    if (!solve4(h, g, step)) break;
    double change = 0.0;
    for (int a = 0; a < 4; ++a) {
      beta[a] += step[a];
      change = std::max(change, std::abs(step[a]));
    }
    if (!std::isfinite(change)) break;
    if (change < opt.tolerance) {
      fit.converged = true;
      break;
    }
  }
  fit.iterations = std::min(fit.iterations, opt.max_iterations);
  return fit;
}

std::vector<std::array<double, 4>> design_matrix(const std::vector<RegressionSample>& data,
                                                 Element a, Element b, double scale) {
  std::vector<std::array<double, 4>> x;
  x.reserve(data.size());
  for (const auto& d : data) {
    const double v1 = d.histogram[a] * scale, v2 = d.histogram[b] * scale;
    x.push_back({1.0, v1, v2, v1 * v2});
  }
  return x;
}

RegressionModel fit_pair_regression(const std::vector<RegressionSample>& data,
                                    std::pair<Element, Element> pair,
                                    const RegressionOptions& opt) {
  if (data.size() < 20) throw std::invalid_argument("fit_pair_regression: need at least 20 samples");
  std::vector<int> y;
  y.reserve(data.size());
  for (const auto& d : data) y.push_back(d.label == ClassLabel::Beautiful ? 1 : 0);
  const int ones = static_cast<int>(std::count(y.begin(), y.end(), 1));
  if (ones == 0 || ones == static_cast<int>(y.size())) {
    throw std::invalid_argument("fit_pair_regression: both classes must be present");
  }
  const auto x = design_matrix(data, pair.first, pair.second, opt.scale);
  const auto fit = fit_logistic(x, y, opt);

  RegressionModel m;
  m.alpha = fit.beta[0];
  m.beta1 = fit.beta[1];
  m.beta2 = fit.beta[2];
  m.beta3 = fit.beta[3];
  m.first = pair.first;
  m.second = pair.second;
  m.converged = fit.converged;
  m.iterations = fit.iterations;
  m.scale = opt.scale;
  m.samples = data.size();
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const int pred = sigmoid(dot(fit.beta, x[i])) >= 0.5 ? 1 : 0;
    wrong += pred != y[i];
  }
  m.error_rate = static_cast<double>(wrong) / static_cast<double>(x.size());
  if (!m.converged) {
    std::cerr << "warning: regression " << pair_label(pair.first, pair.second)
              << " did not converge (possible separation); reporting the last iterate\n";
  }
  return m;
}

double model_log_likelihood(const RegressionModel& m, const std::vector<RegressionSample>& data) {
  std::vector<int> y;
  for (const auto& d : data) y.push_back(d.label == ClassLabel::Beautiful ? 1 : 0);
  return log_likelihood(m.coefficients(), design_matrix(data, m.first, m.second, m.scale), y);
}

std::array<double, 3> divide_by_four(const RegressionModel& m) {
  return {divide_by_four(m.beta1), divide_by_four(m.beta2), divide_by_four(m.beta3)};
}

std::vector<std::pair<Element, Element>> default_regression_pairs() {
  return {{Element::Buildings, Element::Trees}, {Element::Sky, Element::Buildings},
          {Element::Road, Element::Vehicles},   {Element::Sky, Element::Trees},
          {Element::Road, Element::Trees},      {Element::Road, Element::Buildings}};
}

std::string element_display_name(Element e) {
  if (e == Element::Road) return "Roads";
  std::string n(element_name(e));
  n[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(n[0])));
  return n;
}

std::string pair_label(Element a, Element b) {
  return element_display_name(a) + " - " + element_display_name(b);
}

std::string regression_table(const std::vector<RegressionModel>& models) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-22s %9s %9s %9s %11s\n", "Pair", "beta1", "beta2", "beta3",
                "Error rate");
  out << buf;
  for (const auto& m : models) {
    std::snprintf(buf, sizeof buf, "%-22s %9.3f %9.3f %9.3f %10.1f%%\n",
                  pair_label(m.first, m.second).c_str(), m.beta1, m.beta2, m.beta3,
                  100.0 * m.error_rate);
    out << buf;
  }
  return out.str();
}

std::string regression_csv(const std::vector<RegressionModel>& models,
                           const std::string& fingerprint) {
  std::ostringstream out;
  out << "# fingerprint=" << fingerprint << '\n';
  out << "pair,beta1,beta2,beta3,error_rate,converged\n";
  char buf[200];
  for (const auto& m : models) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%d\n",
                  pair_label(m.first, m.second).c_str(), m.beta1, m.beta2, m.beta3, m.error_rate,
                  m.converged ? 1 : 0);
    out << buf;
  }
  return out.str();
}

std::string metrics_csv(const std::vector<std::pair<std::string, Scene>>& rows,
                        const Taxonomy& taxonomy, const std::string& fingerprint) {
  std::ostringstream out;
  out << "# fingerprint=" << fingerprint << '\n';
  out << "id,set,walkable,natural,landmark,architectural,tree_fraction,sky_fraction,sky_bin,"
         "complexity\n";
  char buf[256];
  for (const auto& [set, s] : rows) {
    const auto m = metric_report(s, taxonomy);
    std::snprintf(buf, sizeof buf, "%s,%s,%d,%d,%d,%d,%.17g,%.17g,%d,%.17g\n", s.id().c_str(),
                  set.c_str(), m.walkable, m.natural, m.landmark, m.architectural,
                  m.tree_fraction, m.sky_fraction, m.sky_bin, m.complexity);
    out << buf;
  }
  return out.str();
}

}  // namespace facelift
