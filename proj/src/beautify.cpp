#include "facelift/beautify.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iostream>
#include <numeric>
#include <set>

#include "binary_io.hpp"

namespace facelift {

double LatentCode::norm() const {
  double s = 0.0;
  for (const double v : f) s += v * v;
  return std::sqrt(s);
}

void MaximizeConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be >= 0");
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  if (!(step_size > 0.0)) throw std::invalid_argument("step_size must be positive");
  if (max_halvings < 0 || patience < 1) throw std::invalid_argument("invalid line-search settings");
}

ObjectiveValue maximization_objective(const nn::Classifier& c, const nn::Generator& g,
                                      const std::vector<double>& f, double lambda,
                                      ClassLabel target) {
  nn::Graph graph;
  const nn::Var fv = graph.variable(nn::Tensor::row(f));
  const nn::Var cells = g.decode_distribution(graph, fv, g.bind_all(graph, false));
  const auto out = c.forward(graph, cells, c.bind_all(graph, false));
  const nn::Var p = graph.pick(out.probabilities, {static_cast<std::size_t>(target)});
  const nn::Var obj = graph.sub(p, graph.scale(graph.l2_norm(fv), lambda));
  graph.backward(obj);
  return {graph.value(obj).item(), graph.value(p).item(), graph.grad(fv).vector()};
}

MaximizationResult maximize(const Scene& input, ClassLabel target, const nn::Classifier& c,
                            const nn::Generator& g, const MaximizeConfig& cfg) {
  cfg.validate();
  if (!c.trained() || !g.trained()) throw std::logic_error("maximize: models must be trained");
  if (c.predict(input) == target) {
    throw SaturatedInput("scene '" + input.id() + "' is already classified " +
                         std::string(class_name(target)));
  }

  MaximizationResult res;
  res.target = target;
  res.initial = {g.encode(input), cfg.lambda};

  int iteration = 0;
  const auto evaluate = [&](const std::vector<double>& f) {
    try {
      auto v = maximization_objective(c, g, f, cfg.lambda, target);
      if (!std::isfinite(v.value)) throw nn::NumericError("non-finite objective", 0);
      return v;
    } catch (const nn::NumericError& e) {
      throw DivergenceError("maximize diverged at iteration " + std::to_string(iteration) +
                                " (" + e.what() + ")",
                            iteration);
    }
  };

  std::vector<double> f = res.initial.f;
  ObjectiveValue cur = evaluate(f);
  res.initial_probability = cur.probability;
  res.objective_trace.push_back(cur.value);
  // Last accepted iterate whose target probability is at least the initial one.
  std::vector<double> kept_f = f;
  double kept_probability = cur.probability;
  std::size_t kept_len = 1;

  for (iteration = 1; iteration <= cfg.steps; ++iteration) {
    double gnorm = 0.0;
    for (const double v : cur.gradient) gnorm += v * v;
    gnorm = std::sqrt(gnorm);
    if (gnorm == 0.0) {
      res.stalled = true;
      break;
    }
    double step = cfg.step_size;
    bool accepted = false;
    for (int h = 0; h <= cfg.max_halvings; ++h, step *= 0.5) {
      std::vector<double> cand(f.size());
      for (std::size_t i = 0; i < f.size(); ++i) cand[i] = f[i] + step * cur.gradient[i] / gnorm;
      ObjectiveValue next = evaluate(cand);
      if (next.value > cur.value) {
        f = std::move(cand);
        cur = std::move(next);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.stalled = true;
      break;
    }
    res.objective_trace.push_back(cur.value);
    ++res.iterations;
    if (cur.probability >= res.initial_probability) {
      kept_f = f;
      kept_probability = cur.probability;
      kept_len = res.objective_trace.size();
    }
    const auto n = res.objective_trace.size();
    if (n > static_cast<std::size_t>(cfg.patience)) {
      const double old = res.objective_trace[n - 1 - static_cast<std::size_t>(cfg.patience)];
      if (cur.value - old < cfg.min_relative_gain * std::max(std::abs(old), 1e-12)) break;
    }
  }

  if (kept_len < res.objective_trace.size()) {
    res.rolled_back = static_cast<int>(res.objective_trace.size() - kept_len);
    res.objective_trace.resize(kept_len);
    res.iterations = static_cast<int>(kept_len) - 1;
  }
  res.final = {kept_f, cfg.lambda};
  res.final_probability = kept_probability;
  res.templ = g.decode_scene(kept_f, input.id() + "_template");
  return res;
}

// ---------------------------------------------------------------------------

FeatureIndex::FeatureIndex(std::size_t dim, std::vector<std::string> ids,
                           std::vector<double> features)
    : dim_(dim), ids_(std::move(ids)), features_(std::move(features)) {
  if (features_.size() != dim_ * ids_.size()) {
    throw std::invalid_argument("FeatureIndex: feature table does not match dim x count");
  }
  for (const double v : features_) {
    if (!std::isfinite(v)) throw std::invalid_argument("FeatureIndex: non-finite feature");
  }
}

FeatureIndex FeatureIndex::build(const std::vector<Scene>& corpus, const nn::Classifier& c) {
  if (!c.trained()) throw std::logic_error("build_index: classifier has not been trained");
  const auto dim = static_cast<std::size_t>(c.arch().feature_dim());
  std::vector<std::string> ids;
  std::vector<double> feats;
  ids.reserve(corpus.size());
  feats.reserve(corpus.size() * dim);
  for (const auto& s : corpus) {
    const auto v = c.features(s);
    if (v.size() != dim) throw std::invalid_argument("build_index: feature dimension mismatch");
    ids.push_back(s.id());
    feats.insert(feats.end(), v.begin(), v.end());
  }
  return FeatureIndex(dim, std::move(ids), std::move(feats));
}

std::span<const double> FeatureIndex::features(std::size_t i) const {
  return std::span<const double>(features_).subspan(i * dim_, dim_);
}

std::vector<Neighbor> FeatureIndex::query(std::span<const double> q, std::size_t k,
                                          const std::function<bool(const std::string&)>& exclude) const {
  if (empty()) throw std::invalid_argument("query on an empty index");
  if (q.size() != dim_) throw std::invalid_argument("query dimension does not match the index");
  std::vector<Neighbor> all;
  all.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (exclude && exclude(ids_[i])) continue;
    const auto row = features(i);
    double d2 = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) d2 += (row[j] - q[j]) * (row[j] - q[j]);
    all.push_back({ids_[i], std::sqrt(d2)});
  }
  if (k > all.size()) {
    std::cerr << "warning: requested " << k << " neighbours, only " << all.size()
              << " candidates available\n";
    k = all.size();
  }
  const auto less = [](const Neighbor& a, const Neighbor& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), less);
  all.resize(k);
  return all;
}

namespace {
constexpr char kIndexMagic[8] = {'F', 'L', 'F', 'T', 'I', 'N', 'D', 'X'};
constexpr std::uint32_t kIndexVersion = 1;
}  // namespace

void FeatureIndex::save(const std::filesystem::path& path, std::uint64_t fingerprint) const {
  detail::Writer w(path);
  w.bytes(kIndexMagic, sizeof kIndexMagic);
  w.u32(kIndexVersion);
  w.u64(fingerprint);
  w.u32(static_cast<std::uint32_t>(dim_));
  w.u64(ids_.size());
  for (const double v : features_) w.f64(v);
  for (const auto& id : ids_) w.str(id);
}

FeatureIndex FeatureIndex::load(const std::filesystem::path& path, std::uint64_t* fingerprint) {
  detail::Reader r(path);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kIndexMagic, sizeof magic) != 0) {
    throw std::runtime_error(path.string() + " is not an index file");
  }
  if (const auto v = r.u32(); v != kIndexVersion) {
    throw std::runtime_error(path.string() + ": unsupported index version " + std::to_string(v));
  }
  const auto fp = r.u64();
  if (fingerprint) *fingerprint = fp;
  const std::size_t dim = r.u32();
  const std::size_t count = r.u64();
  if (dim * count > (std::size_t{1} << 28)) throw std::runtime_error(path.string() + ": corrupt header");
  std::vector<double> feats(dim * count);
  for (auto& v : feats) v = r.f64();
  std::vector<std::string> ids(count);
  for (auto& id : ids) id = r.str();
  return FeatureIndex(dim, std::move(ids), std::move(feats));
}

std::vector<Neighbor> retrieve(const FeatureIndex& index, const Scene& templ,
                               const nn::Classifier& c, std::size_t k,
                               const std::function<bool(const std::string&)>& exclude) {
  const auto q = c.features(templ);
  return index.query(q, k, exclude);
}

// ---------------------------------------------------------------------------

Explanation explain(const Scene& original, const Scene& beautified) {
  const auto a = element_histogram(original);
  const auto b = element_histogram(beautified);
  Explanation ex;
  for (int i = 0; i < kNumElements; ++i) {
    ex.deltas.push_back({static_cast<Element>(i), b[i] - a[i]});
  }
  std::stable_sort(ex.deltas.begin(), ex.deltas.end(), [](const auto& x, const auto& y) {
    return std::abs(x.delta) > std::abs(y.delta);
  });
  std::set<std::string> ta, tb;
  for (const auto& t : original.tags()) ta.insert(t.name);
  for (const auto& t : beautified.tags()) tb.insert(t.name);
  std::set_difference(tb.begin(), tb.end(), ta.begin(), ta.end(), std::back_inserter(ex.tags_added));
  std::set_difference(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(ex.tags_removed));
  return ex;
}

}  // namespace facelift
