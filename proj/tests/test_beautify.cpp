#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "facelift/beautify.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace facelift;

namespace {

struct Models {
  std::vector<Scene> corpus;
  std::vector<ClassLabel> labels;
  nn::Classifier classifier;
  nn::Generator generator;
};

// Small models trained once: beautiful means above-median tree cover.
const Models& models() {
  static const Models m = [] {
    Models out;
    out.corpus = generate_corpus({160, 32, 32, 12}, Taxonomy::standard());
    std::vector<double> trees;
    for (const auto& s : out.corpus) trees.push_back(element_histogram(s)[Element::Trees]);
    auto sorted = trees;
    std::sort(sorted.begin(), sorted.end());
    const double cut = sorted[sorted.size() / 2];
    for (const double t : trees) out.labels.push_back(t >= cut ? ClassLabel::Beautiful : ClassLabel::Ugly);
    nn::TrainConfig cc;
    cc.epochs = 15;
    out.classifier = nn::fit_classifier(out.corpus, out.labels, cc, {});
    nn::TrainConfig gc;
    gc.learning_rate = 0.5;
    gc.epochs = 4;
    gc.batch_size = 16;
    out.generator = nn::train_generator(out.corpus, gc, {}).model;
    return out;
  }();
  return m;
}

std::vector<const Scene*> predicted(ClassLabel label, std::size_t n) {
  std::vector<const Scene*> out;
  for (const auto& s : models().corpus) {
    if (models().classifier.predict(s) == label) out.push_back(&s);
    if (out.size() == n) break;
  }
  return out;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("maximize") {
  const auto& m = models();
  const auto ugly = predicted(ClassLabel::Ugly, 5);
  REQUIRE(ugly.size() == 5);

  SUBCASE("zero steps returns the encoding unchanged") {
    MaximizeConfig cfg;
    cfg.steps = 0;
    const auto r = maximize(*ugly[0], ClassLabel::Beautiful, m.classifier, m.generator, cfg);
    CHECK(r.final.f == r.initial.f);
    CHECK(r.initial.f == m.generator.encode(*ugly[0]));
    CHECK(r.objective_trace.size() == 1);
    CHECK(r.iterations == 0);
  }

  SUBCASE("objective traces are non-decreasing") {
    for (const auto* s : ugly) {
      const auto r = maximize(*s, ClassLabel::Beautiful, m.classifier, m.generator, {});
      for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
        CHECK(r.objective_trace[i] >= r.objective_trace[i - 1] - 1e-9);
      CHECK(r.objective_trace.back() >= r.objective_trace.front());
      CHECK(r.final_probability >= r.initial_probability);
      CHECK(r.iterations + 1 == static_cast<int>(r.objective_trace.size()));
      CHECK(r.templ.width() == s->width());
    }
  }

  SUBCASE("a dominant norm penalty shrinks the code") {
    MaximizeConfig cfg;
    cfg.lambda = 1e6;
    const auto r = maximize(*ugly[1], ClassLabel::Beautiful, m.classifier, m.generator, cfg);
    CHECK(norm(r.final.f) < norm(r.initial.f));
  }

  SUBCASE("inputs already in the target class are rejected") {
    const auto beautiful = predicted(ClassLabel::Beautiful, 1);
    REQUIRE(beautiful.size() == 1);
    CHECK_THROWS_AS(maximize(*beautiful[0], ClassLabel::Beautiful, m.classifier, m.generator, {}),
                    SaturatedInput);
    CHECK_NOTHROW(maximize(*beautiful[0], ClassLabel::Ugly, m.classifier, m.generator, {}));
  }

  SUBCASE("untrained models are rejected") {
    CHECK_THROWS_AS(maximize(*ugly[0], ClassLabel::Beautiful, nn::Classifier::initialize({}, 1), m.generator, {}),
                    std::logic_error);
  }
}

TEST_CASE("maximization objective gradient matches finite differences") {
  const auto& m = models();
  const auto f0 = m.generator.encode(m.corpus[3]);
  const double lambda = 0.01;
  const auto v = maximization_objective(m.classifier, m.generator, f0, lambda, ClassLabel::Beautiful);
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < f0.size(); ++i) {
    auto plus = f0, minus = f0;
    plus[i] += h;
    minus[i] -= h;
    const double num = (maximization_objective(m.classifier, m.generator, plus, lambda, ClassLabel::Beautiful).value -
                        maximization_objective(m.classifier, m.generator, minus, lambda, ClassLabel::Beautiful).value) /
                       (2.0 * h);
    worst = std::max(worst, std::abs(num - v.gradient[i]) / std::max({std::abs(num), std::abs(v.gradient[i]), 1e-6}));
  }
  CHECK(worst < 1e-4);
  CHECK(v.value == doctest::Approx(v.probability - lambda * norm(f0)).epsilon(1e-12));
}

TEST_CASE("FeatureIndex") {
  const auto& m = models();

  SUBCASE("empty index") {
    const FeatureIndex empty;
    CHECK(empty.empty());
    CHECK_THROWS_AS(empty.query(std::vector<double>{}, 1), std::invalid_argument);
  }

  SUBCASE("built index matches an exhaustive scan") {
    const std::vector<Scene> subset(m.corpus.begin(), m.corpus.begin() + 60);
    const auto index = FeatureIndex::build(subset, m.classifier);
    CHECK(index.size() == 60);
    CHECK(index.dim() == 64);

    std::vector<std::string> ids;
    std::vector<std::vector<double>> rows;
    for (const auto& s : subset) {
      ids.push_back(s.id());
      rows.push_back(m.classifier.features(s));
    }
    for (std::size_t q = 0; q < 10; ++q) {
      const auto feat = m.classifier.features(m.corpus[q * 7]);
      CHECK(index.query(feat, 5) == oracle::brute_force_knn(ids, rows, feat, 5));
    }
    const auto self = index.query(rows[4], 1);
    CHECK(self[0].id == ids[4]);
    CHECK(self[0].distance == 0.0);
    CHECK(index.query(rows[0], 60).size() == 60);
    CHECK(index.query(rows[0], 500).size() == 60);

    const auto excluded = index.query(rows[4], 1, [&](const std::string& id) { return id == ids[4]; });
    CHECK(excluded[0].id != ids[4]);

    const auto via_retrieve = retrieve(index, subset[4], m.classifier, 1);
    CHECK(via_retrieve[0].id == ids[4]);
  }

  SUBCASE("file round trip and corruption") {
    const auto index = FeatureIndex(2, {"a", "b", "c"}, {0, 0, 1, 0, 0, 2});
    const auto dir = testing::temp_dir("index_io");
    index.save(dir / "f.idx", 77);
    std::uint64_t fp = 0;
    CHECK(FeatureIndex::load(dir / "f.idx", &fp) == index);
    CHECK(fp == 77);
    std::ofstream(dir / "bad.idx") << "garbage";
    CHECK_THROWS(FeatureIndex::load(dir / "bad.idx"));
    const auto nn = index.query(std::vector<double>{0.9, 0.0}, 2);
    CHECK(nn[0].id == "b");
    CHECK(nn[0].distance == doctest::Approx(0.1));
    CHECK(nn[1].id == "a");
  }

  SUBCASE("ties break by id and mismatched dimensions are rejected") {
    const auto index = FeatureIndex(1, {"z", "a"}, {1.0, -1.0});
    const auto nn = index.query(std::vector<double>{0.0}, 2);
    CHECK(nn[0].id == "a");
    CHECK(nn[1].id == "z");
    CHECK_THROWS_AS(index.query(std::vector<double>{0.0, 1.0}, 1), std::invalid_argument);
    CHECK_THROWS_AS(FeatureIndex(2, {"a"}, {1.0}), std::invalid_argument);
  }
}

TEST_CASE("explain") {
  const auto roads = testing::striped("r", 8, 8, {{Element::Road, 48}, {Element::Sky, 16}});
  const auto trees = testing::striped("t", 8, 8, {{Element::Trees, 32}, {Element::Road, 16}, {Element::Sky, 16}});

  SUBCASE("deltas are sorted by magnitude and sum to zero") {
    const auto ex = explain(roads, trees);
    REQUIRE(ex.deltas.size() == 12);
    CHECK(ex.deltas[0].element == Element::Road);
    CHECK(ex.deltas[0].delta == -0.5);
    CHECK(ex.deltas[1].element == Element::Trees);
    CHECK(ex.deltas[1].delta == 0.5);
    double sum = 0.0;
    for (const auto& d : ex.deltas) sum += d.delta;
    CHECK(std::abs(sum) < 1e-12);
  }

  SUBCASE("swapping the arguments negates every delta") {
    const auto a = explain(roads, trees), b = explain(trees, roads);
    for (const auto& d : a.deltas) {
      const auto it = std::find_if(b.deltas.begin(), b.deltas.end(), [&](const auto& x) { return x.element == d.element; });
      CHECK(it->delta == -d.delta);
    }
  }

  SUBCASE("tag differences") {
    const auto& tax = Taxonomy::standard();
    const auto corpus = generate_corpus({30, 32, 32, 2}, tax);
    for (std::size_t i = 1; i < corpus.size(); ++i) {
      const auto ex = explain(corpus[0], corpus[i]);
      for (const auto& t : ex.tags_added) {
        CHECK(std::none_of(corpus[0].tags().begin(), corpus[0].tags().end(), [&](const SceneTag& x) { return x.name == t; }));
        CHECK(std::any_of(corpus[i].tags().begin(), corpus[i].tags().end(), [&](const SceneTag& x) { return x.name == t; }));
      }
      CHECK(ex.tags_removed == explain(corpus[i], corpus[0]).tags_added);
    }
  }
}
