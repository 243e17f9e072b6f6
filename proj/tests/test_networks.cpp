#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "facelift/networks.hpp"
#include "helpers.hpp"

using namespace facelift;
using namespace facelift::nn;

namespace {

struct Toy {
  std::vector<Scene> scenes;
  std::vector<ClassLabel> labels;
};

// Class is decided by a tree-fraction threshold at the corpus median.
Toy separable(int n, std::uint64_t seed) {
  Toy t;
  t.scenes = generate_corpus({n, 32, 32, seed}, Taxonomy::standard());
  std::vector<double> trees;
  for (const auto& s : t.scenes) trees.push_back(element_histogram(s)[Element::Trees]);
  auto sorted = trees;
  std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
  const double cut = sorted[static_cast<std::size_t>(n / 2)];
  for (const double v : trees) t.labels.push_back(v >= cut ? ClassLabel::Beautiful : ClassLabel::Ugly);
  return t;
}

TrainConfig quick(std::uint64_t seed, int epochs = 30) {
  TrainConfig c;
  c.learning_rate = 0.1;
  c.epochs = epochs;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("one_hot embedding") {
  const auto s = testing::striped("s", 8, 8, {{Element::Sky, 10}, {Element::Road, 54}});
  const Tensor t = one_hot(s);
  CHECK(t.rows() == 1);
  CHECK(t.cols() == 64 * 12);
  double sum = 0.0;
  for (const double v : t.values()) sum += v;
  CHECK(sum == 64.0);
  CHECK(t[code(Element::Sky)] == 1.0);
}

TEST_CASE("classifier outputs are distributions") {
  const auto c = Classifier::initialize({}, 3);
  const auto corpus = generate_corpus({20, 32, 32, 1}, Taxonomy::standard());
  for (const auto& s : corpus) {
    const auto p = c.probabilities(s);
    CHECK(std::abs(p[0] + p[1] - 1.0) < 1e-9);
  }
  CHECK_THROWS_AS(c.features(corpus[0]), std::logic_error);
}

TEST_CASE("train_classifier") {
  const Toy toy = separable(240, 2);

  SUBCASE("separable corpus is learned") {
    const auto r = train_classifier(toy.scenes, toy.labels, quick(1), {});
    CHECK(r.report.train_size + r.report.test_size == toy.scenes.size());
    CHECK(r.report.test_size == 72);
    CHECK(r.report.test_accuracy >= 0.9);
  }

  SUBCASE("deterministic per seed, serialized with its config hash") {
    const auto a = train_classifier(toy.scenes, toy.labels, quick(5, 5), {});
    const auto b = train_classifier(toy.scenes, toy.labels, quick(5, 5), {});
    CHECK(a.model == b.model);
    const auto c = train_classifier(toy.scenes, toy.labels, quick(6, 5), {});
    CHECK_FALSE(a.model == c.model);

    auto model = a.model;
    model.set_config_hash(0xfeedULL);
    const auto dir = testing::temp_dir("classifier_io");
    save_classifier(dir / "c.bin", model);
    CHECK(load_classifier(dir / "c.bin") == model);
    CHECK(model_config_hash(dir / "c.bin") == 0xfeedULL);
    CHECK_THROWS(load_generator(dir / "c.bin"));

    std::ofstream(dir / "junk.bin") << "not a model";
    CHECK_THROWS(load_classifier(dir / "junk.bin"));
  }

  SUBCASE("single-class corpus is rejected") {
    const std::vector<ClassLabel> same(toy.scenes.size(), ClassLabel::Ugly);
    CHECK_THROWS_AS(train_classifier(toy.scenes, same, quick(1, 1), {}), std::invalid_argument);
  }

  SUBCASE("features are deterministic, of the configured width, and self-nearest") {
    const auto r = train_classifier(toy.scenes, toy.labels, quick(1, 5), {});
    const auto f0 = r.model.features(toy.scenes[0]);
    CHECK(f0.size() == 64);
    CHECK(f0 == r.model.features(toy.scenes[0]));
    for (std::size_t q = 0; q < 10; ++q) {
      const auto fq = r.model.features(toy.scenes[q]);
      std::size_t best = 0;
      double best_d = 1e300;
      for (std::size_t i = 0; i < 40; ++i) {
        const auto fi = r.model.features(toy.scenes[i]);
        double d = 0.0;
        for (std::size_t k = 0; k < fi.size(); ++k) d += (fi[k] - fq[k]) * (fi[k] - fq[k]);
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      CHECK(best_d == 0.0);
      CHECK(r.model.features(toy.scenes[best]) == fq);
    }
  }
}

TEST_CASE("doubling epochs does not raise the loss of a linear classifier") {
  const Toy toy = separable(120, 4);
  ClassifierArch linear;
  linear.hidden = {};
  TrainConfig cfg = quick(3, 10);
  cfg.weight_decay = 0.0;
  const auto a = fit_classifier(toy.scenes, toy.labels, cfg, linear);
  cfg.epochs = 20;
  const auto b = fit_classifier(toy.scenes, toy.labels, cfg, linear);
  CHECK(classifier_loss(b, toy.scenes, toy.labels) <= classifier_loss(a, toy.scenes, toy.labels) + 1e-6);
}

TEST_CASE("generator") {
  SUBCASE("a single scene is reconstructed") {
    const auto corpus = generate_corpus({2, 32, 32, 8}, Taxonomy::standard());
    TrainConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.epochs = 300;
    cfg.batch_size = 1;
    const auto g = train_generator(std::vector<Scene>{corpus[0]}, cfg, {});
    CHECK(g.report.train_size == 1);
    CHECK(reconstruction_accuracy(g.model, corpus[0]) >= 0.99);
    CHECK(g.model.encode(corpus[0]) == g.model.encode(corpus[0]));
  }

  SUBCASE("decoded rows are distributions and the model round-trips through a file") {
    const auto g = Generator::initialize({}, 4);
    const auto dist = g.decode(std::vector<double>(32, 0.3));
    REQUIRE(dist.size() == 1024 * 12);
    for (std::size_t cell = 0; cell < 1024; ++cell) {
      double s = 0.0;
      for (int k = 0; k < 12; ++k) s += dist[cell * 12 + static_cast<std::size_t>(k)];
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
    const auto dir = testing::temp_dir("generator_io");
    save_generator(dir / "g.bin", g);
    CHECK(load_generator(dir / "g.bin") == g);
    CHECK_THROWS(g.decode(std::vector<double>(31, 0.0)));
  }

  SUBCASE("latent interpolation between tree and road scenes") {
    const auto corpus = generate_corpus({300, 32, 32, 1}, Taxonomy::standard());
    TrainConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.epochs = 6;
    cfg.batch_size = 16;
    const auto g = train_generator(corpus, cfg, {});
    CHECK(g.report.heldout_accuracy >= 0.7);
    const auto tree = *std::max_element(corpus.begin(), corpus.end(), [](const Scene& a, const Scene& b) {
      return element_histogram(a)[Element::Trees] < element_histogram(b)[Element::Trees];
    });
    const auto road = *std::max_element(corpus.begin(), corpus.end(), [](const Scene& a, const Scene& b) {
      return element_histogram(a)[Element::Road] < element_histogram(b)[Element::Road];
    });
    const auto fa = g.model.encode(tree), fb = g.model.encode(road);
    std::vector<double> counts;
    for (int k = 0; k <= 4; ++k) {
      std::vector<double> f(fa.size());
      for (std::size_t i = 0; i < f.size(); ++i) f[i] = fa[i] + (fb[i] - fa[i]) * k / 4.0;
      counts.push_back(element_histogram(g.model.decode_scene(f, "i"))[Element::Trees] * 1024.0);
    }
    bool monotone = true;
    for (std::size_t k = 1; k < counts.size(); ++k) monotone &= counts[k] <= counts[k - 1] + 1.0;
    if (!monotone) MESSAGE("latent interpolation is not monotone in tree cells (smoothness probe only)");
    CHECK(counts.front() > counts.back());
  }
}
