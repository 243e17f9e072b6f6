#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "facelift/scene.hpp"
#include "facelift/scene_io.hpp"
#include "helpers.hpp"

using namespace facelift;
using testing::striped;

TEST_CASE("element labels are a bijection onto 0..11") {
  std::set<std::string> names;
  for (int c = 0; c < kNumElements; ++c) {
    const auto e = static_cast<Element>(c);
    const std::string n(element_name(e));
    names.insert(n);
    REQUIRE(element_from_name(n).has_value());
    CHECK(code(*element_from_name(n)) == c);
  }
  CHECK(names.size() == 12);
  CHECK(names.count("road markings") == 1);
  CHECK_FALSE(element_from_name("lamp").has_value());
}

TEST_CASE("scene construction rejects invalid grids") {
  CHECK_THROWS_AS(Scene("a", 0, 4, {}), InvalidScene);
  CHECK_THROWS_AS(Scene("a", 2, 2, {0, 1, 2}), InvalidScene);
  CHECK_THROWS_AS(Scene("a", 2, 2, {0, 1, 2, 12}), InvalidScene);
  std::vector<SceneTag> six(6, SceneTag{"Plaza", TagCategory::Walkable, 0.5});
  CHECK_THROWS_AS(Scene("a", 2, 2, {0, 0, 0, 0}, six), InvalidScene);
}

TEST_CASE("generate_corpus") {
  const auto& tax = Taxonomy::standard();

  SUBCASE("fixed seed gives byte-identical corpora") {
    const CorpusConfig cfg{2, 8, 8, 7};
    const auto a = generate_corpus(cfg, tax);
    const auto b = generate_corpus(cfg, tax);
    REQUIRE(a.size() == 2);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(scene_to_json(a[i]).dump() == scene_to_json(b[i]).dump());
    }
  }

  SUBCASE("100 scenes of 32x32, every code below 12, at most five tags") {
    const auto corpus = generate_corpus({100, 32, 32, 1}, tax);
    REQUIRE(corpus.size() == 100);
    for (const auto& s : corpus) {
      CHECK(s.cell_count() == 1024);
      CHECK(std::all_of(s.labels().begin(), s.labels().end(), [](auto c) { return c < 12; }));
      CHECK(s.tags().size() <= kMaxTags);
      double sum = 0.0;
      for (const double p : element_histogram(s).fractions) sum += p;
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
  }

  SUBCASE("500 scenes span tree fractions from 0.05 to 0.6") {
    const auto corpus = generate_corpus({500, 32, 32, 3}, tax);
    double lo = 1.0, hi = 0.0;
    for (const auto& s : corpus) {
      const double t = element_histogram(s)[Element::Trees];
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
    CHECK(lo <= 0.05);
    CHECK(hi >= 0.6);
  }

  SUBCASE("tree-dominant scenes carry Natural or Walkable tags") {
    const auto corpus = generate_corpus({300, 32, 32, 5}, tax);
    int dominant = 0, tagged = 0;
    for (const auto& s : corpus) {
      if (element_histogram(s)[Element::Trees] < 0.5) continue;
      ++dominant;
      tagged += std::any_of(s.tags().begin(), s.tags().end(), [](const SceneTag& t) {
        return t.category == TagCategory::Natural || t.category == TagCategory::Walkable;
      });
    }
    REQUIRE(dominant > 0);
    CHECK(tagged == dominant);
  }

  SUBCASE("invalid dimensions are rejected") {
    CHECK_THROWS_AS(generate_corpus({1, 32, 32, 1}, tax), std::invalid_argument);
    CHECK_THROWS_AS(generate_corpus({10, 4, 32, 1}, tax), std::invalid_argument);
  }
}

TEST_CASE("element_histogram") {
  const auto sky = Scene::filled("sky", 8, 8, Element::Sky);
  const auto h = element_histogram(sky);
  CHECK(h[Element::Sky] == 1.0);
  for (int c = 0; c < kNumElements; ++c) {
    if (c != code(Element::Sky)) CHECK(h[c] == 0.0);
  }

  const auto half = striped("h", 8, 8, {{Element::Road, 32}, {Element::Trees, 32}});
  CHECK(element_histogram(half)[Element::Road] == 0.5);
  CHECK(element_histogram(half)[Element::Trees] == 0.5);

  const auto t327 = striped("t", 32, 32, {{Element::Trees, 327}, {Element::Road, 1024 - 327}});
  CHECK(element_histogram(t327)[Element::Trees] == 327.0 / 1024.0);
}

TEST_CASE("oracle_score") {
  auto o = OracleConfig::standard();
  o.noise_scale = 0.0;
  const auto trees = Scene::filled("t", 8, 8, Element::Trees);
  const auto roads = Scene::filled("r", 8, 8, Element::Road);
  CHECK(oracle_score(o, trees, 1) > oracle_score(o, roads, 1));
  CHECK(oracle_score(o, trees, 1) == oracle_score(o, trees, 99));

  SUBCASE("hand evaluation on a 50/50 trees/buildings scene with the shipped weights") {
    const Json cfg = read_json_file(testing::source_dir() / "config/default.json");
    const auto& w = cfg.at("oracle").at("weights");
    const double penalty = cfg.at("oracle").at("entropy_penalty").get<double>();
    const double expected = 0.5 * w.at("trees").get<double>() + 0.5 * w.at("buildings").get<double>() -
                            penalty * std::log(2.0);
    CHECK(expected == doctest::Approx((1.6 - 0.5) / 2.0 - 0.15 * std::log(2.0)).epsilon(1e-12));
    const auto s = striped("tb", 8, 8, {{Element::Trees, 32}, {Element::Buildings, 32}});
    auto shipped = oracle_from_json(cfg.at("oracle"));
    shipped.noise_scale = 0.0;
    CHECK(oracle_score_noise_free(shipped, s) == doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("swapping road cells for tree cells never lowers the score") {
    const auto base = testing::random_scene("m", 16, 16, 4);
    std::vector<std::uint8_t> labels(base.labels().begin(), base.labels().end());
    double prev = oracle_score(o, base, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != code(Element::Road)) continue;
      labels[i] = code(Element::Trees);
      const double cur = oracle_score(o, Scene("m", 16, 16, labels), 0);
      CHECK(cur >= prev - 1e-12);
      prev = cur;
    }
  }

  SUBCASE("noise is deterministic per seed") {
    auto noisy = OracleConfig::standard();
    const auto s = testing::random_scene("n", 8, 8, 1);
    CHECK(oracle_score(noisy, s, 5) == oracle_score(noisy, s, 5));
    CHECK(oracle_score(noisy, s, 5) != oracle_score(noisy, s, 6));
  }
}

TEST_CASE("taxonomy tagging") {
  SUBCASE("tags are ordered by confidence with ties broken by name") {
    const Taxonomy t({{"Beta", TagCategory::Natural}, {"Alpha", TagCategory::Walkable},
                      {"Gamma", TagCategory::Landmark}},
                     {TagRule{"Beta", {Element::Trees}, 0.1, {}, {}, {}, {}},
                      TagRule{"Alpha", {Element::Trees}, 0.1, {}, {}, {}, {}},
                      TagRule{"Gamma", {Element::Sky}, 0.1, {}, {}, {}, {}}});
    const auto s = striped("s", 8, 8, {{Element::Trees, 40}, {Element::Sky, 24}});
    const auto tags = t.tag(s);
    REQUIRE(tags.size() == 3);
    CHECK(tags[0].name == "Alpha");
    CHECK(tags[1].name == "Beta");
    CHECK(tags[2].name == "Gamma");
    CHECK(tags[0].confidence == doctest::Approx(40.0 / 64.0));
  }

  SUBCASE("the shipped taxonomy file equals the built-in taxonomy") {
    const auto shipped = load_taxonomy(testing::source_dir() / "config/taxonomy.json");
    CHECK(taxonomy_to_json(shipped) == taxonomy_to_json(Taxonomy::standard()));
  }

  SUBCASE("rules must name taxonomy tags") {
    CHECK_THROWS_AS(Taxonomy({}, {TagRule{"Nowhere", {Element::Trees}, 0.1, {}, {}, {}, {}}}),
                    std::invalid_argument);
  }
}

TEST_CASE("scene files round-trip") {
  const auto corpus = generate_corpus({5, 16, 16, 2}, Taxonomy::standard());
  for (const auto& s : corpus) CHECK(scene_from_json(scene_to_json(s)) == s);

  const auto dir = testing::temp_dir("scene_io");
  write_corpus(dir, corpus, {{"note", "test"}}, "0123456789abcdef");
  const auto back = read_corpus(dir);
  REQUIRE(back.size() == corpus.size());
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i] == corpus[i]);
  CHECK(read_manifest(dir).at("fingerprint") == "0123456789abcdef");
  CHECK(read_json_file(dir / (corpus[0].id() + ".json")).at("fingerprint") == "0123456789abcdef");
}
