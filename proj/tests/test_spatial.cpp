#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "fashiontrend/spatial.hpp"

using namespace fashiontrend;

namespace {

CodewordVector cv(std::vector<double> bins, std::string city = {}) {
  CodewordVector v;
  v.bins = std::move(bins);
  v.support = 10;
  v.city = std::move(city);
  return v;
}

// Histograms concentrated on a class-specific block of bins plus noise.
LabeledCodewordSet separable_set(std::size_t classes, std::size_t per_class, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  LabeledCodewordSet s;
  const std::size_t block = k / classes;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      std::vector<double> b(k);
      double total = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        b[j] = 0.2 * uniform01(rng) + ((j / block == c) ? 1.0 + uniform01(rng) : 0.0);
        total += b[j];
      }
      for (auto& x : b) x /= total;
      s.vectors.push_back(cv(b, "city" + std::to_string(c)));
      s.labels.push_back("city" + std::to_string(c));
    }
  }
  return s;
}

double naive_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

std::map<std::string, CodewordVector> random_cities(std::size_t n, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  std::map<std::string, CodewordVector> out;
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<double> b(k);
    double total = 0.0;
    for (auto& x : b) total += (x = std::pow(uniform01(rng), 3.0));
    for (auto& x : b) x /= total;
    const std::string name = "C" + std::to_string(c);
    out.emplace(name, cv(b, name));
  }
  return out;
}

Manifest city_records(const std::string& city, std::size_t n, std::size_t offset) {
  Manifest m;
  for (std::size_t i = 0; i < n; ++i) {
    Record r;
    r.id = city + "-" + std::to_string(i);
    r.city = city;
    r.vector_index = offset + i;
    m.records.push_back(r);
  }
  return m;
}

}  // namespace

TEST_CASE("similarity") {
  const auto a = cv({0.5, 0.5, 0, 0}), b = cv({0.25, 0.25, 0.25, 0.25});
  for (auto m : {SimilarityMeasure::cosine, SimilarityMeasure::histogram_intersection}) {
    CHECK(similarity(a, a, m) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(similarity(cv({1, 0}), cv({0, 1}), m) == 0.0);
    CHECK(similarity(a, b, m) == similarity(b, a, m));
    CHECK_THROWS_AS(similarity(a, cv({1, 0}), m), ValidationError);
    auto empty = cv({0, 0, 0, 0});
    empty.support = 0;
    CHECK_THROWS_AS(similarity(a, empty, m), ValidationError);
  }
  CHECK(similarity(a, b, SimilarityMeasure::histogram_intersection) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(similarity(a, b, SimilarityMeasure::cosine) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));

  const auto cities = random_cities(6, 20, 4);
  for (const auto& [n1, v1] : cities)
    for (const auto& [n2, v2] : cities)
      CHECK(similarity(v1, v2, SimilarityMeasure::cosine) == doctest::Approx(naive_cosine(v1.bins, v2.bins)).epsilon(1e-12));

  CHECK(parse_similarity_measure("intersection") == SimilarityMeasure::histogram_intersection);
  CHECK(parse_similarity_measure(to_string(SimilarityMeasure::cosine)) == SimilarityMeasure::cosine);
  CHECK_THROWS_AS(parse_similarity_measure("euclid"), ValidationError);
}

TEST_CASE("similarity graph") {
  const auto cities = random_cities(16, 32, 8);
  const auto full = build_similarity_graph(cities, 0.0, SimilarityMeasure::cosine);
  CHECK(full.nodes.size() == 16);
  CHECK(full.edges.size() == 120);
  CHECK(build_similarity_graph(cities, 1.0, SimilarityMeasure::cosine).edges.empty());

  std::set<std::pair<std::string, std::string>> previous;
  bool first = true;
  for (double th : {0.0, 0.1, 0.2, 0.5, 0.7, 0.8, 0.9, 1.0}) {
    for (auto m : {SimilarityMeasure::cosine, SimilarityMeasure::histogram_intersection}) {
      const auto g = build_similarity_graph(cities, th, m);
      for (const auto& e : g.edges) {
        CHECK(e.weight >= th);
        CHECK(e.weight == similarity(cities.at(e.a), cities.at(e.b), m));
      }
    }
    std::set<std::pair<std::string, std::string>> edges;
    for (const auto& e : build_similarity_graph(cities, th, SimilarityMeasure::cosine).edges) edges.insert({e.a, e.b});
    if (!first) CHECK(std::includes(previous.begin(), previous.end(), edges.begin(), edges.end()));
    previous = edges;
    first = false;
  }

  std::map<std::string, CodewordVector> one{{"X", cv({1.0}, "X")}};
  CHECK_THROWS_AS(build_similarity_graph(one, 0.2, SimilarityMeasure::cosine), ValidationError);

  const auto small = build_similarity_graph(random_cities(3, 4, 1), 0.0, SimilarityMeasure::cosine);
  const auto dot = small.to_dot();
  CHECK(dot.rfind("graph ", 0) == 0);
  CHECK(std::count(dot.begin(), dot.end(), '{') == 1);
  CHECK(dot.find(" -- ") != std::string::npos);
  CHECK(dot.find("penwidth=") != std::string::npos);
  const auto j = nlohmann::json::parse(small.to_json());
  CHECK(j["edges"].size() == 3);
  CHECK(j["nodes"].size() == 3);
}

TEST_CASE("classifiers") {
  SUBCASE("one vector per class is memorized") {
    LabeledCodewordSet s;
    s.vectors = {cv({0.9, 0.1}), cv({0.2, 0.8})};
    s.labels = {"b", "a"};
    const auto ncm = train_classifier(s, ClassifierKind::nearest_class_mean);
    CHECK(ncm->classes() == std::vector<std::string>{"a", "b"});
    CHECK(ncm->predict(s.vectors[0].bins) == "b");
    CHECK(ncm->predict(s.vectors[1].bins) == "a");
  }
  SUBCASE("separable classes reach full training accuracy") {
    const auto train = separable_set(4, 15, 32, 3);
    for (auto kind : {ClassifierKind::nearest_class_mean, ClassifierKind::rbf_svm}) {
      const auto model = train_classifier(train, kind, SvmParams{.c = 100.0, .gamma = 32.0});
      CHECK(model->kind() == kind);
      const auto cm = evaluate(*model, train);
      CHECK(cm.accuracy() == 1.0);
      const auto held_out = evaluate(*model, separable_set(4, 10, 32, 99));
      CHECK(held_out.accuracy() >= 0.95);
    }
  }
  SUBCASE("preconditions") {
    LabeledCodewordSet s;
    CHECK_THROWS_AS(train_classifier(s, ClassifierKind::nearest_class_mean), ValidationError);
    s.vectors = {cv({1.0})};
    CHECK_THROWS_AS(train_classifier(s, ClassifierKind::nearest_class_mean), ValidationError);
    s.labels = {"only"};
    CHECK(train_classifier(s, ClassifierKind::rbf_svm)->predict(std::vector<double>{0.3}) == "only");
  }
  CHECK(parse_classifier_kind("nearest_class_mean") == ClassifierKind::nearest_class_mean);
  CHECK(parse_classifier_kind(to_string(ClassifierKind::rbf_svm)) == ClassifierKind::rbf_svm);
  CHECK_THROWS_AS(parse_classifier_kind("knn"), ValidationError);
}

TEST_CASE("confusion matrix") {
  const auto train = separable_set(3, 5, 12, 1);
  const auto model = train_classifier(train, ClassifierKind::nearest_class_mean);
  const auto cm = evaluate(*model, train);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(cm.counts[i][j] == (i == j ? 5u : 0u));
  CHECK(cm.total() == 15);
  CHECK(cm.trace() == 15);

  // Every test vector looks like class 1, so only that column fills up.
  LabeledCodewordSet skewed = train;
  for (std::size_t i = 0; i < skewed.size(); ++i) skewed.vectors[i] = train.vectors[5];
  const auto col = evaluate(*model, skewed);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(col.counts[i][1] == 5);
    CHECK(col.counts[i][0] + col.counts[i][2] == 0);
  }
  CHECK(col.accuracy() == doctest::Approx(1.0 / 3.0));

  LabeledCodewordSet unseen = train;
  unseen.labels[0] = "elsewhere";
  CHECK_THROWS_AS(evaluate(*model, unseen), ValidationError);

  CHECK(cm.to_csv().rfind("true\\predicted,city0,city1,city2\n", 0) == 0);
  const auto j = nlohmann::json::parse(cm.to_json());
  CHECK(j["classes"].size() == 3);
}

TEST_CASE("make_labeled_sets") {
  const std::size_t k = 4;
  std::map<std::string, Manifest> per_city;
  per_city["A"] = city_records("A", 20, 0);
  per_city["B"] = city_records("B", 30, 20);
  std::vector<std::size_t> assignments(50);
  for (std::size_t i = 0; i < 50; ++i) assignments[i] = i < 20 ? i % 2 : 2 + i % 2;

  const LabeledSetParams p{.train_n = 1, .test_n = 1, .sample_size = 10, .seed = 3};
  const auto split = make_labeled_sets(per_city, k, assignments, p);
  CHECK(split.train.size() == 2);
  CHECK(split.test.size() == 2);
  CHECK(split.train.per_vector_sample_size == 10);
  for (std::size_t i = 0; i < split.train.size(); ++i) {
    CHECK(split.train.vectors[i].support == 10);
    CHECK(split.train.vectors[i].city == split.train.labels[i]);
  }
  // Histograms only use the city's own bins.
  CHECK(split.train.vectors[0].bins[2] + split.train.vectors[0].bins[3] == 0.0);

  const auto again = make_labeled_sets(per_city, k, assignments, p);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(again.train.vectors[i].bins == split.train.vectors[i].bins);
    CHECK(again.test.vectors[i].bins == split.test.vectors[i].bins);
  }

  SUBCASE("train and test pools are disjoint") {
    // Each record gets its own bin, so the bins used reveal the records drawn.
    std::map<std::string, Manifest> single{{"A", city_records("A", 20, 0)}};
    std::vector<std::size_t> own(20);
    for (std::size_t i = 0; i < 20; ++i) own[i] = i;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto s = make_labeled_sets(single, 20, own, {.train_n = 1, .test_n = 1, .sample_size = 10, .seed = seed});
      for (std::size_t b = 0; b < 20; ++b)
        CHECK_FALSE((s.train.vectors[0].bins[b] > 0.0 && s.test.vectors[0].bins[b] > 0.0));
    }
  }
  SUBCASE("shortfall names the city") {
    try {
      make_labeled_sets(per_city, k, assignments, {.train_n = 1, .test_n = 1, .sample_size = 11, .seed = 3});
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("A") != std::string::npos);
    }
  }
}
