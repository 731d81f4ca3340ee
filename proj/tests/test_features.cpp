#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "fashiontrend/features.hpp"
#include "oracles.hpp"

using namespace fashiontrend;
namespace fs = std::filesystem;

namespace {

VectorBlock random_block(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  VectorBlock b(d, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      b.row(i)[j] = static_cast<float>(standard_normal(rng) * (1.0 + static_cast<double>(j)) + 0.5 * static_cast<double>(j));
  return b;
}

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

}  // namespace

TEST_CASE("sq_distance") {
  const std::vector<float> a{1, 2}, b{3, 4};
  CHECK(sq_distance(a, a) == 0.0);
  CHECK(sq_distance(a, b) == 8.0);
  CHECK(sq_distance(b, a) == 8.0);
  const std::vector<float> c{1, 2, 3};
  CHECK_THROWS_AS(sq_distance(a, c), ValidationError);

  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    std::vector<float> x(64), y(64);
    for (std::size_t i = 0; i < 64; ++i) {
      x[i] = static_cast<float>(standard_normal(rng) * 10.0);
      y[i] = static_cast<float>(standard_normal(rng) * 10.0);
    }
    CHECK(sq_distance(x, y) == doctest::Approx(oracle::sq_distance(x, y)).epsilon(1e-6));
    CHECK(sq_distance(x, y) == sq_distance(y, x));
  }
}

TEST_CASE("PCA on a line") {
  VectorBlock b(2, std::size_t{0});
  for (float t : {-2.0f, -1.0f, 0.0f, 1.5f, 3.0f}) b.append(std::vector<float>{t, t});
  const auto m = fit_pca(b, 1);
  CHECK(m.axis(0)[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
  CHECK(m.axis(0)[1] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
  const auto cov = oracle::sample_covariance(b);
  CHECK(m.explained_variance[0] == doctest::Approx(cov[0][0] + cov[1][1]).epsilon(1e-9));

  SUBCASE("asking for more than the rank names the rank") {
    try {
      fit_pca(b, 2);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("achievable rank is 1") != std::string::npos);
    }
  }
}

TEST_CASE("PCA matches a Jacobi eigen oracle") {
  const auto b = random_block(50, 8, 17);
  const auto m = fit_pca(b, 3, 5);
  const auto expected = oracle::jacobi_eigenvalues(oracle::sample_covariance(b));
  REQUIRE(m.explained_variance.size() == 3);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(std::abs(m.explained_variance[i] - expected[i]) <= 1e-6 * expected[i]);
  CHECK(m.seed == 5);
  CHECK(m.n_train == 50);

  SUBCASE("orthonormal axes with positive leading coordinate") {
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(dot(m.axis(i), m.axis(j)) - (i == j ? 1.0 : 0.0)) <= 1e-5);
      const auto nz = std::find_if(m.axis(i).begin(), m.axis(i).end(), [](float x) { return x != 0.0f; });
      CHECK(*nz > 0.0f);
    }
  }
  SUBCASE("project(mean) is zero") {
    for (float x : project(m, m.mean)) CHECK(x == 0.0f);
  }
  SUBCASE("per-axis variance of projections equals explained variance") {
    const auto y = project_block(m, b);
    for (std::size_t a = 0; a < 3; ++a) {
      double mu = 0.0, ss = 0.0;
      for (std::size_t i = 0; i < y.count(); ++i) mu += y.row(i)[a];
      mu /= 50.0;
      for (std::size_t i = 0; i < y.count(); ++i) ss += (y.row(i)[a] - mu) * (y.row(i)[a] - mu);
      CHECK(std::abs(ss / 49.0 - m.explained_variance[a]) <= 1e-5 * std::max(1.0, m.explained_variance[a]));
    }
  }
  SUBCASE("projection contracts") {
    Rng rng(8);
    for (int t = 0; t < 100; ++t) {
      std::vector<float> v(8), centered(8);
      for (std::size_t i = 0; i < 8; ++i) {
        v[i] = static_cast<float>(standard_normal(rng) * 5.0);
        centered[i] = v[i] - m.mean[i];
      }
      const auto y = project(m, v);
      CHECK(dot(y, y) <= dot(centered, centered) + 1e-6);
    }
  }
  CHECK_THROWS_AS(project(m, std::vector<float>(7)), ValidationError);
}

TEST_CASE("full-rank PCA reconstructs") {
  const auto b = random_block(40, 6, 23);
  const auto m = fit_pca(b, 6);
  for (std::size_t i = 0; i < b.count(); ++i) {
    const auto y = project(m, b.row(i));
    const auto r = reconstruct(m, y);
    for (std::size_t j = 0; j < 6; ++j) CHECK(std::abs(r[j] - b.row(i)[j]) < 1e-5 * std::max(1.0f, std::abs(b.row(i)[j])));
  }
  for (std::size_t i = 1; i < m.explained_variance.size(); ++i)
    CHECK(m.explained_variance[i] <= m.explained_variance[i - 1]);
}

TEST_CASE("PCA preconditions") {
  CHECK_THROWS_AS(fit_pca(random_block(1, 3, 1), 1), ValidationError);
  CHECK_THROWS_AS(fit_pca(random_block(4, 3, 1), 4), ValidationError);
  CHECK_THROWS_AS(fit_pca(random_block(4, 8, 1), 4), ValidationError);  // n-1 = 3
  CHECK_THROWS_AS(fit_pca(random_block(4, 3, 1), 0), ValidationError);
}

TEST_CASE("PCA model persistence") {
  const auto dir = fs::temp_directory_path() / "fashiontrend_test_pca";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto m = fit_pca(random_block(30, 5, 4), 2, 99);
  save_pca_model(m, dir / "p.json", dir / "p.tlvb");
  CHECK(load_pca_model(dir / "p.json") == m);
}

TEST_CASE("concat") {
  const std::vector<float> a{1, 2}, b{3};
  const auto f = concat({{"a", a}, {"b", b}});
  CHECK(f.data == std::vector<float>{1, 2, 3});
  REQUIRE(f.layout.size() == 2);
  CHECK(f.layout[0] == Segment{"a", 0, 2});
  CHECK(f.layout[1] == Segment{"b", 2, 1});
  CHECK(std::vector<float>(f.segment("b").begin(), f.segment("b").end()) == b);
  CHECK_THROWS_AS(f.segment("c"), ValidationError);

  CHECK(concat({{"only", a}}).data == a);
  CHECK_THROWS_AS(concat({{"a", a}, {"a", b}}), ValidationError);
  CHECK(concat({{"a", a}, {"b", b}}, {{"b", 2.0f}}).data == std::vector<float>{1, 2, 6});

  SUBCASE("128 + 128 layout") {
    const auto style = random_block(1, 128, 1), color = random_block(1, 128, 2);
    const auto fused = concat({{"style", style.row(0)}, {"color", color.row(0)}});
    CHECK(fused.data.size() == 256);
    CHECK(std::equal(style.row(0).begin(), style.row(0).end(), fused.segment("style").begin()));
    CHECK(std::equal(color.row(0).begin(), color.row(0).end(), fused.segment("color").begin()));
  }
}

TEST_CASE("fusion plan") {
  const auto raw = random_block(60, 10, 31);
  const std::vector<SegmentSpec> plan{{"style", 4, 0, 1.0f}, {"color", 6, 3, 0.5f}};
  CHECK_NOTHROW(validate_fusion_plan(plan, 10));
  CHECK_THROWS_AS(validate_fusion_plan(plan, 11), ValidationError);
  CHECK_THROWS_AS(validate_fusion_plan({{"x", 10, 11, 1.0f}}, 10), ValidationError);

  const auto model = fit_fusion(raw, plan, 3);
  CHECK(model.input_dim() == 10);
  CHECK(model.output_dim() == 7);
  CHECK(model.pca.size() == 1);
  const auto fused = apply_fusion(model, raw);
  REQUIRE(fused.dim() == 7);
  REQUIRE(fused.count() == 60);
  for (std::size_t i = 0; i < 60; ++i) {
    for (std::size_t j = 0; j < 4; ++j) CHECK(fused.row(i)[j] == raw.row(i)[j]);
    const auto y = project(model.pca.at("color"), raw.row(i).subspan(4, 6));
    for (std::size_t j = 0; j < 3; ++j) CHECK(fused.row(i)[4 + j] == doctest::Approx(0.5f * y[j]).epsilon(1e-6));
  }
}
