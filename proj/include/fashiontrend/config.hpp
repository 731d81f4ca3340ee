#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fashiontrend/corpus.hpp"
#include "fashiontrend/features.hpp"
#include "fashiontrend/spatial.hpp"

namespace fashiontrend {

/// One seed per source of randomness so stages can be rerun independently.
struct Seeds {
  std::uint64_t sample = 1;   // codebook / PCA training sample
  std::uint64_t pca = 2;      // recorded in PCA models
  std::uint64_t kmeans = 3;   // k-means++ initialization
  std::uint64_t split = 4;    // train/test pools and per-vector samples
  std::uint64_t display = 5;  // random exemplar sub-sampling

  friend bool operator==(const Seeds&, const Seeds&) = default;
};

struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path vectors;
  std::filesystem::path anchors;  // empty: built-in table
  std::filesystem::path codebook; // used by stand-alone subcommands
  std::filesystem::path output_dir = "out";

  double radius_km = 100.0;
  YearRange years{2000, 2015};
  std::vector<SegmentSpec> fusion;  // empty: vectors used as is

  std::size_t k = 1000;
  std::size_t train_sample = 1600000;
  std::size_t max_iter = 100;
  double tol = 1e-4;

  double threshold = 0.01;  // FTD TH
  std::size_t top_n = 5;
  std::size_t exemplars_per_bin = 5;

  bool classify = true;
  ClassifierKind classifier = ClassifierKind::nearest_class_mean;
  std::size_t train_n = 500;
  std::size_t test_n = 100;
  std::size_t sample_size = 10000;
  double svm_c = 0.01;
  double svm_gamma = 0.0;  // <= 0: 1/k

  double graph_threshold = 0.2;
  SimilarityMeasure measure = SimilarityMeasure::cosine;

  Seeds seeds;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Throws ValidationError naming the first out-of-range field.
void validate_config(const RunConfig& config);

std::string config_to_json(const RunConfig& config);

/// Missing keys keep their defaults. Relative paths are resolved against
/// `base_dir` when it is non-empty.
RunConfig config_from_json(const std::string& text, const std::filesystem::path& base_dir = {});

RunConfig load_config(const std::filesystem::path& path);

}  // namespace fashiontrend
