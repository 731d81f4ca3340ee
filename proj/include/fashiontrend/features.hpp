#pragma once

// Descriptor-space algebra: PCA compression, segment fusion and the squared
// Euclidean distance used throughout the pipeline.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fashiontrend/corpus.hpp"

namespace fashiontrend {

/// Sum of squared coordinate differences, accumulated in double.
double sq_distance(std::span<const float> a, std::span<const float> b);
double sq_distance(std::span<const double> a, std::span<const double> b);

// ---------------------------------------------------------------------------
// PCA

struct PcaModel {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::vector<float> mean;                // input_dim
  std::vector<float> basis;               // output_dim x input_dim, rows are principal axes
  std::vector<double> explained_variance; // output_dim, non-increasing
  std::uint64_t seed = 0;
  std::size_t n_train = 0;

  std::span<const float> axis(std::size_t i) const { return {basis.data() + i * input_dim, input_dim}; }

  friend bool operator==(const PcaModel&, const PcaModel&) = default;
};

/// Fits PCA on the rows of `vectors` (sample covariance, n-1 denominator).
/// Requires n >= 2 and output_dim <= min(n-1, d); if output_dim exceeds the
/// numerical rank of the centered data the error names the achievable rank.
/// Each axis is signed so its first nonzero coordinate is positive.
PcaModel fit_pca(const VectorBlock& vectors, std::size_t output_dim, std::uint64_t seed = 0);

/// basis * (v - mean)
std::vector<float> project(const PcaModel& model, std::span<const float> v);

/// basis^T * y + mean
std::vector<float> reconstruct(const PcaModel& model, std::span<const float> y);

VectorBlock project_block(const PcaModel& model, const VectorBlock& block);

/// JSON header at `json_path`, mean row followed by basis rows in TLVB at `matrix_path`.
void save_pca_model(const PcaModel& model, const std::filesystem::path& json_path,
                    const std::filesystem::path& matrix_path);
PcaModel load_pca_model(const std::filesystem::path& json_path);

// ---------------------------------------------------------------------------
// Fusion

struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct FusedVector {
  std::vector<Segment> layout;
  std::vector<float> data;

  /// Throws ValidationError for an unknown segment name.
  std::span<const float> segment(const std::string& name) const;
};

/// Concatenates named segments in order. Optional per-segment scale factors
/// multiply that segment's values (default 1.0).
FusedVector concat(const std::vector<std::pair<std::string, std::span<const float>>>& segments,
                   const std::map<std::string, float>& scales = {});

/// One slice of a raw descriptor row and what to do with it.
struct SegmentSpec {
  std::string name;
  std::size_t length = 0;
  std::size_t pca_dim = 0;  // 0 keeps the segment as is
  float scale = 1.0f;

  friend bool operator==(const SegmentSpec&, const SegmentSpec&) = default;
};

/// Per-segment PCA models fitted for a fusion plan.
struct FusionModel {
  std::vector<SegmentSpec> plan;
  std::map<std::string, PcaModel> pca;  // only segments with pca_dim > 0

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::vector<Segment> output_layout() const;
};

/// Checks the plan against a raw descriptor width.
void validate_fusion_plan(const std::vector<SegmentSpec>& plan, std::size_t raw_dim);

/// Fits the PCA of every segment that asks for one on the rows of `train`.
FusionModel fit_fusion(const VectorBlock& train, const std::vector<SegmentSpec>& plan,
                       std::uint64_t seed);

/// Splits each raw row by the plan, compresses segments with PCA where
/// configured, scales and concatenates.
VectorBlock apply_fusion(const FusionModel& model, const VectorBlock& raw);

}  // namespace fashiontrend
