#pragma once

// K-means dictionary, hard nearest-centroid assignment and the L1-normalized
// codeword histogram (bag of words) of a record population.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fashiontrend/corpus.hpp"

namespace fashiontrend {

struct KMeansParams {
  std::size_t k = 1000;
  std::uint64_t seed = 0;
  std::size_t max_iter = 100;
  double tol = 1e-4;  // stop when the largest centroid shift (Euclidean) is below this
};

struct CodebookFitMeta {
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::size_t iterations = 0;
  double inertia = 0.0;                 // for the returned centroids
  std::vector<double> inertia_history;  // one entry per assignment pass
  std::size_t reseeded = 0;             // empty clusters moved to the farthest point
};

struct Codebook {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<float> centroids;  // k x dim
  CodebookFitMeta fit_meta;

  std::span<const float> centroid(std::size_t i) const { return {centroids.data() + i * dim, dim}; }
};

/// Lloyd's algorithm from a k-means++ start.
///
/// Empty clusters are re-seeded at the training point farthest from its
/// current centroid. Throws ValidationError if n < k, k == 0, or the data has
/// fewer than k distinct points.
Codebook fit_codebook(const VectorBlock& vectors, const KMeansParams& params);

/// Index of the nearest centroid; ties go to the lowest index.
std::size_t assign(const Codebook& codebook, std::span<const float> v);

/// assign() plus the squared distance to the chosen centroid.
std::pair<std::size_t, double> assign_with_distance(const Codebook& codebook, std::span<const float> v);

struct CodewordVector {
  std::vector<double> bins;  // sums to 1 when support > 0
  std::size_t support = 0;
  std::string city;
  std::string period;

  std::size_t k() const { return bins.size(); }
};

/// L1-normalized histogram of assignments over the manifest's records.
CodewordVector build_codeword_vector(const Codebook& codebook, const Manifest& manifest,
                                     const VectorBlock& block, std::string city = {},
                                     std::string period = {});

/// Histogram from precomputed bin indices.
CodewordVector codeword_vector_from_assignments(std::size_t k, std::span<const std::size_t> bins,
                                                std::string city = {}, std::string period = {});

/// Element-wise mean of equally sized codeword vectors; support is summed.
CodewordVector mean_codeword_vector(std::span<const CodewordVector> vectors, std::string city = {},
                                    std::string period = {});

/// JSON metadata beside a TLVB centroid matrix.
void save_codebook(const Codebook& codebook, const std::filesystem::path& json_path,
                   const std::filesystem::path& matrix_path);
Codebook load_codebook(const std::filesystem::path& json_path);

/// "city,period,support,bin_0,...,bin_{k-1}"
std::string codeword_csv_header(std::size_t k);
std::string codeword_csv_row(const CodewordVector& v);
std::vector<CodewordVector> parse_codeword_csv(std::istream& in);

}  // namespace fashiontrend
