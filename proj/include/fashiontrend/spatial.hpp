#pragma once

// City perception (which city did a codeword vector come from) and the
// thresholded city similarity graph.

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fashiontrend/codebook.hpp"
#include "fashiontrend/corpus.hpp"

namespace fashiontrend {

struct LabeledCodewordSet {
  std::vector<CodewordVector> vectors;
  std::vector<std::string> labels;
  std::size_t per_vector_sample_size = 0;

  std::size_t size() const { return vectors.size(); }
};

struct LabeledSplit {
  LabeledCodewordSet train;
  LabeledCodewordSet test;
};

struct LabeledSetParams {
  std::size_t train_n = 500;
  std::size_t test_n = 100;
  std::size_t sample_size = 10000;
  std::uint64_t seed = 0;
};

/// Per city: shuffle the records, split them into disjoint train and test
/// pools in proportion train_n : test_n, then build each codeword vector from
/// an independent sample of sample_size records drawn from its pool.
/// Throws ValidationError naming the city and shortfall when a pool is smaller
/// than sample_size.
LabeledSplit make_labeled_sets(const std::map<std::string, Manifest>& per_city,
                               const Codebook& codebook, const VectorBlock& block,
                               const LabeledSetParams& params);

/// Same as above with precomputed codeword assignments (indexed by
/// vector_index) so repeated sampling does not redo the nearest-centroid scan.
LabeledSplit make_labeled_sets(const std::map<std::string, Manifest>& per_city,
                               std::size_t k, std::span<const std::size_t> assignments,
                               const LabeledSetParams& params);

enum class ClassifierKind { nearest_class_mean, rbf_svm };

std::string to_string(ClassifierKind kind);
ClassifierKind parse_classifier_kind(const std::string& s);

struct SvmParams {
  double c = 0.01;
  double gamma = 0.0;  // <= 0 means 1/k
  double tol = 1e-3;
  std::size_t max_iter = 100000;
};

class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual ClassifierKind kind() const = 0;
  /// Sorted class names.
  virtual const std::vector<std::string>& classes() const = 0;
  virtual std::size_t predict_index(std::span<const double> bins) const = 0;

  const std::string& predict(std::span<const double> bins) const {
    return classes()[predict_index(bins)];
  }
};

/// Throws ValidationError if a class has no vectors or the set is malformed.
std::unique_ptr<Classifier> train_classifier(const LabeledCodewordSet& train, ClassifierKind kind,
                                             const SvmParams& svm = {});

struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::vector<std::size_t>> counts;  // [true][predicted]

  std::size_t total() const;
  std::size_t trace() const;
  double accuracy() const;

  std::string to_csv() const;
  std::string to_json() const;
};

/// Throws ValidationError for a test label the model has never seen.
ConfusionMatrix evaluate(const Classifier& model, const LabeledCodewordSet& test);

enum class SimilarityMeasure { cosine, histogram_intersection };

std::string to_string(SimilarityMeasure m);
SimilarityMeasure parse_similarity_measure(const std::string& s);

/// In [0, 1]. Throws ValidationError on mismatched k or a zero-support vector.
double similarity(const CodewordVector& a, const CodewordVector& b, SimilarityMeasure measure);

struct SimilarityEdge {
  std::string a;
  std::string b;
  double weight = 0.0;
};

struct SimilarityGraph {
  std::vector<std::string> nodes;
  std::vector<SimilarityEdge> edges;  // a precedes b in node order
  double threshold = 0.0;
  SimilarityMeasure measure = SimilarityMeasure::cosine;

  /// Undirected graph; edge penwidth is proportional to weight.
  std::string to_dot(double penwidth_scale = 8.0) const;
  std::string to_json() const;
};

/// Keeps every unordered city pair whose similarity is >= threshold.
SimilarityGraph build_similarity_graph(const std::map<std::string, CodewordVector>& city_vectors,
                                       double threshold, SimilarityMeasure measure);

}  // namespace fashiontrend
