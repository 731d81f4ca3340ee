#include "fashiontrend/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fashiontrend/features.hpp"

namespace fashiontrend {

namespace {

void validate_set(const LabeledCodewordSet& set, const char* who) {
  if (set.vectors.size() != set.labels.size())
    throw ValidationError(std::string(who) + ": vectors and labels differ in length");
  if (set.vectors.empty()) throw ValidationError(std::string(who) + ": empty labeled set");
  const auto k = set.vectors.front().k();
  for (const auto& v : set.vectors)
    if (v.k() != k) throw ValidationError(std::string(who) + ": codeword vectors differ in k");
}

std::vector<std::string> sorted_classes(const std::vector<std::string>& labels) {
  std::set<std::string> uniq(labels.begin(), labels.end());
  return {uniq.begin(), uniq.end()};
}

std::size_t class_index(const std::vector<std::string>& classes, const std::string& label) {
  const auto it = std::lower_bound(classes.begin(), classes.end(), label);
  if (it == classes.end() || *it != label) return classes.size();
  return static_cast<std::size_t>(it - classes.begin());
}

// ---------------------------------------------------------------------------

class NearestClassMean final : public Classifier {
 public:
  explicit NearestClassMean(const LabeledCodewordSet& train) : classes_(sorted_classes(train.labels)) {
    const auto k = train.vectors.front().k();
    means_.assign(classes_.size(), std::vector<double>(k, 0.0));
    std::vector<std::size_t> counts(classes_.size(), 0);
    for (std::size_t i = 0; i < train.size(); ++i) {
      const auto c = class_index(classes_, train.labels[i]);
      ++counts[c];
      for (std::size_t b = 0; b < k; ++b) means_[c][b] += train.vectors[i].bins[b];
    }
    for (std::size_t c = 0; c < classes_.size(); ++c)
      for (auto& x : means_[c]) x /= static_cast<double>(counts[c]);
  }

  ClassifierKind kind() const override { return ClassifierKind::nearest_class_mean; }
  const std::vector<std::string>& classes() const override { return classes_; }

  std::size_t predict_index(std::span<const double> bins) const override {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < means_.size(); ++c) {
      const double d = sq_distance(bins, std::span<const double>(means_[c]));
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    return best;
  }

 private:
  std::vector<std::string> classes_;
  std::vector<std::vector<double>> means_;
};

// ---------------------------------------------------------------------------
// One-vs-rest RBF SVM. Each binary problem is the C-SVC dual solved by SMO
// with maximal-violating-pair working set selection.

class RbfKernel {
 public:
  RbfKernel(const std::vector<std::vector<double>>& x, double gamma) : x_(x), gamma_(gamma) {
    const auto n = x.size();
    if (n <= kFullMatrixLimit) {
      full_.resize(n * n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) full_[i * n + j] = full_[j * n + i] = eval(i, j);
    }
  }

  double eval(std::size_t i, std::size_t j) const {
    if (!full_.empty()) return full_[i * x_.size() + j];
    return std::exp(-gamma_ * sq_distance(std::span<const double>(x_[i]), std::span<const double>(x_[j])));
  }

  void row(std::size_t i, std::vector<double>& out) const {
    const auto n = x_.size();
    out.resize(n);
    if (!full_.empty()) {
      std::copy(full_.begin() + static_cast<std::ptrdiff_t>(i * n),
                full_.begin() + static_cast<std::ptrdiff_t>((i + 1) * n), out.begin());
      return;
    }
    for (std::size_t j = 0; j < n; ++j) out[j] = eval(i, j);
  }

 private:
  static constexpr std::size_t kFullMatrixLimit = 4096;
  const std::vector<std::vector<double>>& x_;
  double gamma_;
  std::vector<double> full_;
};

struct BinarySolution {
  std::vector<double> coef;  // alpha_i * y_i
  double rho = 0.0;
};

BinarySolution solve_binary(const RbfKernel& kernel, const std::vector<int>& y, double c,
                            double eps, std::size_t max_iter) {
  const std::size_t n = y.size();
  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);
  std::vector<double> ki, kj;
  constexpr double kTau = 1e-12;

  auto up = [&](std::size_t t) { return (y[t] == 1 && alpha[t] < c) || (y[t] == -1 && alpha[t] > 0.0); };
  auto low = [&](std::size_t t) { return (y[t] == 1 && alpha[t] > 0.0) || (y[t] == -1 && alpha[t] < c); };

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (up(t) && -y[t] * grad[t] > gmax) {
        gmax = -y[t] * grad[t];
        i = t;
      }
      if (low(t) && y[t] * grad[t] > gmax2) {
        gmax2 = y[t] * grad[t];
        j = t;
      }
    }
    if (i == n || j == n || gmax + gmax2 < eps) break;

    kernel.row(i, ki);
    kernel.row(j, kj);
    const double old_i = alpha[i];
    const double old_j = alpha[j];
    if (y[i] != y[j]) {
      double quad = ki[i] + kj[j] - 2.0 * ki[j];
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) { alpha[j] = 0.0; alpha[i] = diff; }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0; alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > c) { alpha[i] = c; alpha[j] = c - diff; }
      } else if (alpha[j] > c) {
        alpha[j] = c; alpha[i] = c + diff;
      }
    } else {
      double quad = ki[i] + kj[j] - 2.0 * ki[j];
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) { alpha[i] = c; alpha[j] = sum - c; }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0; alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) { alpha[j] = c; alpha[i] = sum - c; }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0; alpha[j] = sum;
      }
    }
    const double di = alpha[i] - old_i;
    const double dj = alpha[j] - old_j;
    for (std::size_t t = 0; t < n; ++t)
      grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
  }

  BinarySolution sol;
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= c) {
      if (y[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0.0) {
      if (y[t] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  sol.rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
  sol.coef.resize(n);
  for (std::size_t t = 0; t < n; ++t) sol.coef[t] = alpha[t] * y[t];
  return sol;
}

class RbfSvm final : public Classifier {
 public:
  RbfSvm(const LabeledCodewordSet& train, const SvmParams& params)
      : classes_(sorted_classes(train.labels)) {
    const auto k = train.vectors.front().k();
    gamma_ = params.gamma > 0.0 ? params.gamma : 1.0 / static_cast<double>(k);
    if (!(params.c > 0.0)) throw ValidationError("rbf_svm: C must be positive");
    for (const auto& v : train.vectors) x_.push_back(v.bins);

    const RbfKernel kernel(x_, gamma_);
    std::vector<std::size_t> label_idx;
    for (const auto& l : train.labels) label_idx.push_back(class_index(classes_, l));
    for (std::size_t c = 0; c < classes_.size(); ++c) {
      std::vector<int> y(x_.size());
      for (std::size_t i = 0; i < x_.size(); ++i) y[i] = label_idx[i] == c ? 1 : -1;
      solutions_.push_back(classes_.size() == 1 ? BinarySolution{std::vector<double>(x_.size(), 0.0), -1.0}
                                                : solve_binary(kernel, y, params.c, params.tol, params.max_iter));
    }
  }

  ClassifierKind kind() const override { return ClassifierKind::rbf_svm; }
  const std::vector<std::string>& classes() const override { return classes_; }

  std::size_t predict_index(std::span<const double> bins) const override {
    std::vector<double> kx(x_.size());
    for (std::size_t i = 0; i < x_.size(); ++i)
      kx[i] = std::exp(-gamma_ * sq_distance(bins, std::span<const double>(x_[i])));
    std::size_t best = 0;
    double best_f = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < solutions_.size(); ++c) {
      const auto& s = solutions_[c];
      double f = -s.rho;
      for (std::size_t i = 0; i < x_.size(); ++i) f += s.coef[i] * kx[i];
      if (f > best_f) {
        best_f = f;
        best = c;
      }
    }
    return best;
  }

 private:
  std::vector<std::string> classes_;
  double gamma_ = 0.0;
  std::vector<std::vector<double>> x_;
  std::vector<BinarySolution> solutions_;
};

nlohmann::ordered_json graph_json(const SimilarityGraph& g) {
  nlohmann::ordered_json j;
  j["measure"] = to_string(g.measure);
  j["threshold"] = g.threshold;
  j["nodes"] = g.nodes;
  auto edges = nlohmann::ordered_json::array();
  for (const auto& e : g.edges) edges.push_back({{"a", e.a}, {"b", e.b}, {"weight", e.weight}});
  j["edges"] = edges;
  return j;
}

std::string dot_id(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace

// ---------------------------------------------------------------------------

LabeledSplit make_labeled_sets(const std::map<std::string, Manifest>& per_city, std::size_t k,
                               std::span<const std::size_t> assignments,
                               const LabeledSetParams& params) {
  if (params.sample_size == 0) throw ValidationError("make_labeled_sets: sample_size must be positive");
  if (params.train_n == 0 || params.test_n == 0)
    throw ValidationError("make_labeled_sets: train_n and test_n must be positive");

  LabeledSplit out;
  out.train.per_vector_sample_size = params.sample_size;
  out.test.per_vector_sample_size = params.sample_size;

  for (const auto& [city, manifest] : per_city) {
    const std::size_t n = manifest.size();
    const std::size_t train_pool =
        static_cast<std::size_t>(static_cast<unsigned __int128>(n) * params.train_n /
                                 (params.train_n + params.test_n));
    const std::size_t test_pool = n - train_pool;
    if (train_pool < params.sample_size || test_pool < params.sample_size) {
      // Smallest n for which floor(n*tr/(tr+te)) and the remainder both reach sample_size.
      std::size_t need = 2 * params.sample_size;
      while (true) {
        const auto tp = static_cast<std::size_t>(static_cast<unsigned __int128>(need) * params.train_n /
                                                 (params.train_n + params.test_n));
        if (tp >= params.sample_size && need - tp >= params.sample_size) break;
        ++need;
      }
      throw ValidationError("make_labeled_sets: city '" + city + "' has " + std::to_string(n) +
                            " records; " + std::to_string(need) + " needed (shortfall " +
                            std::to_string(need - n) + ") for disjoint train/test pools of " +
                            std::to_string(params.sample_size));
    }

    std::vector<std::size_t> bins_of(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto idx = manifest.records[i].vector_index;
      if (idx >= assignments.size())
        throw ValidationError("record '" + manifest.records[i].id + "' has no codeword assignment");
      bins_of[i] = assignments[idx];
    }

    Rng rng(mix_seed(params.seed, stable_hash(city)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

    auto draw = [&](std::span<std::size_t> pool, std::size_t count, LabeledCodewordSet& dest,
                    const std::string& tag) {
      std::vector<std::size_t> picked(params.sample_size);
      for (std::size_t v = 0; v < count; ++v) {
        // Partial Fisher-Yates over the pool; it stays a permutation between draws.
        for (std::size_t s = 0; s < params.sample_size; ++s) {
          const auto j = s + static_cast<std::size_t>(uniform_index(rng, pool.size() - s));
          std::swap(pool[s], pool[j]);
          picked[s] = bins_of[pool[s]];
        }
        dest.vectors.push_back(codeword_vector_from_assignments(k, picked, city, tag + std::to_string(v)));
        dest.labels.push_back(city);
      }
    };
    std::span<std::size_t> all(order);
    draw(all.subspan(0, train_pool), params.train_n, out.train, "train-");
    draw(all.subspan(train_pool), params.test_n, out.test, "test-");
  }
  return out;
}

LabeledSplit make_labeled_sets(const std::map<std::string, Manifest>& per_city,
                               const Codebook& codebook, const VectorBlock& block,
                               const LabeledSetParams& params) {
  if (block.dim() != codebook.dim)
    throw ValidationError("make_labeled_sets: vector dim does not match codebook");
  std::vector<std::size_t> assignments(block.count());
  std::vector<bool> needed(block.count(), false);
  for (const auto& [_, m] : per_city)
    for (const auto& r : m.records) {
      if (r.vector_index >= block.count())
        throw ValidationError("record '" + r.id + "' points outside the vector block");
      needed[r.vector_index] = true;
    }
  for (std::size_t i = 0; i < block.count(); ++i)
    if (needed[i]) assignments[i] = assign(codebook, block.row(i));
  return make_labeled_sets(per_city, codebook.k, assignments, params);
}

std::string to_string(ClassifierKind kind) {
  return kind == ClassifierKind::rbf_svm ? "rbf_svm" : "nearest_class_mean";
}

ClassifierKind parse_classifier_kind(const std::string& s) {
  if (s == "nearest_class_mean") return ClassifierKind::nearest_class_mean;
  if (s == "rbf_svm") return ClassifierKind::rbf_svm;
  throw ValidationError("unknown classifier '" + s + "' (expected nearest_class_mean or rbf_svm)");
}

std::unique_ptr<Classifier> train_classifier(const LabeledCodewordSet& train, ClassifierKind kind,
                                             const SvmParams& svm) {
  validate_set(train, "train_classifier");
  if (kind == ClassifierKind::rbf_svm) return std::make_unique<RbfSvm>(train, svm);
  return std::make_unique<NearestClassMean>(train);
}

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) n += std::accumulate(row.begin(), row.end(), std::size_t{0});
  return n;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) n += counts[i][i];
  return n;
}

double ConfusionMatrix::accuracy() const {
  const auto t = total();
  return t == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(t);
}

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream out;
  out << "true\\predicted";
  for (const auto& c : classes) out << ',' << c;
  out << '\n';
  for (std::size_t i = 0; i < classes.size(); ++i) {
    out << classes[i];
    for (auto v : counts[i]) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

std::string ConfusionMatrix::to_json() const {
  nlohmann::ordered_json j;
  j["classes"] = classes;
  j["counts"] = counts;
  j["total"] = total();
  j["trace"] = trace();
  j["accuracy"] = accuracy();
  return j.dump(2);
}

ConfusionMatrix evaluate(const Classifier& model, const LabeledCodewordSet& test) {
  validate_set(test, "evaluate");
  ConfusionMatrix cm;
  cm.classes = model.classes();
  cm.counts.assign(cm.classes.size(), std::vector<std::size_t>(cm.classes.size(), 0));
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto truth = class_index(cm.classes, test.labels[i]);
    if (truth == cm.classes.size())
      throw ValidationError("evaluate: label '" + test.labels[i] + "' was not seen in training");
    ++cm.counts[truth][model.predict_index(test.vectors[i].bins)];
  }
  return cm;
}

// ---------------------------------------------------------------------------

std::string to_string(SimilarityMeasure m) {
  return m == SimilarityMeasure::cosine ? "cosine" : "histogram_intersection";
}

SimilarityMeasure parse_similarity_measure(const std::string& s) {
  if (s == "cosine") return SimilarityMeasure::cosine;
  if (s == "histogram_intersection" || s == "intersection") return SimilarityMeasure::histogram_intersection;
  throw ValidationError("unknown similarity measure '" + s + "' (expected cosine or histogram_intersection)");
}

double similarity(const CodewordVector& a, const CodewordVector& b, SimilarityMeasure measure) {
  if (a.k() != b.k()) throw ValidationError("similarity: codeword vectors differ in k");
  const auto empty = [](const CodewordVector& v) {
    return v.support == 0 || std::all_of(v.bins.begin(), v.bins.end(), [](double x) { return x == 0.0; });
  };
  if (empty(a) || empty(b))
    throw ValidationError("similarity: zero-support codeword vector (" + (empty(a) ? a.city : b.city) + ")");

  if (measure == SimilarityMeasure::histogram_intersection) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.k(); ++i) s += std::min(a.bins[i], b.bins[i]);
    return std::clamp(s, 0.0, 1.0);
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.k(); ++i) {
    dot += a.bins[i] * b.bins[i];
    na += a.bins[i] * a.bins[i];
    nb += b.bins[i] * b.bins[i];
  }
  return std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0);
}

SimilarityGraph build_similarity_graph(const std::map<std::string, CodewordVector>& city_vectors,
                                       double threshold, SimilarityMeasure measure) {
  if (city_vectors.size() < 2)
    throw ValidationError("build_similarity_graph: need at least 2 cities, got " +
                          std::to_string(city_vectors.size()));
  SimilarityGraph g;
  g.threshold = threshold;
  g.measure = measure;
  for (const auto& [city, _] : city_vectors) g.nodes.push_back(city);
  for (auto a = city_vectors.begin(); a != city_vectors.end(); ++a) {
    for (auto b = std::next(a); b != city_vectors.end(); ++b) {
      const double w = similarity(a->second, b->second, measure);
      if (w >= threshold) g.edges.push_back({a->first, b->first, w});
    }
  }
  return g;
}

std::string SimilarityGraph::to_dot(double penwidth_scale) const {
  std::ostringstream out;
  out << "graph city_similarity {\n";
  out << "  graph [label=" << dot_id(to_string(measure) + " >= " + format_number(threshold)) << "];\n";
  out << "  node [shape=ellipse];\n";
  for (const auto& n : nodes) out << "  " << dot_id(n) << ";\n";
  for (const auto& e : edges) {
    out << "  " << dot_id(e.a) << " -- " << dot_id(e.b) << " [label=\"" << format_number(e.weight)
        << "\", penwidth=" << dot_id(format_number(penwidth_scale * e.weight)) << "];\n";
  }
  out << "}\n";
  return out.str();
}

std::string SimilarityGraph::to_json() const { return graph_json(*this).dump(2); }

}  // namespace fashiontrend
