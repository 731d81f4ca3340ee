#include "fashiontrend/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "fashiontrend/features.hpp"

namespace fashiontrend {

namespace {

struct Nearest {
  std::size_t index = 0;
  double distance = 0.0;
};

Nearest nearest(const std::vector<double>& centroids, std::size_t k, std::size_t dim,
                std::span<const float> v) {
  Nearest best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t c = 0; c < k; ++c) {
    const double* cen = centroids.data() + c * dim;
    double d = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double diff = static_cast<double>(v[j]) - cen[j];
      d += diff * diff;
    }
    if (d < best.distance) best = {c, d};
  }
  return best;
}

double point_sq_distance(std::span<const float> v, const double* c, std::size_t dim) {
  double d = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    const double diff = static_cast<double>(v[j]) - c[j];
    d += diff * diff;
  }
  return d;
}

// k-means++ seeding: first center uniform, then proportional to D^2.
std::vector<double> kmeanspp_init(const VectorBlock& data, std::size_t k, Rng& rng) {
  const std::size_t n = data.count();
  const std::size_t dim = data.dim();
  std::vector<double> centroids(k * dim);
  auto set_center = [&](std::size_t c, std::size_t row) {
    const auto r = data.row(row);
    for (std::size_t j = 0; j < dim; ++j) centroids[c * dim + j] = r[j];
  };

  set_center(0, static_cast<std::size_t>(uniform_index(rng, n)));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = point_sq_distance(data.row(i), centroids.data(), dim);

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double x : d2) total += x;
    if (!(total > 0.0))
      throw ValidationError("fit_codebook: data has only " + std::to_string(c) +
                            " distinct points, fewer than k = " + std::to_string(k));
    const double target = uniform01(rng) * total;
    double acc = 0.0;
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      acc += d2[i];
      pick = i;
      if (acc > target) break;
    }
    set_center(c, pick);
    const double* cen = centroids.data() + c * dim;
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], point_sq_distance(data.row(i), cen, dim));
  }
  return centroids;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

Codebook fit_codebook(const VectorBlock& vectors, const KMeansParams& params) {
  const std::size_t n = vectors.count();
  const std::size_t dim = vectors.dim();
  const std::size_t k = params.k;
  if (k == 0) throw ValidationError("fit_codebook: k must be at least 1");
  if (n < k)
    throw ValidationError("fit_codebook: k = " + std::to_string(k) + " exceeds the " +
                          std::to_string(n) + " training vectors");
  if (!(params.tol >= 0.0)) throw ValidationError("fit_codebook: tol must be non-negative");

  Rng rng(params.seed);
  std::vector<double> centroids = kmeanspp_init(vectors, k, rng);

  CodebookFitMeta meta;
  meta.seed = params.seed;
  meta.n_train = n;

  std::vector<std::size_t> labels(n);
  std::vector<double> dist(n);
  std::vector<std::size_t> sizes(k);
  std::vector<double> sums(k * dim);

  auto assign_all = [&] {
    double inertia = 0.0;
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto nb = nearest(centroids, k, dim, vectors.row(i));
      labels[i] = nb.index;
      dist[i] = nb.distance;
      ++sizes[nb.index];
      inertia += nb.distance;
    }
    return inertia;
  };

  for (std::size_t iter = 0; iter < params.max_iter; ++iter) {
    meta.inertia_history.push_back(assign_all());

    // Empty clusters take the point farthest from its centroid, drawn from a
    // cluster that can spare it.
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[labels[i]] < 2) continue;
        if (far == n || dist[i] > dist[far]) far = i;
      }
      if (far == n) break;
      const auto r = vectors.row(far);
      for (std::size_t j = 0; j < dim; ++j) centroids[c * dim + j] = r[j];
      --sizes[labels[far]];
      labels[far] = c;
      dist[far] = 0.0;
      sizes[c] = 1;
      ++meta.reseeded;
    }

    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = vectors.row(i);
      double* s = sums.data() + labels[i] * dim;
      for (std::size_t j = 0; j < dim; ++j) s[j] += r[j];
    }
    double max_shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] == 0) continue;
      double shift = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double updated = sums[c * dim + j] / static_cast<double>(sizes[c]);
        const double diff = updated - centroids[c * dim + j];
        shift += diff * diff;
        centroids[c * dim + j] = updated;
      }
      max_shift = std::max(max_shift, std::sqrt(shift));
    }
    meta.iterations = iter + 1;
    if (max_shift < params.tol) break;
  }

  Codebook cb;
  cb.k = k;
  cb.dim = dim;
  cb.centroids.resize(k * dim);
  for (std::size_t i = 0; i < k * dim; ++i) cb.centroids[i] = static_cast<float>(centroids[i]);

  // Inertia of the centroids actually returned (float32).
  double inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) inertia += assign_with_distance(cb, vectors.row(i)).second;
  meta.inertia = inertia;
  cb.fit_meta = std::move(meta);
  return cb;
}

std::pair<std::size_t, double> assign_with_distance(const Codebook& codebook,
                                                    std::span<const float> v) {
  if (v.size() != codebook.dim)
    throw ValidationError("assign: vector length " + std::to_string(v.size()) +
                          " does not match codebook dim " + std::to_string(codebook.dim));
  if (codebook.k == 0) throw ValidationError("assign: empty codebook");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < codebook.k; ++c) {
    const double d = sq_distance(v, codebook.centroid(c));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return {best, best_d};
}

std::size_t assign(const Codebook& codebook, std::span<const float> v) {
  return assign_with_distance(codebook, v).first;
}

CodewordVector codeword_vector_from_assignments(std::size_t k, std::span<const std::size_t> bins,
                                                std::string city, std::string period) {
  std::vector<std::size_t> counts(k, 0);
  for (auto b : bins) {
    if (b >= k) throw ValidationError("bin index " + std::to_string(b) + " out of range");
    ++counts[b];
  }
  CodewordVector out;
  out.city = std::move(city);
  out.period = std::move(period);
  out.support = bins.size();
  out.bins.assign(k, 0.0);
  if (out.support > 0) {
    for (std::size_t i = 0; i < k; ++i)
      out.bins[i] = static_cast<double>(counts[i]) / static_cast<double>(out.support);
  }
  return out;
}

CodewordVector build_codeword_vector(const Codebook& codebook, const Manifest& manifest,
                                     const VectorBlock& block, std::string city,
                                     std::string period) {
  if (block.dim() != codebook.dim)
    throw ValidationError("build_codeword_vector: vector dim " + std::to_string(block.dim()) +
                          " does not match codebook dim " + std::to_string(codebook.dim));
  std::vector<std::size_t> bins;
  bins.reserve(manifest.size());
  for (const auto& r : manifest.records) {
    if (r.vector_index >= block.count())
      throw ValidationError("record '" + r.id + "' points outside the vector block");
    bins.push_back(assign(codebook, block.row(r.vector_index)));
  }
  return codeword_vector_from_assignments(codebook.k, bins, std::move(city), std::move(period));
}

CodewordVector mean_codeword_vector(std::span<const CodewordVector> vectors, std::string city,
                                    std::string period) {
  if (vectors.empty()) throw ValidationError("mean_codeword_vector: no vectors");
  CodewordVector out;
  out.city = std::move(city);
  out.period = std::move(period);
  out.bins.assign(vectors.front().k(), 0.0);
  for (const auto& v : vectors) {
    if (v.k() != out.k()) throw ValidationError("mean_codeword_vector: mismatched k");
    for (std::size_t i = 0; i < v.k(); ++i) out.bins[i] += v.bins[i];
    out.support += v.support;
  }
  for (auto& b : out.bins) b /= static_cast<double>(vectors.size());
  return out;
}

void save_codebook(const Codebook& codebook, const std::filesystem::path& json_path,
                   const std::filesystem::path& matrix_path) {
  write_vector_block(matrix_path, VectorBlock(codebook.dim, codebook.centroids));
  nlohmann::ordered_json j;
  j["kind"] = "codebook";
  j["k"] = codebook.k;
  j["dim"] = codebook.dim;
  j["matrix"] = matrix_path.filename().string();
  const auto& m = codebook.fit_meta;
  j["fit"] = {{"seed", m.seed},
              {"n_train", m.n_train},
              {"iterations", m.iterations},
              {"inertia", m.inertia},
              {"inertia_history", m.inertia_history},
              {"reseeded", m.reseeded}};
  std::ofstream out(json_path, std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + json_path.string());
  out << j.dump(2) << '\n';
}

Codebook load_codebook(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw ValidationError("cannot open codebook " + json_path.string());
  Codebook cb;
  std::filesystem::path matrix;
  try {
    const auto j = nlohmann::json::parse(in);
    cb.k = j.at("k").get<std::size_t>();
    cb.dim = j.at("dim").get<std::size_t>();
    matrix = json_path.parent_path() / j.at("matrix").get<std::string>();
    const auto& f = j.at("fit");
    cb.fit_meta.seed = f.at("seed").get<std::uint64_t>();
    cb.fit_meta.n_train = f.at("n_train").get<std::size_t>();
    cb.fit_meta.iterations = f.at("iterations").get<std::size_t>();
    cb.fit_meta.inertia = f.at("inertia").get<double>();
    cb.fit_meta.inertia_history = f.at("inertia_history").get<std::vector<double>>();
    cb.fit_meta.reseeded = f.value("reseeded", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(json_path.string() + ": " + e.what());
  }
  const auto block = read_vector_block(matrix);
  if (block.dim() != cb.dim || block.count() != cb.k)
    throw ValidationError(json_path.string() + ": centroid matrix shape does not match header");
  cb.centroids = block.data();
  return cb;
}

std::string codeword_csv_header(std::size_t k) {
  std::string out = "city,period,support";
  for (std::size_t i = 0; i < k; ++i) out += ",bin_" + std::to_string(i);
  return out;
}

std::string codeword_csv_row(const CodewordVector& v) {
  std::string out = csv_field(v.city) + "," + csv_field(v.period) + "," + std::to_string(v.support);
  for (double b : v.bins) out += "," + format_number(b);
  return out;
}

std::vector<CodewordVector> parse_codeword_csv(std::istream& in) {
  std::vector<CodewordVector> out;
  std::string line;
  std::size_t lineno = 0;
  std::size_t k = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (lineno == 1) {
      if (fields.size() < 4 || fields[0] != "city")
        throw ValidationError("codeword CSV: bad header");
      k = fields.size() - 3;
      continue;
    }
    if (fields.size() != k + 3)
      throw ValidationError("codeword CSV line " + std::to_string(lineno) + ": expected " +
                            std::to_string(k + 3) + " fields");
    CodewordVector v;
    v.city = fields[0];
    v.period = fields[1];
    try {
      v.support = std::stoull(fields[2]);
      v.bins.reserve(k);
      for (std::size_t i = 0; i < k; ++i) v.bins.push_back(std::stod(fields[3 + i]));
    } catch (const std::exception&) {
      throw ValidationError("codeword CSV line " + std::to_string(lineno) + ": bad number");
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace fashiontrend
