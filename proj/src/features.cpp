#include "fashiontrend/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <Eigen/Dense>
#include <json.hpp>

namespace fashiontrend {

namespace {

template <typename T>
double sq_distance_impl(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size())
    throw ValidationError("sq_distance: length mismatch (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return sum;
}

// Eigenvalues below this fraction of the largest one count as zero rank.
constexpr double kRankTolerance = 1e-10;

}  // namespace

double sq_distance(std::span<const float> a, std::span<const float> b) {
  return sq_distance_impl(a, b);
}

double sq_distance(std::span<const double> a, std::span<const double> b) {
  return sq_distance_impl(a, b);
}

// ---------------------------------------------------------------------------

PcaModel fit_pca(const VectorBlock& vectors, std::size_t output_dim, std::uint64_t seed) {
  const std::size_t n = vectors.count();
  const std::size_t d = vectors.dim();
  if (n < 2) throw ValidationError("fit_pca: need at least 2 vectors, got " + std::to_string(n));
  if (output_dim == 0) throw ValidationError("fit_pca: output_dim must be positive");
  if (output_dim > std::min(n - 1, d))
    throw ValidationError("fit_pca: output_dim " + std::to_string(output_dim) +
                          " exceeds min(n-1, d) = " + std::to_string(std::min(n - 1, d)));

  // Column mean and covariance, accumulated in row order.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = vectors.row(i);
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
  }
  mean /= static_cast<double>(n);

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  Eigen::VectorXd centered(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = vectors.row(i);
    for (std::size_t j = 0; j < d; ++j) centered[j] = r[j] - mean[j];
    cov.selfadjointView<Eigen::Lower>().rankUpdate(centered);
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw ValidationError("fit_pca: eigensolver did not converge");

  // Eigen returns ascending order.
  const Eigen::VectorXd& values = solver.eigenvalues();
  const Eigen::MatrixXd& vecs = solver.eigenvectors();
  const double largest = std::max(values[values.size() - 1], 0.0);
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (values[i] > kRankTolerance * largest && values[i] > 0.0) ++rank;
  if (output_dim > rank)
    throw ValidationError("fit_pca: output_dim " + std::to_string(output_dim) +
                          " exceeds the rank of the centered data; achievable rank is " +
                          std::to_string(rank));

  PcaModel model;
  model.input_dim = d;
  model.output_dim = output_dim;
  model.seed = seed;
  model.n_train = n;
  model.mean.resize(d);
  for (std::size_t j = 0; j < d; ++j) model.mean[j] = static_cast<float>(mean[j]);
  model.basis.resize(output_dim * d);
  model.explained_variance.resize(output_dim);

  for (std::size_t k = 0; k < output_dim; ++k) {
    const Eigen::Index col = values.size() - 1 - static_cast<Eigen::Index>(k);
    Eigen::VectorXd axis = vecs.col(col);
    axis.normalize();
    for (Eigen::Index j = 0; j < axis.size(); ++j) {
      if (std::abs(axis[j]) > 1e-12) {
        if (axis[j] < 0.0) axis = -axis;
        break;
      }
    }
    for (std::size_t j = 0; j < d; ++j) model.basis[k * d + j] = static_cast<float>(axis[j]);
    model.explained_variance[k] = std::max(values[col], 0.0);
  }
  return model;
}

std::vector<float> project(const PcaModel& model, std::span<const float> v) {
  if (v.size() != model.input_dim)
    throw ValidationError("project: vector length " + std::to_string(v.size()) +
                          " does not match PCA input_dim " + std::to_string(model.input_dim));
  std::vector<double> centered(model.input_dim);
  for (std::size_t j = 0; j < model.input_dim; ++j)
    centered[j] = static_cast<double>(v[j]) - static_cast<double>(model.mean[j]);
  std::vector<float> out(model.output_dim);
  for (std::size_t k = 0; k < model.output_dim; ++k) {
    const auto axis = model.axis(k);
    double dot = 0.0;
    for (std::size_t j = 0; j < model.input_dim; ++j) dot += axis[j] * centered[j];
    out[k] = static_cast<float>(dot);
  }
  return out;
}

std::vector<float> reconstruct(const PcaModel& model, std::span<const float> y) {
  if (y.size() != model.output_dim)
    throw ValidationError("reconstruct: vector length does not match PCA output_dim");
  std::vector<double> acc(model.mean.begin(), model.mean.end());
  for (std::size_t k = 0; k < model.output_dim; ++k) {
    const auto axis = model.axis(k);
    for (std::size_t j = 0; j < model.input_dim; ++j) acc[j] += static_cast<double>(axis[j]) * y[k];
  }
  return {acc.begin(), acc.end()};
}

VectorBlock project_block(const PcaModel& model, const VectorBlock& block) {
  VectorBlock out(model.output_dim, block.count());
  for (std::size_t i = 0; i < block.count(); ++i) {
    const auto p = project(model, block.row(i));
    std::copy(p.begin(), p.end(), out.row(i).begin());
  }
  return out;
}

void save_pca_model(const PcaModel& model, const std::filesystem::path& json_path,
                    const std::filesystem::path& matrix_path) {
  std::vector<float> rows(model.mean);
  rows.insert(rows.end(), model.basis.begin(), model.basis.end());
  write_vector_block(matrix_path, VectorBlock(model.input_dim, std::move(rows)));

  nlohmann::ordered_json j;
  j["kind"] = "pca";
  j["input_dim"] = model.input_dim;
  j["output_dim"] = model.output_dim;
  j["seed"] = model.seed;
  j["n_train"] = model.n_train;
  j["explained_variance"] = model.explained_variance;
  j["matrix"] = matrix_path.filename().string();
  j["matrix_rows"] = "row 0 = mean, rows 1..output_dim = basis";
  std::ofstream out(json_path, std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + json_path.string());
  out << j.dump(2) << '\n';
}

PcaModel load_pca_model(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw ValidationError("cannot open PCA model " + json_path.string());
  PcaModel model;
  std::filesystem::path matrix;
  try {
    const auto j = nlohmann::json::parse(in);
    model.input_dim = j.at("input_dim").get<std::size_t>();
    model.output_dim = j.at("output_dim").get<std::size_t>();
    model.seed = j.at("seed").get<std::uint64_t>();
    model.n_train = j.at("n_train").get<std::size_t>();
    model.explained_variance = j.at("explained_variance").get<std::vector<double>>();
    matrix = json_path.parent_path() / j.at("matrix").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(json_path.string() + ": " + e.what());
  }
  const auto block = read_vector_block(matrix);
  if (block.dim() != model.input_dim || block.count() != model.output_dim + 1 ||
      model.explained_variance.size() != model.output_dim)
    throw ValidationError(json_path.string() + ": matrix shape does not match header");
  model.mean.assign(block.data().begin(), block.data().begin() + model.input_dim);
  model.basis.assign(block.data().begin() + model.input_dim, block.data().end());
  return model;
}

// ---------------------------------------------------------------------------

std::span<const float> FusedVector::segment(const std::string& name) const {
  for (const auto& s : layout)
    if (s.name == name) return std::span<const float>(data).subspan(s.offset, s.length);
  throw ValidationError("unknown segment '" + name + "'");
}

FusedVector concat(const std::vector<std::pair<std::string, std::span<const float>>>& segments,
                   const std::map<std::string, float>& scales) {
  FusedVector out;
  std::set<std::string> seen;
  for (const auto& [name, values] : segments) {
    if (values.empty()) throw ValidationError("concat: segment '" + name + "' is empty");
    if (!seen.insert(name).second) throw ValidationError("concat: duplicate segment '" + name + "'");
    out.layout.push_back({name, out.data.size(), values.size()});
    const auto it = scales.find(name);
    const float scale = it == scales.end() ? 1.0f : it->second;
    for (float x : values) out.data.push_back(scale == 1.0f ? x : x * scale);
  }
  return out;
}

std::size_t FusionModel::input_dim() const {
  std::size_t n = 0;
  for (const auto& s : plan) n += s.length;
  return n;
}

std::size_t FusionModel::output_dim() const {
  std::size_t n = 0;
  for (const auto& s : plan) n += s.pca_dim > 0 ? s.pca_dim : s.length;
  return n;
}

std::vector<Segment> FusionModel::output_layout() const {
  std::vector<Segment> layout;
  std::size_t offset = 0;
  for (const auto& s : plan) {
    const auto len = s.pca_dim > 0 ? s.pca_dim : s.length;
    layout.push_back({s.name, offset, len});
    offset += len;
  }
  return layout;
}

void validate_fusion_plan(const std::vector<SegmentSpec>& plan, std::size_t raw_dim) {
  if (plan.empty()) throw ValidationError("fusion plan has no segments");
  std::set<std::string> names;
  std::size_t total = 0;
  for (const auto& s : plan) {
    if (s.name.empty()) throw ValidationError("fusion segment with empty name");
    if (!names.insert(s.name).second) throw ValidationError("duplicate fusion segment '" + s.name + "'");
    if (s.length == 0) throw ValidationError("fusion segment '" + s.name + "' has zero length");
    if (s.pca_dim > s.length)
      throw ValidationError("fusion segment '" + s.name + "' pca_dim exceeds its length");
    if (!(s.scale > 0.0f) || !std::isfinite(s.scale))
      throw ValidationError("fusion segment '" + s.name + "' scale must be positive");
    total += s.length;
  }
  if (total != raw_dim)
    throw ValidationError("fusion plan covers " + std::to_string(total) +
                          " columns but vectors have dim " + std::to_string(raw_dim));
}

FusionModel fit_fusion(const VectorBlock& train, const std::vector<SegmentSpec>& plan,
                       std::uint64_t seed) {
  validate_fusion_plan(plan, train.dim());
  FusionModel model;
  model.plan = plan;
  std::size_t offset = 0;
  for (const auto& s : plan) {
    if (s.pca_dim > 0) {
      VectorBlock slice(s.length, train.count());
      for (std::size_t i = 0; i < train.count(); ++i) {
        const auto r = train.row(i).subspan(offset, s.length);
        std::copy(r.begin(), r.end(), slice.row(i).begin());
      }
      model.pca.emplace(s.name, fit_pca(slice, s.pca_dim, seed));
    }
    offset += s.length;
  }
  return model;
}

VectorBlock apply_fusion(const FusionModel& model, const VectorBlock& raw) {
  validate_fusion_plan(model.plan, raw.dim());
  VectorBlock out(model.output_dim(), raw.count());
  std::map<std::string, float> scales;
  for (const auto& s : model.plan) scales[s.name] = s.scale;

  std::vector<std::vector<float>> compressed(model.plan.size());
  for (std::size_t i = 0; i < raw.count(); ++i) {
    const auto row = raw.row(i);
    std::vector<std::pair<std::string, std::span<const float>>> parts;
    std::size_t offset = 0;
    for (std::size_t s = 0; s < model.plan.size(); ++s) {
      const auto& spec = model.plan[s];
      auto slice = row.subspan(offset, spec.length);
      offset += spec.length;
      if (spec.pca_dim > 0) {
        compressed[s] = project(model.pca.at(spec.name), slice);
        slice = compressed[s];
      }
      parts.emplace_back(spec.name, slice);
    }
    const auto fused = concat(parts, scales);
    std::copy(fused.data.begin(), fused.data.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace fashiontrend
