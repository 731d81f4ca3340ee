#include "fashiontrend/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fashiontrend {

namespace {

using json = nlohmann::ordered_json;

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError("config: " + what);
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void validate_config(const RunConfig& c) {
  require(std::isfinite(c.radius_km) && c.radius_km > 0.0, "radius_km must be positive");
  require(c.years.first <= c.years.last, "years: first must not exceed last");
  require(c.k >= 1, "k must be at least 1");
  require(c.train_sample >= 1, "train_sample must be positive");
  require(c.max_iter >= 1, "max_iter must be at least 1");
  require(std::isfinite(c.tol) && c.tol >= 0.0, "tol must be non-negative");
  require(std::isfinite(c.threshold) && c.threshold >= 0.0, "threshold must be non-negative");
  require(c.train_n >= 1 && c.test_n >= 1, "train_n and test_n must be positive");
  require(c.sample_size >= 1, "sample_size must be positive");
  require(std::isfinite(c.svm_c) && c.svm_c > 0.0, "svm_c must be positive");
  require(std::isfinite(c.svm_gamma), "svm_gamma must be finite");
  require(std::isfinite(c.graph_threshold) && c.graph_threshold >= 0.0 && c.graph_threshold <= 1.0,
          "graph_threshold must lie in [0, 1]");
  if (!c.fusion.empty()) {
    std::size_t raw = 0;
    for (const auto& s : c.fusion) raw += s.length;
    validate_fusion_plan(c.fusion, raw);
  }
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["manifest"] = c.manifest.string();
  j["vectors"] = c.vectors.string();
  j["anchors"] = c.anchors.string();
  j["codebook"] = c.codebook.string();
  j["output_dir"] = c.output_dir.string();
  j["radius_km"] = c.radius_km;
  j["years"] = {c.years.first, c.years.last};
  auto fusion = json::array();
  for (const auto& s : c.fusion)
    fusion.push_back({{"name", s.name}, {"length", s.length}, {"pca_dim", s.pca_dim}, {"scale", s.scale}});
  j["fusion"] = fusion;
  j["codebook_fit"] = {{"k", c.k}, {"train_sample", c.train_sample}, {"max_iter", c.max_iter}, {"tol", c.tol}};
  j["trend"] = {{"threshold", c.threshold}, {"top_n", c.top_n}, {"exemplars_per_bin", c.exemplars_per_bin}};
  j["classify"] = {{"enabled", c.classify},   {"kind", to_string(c.classifier)},
                   {"train_n", c.train_n},    {"test_n", c.test_n},
                   {"sample_size", c.sample_size}, {"svm_c", c.svm_c},
                   {"svm_gamma", c.svm_gamma}};
  j["simgraph"] = {{"threshold", c.graph_threshold}, {"measure", to_string(c.measure)}};
  j["seeds"] = {{"sample", c.seeds.sample}, {"pca", c.seeds.pca}, {"kmeans", c.seeds.kmeans},
                {"split", c.seeds.split},   {"display", c.seeds.display}};
  return j.dump(2);
}

RunConfig config_from_json(const std::string& text, const std::filesystem::path& base_dir) {
  RunConfig c;
  try {
    const auto j = json::parse(text);
    require(j.is_object(), "top level must be an object");
    auto path_field = [&](const char* key, std::filesystem::path& out) {
      if (j.contains(key)) out = resolve(j.at(key).get<std::string>(), base_dir);
    };
    path_field("manifest", c.manifest);
    path_field("vectors", c.vectors);
    path_field("anchors", c.anchors);
    path_field("codebook", c.codebook);
    path_field("output_dir", c.output_dir);
    read_opt(j, "radius_km", c.radius_km);
    if (j.contains("years")) {
      const auto y = j.at("years").get<std::vector<int>>();
      require(y.size() == 2, "years must be [first, last]");
      c.years = {y[0], y[1]};
    }
    if (j.contains("fusion")) {
      for (const auto& s : j.at("fusion")) {
        SegmentSpec spec;
        spec.name = s.at("name").get<std::string>();
        spec.length = s.at("length").get<std::size_t>();
        read_opt(s, "pca_dim", spec.pca_dim);
        read_opt(s, "scale", spec.scale);
        c.fusion.push_back(spec);
      }
    }
    if (j.contains("codebook_fit")) {
      const auto& cb = j.at("codebook_fit");
      read_opt(cb, "k", c.k);
      read_opt(cb, "train_sample", c.train_sample);
      read_opt(cb, "max_iter", c.max_iter);
      read_opt(cb, "tol", c.tol);
    }
    if (j.contains("trend")) {
      const auto& t = j.at("trend");
      read_opt(t, "threshold", c.threshold);
      read_opt(t, "top_n", c.top_n);
      read_opt(t, "exemplars_per_bin", c.exemplars_per_bin);
    }
    if (j.contains("classify")) {
      const auto& cl = j.at("classify");
      read_opt(cl, "enabled", c.classify);
      if (cl.contains("kind")) c.classifier = parse_classifier_kind(cl.at("kind").get<std::string>());
      read_opt(cl, "train_n", c.train_n);
      read_opt(cl, "test_n", c.test_n);
      read_opt(cl, "sample_size", c.sample_size);
      read_opt(cl, "svm_c", c.svm_c);
      read_opt(cl, "svm_gamma", c.svm_gamma);
    }
    if (j.contains("simgraph")) {
      const auto& g = j.at("simgraph");
      read_opt(g, "threshold", c.graph_threshold);
      if (g.contains("measure")) c.measure = parse_similarity_measure(g.at("measure").get<std::string>());
    }
    if (j.contains("seeds")) {
      const auto& s = j.at("seeds");
      read_opt(s, "sample", c.seeds.sample);
      read_opt(s, "pca", c.seeds.pca);
      read_opt(s, "kmeans", c.seeds.kmeans);
      read_opt(s, "split", c.seeds.split);
      read_opt(s, "display", c.seeds.display);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str(), path.parent_path());
}

}  // namespace fashiontrend
