#include "fashiontrend/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "fashiontrend/codebook.hpp"
#include "fashiontrend/features.hpp"
#include "fashiontrend/spatial.hpp"
#include "fashiontrend/trend.hpp"

namespace fashiontrend {

namespace {

using json = nlohmann::ordered_json;
constexpr std::size_t kNoBin = std::numeric_limits<std::size_t>::max();

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
      throw std::runtime_error("sha256: init failed");
  }
  void update(const void* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw std::runtime_error("sha256: update failed");
  }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), md, &len) != 1) throw std::runtime_error("sha256: final failed");
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
      out += digits[md[i] >> 4];
      out += digits[md[i] & 0xf];
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

class StageRunner {
 public:
  explicit StageRunner(RunReport& report) : report_(report) {}

  template <typename F>
  void run(const std::string& name, F&& fn) {
    const auto start = std::chrono::steady_clock::now();
    try {
      fn();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
    report_.timings.push_back({name, dt.count()});
  }

 private:
  RunReport& report_;
};

Manifest merge(const std::map<int, Manifest>& buckets, const Manifest& like) {
  std::vector<Record> all;
  for (const auto& [_, m] : buckets) all.insert(all.end(), m.records.begin(), m.records.end());
  return like.with_records(std::move(all));
}

VectorBlock gather_rows(const VectorBlock& block, const Manifest& m) {
  VectorBlock out(block.dim(), m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto r = block.row(m.records[i].vector_index);
    std::copy(r.begin(), r.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  Sha256 h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

std::vector<OutputFile> hash_outputs(const std::filesystem::path& dir,
                                     const std::vector<std::string>& names) {
  std::vector<OutputFile> out;
  for (const auto& n : names)
    out.push_back({n, sha256_file(dir / n), std::filesystem::file_size(dir / n)});
  return out;
}

std::vector<CityAnchor> anchors_for(const RunConfig& config) {
  return config.anchors.empty() ? default_city_anchors() : load_city_anchors(config.anchors);
}

std::map<std::string, Manifest> split_by_city(const Manifest& manifest,
                                              const std::vector<CityAnchor>& anchors,
                                              double radius_km, std::size_t* unassigned) {
  std::map<std::string, Manifest> out;
  std::unordered_set<std::string_view> claimed;
  for (const auto& anchor : anchors) {
    auto filtered = filter_by_city(manifest, anchor, radius_km);
    std::erase_if(filtered.records, [&](const Record& r) { return claimed.contains(r.id); });
    if (filtered.empty()) continue;
    for (const auto& r : manifest.records)
      if (haversine_km(r.point(), anchor.point()) <= radius_km) claimed.insert(r.id);
    out.emplace(anchor.name, std::move(filtered));
  }
  if (unassigned) *unassigned = manifest.size() - claimed.size();
  return out;
}

std::vector<TrendDescriptor> city_trends(const std::map<std::string, std::vector<CodewordVector>>& series,
                                         double threshold, std::vector<std::string>& warnings) {
  std::vector<TrendDescriptor> out;
  for (const auto& [city, unsorted] : series) {
    auto vectors = unsorted;
    std::stable_sort(vectors.begin(), vectors.end(), [](const CodewordVector& a, const CodewordVector& b) {
      return std::stoi(a.period) < std::stoi(b.period);
    });
    std::size_t start = 0;
    for (std::size_t i = 1; i <= vectors.size(); ++i) {
      const bool breaks =
          i == vectors.size() || std::stoi(vectors[i].period) != std::stoi(vectors[i - 1].period) + 1;
      if (!breaks) continue;
      if (i < vectors.size())
        warnings.push_back(city + ": periods " + vectors[i - 1].period + " and " + vectors[i].period +
                           " are not consecutive; trend series split");
      if (i - start >= 2) {
        std::vector<CodewordVector> run(vectors.begin() + static_cast<std::ptrdiff_t>(start),
                                        vectors.begin() + static_cast<std::ptrdiff_t>(i));
        auto ds = trend_series(run, threshold);
        out.insert(out.end(), ds.begin(), ds.end());
      }
      start = i;
    }
  }
  return out;
}

std::string RunReport::to_json() const {
  json j;
  j["tool"] = "fashiontrend";
  j["config"] = json::parse(config_to_json(config));
  j["inputs"] = {{"records", input_records}, {"unassigned_records", unassigned_records},
                 {"sha256", input_hashes}};
  auto t = json::array();
  for (const auto& s : timings) t.push_back({{"stage", s.stage}, {"seconds", s.seconds}});
  j["timings"] = t;
  json cities = json::object();
  for (const auto& [name, c] : this->cities) {
    json years = json::object();
    for (const auto& [y, n] : c.per_year) years[std::to_string(y)] = n;
    cities[name] = {{"total", c.total}, {"per_year", years}, {"rejected", c.rejected}};
  }
  j["cities"] = cities;
  if (accuracy >= 0.0) j["accuracy"] = accuracy;
  j["warnings"] = warnings;
  auto outs = json::array();
  for (const auto& o : outputs) outs.push_back({{"file", o.name}, {"sha256", o.sha256}, {"bytes", o.bytes}});
  j["outputs"] = outs;
  return j.dump(2);
}

RunReport run_pipeline(const RunConfig& config) {
  validate_config(config);
  RunReport report;
  report.config = config;
  StageRunner stages(report);

  const auto anchors = anchors_for(config);
  validate_city_anchors(anchors);
  const Corpus corpus = load_corpus(config.manifest, config.vectors);
  report.input_records = corpus.manifest.size();
  report.input_hashes["manifest"] = sha256_file(config.manifest);
  report.input_hashes["vectors"] = sha256_file(config.vectors);

  const auto& out_dir = config.output_dir;
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> written;

  // city -> year -> records
  std::map<std::string, std::map<int, Manifest>> buckets;
  std::map<std::string, Manifest> in_range;
  stages.run("filter", [&] {
    std::size_t unassigned = 0;
    const auto per_city = split_by_city(corpus.manifest, anchors, config.radius_km, &unassigned);
    report.unassigned_records = unassigned;
    if (per_city.empty()) throw ValidationError("no records within radius of any city anchor");
    for (const auto& [city, m] : per_city) {
      auto part = partition_by_period(m, config.years);
      CityCounts counts;
      counts.total = m.size();
      counts.rejected = part.rejected.size();
      for (const auto& [y, b] : part.buckets) counts.per_year[y] = b.size();
      if (!part.rejected.empty())
        report.warnings.push_back(city + ": " + std::to_string(part.rejected.size()) +
                                  " records outside years " + std::to_string(config.years.first) + "-" +
                                  std::to_string(config.years.last));
      report.cities[city] = counts;
      in_range[city] = merge(part.buckets, m);
      buckets[city] = std::move(part.buckets);
    }
  });

  Manifest training;
  {
    std::vector<Record> pool;
    for (const auto& [_, m] : in_range) pool.insert(pool.end(), m.records.begin(), m.records.end());
    training = sample_records(corpus.manifest.with_records(std::move(pool)), config.train_sample,
                              config.seeds.sample);
  }

  VectorBlock fused_storage;
  const VectorBlock* fused = &corpus.vectors;
  stages.run("fusion", [&] {
    if (config.fusion.empty()) return;
    const auto model = fit_fusion(gather_rows(corpus.vectors, training), config.fusion, config.seeds.pca);
    for (const auto& [name, pca] : model.pca) {
      save_pca_model(pca, out_dir / ("pca_" + name + ".json"), out_dir / ("pca_" + name + ".tlvb"));
      written.push_back("pca_" + name + ".json");
      written.push_back("pca_" + name + ".tlvb");
    }
    fused_storage = apply_fusion(model, corpus.vectors);
    fused = &fused_storage;
  });

  Codebook codebook;
  stages.run("codebook", [&] {
    KMeansParams params{config.k, config.seeds.kmeans, config.max_iter, config.tol};
    codebook = fit_codebook(gather_rows(*fused, training), params);
    save_codebook(codebook, out_dir / "codebook.json", out_dir / "codebook.tlvb");
    written.push_back("codebook.json");
    written.push_back("codebook.tlvb");
  });

  std::vector<std::size_t> bin_of(fused->count(), kNoBin);
  std::map<std::string, std::vector<CodewordVector>> series;
  stages.run("histogram", [&] {
    for (const auto& [city, m] : in_range)
      for (const auto& r : m.records) bin_of[r.vector_index] = assign(codebook, fused->row(r.vector_index));

    std::string csv = codeword_csv_header(codebook.k) + "\n";
    for (const auto& [city, years] : buckets) {
      for (const auto& [year, m] : years) {
        std::vector<std::size_t> bins;
        for (const auto& r : m.records) bins.push_back(bin_of[r.vector_index]);
        auto v = codeword_vector_from_assignments(codebook.k, bins, city, std::to_string(year));
        csv += codeword_csv_row(v) + "\n";
        series[city].push_back(std::move(v));
      }
    }
    write_text(out_dir / "histograms.csv", csv);
    written.push_back("histograms.csv");
  });

  std::vector<TrendDescriptor> descriptors;
  stages.run("trend", [&] {
    descriptors = city_trends(series, config.threshold, report.warnings);
    write_text(out_dir / "ftd.json", trend_series_to_json(descriptors) + "\n");
    std::string csv = trend_csv_header() + "\n";
    for (const auto& d : descriptors) csv += trend_csv_rows(d);
    write_text(out_dir / "ftd.csv", csv);
    written.push_back("ftd.json");
    written.push_back("ftd.csv");
  });

  stages.run("exemplars", [&] {
    auto arr = json::array();
    for (const auto& d : descriptors) {
      const auto top = top_trends(d, config.top_n);
      const auto& from = buckets.at(d.city).at(std::stoi(d.period_from));
      const auto& to = buckets.at(d.city).at(std::stoi(d.period_to));
      auto add = [&](const RankedBins& bins, const Manifest& population, const char* direction) {
        for (const auto& [bin, mag] : bins) {
          const auto ex = nearest_exemplars(codebook, bin, population, *fused, config.exemplars_per_bin);
          arr.push_back({{"city", d.city},         {"from", d.period_from},   {"to", d.period_to},
                         {"direction", direction}, {"bin", bin},              {"magnitude", mag},
                         {"record_ids", ex.record_ids}, {"distances", ex.distances}});
        }
      };
      add(top.rising, to, "plus");
      add(top.falling, from, "minus");
    }
    write_text(out_dir / "exemplars.json", arr.dump(2) + "\n");
    written.push_back("exemplars.json");
  });

  std::map<std::string, std::vector<CodewordVector>> labeled_by_city;
  if (config.classify) {
    stages.run("classify", [&] {
      if (in_range.size() < 2) throw ValidationError("need at least 2 cities to classify");
      LabeledSetParams lp{config.train_n, config.test_n, config.sample_size, config.seeds.split};
      const auto split = make_labeled_sets(in_range, codebook.k, bin_of, lp);
      const auto model = train_classifier(split.train, config.classifier,
                                          SvmParams{config.svm_c, config.svm_gamma});
      const auto cm = evaluate(*model, split.test);
      report.accuracy = cm.accuracy();
      write_text(out_dir / "confusion.csv", cm.to_csv());
      write_text(out_dir / "confusion.json", cm.to_json() + "\n");
      written.push_back("confusion.csv");
      written.push_back("confusion.json");

      std::string csv = codeword_csv_header(codebook.k) + "\n";
      for (const auto* set : {&split.train, &split.test}) {
        for (std::size_t i = 0; i < set->size(); ++i) {
          csv += codeword_csv_row(set->vectors[i]) + "\n";
          labeled_by_city[set->labels[i]].push_back(set->vectors[i]);
        }
      }
      write_text(out_dir / "labeled_vectors.csv", csv);
      written.push_back("labeled_vectors.csv");
    });
  }

  stages.run("simgraph", [&] {
    std::map<std::string, CodewordVector> city_vectors;
    std::string aggregate;
    if (!labeled_by_city.empty()) {
      aggregate = "mean of labeled codeword vectors (train and test)";
      for (const auto& [city, vs] : labeled_by_city) city_vectors[city] = mean_codeword_vector(vs, city, "all");
    } else {
      aggregate = "whole-city histogram over all in-range years";
      for (const auto& [city, m] : in_range) {
        std::vector<std::size_t> bins;
        for (const auto& r : m.records) bins.push_back(bin_of[r.vector_index]);
        city_vectors[city] = codeword_vector_from_assignments(codebook.k, bins, city, "all");
      }
    }
    std::string csv = codeword_csv_header(codebook.k) + "\n";
    for (const auto& [_, v] : city_vectors) csv += codeword_csv_row(v) + "\n";
    write_text(out_dir / "city_vectors.csv", csv);
    written.push_back("city_vectors.csv");

    if (city_vectors.size() < 2) {
      report.warnings.push_back("similarity graph skipped: fewer than 2 cities");
      return;
    }
    const auto graph = build_similarity_graph(city_vectors, config.graph_threshold, config.measure);
    auto gj = json::parse(graph.to_json());
    gj["aggregate"] = aggregate;
    write_text(out_dir / "simgraph.json", gj.dump(2) + "\n");
    write_text(out_dir / "simgraph.dot", graph.to_dot());
    written.push_back("simgraph.json");
    written.push_back("simgraph.dot");
  });

  report.outputs = hash_outputs(out_dir, written);
  write_text(out_dir / "report.json", report.to_json() + "\n");
  return report;
}

}  // namespace fashiontrend
