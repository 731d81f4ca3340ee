// fashiontrend: command-line front-end for the spatio-temporal trend pipeline.
//
// Exit codes: 0 success, 2 validation error, 3 stage failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fashiontrend/codebook.hpp"
#include "fashiontrend/config.hpp"
#include "fashiontrend/corpus.hpp"
#include "fashiontrend/features.hpp"
#include "fashiontrend/pipeline.hpp"
#include "fashiontrend/spatial.hpp"
#include "fashiontrend/synth.hpp"
#include "fashiontrend/trend.hpp"

namespace fs = std::filesystem;
using namespace fashiontrend;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitStage = 3;

// Flags shared by every subcommand. Unset flags leave the config file value.
struct Overrides {
  std::string config;
  std::optional<std::string> manifest, vectors, anchors, codebook, out;
  std::optional<std::uint64_t> seed_sample, seed_pca, seed_kmeans, seed_split, seed_display;
  std::optional<std::size_t> k, train_sample, max_iter, train_n, test_n, sample_size;
  std::optional<double> th, radius_km, graph_th, tol;
  std::optional<std::string> measure, classifier;
  std::optional<int> first_year, last_year;
  bool no_classify = false;

  void add_to(CLI::App* app) {
    app->add_option("--config", config, "JSON run configuration");
    app->add_option("--manifest", manifest, "JSONL manifest");
    app->add_option("--vectors", vectors, "TLVB vector file");
    app->add_option("--anchors", anchors, "JSON city anchor table (default: built-in)");
    app->add_option("--codebook", codebook, "codebook JSON");
    app->add_option("--out", out, "output directory");
    app->add_option("--seed-sample", seed_sample);
    app->add_option("--seed-pca", seed_pca);
    app->add_option("--seed-kmeans", seed_kmeans);
    app->add_option("--seed-split", seed_split);
    app->add_option("--seed-display", seed_display);
    app->add_option("--k", k, "number of codewords");
    app->add_option("--train-sample", train_sample, "codebook training sample cap");
    app->add_option("--max-iter", max_iter);
    app->add_option("--tol", tol);
    app->add_option("--th", th, "trend threshold TH");
    app->add_option("--radius-km", radius_km);
    app->add_option("--graph-th", graph_th, "similarity graph edge threshold");
    app->add_option("--measure", measure, "cosine | histogram_intersection");
    app->add_option("--classifier", classifier, "nearest_class_mean | rbf_svm");
    app->add_option("--train-n", train_n);
    app->add_option("--test-n", test_n);
    app->add_option("--sample-size", sample_size);
    app->add_option("--first-year", first_year);
    app->add_option("--last-year", last_year);
    app->add_flag("--no-classify", no_classify);
  }

  RunConfig resolve() const {
    RunConfig c = config.empty() ? RunConfig{} : load_config(config);
    if (manifest) c.manifest = *manifest;
    if (vectors) c.vectors = *vectors;
    if (anchors) c.anchors = *anchors;
    if (codebook) c.codebook = *codebook;
    if (out) c.output_dir = *out;
    if (seed_sample) c.seeds.sample = *seed_sample;
    if (seed_pca) c.seeds.pca = *seed_pca;
    if (seed_kmeans) c.seeds.kmeans = *seed_kmeans;
    if (seed_split) c.seeds.split = *seed_split;
    if (seed_display) c.seeds.display = *seed_display;
    if (k) c.k = *k;
    if (train_sample) c.train_sample = *train_sample;
    if (max_iter) c.max_iter = *max_iter;
    if (tol) c.tol = *tol;
    if (th) c.threshold = *th;
    if (radius_km) c.radius_km = *radius_km;
    if (graph_th) c.graph_threshold = *graph_th;
    if (measure) c.measure = parse_similarity_measure(*measure);
    if (classifier) c.classifier = parse_classifier_kind(*classifier);
    if (train_n) c.train_n = *train_n;
    if (test_n) c.test_n = *test_n;
    if (sample_size) c.sample_size = *sample_size;
    if (first_year) c.years.first = *first_year;
    if (last_year) c.years.last = *last_year;
    if (no_classify) c.classify = false;
    validate_config(c);
    return c;
  }
};

void require_path(const fs::path& p, const char* what) {
  if (p.empty()) throw ValidationError(std::string("missing --") + what);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

std::map<std::string, std::vector<CodewordVector>> read_histograms(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::map<std::string, std::vector<CodewordVector>> out;
  for (auto& v : parse_codeword_csv(in)) out[v.city].push_back(std::move(v));
  return out;
}

// Records grouped by anchor radius, as in the pipeline.
std::map<std::string, Manifest> group_by_city(const RunConfig& c, const Manifest& m) {
  return split_by_city(m, anchors_for(c), c.radius_km, nullptr);
}

// ---------------------------------------------------------------------------

int cmd_ingest(const RunConfig& c) {
  require_path(c.manifest, "manifest");
  require_path(c.vectors, "vectors");
  const auto block = read_vector_block(c.vectors);
  auto result = read_manifest_jsonl(c.manifest, anchors_for(c));
  result.manifest.dim = block.dim();
  validate_manifest(result.manifest, block);

  fs::create_directories(c.output_dir);
  write_manifest_jsonl(c.output_dir / "manifest.jsonl", result.manifest);
  write_vector_block(c.output_dir / "vectors.tlvb", block);

  nlohmann::ordered_json report;
  report["records"] = result.manifest.size();
  report["dim"] = block.dim();
  auto rejected = nlohmann::ordered_json::array();
  for (const auto& r : result.rejected) rejected.push_back({{"line", r.line}, {"id", r.id}, {"reason", r.reason}});
  report["rejected"] = rejected;
  write_text(c.output_dir / "ingest_report.json", report.dump(2) + "\n");

  std::cout << "ingested " << result.manifest.size() << " records, rejected " << result.rejected.size() << "\n";
  for (const auto& r : result.rejected)
    std::cerr << "rejected line " << r.line << " (" << r.id << "): " << r.reason << "\n";
  return 0;
}

int cmd_filter(const RunConfig& c, const std::string& city) {
  require_path(c.manifest, "manifest");
  const auto manifest = read_manifest_jsonl(c.manifest).manifest;
  auto anchors = anchors_for(c);
  if (!city.empty()) {
    std::erase_if(anchors, [&](const CityAnchor& a) { return a.name != city; });
    if (anchors.empty()) throw ValidationError("unknown city '" + city + "'");
  }
  std::size_t unassigned = 0;
  const auto per_city = split_by_city(manifest, anchors, c.radius_km, &unassigned);
  Manifest all;
  nlohmann::ordered_json summary;
  summary["radius_km"] = c.radius_km;
  for (const auto& [name, m] : per_city) {
    summary["cities"][name] = m.size();
    all.records.insert(all.records.end(), m.records.begin(), m.records.end());
  }
  summary["unassigned"] = unassigned;
  fs::create_directories(c.output_dir);
  write_manifest_jsonl(c.output_dir / "filtered.jsonl", all);
  write_text(c.output_dir / "filter_summary.json", summary.dump(2) + "\n");
  std::cout << "kept " << all.size() << " records in " << per_city.size() << " cities\n";
  return 0;
}

int cmd_pca(const RunConfig& c, std::size_t output_dim) {
  require_path(c.vectors, "vectors");
  const auto block = read_vector_block(c.vectors);
  auto plan = c.fusion;
  if (plan.empty()) {
    if (output_dim == 0) throw ValidationError("pca: give --output-dim or a fusion plan in --config");
    plan.push_back({"all", block.dim(), output_dim, 1.0f});
  }
  Manifest rows;
  for (std::size_t i = 0; i < block.count(); ++i) rows.records.push_back({std::to_string(i), kUnassignedCity, 0, 0, 0, i});
  const auto sample = sample_records(rows, c.train_sample, c.seeds.sample);
  VectorBlock train(block.dim(), sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto r = block.row(sample.records[i].vector_index);
    std::copy(r.begin(), r.end(), train.row(i).begin());
  }
  const auto model = fit_fusion(train, plan, c.seeds.pca);
  fs::create_directories(c.output_dir);
  for (const auto& [name, pca] : model.pca)
    save_pca_model(pca, c.output_dir / ("pca_" + name + ".json"), c.output_dir / ("pca_" + name + ".tlvb"));
  write_vector_block(c.output_dir / "fused.tlvb", apply_fusion(model, block));
  std::cout << "fused dim " << model.output_dim() << " from " << model.input_dim() << "\n";
  return 0;
}

int cmd_codebook(const RunConfig& c) {
  require_path(c.manifest, "manifest");
  require_path(c.vectors, "vectors");
  const auto corpus = load_corpus(c.manifest, c.vectors);
  const auto sample = sample_records(corpus.manifest, c.train_sample, c.seeds.sample);
  VectorBlock train(corpus.vectors.dim(), sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto r = corpus.vectors.row(sample.records[i].vector_index);
    std::copy(r.begin(), r.end(), train.row(i).begin());
  }
  const auto cb = fit_codebook(train, {c.k, c.seeds.kmeans, c.max_iter, c.tol});
  fs::create_directories(c.output_dir);
  save_codebook(cb, c.output_dir / "codebook.json", c.output_dir / "codebook.tlvb");
  std::cout << "k=" << cb.k << " iterations=" << cb.fit_meta.iterations
            << " inertia=" << format_number(cb.fit_meta.inertia) << "\n";
  return 0;
}

int cmd_histogram(const RunConfig& c) {
  require_path(c.manifest, "manifest");
  require_path(c.vectors, "vectors");
  require_path(c.codebook, "codebook");
  const auto corpus = load_corpus(c.manifest, c.vectors);
  const auto cb = load_codebook(c.codebook);
  std::string csv = codeword_csv_header(cb.k) + "\n";
  for (const auto& [city, m] : group_by_city(c, corpus.manifest)) {
    const auto part = partition_by_period(m, c.years);
    if (!part.rejected.empty())
      std::cerr << city << ": " << part.rejected.size() << " records outside the year range\n";
    for (const auto& [year, bucket] : part.buckets)
      csv += codeword_csv_row(build_codeword_vector(cb, bucket, corpus.vectors, city, std::to_string(year))) + "\n";
  }
  fs::create_directories(c.output_dir);
  write_text(c.output_dir / "histograms.csv", csv);
  return 0;
}

int cmd_ftd(const RunConfig& c, const fs::path& histograms, std::size_t top) {
  require_path(histograms, "histograms");
  std::vector<std::string> warnings;
  const auto descriptors = city_trends(read_histograms(histograms), c.threshold, warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  fs::create_directories(c.output_dir);
  write_text(c.output_dir / "ftd.json", trend_series_to_json(descriptors) + "\n");
  std::string csv = trend_csv_header() + "\n";
  for (const auto& d : descriptors) csv += trend_csv_rows(d);
  write_text(c.output_dir / "ftd.csv", csv);
  for (const auto& d : descriptors) {
    const auto t = top_trends(d, top);
    std::cout << d.city << " " << d.period_from << "->" << d.period_to << ": +" << d.plus.size() << " -"
              << d.minus.size();
    for (const auto& [bin, mag] : t.rising) std::cout << " +" << bin << "(" << format_number(mag) << ")";
    for (const auto& [bin, mag] : t.falling) std::cout << " -" << bin << "(" << format_number(mag) << ")";
    std::cout << "\n";
  }
  return 0;
}

int cmd_classify(const RunConfig& c) {
  require_path(c.manifest, "manifest");
  require_path(c.vectors, "vectors");
  require_path(c.codebook, "codebook");
  const auto corpus = load_corpus(c.manifest, c.vectors);
  const auto cb = load_codebook(c.codebook);
  const auto split = make_labeled_sets(group_by_city(c, corpus.manifest), cb, corpus.vectors,
                                       {c.train_n, c.test_n, c.sample_size, c.seeds.split});
  const auto model = train_classifier(split.train, c.classifier, {c.svm_c, c.svm_gamma});
  const auto cm = evaluate(*model, split.test);
  fs::create_directories(c.output_dir);
  write_text(c.output_dir / "confusion.csv", cm.to_csv());
  auto j = nlohmann::ordered_json::parse(cm.to_json());
  j["classifier"] = to_string(c.classifier);
  write_text(c.output_dir / "confusion.json", j.dump(2) + "\n");
  std::cout << to_string(c.classifier) << " accuracy " << format_number(cm.accuracy()) << " ("
            << cm.trace() << "/" << cm.total() << ")\n";
  return 0;
}

int cmd_simgraph(const RunConfig& c, const fs::path& histograms) {
  require_path(histograms, "histograms");
  std::map<std::string, CodewordVector> city_vectors;
  for (const auto& [city, vs] : read_histograms(histograms))
    city_vectors[city] = mean_codeword_vector(vs, city, "all");
  const auto graph = build_similarity_graph(city_vectors, c.graph_threshold, c.measure);
  fs::create_directories(c.output_dir);
  write_text(c.output_dir / "simgraph.dot", graph.to_dot());
  auto j = nlohmann::ordered_json::parse(graph.to_json());
  j["aggregate"] = "mean of the input codeword vectors per city";
  write_text(c.output_dir / "simgraph.json", j.dump(2) + "\n");
  std::cout << graph.nodes.size() << " nodes, " << graph.edges.size() << " edges\n";
  return 0;
}

int cmd_exemplars(const RunConfig& c, std::size_t bin, std::size_t n, const std::string& city,
                  std::optional<int> period, std::size_t random_m) {
  require_path(c.manifest, "manifest");
  require_path(c.vectors, "vectors");
  require_path(c.codebook, "codebook");
  const auto corpus = load_corpus(c.manifest, c.vectors);
  const auto cb = load_codebook(c.codebook);
  auto records = corpus.manifest.records;
  if (!city.empty()) std::erase_if(records, [&](const Record& r) { return r.city != city; });
  if (period) std::erase_if(records, [&](const Record& r) { return utc_year(r.timestamp) != *period; });
  auto ex = nearest_exemplars(cb, bin, corpus.manifest.with_records(std::move(records)), corpus.vectors, n);
  if (random_m > 0) ex = subsample_exemplars(ex, random_m, c.seeds.display);
  fs::create_directories(c.output_dir);
  write_text(c.output_dir / "exemplars.json", exemplars_to_json(ex) + "\n");
  for (std::size_t i = 0; i < ex.record_ids.size(); ++i)
    std::cout << ex.record_ids[i] << "\t" << format_number(ex.distances[i]) << "\n";
  return 0;
}

int cmd_synth(const RunConfig& c, const std::string& params_path, std::optional<std::uint64_t> seed,
              std::optional<std::size_t> per_bucket) {
  SynthParams p;
  if (!params_path.empty()) {
    std::ifstream in(params_path);
    if (!in) throw ValidationError("cannot open " + params_path);
    std::stringstream ss;
    ss << in.rdbuf();
    p = synth_params_from_json(ss.str());
  }
  if (seed) p.seed = *seed;
  if (per_bucket) p.per_bucket = *per_bucket;
  if (!c.anchors.empty()) p.anchors = load_city_anchors(c.anchors);
  const auto corpus = generate_synthetic_corpus(p);
  write_synthetic_corpus(corpus, c.output_dir);
  std::cout << "wrote " << corpus.manifest.size() << " records (dim " << corpus.vectors.dim() << ") to "
            << c.output_dir.string() << "\n";
  return 0;
}

int cmd_pipeline(const RunConfig& c) {
  require_path(c.manifest, "manifest");
  require_path(c.vectors, "vectors");
  const auto report = run_pipeline(c);
  std::cout << "cities: " << report.cities.size() << ", outputs: " << report.outputs.size();
  if (report.accuracy >= 0.0) std::cout << ", accuracy: " << format_number(report.accuracy);
  std::cout << "\n";
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatio-temporal fashion trend analysis over geo-tagged descriptor corpora"};
  app.require_subcommand(1);

  std::map<std::string, Overrides> overrides;
  auto sub = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    overrides[name].add_to(s);
    return s;
  };

  auto* ingest = sub("ingest", "validate a manifest + vector file and copy it into a workspace");
  auto* filter = sub("filter", "keep records within the radius of city anchors");
  std::string filter_city;
  filter->add_option("--city", filter_city, "single anchor name (default: all)");
  auto* pca = sub("pca", "fit PCA / segment fusion and write fused vectors");
  std::size_t output_dim = 0;
  pca->add_option("--output-dim", output_dim, "PCA output dim when no fusion plan is configured");
  auto* codebook = sub("codebook", "fit the k-means codebook");
  auto* histogram = sub("histogram", "per city-year codeword vectors");
  auto* ftd = sub("ftd", "trend descriptors from a histogram CSV");
  std::string ftd_hist;
  std::size_t ftd_top = 5;
  ftd->add_option("--histograms", ftd_hist, "codeword CSV")->required();
  ftd->add_option("--top", ftd_top, "bins to print per direction");
  auto* classify = sub("classify", "city perception: train/test codeword vectors and confusion matrix");
  auto* simgraph = sub("simgraph", "thresholded city similarity graph");
  std::string sim_hist;
  simgraph->add_option("--histograms", sim_hist, "codeword CSV (rows averaged per city)")->required();
  auto* exemplars = sub("exemplars", "records nearest to a codeword centroid");
  std::size_t ex_bin = 0, ex_n = 9, ex_random = 0;
  std::string ex_city;
  std::optional<int> ex_period;
  exemplars->add_option("--bin", ex_bin)->required();
  exemplars->add_option("--n", ex_n, "number of nearest records");
  exemplars->add_option("--city", ex_city);
  exemplars->add_option("--period", ex_period, "UTC year");
  exemplars->add_option("--random", ex_random, "randomly keep this many of the nearest (display only)");
  auto* synth = sub("synth", "generate a synthetic corpus with planted trends");
  std::string synth_params;
  std::optional<std::uint64_t> synth_seed;
  std::optional<std::size_t> synth_per_bucket;
  synth->add_option("--params", synth_params, "JSON generator parameters");
  synth->add_option("--seed", synth_seed);
  synth->add_option("--per-bucket", synth_per_bucket);
  auto* pipeline = sub("pipeline", "run every stage and write a run report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    for (auto* s : app.get_subcommands()) {
      const auto c = overrides.at(s->get_name()).resolve();
      if (s == ingest) return cmd_ingest(c);
      if (s == filter) return cmd_filter(c, filter_city);
      if (s == pca) return cmd_pca(c, output_dim);
      if (s == codebook) return cmd_codebook(c);
      if (s == histogram) return cmd_histogram(c);
      if (s == ftd) return cmd_ftd(c, ftd_hist, ftd_top);
      if (s == classify) return cmd_classify(c);
      if (s == simgraph) return cmd_simgraph(c, sim_hist);
      if (s == exemplars) return cmd_exemplars(c, ex_bin, ex_n, ex_city, ex_period, ex_random);
      if (s == synth) return cmd_synth(c, synth_params, synth_seed, synth_per_bucket);
      if (s == pipeline) return cmd_pipeline(c);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  }
  return 0;
}
