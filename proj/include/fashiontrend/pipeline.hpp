#pragma once

// End-to-end orchestration: filter -> fusion -> codebook -> histograms ->
// trend series -> city classification -> similarity graph, with a run report
// that hashes every artifact it wrote.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fashiontrend/config.hpp"
#include "fashiontrend/codebook.hpp"
#include "fashiontrend/corpus.hpp"
#include "fashiontrend/trend.hpp"

namespace fashiontrend {

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view bytes);

struct OutputFile {
  std::string name;  // relative to the output dir
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct CityCounts {
  std::size_t total = 0;
  std::map<int, std::size_t> per_year;
  std::size_t rejected = 0;  // outside the configured year range
};

struct RunReport {
  RunConfig config;
  std::vector<StageTiming> timings;
  std::map<std::string, std::string> input_hashes;
  std::size_t input_records = 0;
  std::size_t unassigned_records = 0;
  std::map<std::string, CityCounts> cities;
  std::vector<std::string> warnings;
  std::vector<OutputFile> outputs;
  double accuracy = -1.0;  // -1 when classification did not run

  std::string to_json() const;
};

/// Runs every stage, writing artifacts and report.json under
/// config.output_dir. Input validation problems throw ValidationError; any
/// failure inside a stage throws StageError naming it.
RunReport run_pipeline(const RunConfig& config);

/// Records every file in `names` (relative to dir) with its hash.
std::vector<OutputFile> hash_outputs(const std::filesystem::path& dir,
                                     const std::vector<std::string>& names);

/// Anchors from config.anchors, or the built-in table.
std::vector<CityAnchor> anchors_for(const RunConfig& config);

/// Filters the manifest against every anchor; keys are city names, cities
/// without records are omitted. Anchors whose disks overlap would produce
/// ambiguous labels, so a record is claimed by the first matching anchor.
std::map<std::string, Manifest> split_by_city(const Manifest& manifest,
                                              const std::vector<CityAnchor>& anchors,
                                              double radius_km, std::size_t* unassigned = nullptr);

/// Trend descriptors for every city's per-year series (periods sorted).
/// A gap in a city's years splits its series; each gap is added to `warnings`.
std::vector<TrendDescriptor> city_trends(const std::map<std::string, std::vector<CodewordVector>>& series,
                                         double threshold, std::vector<std::string>& warnings);

}  // namespace fashiontrend
