#pragma once

// Record data model, on-disk formats and geo/time bucketing of a corpus.
//
// A corpus on disk is a JSONL manifest (one record per line) next to a TLVB
// vector file. Records point into the vector file by row index.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fashiontrend/common.hpp"

namespace fashiontrend {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr const char* kUnassignedCity = "unassigned";

struct GeoPoint {
  double latitude = 0.0;   // [-90, 90]
  double longitude = 0.0;  // (-180, 180]
};

struct CityAnchor {
  std::string name;
  double longitude = 0.0;
  double latitude = 0.0;

  GeoPoint point() const { return {latitude, longitude}; }
};

/// Built-in table of sixteen city anchors.
const std::vector<CityAnchor>& default_city_anchors();

/// Loads anchors from a JSON array of {"name", "lon", "lat"} objects.
std::vector<CityAnchor> load_city_anchors(const std::filesystem::path& path);

/// Throws ValidationError on out-of-range coordinates or duplicate names.
void validate_city_anchors(const std::vector<CityAnchor>& anchors);

bool valid_geo(const GeoPoint& p);

/// Great-circle distance (haversine, mean Earth radius 6371 km).
double haversine_km(const GeoPoint& a, const GeoPoint& b);

// ---------------------------------------------------------------------------
// Vector storage

/// count x dim row-major float32 matrix.
class VectorBlock {
 public:
  VectorBlock() = default;
  VectorBlock(std::size_t dim, std::size_t count);
  VectorBlock(std::size_t dim, std::vector<float> data);

  std::size_t dim() const { return dim_; }
  std::size_t count() const { return count_; }
  bool empty() const { return count_ == 0; }

  std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::span<float> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }

  const std::vector<float>& data() const { return data_; }

  void append(std::span<const float> row);

  /// Throws ValidationError if any entry is NaN or infinite.
  void validate_finite() const;

  friend bool operator==(const VectorBlock&, const VectorBlock&) = default;

 private:
  std::size_t dim_ = 0;
  std::size_t count_ = 0;
  std::vector<float> data_;
};

/// TLVB: "TLVB", u32 version=1, u32 dim, u64 count, count*dim float32, all little-endian.
void write_vector_block(const std::filesystem::path& path, const VectorBlock& block);
VectorBlock read_vector_block(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Records and manifests

struct Record {
  std::string id;
  std::string city = kUnassignedCity;
  std::int64_t timestamp = 0;  // UTC seconds since epoch
  double longitude = 0.0;
  double latitude = 0.0;
  std::uint64_t vector_index = 0;

  GeoPoint point() const { return {latitude, longitude}; }

  friend bool operator==(const Record&, const Record&) = default;
};

struct Manifest {
  static constexpr int kSchemaVersion = 1;

  std::vector<Record> records;
  std::filesystem::path vector_file;
  std::size_t dim = 0;
  int schema_version = kSchemaVersion;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }

  /// Copy of this manifest's metadata with a different record list.
  Manifest with_records(std::vector<Record> rs) const;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

/// Throws ValidationError on duplicate ids or vector indices outside the block.
void validate_manifest(const Manifest& manifest, const VectorBlock& block);

/// One JSON object per line: id, city, ts, lon, lat, vec.
void write_manifest_jsonl(const std::filesystem::path& path, const Manifest& manifest);
std::string manifest_to_jsonl(const Manifest& manifest);

/// A row that parsed but failed a range rule.
struct RejectedRow {
  std::size_t line = 0;  // 1-based
  std::string id;
  std::string reason;
};

struct IngestResult {
  Manifest manifest;
  std::vector<RejectedRow> rejected;
};

/// Parses a JSONL manifest. Malformed rows (bad JSON, missing or mistyped keys)
/// and duplicate ids throw ValidationError naming the line. Rows with invalid
/// coordinates or an unknown city are collected in `rejected`. When `anchors`
/// is empty, city names are not checked.
IngestResult parse_manifest_jsonl(std::istream& in, const std::vector<CityAnchor>& anchors = {});
IngestResult read_manifest_jsonl(const std::filesystem::path& path,
                                 const std::vector<CityAnchor>& anchors = {});

struct Corpus {
  Manifest manifest;
  VectorBlock vectors;
};

/// Loads and cross-validates a manifest + vector file pair. Any rejected row
/// is a hard error here; use read_manifest_jsonl for lenient ingestion.
Corpus load_corpus(const std::filesystem::path& manifest_path,
                   const std::filesystem::path& vector_path);

// ---------------------------------------------------------------------------
// Operations

/// Records within radius_km (inclusive) of the anchor, relabeled with its name.
Manifest filter_by_city(const Manifest& manifest, const CityAnchor& anchor, double radius_km);

/// Uniform sample without replacement of min(n, size) records; order is a
/// seed-determined permutation.
Manifest sample_records(const Manifest& manifest, std::size_t n, std::uint64_t seed);

enum class PeriodGranularity { year };

struct YearRange {
  int first = 2000;
  int last = 2015;

  bool contains(int year) const { return year >= first && year <= last; }

  friend bool operator==(const YearRange&, const YearRange&) = default;
};

struct PeriodPartition {
  std::map<int, Manifest> buckets;  // keyed by UTC calendar year
  std::vector<Record> rejected;     // timestamps outside the range

  std::size_t total() const;
};

int utc_year(std::int64_t timestamp);

PeriodPartition partition_by_period(const Manifest& manifest, YearRange range,
                                    PeriodGranularity granularity = PeriodGranularity::year);

}  // namespace fashiontrend
