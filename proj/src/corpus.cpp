#include "fashiontrend/corpus.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace fashiontrend {

namespace {

constexpr char kVectorMagic[4] = {'T', 'L', 'V', 'B'};
constexpr std::uint32_t kVectorVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "TLVB I/O assumes a little-endian host");

template <typename T>
void write_le(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const std::filesystem::path& path, const char* what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T)))
    throw ValidationError(path.string() + ": truncated header (" + what + ")");
  return value;
}

double to_radians(double deg) { return deg * (M_PI / 180.0); }

}  // namespace

const std::vector<CityAnchor>& default_city_anchors() {
  static const std::vector<CityAnchor> anchors = {
      {"London", -0.12776, 51.50735},       {"New York", -74.0059, 40.71278},
      {"Boston", -71.0589, 42.36008},       {"Paris", 2.352222, 48.85661},
      {"Toronto", -79.3832, 43.65323},      {"Barcelona", 2.173403, 41.38506},
      {"Tokyo", 139.6917, 35.68949},        {"San Francisco", -122.419, 37.77493},
      {"Hong Kong", 114.1095, 22.39643},    {"Zurich", 8.541694, 47.37689},
      {"Seoul", 126.978, 37.56654},         {"Beijing", 116.4074, 39.90421},
      {"Bangkok", 100.5018, 13.75633},      {"Singapore", 103.8198, 1.352083},
      {"Kuala Lumpur", 101.6869, 3.139003}, {"New Delhi", 77.20902, 28.61394},
  };
  return anchors;
}

bool valid_geo(const GeoPoint& p) {
  return std::isfinite(p.latitude) && std::isfinite(p.longitude) && p.latitude >= -90.0 &&
         p.latitude <= 90.0 && p.longitude > -180.0 && p.longitude <= 180.0;
}

void validate_city_anchors(const std::vector<CityAnchor>& anchors) {
  std::unordered_set<std::string> names;
  for (const auto& a : anchors) {
    if (a.name.empty() || a.name == kUnassignedCity)
      throw ValidationError("invalid city anchor name '" + a.name + "'");
    if (!valid_geo(a.point()))
      throw ValidationError("city anchor '" + a.name + "' has out-of-range coordinates");
    if (!names.insert(a.name).second)
      throw ValidationError("duplicate city anchor '" + a.name + "'");
  }
}

std::vector<CityAnchor> load_city_anchors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open anchor file " + path.string());
  std::vector<CityAnchor> anchors;
  try {
    const auto doc = nlohmann::json::parse(in);
    if (!doc.is_array()) throw ValidationError(path.string() + ": expected a JSON array");
    for (const auto& item : doc) {
      anchors.push_back({item.at("name").get<std::string>(), item.at("lon").get<double>(),
                         item.at("lat").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  validate_city_anchors(anchors);
  return anchors;
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  if (!valid_geo(a) || !valid_geo(b))
    throw ValidationError("haversine_km: coordinates out of range");
  const double dlat = to_radians(b.latitude - a.latitude);
  const double dlon = to_radians(b.longitude - a.longitude);
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  double h = s1 * s1 + std::cos(to_radians(a.latitude)) * std::cos(to_radians(b.latitude)) * s2 * s2;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

// ---------------------------------------------------------------------------

VectorBlock::VectorBlock(std::size_t dim, std::size_t count)
    : dim_(dim), count_(count), data_(dim * count, 0.0f) {
  if (dim == 0) throw ValidationError("vector block dim must be positive");
}

VectorBlock::VectorBlock(std::size_t dim, std::vector<float> data)
    : dim_(dim), data_(std::move(data)) {
  if (dim == 0) throw ValidationError("vector block dim must be positive");
  if (data_.size() % dim != 0)
    throw ValidationError("vector block data length is not a multiple of dim");
  count_ = data_.size() / dim;
}

void VectorBlock::append(std::span<const float> r) {
  if (dim_ == 0) dim_ = r.size();
  if (r.size() != dim_ || dim_ == 0)
    throw ValidationError("append: row length " + std::to_string(r.size()) +
                          " does not match dim " + std::to_string(dim_));
  data_.insert(data_.end(), r.begin(), r.end());
  ++count_;
}

void VectorBlock::validate_finite() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i]))
      throw ValidationError("non-finite value at row " + std::to_string(i / dim_) + ", column " +
                            std::to_string(i % dim_));
  }
}

void write_vector_block(const std::filesystem::path& path, const VectorBlock& block) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.write(kVectorMagic, 4);
  write_le<std::uint32_t>(out, kVectorVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(block.dim()));
  write_le<std::uint64_t>(out, block.count());
  out.write(reinterpret_cast<const char*>(block.data().data()),
            static_cast<std::streamsize>(block.data().size() * sizeof(float)));
  if (!out) throw ValidationError("short write to " + path.string());
}

VectorBlock read_vector_block(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open vector file " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kVectorMagic, 4) != 0)
    throw ValidationError(path.string() + ": bad magic, not a TLVB file");
  const auto version = read_le<std::uint32_t>(in, path, "version");
  if (version != kVectorVersion)
    throw ValidationError(path.string() + ": unsupported TLVB version " + std::to_string(version));
  const auto dim = read_le<std::uint32_t>(in, path, "dim");
  const auto count = read_le<std::uint64_t>(in, path, "count");
  if (dim == 0) throw ValidationError(path.string() + ": dim must be positive");

  const auto payload = static_cast<std::uint64_t>(dim) * count * sizeof(float);
  const auto header = 4 + 4 + 4 + 8;
  const auto file_size = std::filesystem::file_size(path);
  if (file_size != header + payload)
    throw ValidationError(path.string() + ": size " + std::to_string(file_size) +
                          " does not match header (expected " + std::to_string(header + payload) +
                          ")");
  std::vector<float> data(static_cast<std::size_t>(dim) * count);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(payload));
  if (!in) throw ValidationError(path.string() + ": truncated payload");
  VectorBlock block(dim, std::move(data));
  try {
    block.validate_finite();
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return block;
}

// ---------------------------------------------------------------------------

Manifest Manifest::with_records(std::vector<Record> rs) const {
  Manifest m;
  m.records = std::move(rs);
  m.vector_file = vector_file;
  m.dim = dim;
  m.schema_version = schema_version;
  return m;
}

void validate_manifest(const Manifest& manifest, const VectorBlock& block) {
  if (manifest.dim != 0 && manifest.dim != block.dim())
    throw ValidationError("manifest dim " + std::to_string(manifest.dim) +
                          " does not match vector block dim " + std::to_string(block.dim()));
  std::unordered_set<std::string_view> ids;
  for (const auto& r : manifest.records) {
    if (!ids.insert(r.id).second) throw ValidationError("duplicate record id '" + r.id + "'");
    if (r.vector_index >= block.count())
      throw ValidationError("record '" + r.id + "' vec " + std::to_string(r.vector_index) +
                            " is outside the vector block (count " +
                            std::to_string(block.count()) + ")");
  }
}

std::string manifest_to_jsonl(const Manifest& manifest) {
  std::string out;
  for (const auto& r : manifest.records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["city"] = r.city;
    j["ts"] = r.timestamp;
    j["lon"] = r.longitude;
    j["lat"] = r.latitude;
    j["vec"] = r.vector_index;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_manifest_jsonl(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << manifest_to_jsonl(manifest);
}

IngestResult parse_manifest_jsonl(std::istream& in, const std::vector<CityAnchor>& anchors) {
  std::unordered_set<std::string> known;
  for (const auto& a : anchors) known.insert(a.name);

  IngestResult result;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = "line " + std::to_string(lineno) + ": ";

    Record r;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.is_object()) throw ValidationError(where + "expected a JSON object");
      r.id = j.at("id").get<std::string>();
      r.city = j.contains("city") ? j.at("city").get<std::string>() : kUnassignedCity;
      if (!j.at("ts").is_number_integer())
        throw ValidationError(where + "'ts' must be integer epoch seconds");
      r.timestamp = j.at("ts").get<std::int64_t>();
      r.longitude = j.at("lon").get<double>();
      r.latitude = j.at("lat").get<double>();
      if (!j.at("vec").is_number_unsigned())
        throw ValidationError(where + "'vec' must be a non-negative integer");
      r.vector_index = j.at("vec").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(where + e.what());
    }
    if (r.id.empty()) throw ValidationError(where + "empty id");
    if (!ids.insert(r.id).second) throw ValidationError(where + "duplicate id '" + r.id + "'");

    if (!valid_geo(r.point())) {
      result.rejected.push_back({lineno, r.id, "coordinates out of range"});
      continue;
    }
    if (!known.empty() && r.city != kUnassignedCity && !known.contains(r.city)) {
      result.rejected.push_back({lineno, r.id, "unknown city '" + r.city + "'"});
      continue;
    }
    result.manifest.records.push_back(std::move(r));
  }
  return result;
}

IngestResult read_manifest_jsonl(const std::filesystem::path& path,
                                 const std::vector<CityAnchor>& anchors) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest " + path.string());
  try {
    return parse_manifest_jsonl(in, anchors);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

Corpus load_corpus(const std::filesystem::path& manifest_path,
                   const std::filesystem::path& vector_path) {
  Corpus corpus;
  corpus.vectors = read_vector_block(vector_path);
  auto ingest = read_manifest_jsonl(manifest_path);
  if (!ingest.rejected.empty()) {
    const auto& r = ingest.rejected.front();
    throw ValidationError(manifest_path.string() + ": line " + std::to_string(r.line) + ": " +
                          r.reason + " (" + std::to_string(ingest.rejected.size()) +
                          " invalid rows)");
  }
  corpus.manifest = std::move(ingest.manifest);
  corpus.manifest.vector_file = vector_path;
  corpus.manifest.dim = corpus.vectors.dim();
  validate_manifest(corpus.manifest, corpus.vectors);
  return corpus;
}

// ---------------------------------------------------------------------------

Manifest filter_by_city(const Manifest& manifest, const CityAnchor& anchor, double radius_km) {
  if (!(radius_km >= 0.0) || !std::isfinite(radius_km))
    throw ValidationError("radius_km must be a non-negative finite number");
  const GeoPoint center = anchor.point();
  std::vector<Record> kept;
  for (const auto& r : manifest.records) {
    if (haversine_km(r.point(), center) <= radius_km) {
      kept.push_back(r);
      kept.back().city = anchor.name;
    }
  }
  return manifest.with_records(std::move(kept));
}

Manifest sample_records(const Manifest& manifest, std::size_t n, std::uint64_t seed) {
  const std::size_t count = manifest.size();
  const std::size_t take = std::min(n, count);
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  // Partial Fisher-Yates: the first `take` slots hold the sample.
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_index(rng, count - i));
    std::swap(order[i], order[j]);
  }
  std::vector<Record> picked;
  picked.reserve(take);
  for (std::size_t i = 0; i < take; ++i) picked.push_back(manifest.records[order[i]]);
  return manifest.with_records(std::move(picked));
}

std::size_t PeriodPartition::total() const {
  std::size_t n = rejected.size();
  for (const auto& [_, m] : buckets) n += m.size();
  return n;
}

int utc_year(std::int64_t timestamp) {
  using namespace std::chrono;
  const sys_seconds t{seconds{timestamp}};
  const year_month_day ymd{floor<days>(t)};
  return static_cast<int>(ymd.year());
}

PeriodPartition partition_by_period(const Manifest& manifest, YearRange range,
                                    PeriodGranularity) {
  PeriodPartition out;
  for (const auto& r : manifest.records) {
    const int year = utc_year(r.timestamp);
    if (!range.contains(year)) {
      out.rejected.push_back(r);
      continue;
    }
    auto [it, inserted] = out.buckets.try_emplace(year);
    if (inserted) it->second = manifest.with_records({});
    it->second.records.push_back(r);
  }
  return out;
}


}  // namespace fashiontrend
