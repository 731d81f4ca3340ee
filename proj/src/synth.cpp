#include "fashiontrend/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace fashiontrend {

namespace {

using json = nlohmann::ordered_json;

constexpr double kDeg = M_PI / 180.0;

std::vector<CityAnchor> resolve_cities(const SynthParams& p) {
  const auto& table = p.anchors.empty() ? default_city_anchors() : p.anchors;
  if (p.cities.empty()) return table;
  std::vector<CityAnchor> out;
  for (const auto& name : p.cities) {
    const auto it = std::find_if(table.begin(), table.end(), [&](const CityAnchor& a) { return a.name == name; });
    if (it == table.end()) throw ValidationError("synth: unknown city '" + name + "'");
    out.push_back(*it);
  }
  return out;
}

// Largest-remainder rounding of weights * total; ties to the lower index.
std::vector<std::size_t> allocate_counts(const std::vector<double>& weights, std::size_t total) {
  std::vector<std::size_t> counts(weights.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t used = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = weights[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    used += counts[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; used < total && r < remainders.size(); ++r, ++used) ++counts[remainders[r].second];
  return counts;
}

std::int64_t year_start(int y) {
  using namespace std::chrono;
  return sys_seconds{sys_days{year{y} / January / 1}}.time_since_epoch().count();
}

std::string pad(std::size_t v, int width) {
  std::string s = std::to_string(v);
  return std::string(s.size() < static_cast<std::size_t>(width) ? width - s.size() : 0, '0') + s;
}

}  // namespace

GeoPoint destination_point(const GeoPoint& origin, double bearing_deg, double distance_km) {
  const double delta = distance_km / kEarthRadiusKm;
  const double theta = bearing_deg * kDeg;
  const double phi1 = origin.latitude * kDeg;
  const double lambda1 = origin.longitude * kDeg;
  const double phi2 = std::asin(std::sin(phi1) * std::cos(delta) + std::cos(phi1) * std::sin(delta) * std::cos(theta));
  const double lambda2 = lambda1 + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(phi1),
                                              std::cos(delta) - std::sin(phi1) * std::sin(phi2));
  double lon = std::fmod(lambda2 / kDeg + 540.0, 360.0) - 180.0;
  if (lon <= -180.0) lon += 360.0;
  return {phi2 / kDeg, lon};
}

std::vector<std::vector<double>> synth_base_mixtures(const SynthParams& p) {
  if (p.clusters == 0) throw ValidationError("synth: clusters must be positive");
  if (!(p.signature_mass >= 0.0 && p.signature_mass <= 1.0))
    throw ValidationError("synth: signature_mass must lie in [0, 1]");
  const auto cities = resolve_cities(p);
  std::vector<std::vector<double>> out;
  for (const auto& city : cities) {
    Rng rng(mix_seed(p.seed, stable_hash(city.name)));
    std::vector<double> g(p.clusters);
    for (auto& x : g) x = std::pow(uniform01(rng), 4.0);
    const double sum = std::accumulate(g.begin(), g.end(), 0.0);
    std::vector<double> w(p.clusters);
    for (std::size_t l = 0; l < p.clusters; ++l)
      w[l] = (1.0 - p.signature_mass) / static_cast<double>(p.clusters) + p.signature_mass * g[l] / sum;
    out.push_back(std::move(w));
  }
  return out;
}

SynthCorpus generate_synthetic_corpus(const SynthParams& p) {
  if (p.first_year > p.last_year) throw ValidationError("synth: first_year exceeds last_year");
  if (p.segments.empty()) throw ValidationError("synth: no vector segments");
  if (!(p.noise >= 0.0) || !(p.prototype_scale > 0.0))
    throw ValidationError("synth: noise must be >= 0 and prototype_scale > 0");
  if (!(p.placement_radius_km >= 0.0)) throw ValidationError("synth: placement_radius_km must be >= 0");
  std::size_t dim = 0;
  for (const auto& s : p.segments) dim += s.length;
  if (dim == 0) throw ValidationError("synth: vector dim is zero");

  SynthCorpus out;
  out.params = p;
  const auto cities = resolve_cities(p);
  const auto base = synth_base_mixtures(p);
  const std::size_t years = static_cast<std::size_t>(p.last_year - p.first_year + 1);

  for (std::size_t c = 0; c < cities.size(); ++c) {
    SynthCity sc;
    sc.name = cities[c].name;
    sc.mixtures.assign(years, base[c]);
    out.cities.push_back(std::move(sc));
  }
  for (const auto& s : p.shifts) {
    const auto it = std::find_if(out.cities.begin(), out.cities.end(),
                                 [&](const SynthCity& sc) { return sc.name == s.city; });
    if (it == out.cities.end()) throw ValidationError("synth: shift names unknown city '" + s.city + "'");
    if (s.year <= p.first_year || s.year > p.last_year)
      throw ValidationError("synth: shift year " + std::to_string(s.year) + " must fall in (" +
                            std::to_string(p.first_year) + ", " + std::to_string(p.last_year) + "]");
    if (s.from_cluster >= p.clusters || s.to_cluster >= p.clusters || s.from_cluster == s.to_cluster)
      throw ValidationError("synth: shift clusters must be distinct and < clusters");
    if (!(s.mass > 0.0)) throw ValidationError("synth: shift mass must be positive");
    for (int y = s.year; y <= p.last_year; ++y) {
      auto& w = it->mixtures[static_cast<std::size_t>(y - p.first_year)];
      w[s.from_cluster] -= s.mass;
      w[s.to_cluster] += s.mass;
      if (w[s.from_cluster] < 0.0)
        throw ValidationError("synth: infeasible shift for '" + s.city + "' in " + std::to_string(y) +
                              ": cluster " + std::to_string(s.from_cluster) + " mass would become " +
                              format_number(w[s.from_cluster]));
    }
  }

  Rng proto_rng(mix_seed(p.seed, 0xC1u));
  out.prototypes.assign(p.clusters, std::vector<float>(dim));
  for (auto& proto : out.prototypes)
    for (auto& x : proto) x = static_cast<float>(p.prototype_scale * standard_normal(proto_rng));

  Rng rng(mix_seed(p.seed, 0xD47Au));
  out.vectors = VectorBlock(dim, std::size_t{0});
  std::vector<float> row(dim);
  auto emit = [&](Record r, std::size_t cluster) {
    const auto& proto = out.prototypes[cluster];
    for (std::size_t j = 0; j < dim; ++j)
      row[j] = static_cast<float>(proto[j] + p.noise * standard_normal(rng));
    r.vector_index = out.vectors.count();
    out.vectors.append(row);
    out.manifest.records.push_back(std::move(r));
    out.cluster_of.push_back(cluster);
  };

  for (std::size_t c = 0; c < cities.size(); ++c) {
    for (std::size_t y = 0; y < years; ++y) {
      const int year = p.first_year + static_cast<int>(y);
      const auto counts = allocate_counts(out.cities[c].mixtures[y], p.per_bucket);
      std::vector<std::size_t> labels;
      for (std::size_t l = 0; l < counts.size(); ++l) labels.insert(labels.end(), counts[l], l);
      for (std::size_t i = labels.size(); i > 1; --i) std::swap(labels[i - 1], labels[uniform_index(rng, i)]);

      const auto start = year_start(year);
      const auto span = static_cast<std::uint64_t>(year_start(year + 1) - start);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        Record r;
        r.id = "c" + pad(c, 2) + "-" + std::to_string(year) + "-" + pad(i, 6);
        r.timestamp = start + static_cast<std::int64_t>(uniform_index(rng, span));
        const auto where = destination_point(cities[c].point(), 360.0 * uniform01(rng),
                                             p.placement_radius_km * std::sqrt(uniform01(rng)));
        r.latitude = where.latitude;
        r.longitude = where.longitude;
        emit(std::move(r), labels[i]);
      }
    }
  }

  // Far from every anchor: South Atlantic.
  for (std::size_t i = 0; i < p.unassigned; ++i) {
    Record r;
    r.id = "u-" + pad(i, 6);
    const int year = p.first_year + static_cast<int>(uniform_index(rng, years));
    r.timestamp = year_start(year) + static_cast<std::int64_t>(uniform_index(rng, 86400 * 365));
    r.latitude = -40.0 + 5.0 * uniform01(rng);
    r.longitude = -30.0 + 5.0 * uniform01(rng);
    emit(std::move(r), static_cast<std::size_t>(uniform_index(rng, p.clusters)));
  }
  out.manifest.dim = dim;
  return out;
}

SynthParams synth_params_from_json(const std::string& text) {
  SynthParams p;
  try {
    const auto j = json::parse(text);
    if (j.contains("cities")) p.cities = j.at("cities").get<std::vector<std::string>>();
    if (j.contains("first_year")) p.first_year = j.at("first_year").get<int>();
    if (j.contains("last_year")) p.last_year = j.at("last_year").get<int>();
    if (j.contains("per_bucket")) p.per_bucket = j.at("per_bucket").get<std::size_t>();
    if (j.contains("clusters")) p.clusters = j.at("clusters").get<std::size_t>();
    if (j.contains("segments")) {
      p.segments.clear();
      for (const auto& s : j.at("segments"))
        p.segments.push_back({s.at("name").get<std::string>(), s.at("length").get<std::size_t>(), 0, 1.0f});
    }
    if (j.contains("prototype_scale")) p.prototype_scale = j.at("prototype_scale").get<double>();
    if (j.contains("noise")) p.noise = j.at("noise").get<double>();
    if (j.contains("signature_mass")) p.signature_mass = j.at("signature_mass").get<double>();
    if (j.contains("placement_radius_km")) p.placement_radius_km = j.at("placement_radius_km").get<double>();
    if (j.contains("unassigned")) p.unassigned = j.at("unassigned").get<std::size_t>();
    if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("shifts")) {
      for (const auto& s : j.at("shifts"))
        p.shifts.push_back({s.at("city").get<std::string>(), s.at("year").get<int>(),
                            s.at("from").get<std::size_t>(), s.at("to").get<std::size_t>(),
                            s.at("mass").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("synth params: ") + e.what());
  }
  return p;
}

std::string synth_params_to_json(const SynthParams& p) {
  json j;
  j["cities"] = p.cities;
  j["first_year"] = p.first_year;
  j["last_year"] = p.last_year;
  j["per_bucket"] = p.per_bucket;
  j["clusters"] = p.clusters;
  auto segs = json::array();
  for (const auto& s : p.segments) segs.push_back({{"name", s.name}, {"length", s.length}});
  j["segments"] = segs;
  j["prototype_scale"] = p.prototype_scale;
  j["noise"] = p.noise;
  j["signature_mass"] = p.signature_mass;
  j["placement_radius_km"] = p.placement_radius_km;
  j["unassigned"] = p.unassigned;
  j["seed"] = p.seed;
  auto shifts = json::array();
  for (const auto& s : p.shifts)
    shifts.push_back({{"city", s.city}, {"year", s.year}, {"from", s.from_cluster}, {"to", s.to_cluster}, {"mass", s.mass}});
  j["shifts"] = shifts;
  return j.dump(2);
}

void write_synthetic_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_manifest_jsonl(dir / "manifest.jsonl", corpus.manifest);
  write_vector_block(dir / "vectors.tlvb", corpus.vectors);

  json truth;
  truth["params"] = json::parse(synth_params_to_json(corpus.params));
  truth["clusters"] = corpus.params.clusters;
  truth["dim"] = corpus.vectors.dim();
  auto cities = json::array();
  for (const auto& c : corpus.cities) {
    json mixtures;
    for (std::size_t y = 0; y < c.mixtures.size(); ++y)
      mixtures[std::to_string(corpus.params.first_year + static_cast<int>(y))] = c.mixtures[y];
    cities.push_back({{"name", c.name}, {"mixtures", mixtures}});
  }
  truth["cities"] = cities;
  truth["prototypes"] = corpus.prototypes;
  std::ofstream t(dir / "truth.json", std::ios::trunc);
  if (!t) throw ValidationError("cannot write " + (dir / "truth.json").string());
  t << truth.dump(2) << '\n';

  std::ofstream labels(dir / "truth_labels.csv", std::ios::trunc);
  labels << "id,cluster\n";
  for (std::size_t i = 0; i < corpus.cluster_of.size(); ++i)
    labels << corpus.manifest.records[i].id << ',' << corpus.cluster_of[i] << '\n';
}

}  // namespace fashiontrend
