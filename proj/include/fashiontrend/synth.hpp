#pragma once

// Desk-scale synthetic corpora with known latent style clusters, per-city
// mixtures and planted trend shifts, for oracle-based testing.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fashiontrend/corpus.hpp"
#include "fashiontrend/features.hpp"

namespace fashiontrend {

/// Moves `mass` of a city's mixture weight from one latent cluster to
/// another, starting at `year` and persisting afterwards.
struct PlantedShift {
  std::string city;
  int year = 0;
  std::size_t from_cluster = 0;
  std::size_t to_cluster = 0;
  double mass = 0.0;

  friend bool operator==(const PlantedShift&, const PlantedShift&) = default;
};

struct SynthParams {
  std::vector<std::string> cities;  // empty: every anchor
  std::vector<CityAnchor> anchors;  // empty: built-in table
  int first_year = 2014;
  int last_year = 2015;
  std::size_t per_bucket = 2000;    // records per (city, year)
  std::size_t clusters = 32;
  std::vector<SegmentSpec> segments = {{"style", 8, 0, 1.0f}, {"color", 16, 0, 1.0f}};
  double prototype_scale = 10.0;
  double noise = 0.25;
  double signature_mass = 0.7;     // share of each city mixture that is city specific
  double placement_radius_km = 50.0;
  std::size_t unassigned = 0;      // records placed far from every anchor
  std::vector<PlantedShift> shifts;
  std::uint64_t seed = 7;
};

struct SynthCity {
  std::string name;
  std::vector<std::vector<double>> mixtures;  // per year, per cluster
};

struct SynthCorpus {
  Manifest manifest;
  VectorBlock vectors;
  std::vector<std::size_t> cluster_of;  // per record, parallel to manifest.records
  std::vector<std::vector<float>> prototypes;
  std::vector<SynthCity> cities;
  SynthParams params;
};

/// Base (pre-shift) mixture of every configured city, in city order.
std::vector<std::vector<double>> synth_base_mixtures(const SynthParams& params);

/// Throws ValidationError when a shift would drive a mixture weight below
/// zero or references an unknown city, year or cluster.
SynthCorpus generate_synthetic_corpus(const SynthParams& params);

SynthParams synth_params_from_json(const std::string& text);
std::string synth_params_to_json(const SynthParams& params);

/// Writes manifest.jsonl, vectors.tlvb, truth.json and truth_labels.csv.
void write_synthetic_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);

/// Point at `distance_km` from `origin` along `bearing_deg` on the sphere.
GeoPoint destination_point(const GeoPoint& origin, double bearing_deg, double distance_km);

}  // namespace fashiontrend
