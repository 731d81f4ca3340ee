#include "fashiontrend/trend.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "fashiontrend/features.hpp"

namespace fashiontrend {

namespace {

RankedBins top_n(const std::map<std::size_t, double>& bins, std::size_t n) {
  RankedBins ranked(bins.begin(), bins.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > n) ranked.resize(n);
  return ranked;
}

int parse_year(const std::string& label) {
  int year = 0;
  const auto* end = label.data() + label.size();
  const auto res = std::from_chars(label.data(), end, year);
  if (label.empty() || res.ec != std::errc() || res.ptr != end)
    throw ValidationError("trend_series: period label '" + label + "' is not an integer year");
  return year;
}

nlohmann::ordered_json trend_json(const TrendDescriptor& ftd) {
  nlohmann::ordered_json j;
  j["city"] = ftd.city;
  j["from"] = ftd.period_from;
  j["to"] = ftd.period_to;
  j["threshold"] = ftd.threshold;
  j["k"] = ftd.k;
  auto list = [](const std::map<std::size_t, double>& m) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& [bin, mag] : m) arr.push_back({{"bin", bin}, {"mag", mag}});
    return arr;
  };
  j["plus"] = list(ftd.plus);
  j["minus"] = list(ftd.minus);
  return j;
}

}  // namespace

TrendDescriptor compute_ftd(const CodewordVector& now, const CodewordVector& prev,
                            double threshold) {
  if (now.k() != prev.k())
    throw ValidationError("compute_ftd: codeword vectors differ in k (" + std::to_string(now.k()) +
                          " vs " + std::to_string(prev.k()) + ")");
  if (now.city != prev.city)
    throw ValidationError("compute_ftd: city mismatch ('" + now.city + "' vs '" + prev.city + "')");
  if (!(threshold >= 0.0) || !std::isfinite(threshold))
    throw ValidationError("compute_ftd: threshold must be a non-negative finite number");

  TrendDescriptor ftd;
  ftd.k = now.k();
  ftd.threshold = threshold;
  ftd.city = now.city;
  ftd.period_from = prev.period;
  ftd.period_to = now.period;
  for (std::size_t i = 0; i < ftd.k; ++i) {
    const double dv = now.bins[i] - prev.bins[i];
    if (dv > threshold)
      ftd.plus.emplace(i, std::abs(dv));
    else if (dv < -threshold)
      ftd.minus.emplace(i, std::abs(dv));
    else
      ftd.zero.insert(i);
  }
  return ftd;
}

TopTrends top_trends(const TrendDescriptor& ftd, std::size_t n) {
  return {top_n(ftd.plus, n), top_n(ftd.minus, n)};
}

std::vector<TrendDescriptor> trend_series(const std::vector<CodewordVector>& vectors,
                                          double threshold) {
  if (vectors.size() < 2)
    throw ValidationError("trend_series: need at least 2 periods, got " +
                          std::to_string(vectors.size()));
  std::vector<int> years;
  years.reserve(vectors.size());
  for (const auto& v : vectors) years.push_back(parse_year(v.period));
  for (std::size_t i = 1; i < vectors.size(); ++i) {
    if (years[i] != years[i - 1] + 1) {
      const std::string what = years[i] == years[i - 1]  ? "duplicated period "
                               : years[i] < years[i - 1] ? "periods out of order at "
                                                         : "gap between periods ";
      throw ValidationError("trend_series: " + what + std::to_string(years[i - 1]) + " -> " +
                            std::to_string(years[i]));
    }
  }
  std::vector<TrendDescriptor> out;
  out.reserve(vectors.size() - 1);
  for (std::size_t i = 1; i < vectors.size(); ++i)
    out.push_back(compute_ftd(vectors[i], vectors[i - 1], threshold));
  return out;
}

ExemplarSet nearest_exemplars(const Codebook& codebook, std::size_t bin, const Manifest& manifest,
                              const VectorBlock& block, std::size_t n) {
  if (bin >= codebook.k)
    throw ValidationError("nearest_exemplars: bin " + std::to_string(bin) + " >= k " +
                          std::to_string(codebook.k));
  struct Candidate {
    std::size_t order;
    double distance;
  };
  std::vector<Candidate> assigned;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& r = manifest.records[i];
    if (r.vector_index >= block.count())
      throw ValidationError("record '" + r.id + "' points outside the vector block");
    const auto [b, d] = assign_with_distance(codebook, block.row(r.vector_index));
    if (b == bin) assigned.push_back({i, d});
  }
  const auto take = std::min(n, assigned.size());
  std::partial_sort(assigned.begin(), assigned.begin() + static_cast<std::ptrdiff_t>(take),
                    assigned.end(), [](const Candidate& a, const Candidate& b) {
                      return a.distance < b.distance || (a.distance == b.distance && a.order < b.order);
                    });
  ExemplarSet out;
  out.bin = bin;
  for (std::size_t i = 0; i < take; ++i) {
    out.record_ids.push_back(manifest.records[assigned[i].order].id);
    out.distances.push_back(assigned[i].distance);
  }
  return out;
}

ExemplarSet subsample_exemplars(const ExemplarSet& exemplars, std::size_t m, std::uint64_t seed) {
  const auto n = exemplars.record_ids.size();
  if (m >= n) return exemplars;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < m; ++i)
    std::swap(idx[i], idx[i + static_cast<std::size_t>(uniform_index(rng, n - i))]);
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  ExemplarSet out;
  out.bin = exemplars.bin;
  for (auto i : idx) {
    out.record_ids.push_back(exemplars.record_ids[i]);
    out.distances.push_back(exemplars.distances[i]);
  }
  return out;
}

std::string trend_to_json(const TrendDescriptor& ftd, int indent) {
  return trend_json(ftd).dump(indent);
}

std::string trend_series_to_json(const std::vector<TrendDescriptor>& series) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& d : series) arr.push_back(trend_json(d));
  return arr.dump(2);
}

std::string trend_csv_header() { return "city,from,to,threshold,bin,direction,magnitude"; }

std::string trend_csv_rows(const TrendDescriptor& ftd) {
  std::string out;
  const auto prefix = ftd.city + "," + ftd.period_from + "," + ftd.period_to + "," +
                      format_number(ftd.threshold) + ",";
  for (const auto& [bin, mag] : ftd.plus)
    out += prefix + std::to_string(bin) + ",plus," + format_number(mag) + "\n";
  for (const auto& [bin, mag] : ftd.minus)
    out += prefix + std::to_string(bin) + ",minus," + format_number(mag) + "\n";
  return out;
}

std::string exemplars_to_json(const ExemplarSet& exemplars) {
  nlohmann::ordered_json j;
  j["bin"] = exemplars.bin;
  j["record_ids"] = exemplars.record_ids;
  j["distances"] = exemplars.distances;
  return j.dump();
}

}  // namespace fashiontrend
