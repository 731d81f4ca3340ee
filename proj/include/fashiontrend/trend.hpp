#pragma once

// Fashion trend descriptor: thresholded difference of two consecutive codeword
// vectors of one city, split into rising (plus), falling (minus) and unchanged
// (zero) bins. Also nearest-exemplar lookup for illustrating a bin.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fashiontrend/codebook.hpp"
#include "fashiontrend/corpus.hpp"

namespace fashiontrend {

inline constexpr double kDefaultTrendThreshold = 0.01;

struct TrendDescriptor {
  std::size_t k = 0;
  double threshold = kDefaultTrendThreshold;
  std::map<std::size_t, double> plus;   // bin -> |dv|, dv > threshold
  std::map<std::size_t, double> minus;  // bin -> |dv|, dv < -threshold
  std::set<std::size_t> zero;
  std::string period_from;
  std::string period_to;
  std::string city;
};

/// dv = now - prev per bin. |dv| == threshold lands in zero.
/// Throws ValidationError on mismatched k or city, or a negative threshold.
TrendDescriptor compute_ftd(const CodewordVector& now, const CodewordVector& prev, double threshold);

using RankedBins = std::vector<std::pair<std::size_t, double>>;

struct TopTrends {
  RankedBins rising;
  RankedBins falling;
};

/// Largest-magnitude n of plus and of minus; ties by lower bin index.
TopTrends top_trends(const TrendDescriptor& ftd, std::size_t n);

/// One descriptor per adjacent pair. Period labels must be integer years,
/// strictly consecutive, and every vector must share city and k.
std::vector<TrendDescriptor> trend_series(const std::vector<CodewordVector>& vectors,
                                          double threshold);

struct ExemplarSet {
  std::size_t bin = 0;
  std::vector<std::string> record_ids;
  std::vector<double> distances;  // non-decreasing
};

/// The n records assigned to `bin` that sit closest to its centroid.
/// Equal distances keep manifest order.
ExemplarSet nearest_exemplars(const Codebook& codebook, std::size_t bin, const Manifest& manifest,
                              const VectorBlock& block, std::size_t n);

/// Random subset of at most m exemplars, kept in distance order. For display.
ExemplarSet subsample_exemplars(const ExemplarSet& exemplars, std::size_t m, std::uint64_t seed);

std::string trend_to_json(const TrendDescriptor& ftd, int indent = -1);
std::string trend_series_to_json(const std::vector<TrendDescriptor>& series);

/// Long format: city,from,to,threshold,bin,direction,magnitude (plus/minus rows only).
std::string trend_csv_header();
std::string trend_csv_rows(const TrendDescriptor& ftd);

std::string exemplars_to_json(const ExemplarSet& exemplars);

}  // namespace fashiontrend
