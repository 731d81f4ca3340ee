#pragma once

// Independent reference computations shared by the unit and acceptance tests.
// Deliberately naive; none of them call into the library's numerics.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "fashiontrend/codebook.hpp"
#include "fashiontrend/corpus.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

// Central angle from the dot/cross product of unit vectors.
inline double great_circle_km(fashiontrend::GeoPoint a, fashiontrend::GeoPoint b) {
  auto unit = [](fashiontrend::GeoPoint p) {
    const double lat = p.latitude * M_PI / 180.0, lon = p.longitude * M_PI / 180.0;
    return std::array<double, 3>{std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
  };
  const auto u = unit(a), v = unit(b);
  const std::array<double, 3> cross = {u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2],
                                       u[0] * v[1] - u[1] * v[0]};
  const double s = std::sqrt(cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]);
  const double c = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
  return 6371.0 * std::atan2(s, c);
}

// Cyclic Jacobi rotations on a symmetric matrix; eigenvalues in descending order.
inline std::vector<double> jacobi_eigenvalues(Matrix a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

// n-1 denominator.
inline Matrix sample_covariance(const fashiontrend::VectorBlock& b) {
  const std::size_t n = b.count(), d = b.dim();
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += b.row(i)[j];
  for (auto& m : mean) m /= static_cast<double>(n);
  Matrix cov(d, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = 0; q < d; ++q) cov[p][q] += (b.row(i)[p] - mean[p]) * (b.row(i)[q] - mean[q]);
  for (auto& row : cov)
    for (auto& x : row) x /= static_cast<double>(n - 1);
  return cov;
}

inline double sq_distance(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

// First index of the minimum over a full scan.
inline std::size_t argmin_centroid(const fashiontrend::Codebook& cb, std::span<const float> v) {
  std::size_t best = 0;
  double best_d = INFINITY;
  for (std::size_t c = 0; c < cb.k; ++c) {
    const double d = sq_distance(v, cb.centroid(c));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace oracle
