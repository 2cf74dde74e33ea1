#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gcnspatial/errors.hpp"

namespace gcnspatial {

/// Histogram plus the first four sample moments.
///
/// Variance is unbiased (n - 1). Skewness is the moment ratio m3 / m2^{3/2}
/// and kurtosis is m4 / m2^2 - 3, both from central moments with divisor n;
/// they are empty when the variance is zero.
struct DistributionStats {
  std::vector<double> bin_edges;  // bins + 1 edges
  std::vector<std::size_t> bin_counts;
  bool log_bins = false;
  std::size_t count = 0;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  std::optional<double> skewness;
  std::optional<double> excess_kurtosis;
};

inline DistributionStats distribution_stats(std::span<const double> values, std::size_t bins,
                                            bool log_x = false) {
  if (values.empty()) throw DataError("distribution statistics of an empty sample");
  if (bins == 0) throw ConfigError("histogram needs at least one bin");
  for (double v : values) {
    if (!std::isfinite(v)) throw DataError("distribution statistics: non-finite value");
    if (log_x && !(v > 0.0))
      throw DataError("logarithmic bins need strictly positive values");
  }

  DistributionStats st;
  st.count = values.size();
  st.log_bins = log_x;

  // streaming central moments (Terriberry's update)
  double mean = 0.0, m2 = 0.0, m3 = 0.0, m4 = 0.0;
  double n = 0.0;
  for (double x : values) {
    const double n1 = n;
    n += 1.0;
    const double delta = x - mean;
    const double delta_n = delta / n;
    const double delta_n2 = delta_n * delta_n;
    const double term1 = delta * delta_n * n1;
    mean += delta_n;
    m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * m2 - 4.0 * delta_n * m3;
    m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * m2;
    m2 += term1;
  }
  st.mean = mean;
  st.variance = n > 1.0 ? m2 / (n - 1.0) : 0.0;
  if (m2 > 0.0) {
    st.skewness = std::sqrt(n) * m3 / std::pow(m2, 1.5);
    st.excess_kurtosis = n * m4 / (m2 * m2) - 3.0;
  }

  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  st.min = *lo_it;
  st.max = *hi_it;

  auto to_axis = [&](double v) { return log_x ? std::log(v) : v; };
  auto from_axis = [&](double a) { return log_x ? std::exp(a) : a; };
  double lo = to_axis(st.min);
  double hi = to_axis(st.max);
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / static_cast<double>(bins);
  st.bin_edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b)
    st.bin_edges[b] = from_axis(lo + width * static_cast<double>(b));
  st.bin_edges.front() = from_axis(lo);
  st.bin_edges.back() = from_axis(hi);
  st.bin_counts.assign(bins, 0);
  for (double v : values) {
    auto b = static_cast<std::size_t>((to_axis(v) - lo) / width);
    st.bin_counts[std::min(b, bins - 1)]++;
  }
  return st;
}

}  // namespace gcnspatial
