#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gcnspatial/csv.hpp"
#include "gcnspatial/errors.hpp"
#include "gcnspatial/io.hpp"
#include "gcnspatial/point_set.hpp"

namespace gcnspatial {

/// Regular grid of nonnegative intensities. Row 0 is the southernmost row
/// (smallest y); values are row-major.
struct RasterGrid {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double cell_size = 1.0;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;

  double& at(std::size_t col, std::size_t row) { return values[row * width + col]; }
  double at(std::size_t col, std::size_t row) const { return values[row * width + col]; }

  Point cell_center(std::size_t col, std::size_t row) const {
    return {origin_x + (static_cast<double>(col) + 0.5) * cell_size,
            origin_y + (static_cast<double>(row) + 0.5) * cell_size};
  }
};

/// Gaussian kernel surface: cell value = sum_i v_i exp(-d^2 / (2 h^2)) at the
/// cell center, over the bounding box padded by 2h.
inline RasterGrid raster_heatmap(std::span<const Point> points, std::span<const double> values,
                                 double cell_size, double bandwidth) {
  if (points.empty()) throw DataError("heatmap of an empty point set");
  if (points.size() != values.size()) throw DimensionError("heatmap: one value per point required");
  if (!(cell_size > 0.0) || !(bandwidth > 0.0))
    throw ConfigError("heatmap cell size and bandwidth must be positive");

  double min_x = points[0].x, max_x = points[0].x, min_y = points[0].y, max_y = points[0].y;
  for (const auto& p : points) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const double pad = 2.0 * bandwidth;
  RasterGrid g;
  g.cell_size = cell_size;
  g.origin_x = min_x - pad;
  g.origin_y = min_y - pad;
  g.width = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((max_x + pad - g.origin_x) / cell_size)));
  g.height = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((max_y + pad - g.origin_y) / cell_size)));
  g.values.assign(g.width * g.height, 0.0);

  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  for (std::size_t row = 0; row < g.height; ++row)
    for (std::size_t col = 0; col < g.width; ++col) {
      const Point c = g.cell_center(col, row);
      double sum = 0.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        const double dx = c.x - points[i].x;
        const double dy = c.y - points[i].y;
        sum += values[i] * std::exp(-(dx * dx + dy * dy) * inv);
      }
      g.at(col, row) = sum;
    }
  return g;
}

/// Linear map from values to gray levels 0..255.
struct GrayScale {
  double min = 0.0;
  double max = 0.0;

  static GrayScale of(const RasterGrid& g) {
    const auto [lo, hi] = std::minmax_element(g.values.begin(), g.values.end());
    return {*lo, *hi};
  }

  std::uint8_t level(double v) const {
    if (!(max > min)) return 0;
    const double t = std::clamp((v - min) / (max - min), 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(255.0 * t));
  }
};

/// CSV grid, one line per raster row, south row first.
inline std::string raster_csv(const RasterGrid& g) {
  std::string out;
  for (std::size_t row = 0; row < g.height; ++row) {
    for (std::size_t col = 0; col < g.width; ++col) {
      if (col) out += ',';
      out += csv::format_double(g.at(col, row));
    }
    out += '\n';
  }
  return out;
}

/// Binary 8-bit PGM with north up (the last raster row is written first).
inline std::string raster_pgm(const RasterGrid& g, const GrayScale& scale) {
  std::string out = "P5\n" + std::to_string(g.width) + " " + std::to_string(g.height) + "\n255\n";
  out.reserve(out.size() + g.width * g.height);
  for (std::size_t r = g.height; r-- > 0;)
    for (std::size_t col = 0; col < g.width; ++col) out += static_cast<char>(scale.level(g.at(col, r)));
  return out;
}

inline io::KeyValues raster_metadata(const RasterGrid& g, const GrayScale& scale) {
  return {{"origin_x", csv::format_double(g.origin_x)},
          {"origin_y", csv::format_double(g.origin_y)},
          {"cell_size", csv::format_double(g.cell_size)},
          {"width", std::to_string(g.width)},
          {"height", std::to_string(g.height)},
          {"scale_min", csv::format_double(scale.min)},
          {"scale_max", csv::format_double(scale.max)},
          {"csv_row_order", "south_to_north"},
          {"pgm_row_order", "north_to_south"}};
}

inline GrayScale scale_from_metadata(const io::KeyValues& kv, const std::string& origin) {
  auto get = [&](const char* k) {
    const auto it = kv.find(k);
    if (it == kv.end()) throw ConfigError(origin + ": missing '" + k + "'");
    return csv::parse_double(it->second, origin);
  };
  return {get("scale_min"), get("scale_max")};
}

/// Writes `<prefix>.csv`, `<prefix>.pgm` and `<prefix>.meta`.
inline void save_raster(const std::filesystem::path& prefix, const RasterGrid& g,
                        const GrayScale& scale) {
  auto with = [&](const char* ext) {
    std::filesystem::path p = prefix;
    p += ext;
    return p;
  };
  csv::write_atomic(with(".csv"), raster_csv(g));
  csv::write_atomic(with(".pgm"), raster_pgm(g, scale));
  csv::write_atomic(with(".meta"), io::key_values_text(raster_metadata(g, scale)));
}

/// Reads back a raster written by save_raster.
inline RasterGrid load_raster(const std::filesystem::path& prefix) {
  std::filesystem::path meta = prefix, grid = prefix;
  meta += ".meta";
  grid += ".csv";
  const auto kv = io::load_key_values(meta);
  auto num = [&](const char* k) {
    const auto it = kv.find(k);
    if (it == kv.end()) throw DataError("'" + meta.string() + "': missing '" + k + "'");
    return csv::parse_double(it->second, meta.string());
  };
  RasterGrid g;
  g.origin_x = num("origin_x");
  g.origin_y = num("origin_y");
  g.cell_size = num("cell_size");
  g.width = static_cast<std::size_t>(num("width"));
  g.height = static_cast<std::size_t>(num("height"));
  const auto lines = csv::read_lines(grid);
  if (lines.size() != g.height) throw DataError("'" + grid.string() + "': row count mismatch");
  for (const auto& line : lines) {
    const auto f = csv::split(line);
    if (f.size() != g.width) throw DataError("'" + grid.string() + "': column count mismatch");
    for (const auto& v : f) g.values.push_back(csv::parse_double(v, grid.string()));
  }
  return g;
}

}  // namespace gcnspatial
