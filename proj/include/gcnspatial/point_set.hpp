#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "gcnspatial/errors.hpp"

namespace gcnspatial {

/// Planar coordinate in meters (pre-projected, no geodesy).
struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double euclidean(const Point& a, const Point& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

/// Locations with a categorical type and an optional observed intensity.
///
/// `intensity` is absent for prediction-only inputs. `type_count` is the
/// number of categories T; every label must be below it.
struct PointSet {
  std::vector<std::string> ids;
  std::vector<Point> coords;
  std::vector<std::size_t> type_label;
  std::size_t type_count = 0;
  std::optional<std::vector<double>> intensity;

  std::size_t size() const noexcept { return coords.size(); }
  bool has_intensity() const noexcept { return intensity.has_value(); }

  /// Throws DataError when any invariant is broken.
  void validate() const {
    const std::size_t n = coords.size();
    if (n == 0) throw DataError("point set is empty");
    if (ids.size() != n || type_label.size() != n)
      throw DataError("point set columns have different lengths");
    if (intensity && intensity->size() != n)
      throw DataError("intensity column length differs from coordinate count");
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(coords[i].x) || !std::isfinite(coords[i].y))
        throw DataError("non-finite coordinate at point '" + ids[i] + "'");
      if (type_label[i] >= type_count)
        throw DataError("type label out of range at point '" + ids[i] + "'");
      if (intensity) {
        const double c = (*intensity)[i];
        if (!std::isfinite(c) || c < 0.0)
          throw DataError("negative or non-finite intensity at point '" + ids[i] + "'");
      }
    }
  }

  /// Subset in the given order.
  PointSet select(const std::vector<std::size_t>& rows) const {
    PointSet out;
    out.type_count = type_count;
    out.ids.reserve(rows.size());
    out.coords.reserve(rows.size());
    out.type_label.reserve(rows.size());
    if (intensity) out.intensity.emplace();
    for (std::size_t r : rows) {
      out.ids.push_back(ids.at(r));
      out.coords.push_back(coords.at(r));
      out.type_label.push_back(type_label.at(r));
      if (intensity) out.intensity->push_back(intensity->at(r));
    }
    return out;
  }
};

}  // namespace gcnspatial
