#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "gcnspatial/errors.hpp"
#include "gcnspatial/gcn.hpp"
#include "gcnspatial/point_set.hpp"

namespace gcnspatial {

/// Parameters of the clustered, heavy-tailed check-in generator.
struct GeneratorConfig {
  std::size_t points = 2000;
  std::size_t clusters = 12;
  std::size_t types = 9;
  double width = 12000.0;   // meters
  double height = 12000.0;  // meters
  double scatter_sd = 700.0;
  /// Dirichlet concentration of each cluster's type mixture; small values
  /// give clusters dominated by a few types.
  double mixture_concentration = 0.2;
  double base_log = 1.5;
  /// Bump amplitude per unit of type attraction.
  double bump_amplitude = 4.0;
  double bump_width = 1200.0;
  double type_offset_scale = 0.3;
  double noise_sd = 0.35;
  std::uint64_t seed = 7;

  void validate() const {
    if (points == 0) throw ConfigError("generator needs at least one point");
    if (clusters == 0) throw ConfigError("generator needs at least one cluster");
    if (types == 0) throw ConfigError("generator needs at least one type");
    if (!(width > 0.0) || !(height > 0.0)) throw ConfigError("generator box must have positive size");
    if (!(scatter_sd >= 0.0) || !(mixture_concentration > 0.0) || !(bump_width > 0.0) ||
        !(noise_sd >= 0.0) || !(bump_amplitude >= 0.0) || !(type_offset_scale >= 0.0))
      throw ConfigError("generator scale parameters must be nonnegative (concentration and "
                        "bump width positive)");
  }
};

struct Bump {
  Point center;
  double amplitude = 0.0;
  double width = 1.0;
};

/// Ground truth behind a generated point set.
struct FieldDescription {
  double base_log = 0.0;
  std::vector<Point> cluster_centers;
  std::vector<std::vector<double>> cluster_mixtures;  // clusters x types
  std::vector<Bump> bumps;
  std::vector<double> type_offsets;
  /// Per-type pull on a cluster's bump amplitude, in [-1, 1].
  std::vector<double> type_attraction;
  double noise_sd = 0.0;

  /// Noise-free log intensity at a location for a type.
  double log_intensity(const Point& p, std::size_t type) const {
    double v = base_log + type_offsets.at(type);
    for (const auto& b : bumps) {
      const double dx = p.x - b.center.x;
      const double dy = p.y - b.center.y;
      v += b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * b.width * b.width));
    }
    return v;
  }
};

struct SyntheticData {
  PointSet points;
  std::vector<std::string> type_names;
  FieldDescription field;
};

/// Generic labels t0..t{T-1}; the nine-type case uses the POI category names.
inline std::vector<std::string> synthetic_type_names(std::size_t types) {
  if (types == 9)
    return {"business", "entertainment", "hospital", "chinese_restaurant",
            "non_chinese_restaurant", "hotel", "residential", "snack_bar", "public_transport"};
  std::vector<std::string> names;
  for (std::size_t t = 0; t < types; ++t) names.push_back("t" + std::to_string(t));
  return names;
}

/// Clustered points with spatially autocorrelated, heavy-tailed counts.
///
/// Steps: cluster centers uniform in the box; points scattered around a
/// uniformly chosen center; type drawn from that cluster's mixture; log
/// intensity = base + bump field + type offset + Gaussian noise; count =
/// round(exp(log intensity)). Every cluster carries a Gaussian bump whose
/// amplitude follows its type mixture, so hot spots are type-specific districts.
inline SyntheticData synth_generate(const GeneratorConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::gamma_distribution<double> gamma(cfg.mixture_concentration, 1.0);

  SyntheticData out;
  FieldDescription& f = out.field;
  f.base_log = cfg.base_log;
  f.noise_sd = cfg.noise_sd;
  for (std::size_t c = 0; c < cfg.clusters; ++c)
    f.cluster_centers.push_back({unit(rng) * cfg.width, unit(rng) * cfg.height});
  for (std::size_t c = 0; c < cfg.clusters; ++c) {
    std::vector<double> w(cfg.types);
    double total = 0.0;
    for (auto& x : w) total += (x = gamma(rng));
    if (!(total > 0.0)) {
      w.assign(cfg.types, 1.0);
      total = static_cast<double>(cfg.types);
    }
    for (auto& x : w) x /= total;
    f.cluster_mixtures.push_back(std::move(w));
  }
  for (std::size_t t = 0; t < cfg.types; ++t)
    f.type_offsets.push_back(cfg.types == 1 ? 0.0 : cfg.type_offset_scale * (2.0 * unit(rng) - 1.0));
  for (std::size_t t = 0; t < cfg.types; ++t) f.type_attraction.push_back(2.0 * unit(rng) - 1.0);
  for (std::size_t c = 0; c < cfg.clusters; ++c) {
    double pull = 0.0;
    for (std::size_t t = 0; t < cfg.types; ++t) pull += f.cluster_mixtures[c][t] * f.type_attraction[t];
    f.bumps.push_back({f.cluster_centers[c], cfg.bump_amplitude * pull, cfg.bump_width});
  }

  PointSet& ps = out.points;
  ps.type_count = cfg.types;
  ps.intensity.emplace();
  const int width = static_cast<int>(std::to_string(cfg.points).size());
  for (std::size_t i = 0; i < cfg.points; ++i) {
    const auto c = std::min(static_cast<std::size_t>(unit(rng) * static_cast<double>(cfg.clusters)),
                            cfg.clusters - 1);
    const Point p{f.cluster_centers[c].x + cfg.scatter_sd * normal(rng),
                  f.cluster_centers[c].y + cfg.scatter_sd * normal(rng)};
    const double u = unit(rng);
    std::size_t type = cfg.types - 1;
    double acc = 0.0;
    for (std::size_t t = 0; t < cfg.types; ++t) {
      acc += f.cluster_mixtures[c][t];
      if (u < acc) {
        type = t;
        break;
      }
    }
    const double log_i = f.log_intensity(p, type) + cfg.noise_sd * normal(rng);
    char id[32];
    std::snprintf(id, sizeof id, "p%0*zu", width, i);
    ps.ids.emplace_back(id);
    ps.coords.push_back(p);
    ps.type_label.push_back(type);
    ps.intensity->push_back(std::round(std::exp(log_i)));
  }
  out.type_names = synthetic_type_names(cfg.types);
  return out;
}

}  // namespace gcnspatial
