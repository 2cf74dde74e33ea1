#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gcnspatial/csv.hpp"
#include "gcnspatial/errors.hpp"
#include "gcnspatial/gcn.hpp"
#include "gcnspatial/point_set.hpp"

namespace gcnspatial {

/// Ordered category labels; a label's position is its channel index.
class TypeMap {
 public:
  TypeMap() = default;
  explicit TypeMap(std::vector<std::string> names) : names_(std::move(names)) {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (!index_.emplace(names_[i], i).second)
        throw ConfigError("duplicate type label '" + names_[i] + "'");
  }

  /// The nine functional POI categories.
  static TypeMap poi_default() {
    return TypeMap({"business", "entertainment", "hospital", "chinese_restaurant",
                    "non_chinese_restaurant", "hotel", "residential", "snack_bar",
                    "public_transport"});
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }

  std::optional<std::size_t> find(const std::string& label) const {
    const auto it = index_.find(label);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Points plus the encoded model inputs.
struct Dataset {
  PointSet points;
  Eigen::MatrixXd features;    // n x C, row-normalized one-hot
  Eigen::VectorXd targets_log; // ln(1 + count); empty when counts are absent
  std::vector<std::string> type_names;

  std::size_t size() const noexcept { return points.size(); }
  std::size_t channels() const noexcept { return static_cast<std::size_t>(features.cols()); }
  bool has_targets() const noexcept { return targets_log.size() > 0; }

  const std::vector<double>& counts() const {
    if (!points.intensity) throw DataError("dataset has no check-in counts");
    return *points.intensity;
  }
};

/// Scales every nonzero row to sum to 1.
inline Eigen::MatrixXd normalize_rows(Eigen::MatrixXd x) {
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double s = x.row(r).sum();
    if (s != 0.0) x.row(r) /= s;
  }
  return x;
}

/// One-hot rows scaled to unit row sum.
inline Eigen::MatrixXd encode_features(const std::vector<std::size_t>& types, std::size_t channels) {
  if (channels == 0) throw ConfigError("feature encoding needs at least one channel");
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(types.size()),
                                            static_cast<Eigen::Index>(channels));
  for (std::size_t i = 0; i < types.size(); ++i) {
    if (types[i] >= channels)
      throw DataError("type index " + std::to_string(types[i]) + " out of range for " +
                      std::to_string(channels) + " channels at row " + std::to_string(i));
    x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(types[i])) = 1.0;
  }
  return normalize_rows(std::move(x));
}

/// y = ln(1 + c).
inline Eigen::VectorXd log_transform(std::span<const double> counts) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (!(counts[i] >= 0.0) || !std::isfinite(counts[i]))
      throw DataError("log transform of negative or non-finite count at index " + std::to_string(i));
    y(static_cast<Eigen::Index>(i)) = std::log1p(counts[i]);
  }
  return y;
}

/// c = exp(y) - 1; with clamp, negative counts are reported as 0.
inline double inverse_log_transform(double y, bool clamp = true) {
  const double c = std::expm1(y);
  return clamp ? std::max(c, 0.0) : c;
}

inline Eigen::VectorXd inverse_log_transform(const Eigen::VectorXd& y, bool clamp = true) {
  Eigen::VectorXd c(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) c(i) = inverse_log_transform(y(i), clamp);
  return c;
}

/// Builds features and log targets from a validated point set.
inline Dataset make_dataset(PointSet points, std::vector<std::string> type_names) {
  points.validate();
  if (type_names.size() != points.type_count)
    throw DataError("type name count does not match point set type count");
  Dataset d;
  d.features = encode_features(points.type_label, points.type_count);
  if (points.intensity) d.targets_log = log_transform(*points.intensity);
  d.points = std::move(points);
  d.type_names = std::move(type_names);
  return d;
}

struct LoadOptions {
  /// Keep rows whose count is at least this value; rows without counts are kept.
  std::optional<double> min_checkins;
};

/// Parses `id,x,y,type,checkins` (checkins optional) against a type map.
inline Dataset load_dataset(const std::filesystem::path& path, const TypeMap& types,
                            const LoadOptions& opt = {}) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) throw DataError("'" + path.string() + "': missing header");
  const auto header = csv::split(lines[0]);
  std::vector<std::string> cols;
  for (const auto& h : header) cols.push_back(csv::trim(h));
  const bool with_counts = cols == std::vector<std::string>{"id", "x", "y", "type", "checkins"};
  if (!with_counts && cols != std::vector<std::string>{"id", "x", "y", "type"})
    throw DataError("'" + path.string() + "': header must be id,x,y,type[,checkins], got '" +
                    lines[0] + "'");

  PointSet ps;
  ps.type_count = types.size();
  if (with_counts) ps.intensity.emplace();
  std::vector<std::string> unknown;
  std::unordered_set<std::string> seen;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::string ctx = "'" + path.string() + "' row " + std::to_string(li);
    const auto f = csv::split(lines[li]);
    if (f.size() != cols.size())
      throw DataError(ctx + ": expected " + std::to_string(cols.size()) + " fields, got " +
                      std::to_string(f.size()));
    const std::string id = csv::trim(f[0]);
    if (id.empty()) throw DataError(ctx + ": empty id");
    if (!seen.insert(id).second) throw DataError(ctx + ": duplicate id '" + id + "'");
    const Point p{csv::parse_double(f[1], ctx), csv::parse_double(f[2], ctx)};
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DataError(ctx + ": non-finite coordinate");
    const std::string label = csv::trim(f[3]);
    const auto type = types.find(label);
    if (!type) {
      unknown.push_back(std::to_string(li) + " ('" + label + "')");
      continue;
    }
    double count = 0.0;
    if (with_counts) {
      count = csv::parse_double(f[4], ctx);
      if (!(count >= 0.0) || !std::isfinite(count))
        throw DataError(ctx + ": negative or non-finite checkins " + csv::trim(f[4]));
      if (opt.min_checkins && count < *opt.min_checkins) continue;
    }
    ps.ids.push_back(id);
    ps.coords.push_back(p);
    ps.type_label.push_back(*type);
    if (with_counts) ps.intensity->push_back(count);
  }
  if (!unknown.empty()) {
    std::string msg = "'" + path.string() + "': unknown type labels at rows";
    for (const auto& u : unknown) msg += " " + u;
    throw DataError(msg);
  }
  if (ps.size() == 0) throw DataError("'" + path.string() + "': no rows left after filtering");
  return make_dataset(std::move(ps), types.names());
}

/// Writes the dataset schema; counts written only when present.
inline std::string dataset_csv(const PointSet& ps, const std::vector<std::string>& type_names) {
  std::string out = ps.intensity ? "id,x,y,type,checkins\n" : "id,x,y,type\n";
  for (std::size_t i = 0; i < ps.size(); ++i) {
    out += ps.ids[i] + ',' + csv::format_double(ps.coords[i].x) + ',' +
           csv::format_double(ps.coords[i].y) + ',' + type_names.at(ps.type_label[i]);
    if (ps.intensity) out += ',' + csv::format_double((*ps.intensity)[i]);
    out += '\n';
  }
  return out;
}

/// Disjoint train/validation partition of 0..n-1, both sorted.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// |train| = round(fraction * n), drawn by a seeded shuffle.
inline Split split(std::size_t n, double fraction, Rng& rng) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
  const auto m = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (m == 0)
    throw ConfigError("train fraction " + std::to_string(fraction) + " of " + std::to_string(n) +
                      " nodes selects no training node");
  if (m >= n) throw ConfigError("train fraction leaves no validation node");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  Split s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(m));
  s.validation.assign(perm.begin() + static_cast<std::ptrdiff_t>(m), perm.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  return s;
}

}  // namespace gcnspatial
