#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gcnspatial/csv.hpp"
#include "gcnspatial/dataset.hpp"
#include "gcnspatial/errors.hpp"
#include "gcnspatial/gcn.hpp"
#include "gcnspatial/spatial_graph.hpp"
#include "gcnspatial/spectral_filters.hpp"
#include "gcnspatial/training.hpp"

namespace gcnspatial::io {

// ---------------------------------------------------------------- checkpoint

/// Model parameters plus the provenance needed to reproduce them.
struct Checkpoint {
  GcnModel model;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
};

inline constexpr const char* kCheckpointFormat = "gcnspatial-checkpoint";
inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline std::string matrix_json(const Eigen::MatrixXd& m) {
  std::string out = "[";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out += r == 0 ? "\n    [" : ",\n    [";
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ", ";
      out += csv::format_double(m(r, c));
    }
    out += "]";
  }
  out += "\n  ]";
  return out;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, std::size_t rows, std::size_t cols,
                                        const std::string& name) {
  if (!j.is_array() || j.size() != rows)
    throw DataError("checkpoint: '" + name + "' must have " + std::to_string(rows) + " rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || row.size() != cols)
      throw DataError("checkpoint: '" + name + "' row " + std::to_string(r) + " must have " +
                      std::to_string(cols) + " entries");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!row[c].is_number()) throw DataError("checkpoint: non-numeric entry in '" + name + "'");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c].get<double>();
    }
  }
  return m;
}

}  // namespace detail

/// JSON document; every parameter printed with 17 significant digits so the
/// round trip is bit-exact.
inline std::string checkpoint_json(const Checkpoint& ck) {
  ck.model.validate();
  std::string out = "{\n";
  out += "  \"format\": \"" + std::string(kCheckpointFormat) + "\",\n";
  out += "  \"version\": " + std::to_string(kCheckpointVersion) + ",\n";
  out += "  \"dims\": {\"input\": " + std::to_string(ck.model.input_dim()) +
         ", \"hidden\": " + std::to_string(ck.model.hidden_dim()) + ", \"output\": 1},\n";
  out += "  \"seed\": " + std::to_string(ck.seed) + ",\n";
  out += "  \"epochs\": " + std::to_string(ck.epochs) + ",\n";
  out += "  \"theta0\": " + detail::matrix_json(ck.model.theta0) + ",\n";
  out += "  \"theta1\": " + detail::matrix_json(ck.model.theta1) + "\n";
  out += "}\n";
  return out;
}

inline Checkpoint parse_checkpoint(const std::string& text, const std::string& origin = "checkpoint") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(origin + ": malformed checkpoint: " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat)
      throw DataError(origin + ": not a gcnspatial checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw DataError(origin + ": unsupported checkpoint version");
    const auto& dims = j.at("dims");
    const auto c = dims.at("input").get<std::size_t>();
    const auto h = dims.at("hidden").get<std::size_t>();
    if (dims.at("output").get<std::size_t>() != 1) throw DataError(origin + ": output dim must be 1");
    Checkpoint ck;
    ck.seed = j.at("seed").get<std::uint64_t>();
    ck.epochs = j.at("epochs").get<std::size_t>();
    ck.model.theta0 = detail::matrix_from_json(j.at("theta0"), c, h, "theta0");
    ck.model.theta1 = detail::matrix_from_json(j.at("theta1"), h, 1, "theta1");
    ck.model.validate();
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(origin + ": invalid checkpoint: " + e.what());
  }
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  csv::write_atomic(path, checkpoint_json(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(csv::read_file(path), "'" + path.string() + "'");
}

// ---------------------------------------------------------------- edge list

/// `src,dst,weight`, each undirected edge once with src < dst on ids.
inline std::string edge_list_csv(const SpatialGraph& g, const std::vector<std::string>& ids) {
  if (ids.size() != g.size()) throw DimensionError("edge list: id count differs from graph size");
  struct Row {
    const std::string* src;
    const std::string* dst;
    double w;
  };
  std::vector<Row> rows;
  rows.reserve(g.edge_count());
  for (const auto& e : g.edges()) {
    const std::string* a = &ids[e.src];
    const std::string* b = &ids[e.dst];
    if (*b < *a) std::swap(a, b);
    rows.push_back({a, b, e.weight});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
    return *x.src != *y.src ? *x.src < *y.src : *x.dst < *y.dst;
  });
  std::string out = "src,dst,weight\n";
  for (const auto& r : rows) out += *r.src + ',' + *r.dst + ',' + csv::format_double(r.w) + '\n';
  return out;
}

inline void save_edge_list(const std::filesystem::path& path, const SpatialGraph& g,
                           const std::vector<std::string>& ids) {
  csv::write_atomic(path, edge_list_csv(g, ids));
}

/// Reads an edge list against the node ids of a dataset.
inline SpatialGraph load_edge_list(const std::filesystem::path& path,
                                   const std::vector<std::string>& ids) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index.emplace(ids[i], i);
  const auto lines = csv::read_lines(path);
  if (lines.empty() || csv::trim(lines[0]) != "src,dst,weight")
    throw DataError("'" + path.string() + "': header must be src,dst,weight");
  std::vector<WeightedEdge> edges;
  edges.reserve(lines.size() - 1);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::string ctx = "'" + path.string() + "' row " + std::to_string(li);
    const auto f = csv::split(lines[li]);
    if (f.size() != 3) throw DataError(ctx + ": expected 3 fields");
    const std::string s = csv::trim(f[0]), d = csv::trim(f[1]);
    if (!(s < d)) throw DataError(ctx + ": src must sort before dst");
    const auto si = index.find(s), di = index.find(d);
    if (si == index.end()) throw DataError(ctx + ": unknown node id '" + s + "'");
    if (di == index.end()) throw DataError(ctx + ": unknown node id '" + d + "'");
    const double w = csv::parse_double(f[2], ctx);
    if (!(w > 0.0) || !std::isfinite(w)) throw DataError(ctx + ": weight must be positive and finite");
    edges.push_back({si->second, di->second, w});
  }
  return SpatialGraph::from_edges(ids.size(), edges);
}

// ---------------------------------------------------------------- predictions

struct PredictionRow {
  std::string id;
  double predicted = 0.0;
  std::optional<double> actual;
};

inline std::string predictions_csv(const std::vector<PredictionRow>& rows) {
  std::string out = "id,predicted_checkins,actual_checkins\n";
  for (const auto& r : rows) {
    out += r.id + ',' + csv::format_double(r.predicted) + ',';
    if (r.actual) out += csv::format_double(*r.actual);
    out += '\n';
  }
  return out;
}

inline std::vector<PredictionRow> load_predictions(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty() || csv::trim(lines[0]) != "id,predicted_checkins,actual_checkins")
    throw DataError("'" + path.string() + "': header must be id,predicted_checkins,actual_checkins");
  std::vector<PredictionRow> rows;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::string ctx = "'" + path.string() + "' row " + std::to_string(li);
    const auto f = csv::split(lines[li]);
    if (f.size() != 3) throw DataError(ctx + ": expected 3 fields");
    PredictionRow r;
    r.id = csv::trim(f[0]);
    r.predicted = csv::parse_double(f[1], ctx);
    if (!csv::trim(f[2]).empty()) r.actual = csv::parse_double(f[2], ctx);
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------- histories

inline std::string history_csv(const TrainHistory& h) {
  std::string out = "epoch,loss,abs_error\n";
  for (std::size_t e = 0; e < h.loss.size(); ++e)
    out += std::to_string(e + 1) + ',' + csv::format_double(h.loss[e]) + ',' +
           csv::format_double(h.abs_error[e]) + '\n';
  return out;
}

inline TrainHistory load_history(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty() || csv::trim(lines[0]) != "epoch,loss,abs_error")
    throw DataError("'" + path.string() + "': header must be epoch,loss,abs_error");
  TrainHistory h;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::string ctx = "'" + path.string() + "' row " + std::to_string(li);
    const auto f = csv::split(lines[li]);
    if (f.size() != 3) throw DataError(ctx + ": expected 3 fields");
    if (csv::parse_int(f[0], ctx) != static_cast<long long>(li))
      throw DataError(ctx + ": epochs must be consecutive from 1");
    h.loss.push_back(csv::parse_double(f[1], ctx));
    h.abs_error.push_back(csv::parse_double(f[2], ctx));
  }
  return h;
}

inline std::string envelope_csv(const RunEnvelope& env) {
  std::string out = "epoch,mean,std,min,max\n";
  for (std::size_t e = 0; e < env.epochs(); ++e)
    out += std::to_string(e + 1) + ',' + csv::format_double(env.mean[e]) + ',' +
           csv::format_double(env.std[e]) + ',' + csv::format_double(env.min[e]) + ',' +
           csv::format_double(env.max[e]) + '\n';
  return out;
}

inline RunEnvelope load_envelope(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty() || csv::trim(lines[0]) != "epoch,mean,std,min,max")
    throw DataError("'" + path.string() + "': header must be epoch,mean,std,min,max");
  RunEnvelope env;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::string ctx = "'" + path.string() + "' row " + std::to_string(li);
    const auto f = csv::split(lines[li]);
    if (f.size() != 5) throw DataError(ctx + ": expected 5 fields");
    if (csv::parse_int(f[0], ctx) != static_cast<long long>(li))
      throw DataError(ctx + ": epochs must be consecutive from 1");
    env.mean.push_back(csv::parse_double(f[1], ctx));
    env.std.push_back(csv::parse_double(f[2], ctx));
    env.min.push_back(csv::parse_double(f[3], ctx));
    env.max.push_back(csv::parse_double(f[4], ctx));
  }
  return env;
}

/// One eigenvalue per line, ascending.
inline std::string eigenvalues_csv(const SpectralBasis& basis) {
  std::string out = "index,eigenvalue\n";
  for (Eigen::Index i = 0; i < basis.eigenvalues.size(); ++i)
    out += std::to_string(i) + ',' + csv::format_double(basis.eigenvalues(i)) + '\n';
  return out;
}

// ---------------------------------------------------------------- key-value

/// Flat `key = value` document; `#` starts a comment line.
using KeyValues = std::map<std::string, std::string>;

inline KeyValues parse_key_values(const std::string& text, const std::string& origin) {
  KeyValues kv;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string line = csv::trim(std::string_view(text).substr(start, end - start));
    ++line_no;
    start = end + 1;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + " line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = csv::trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw ConfigError(origin + " line " + std::to_string(line_no) + ": empty key");
    kv[key] = csv::trim(std::string_view(line).substr(eq + 1));
  }
  return kv;
}

inline KeyValues load_key_values(const std::filesystem::path& path) {
  return parse_key_values(csv::read_file(path), "'" + path.string() + "'");
}

inline std::string key_values_text(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + '\n';
  return out;
}

inline std::string metrics_text(const Metrics& m, const std::string& prefix = "") {
  std::string out;
  out += prefix + "count = " + std::to_string(m.count) + '\n';
  out += prefix + "mae = " + csv::format_double(m.mae) + '\n';
  out += prefix + "l1_log = " + csv::format_double(m.l1_log) + '\n';
  out += prefix + "ratio_to_mean = " + csv::format_double(m.ratio) + '\n';
  out += prefix + "mean_actual = " + csv::format_double(m.mean_actual) + '\n';
  return out;
}

}  // namespace gcnspatial::io
