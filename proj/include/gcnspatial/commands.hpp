#pragma once

// Command implementations behind the gcnspatial CLI. Each command reads its
// inputs, writes its artifacts atomically and returns a human-readable
// summary; failures surface as the library's exception types.

#include <cstddef>
#include <cstdint>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "gcnspatial/csv.hpp"
#include "gcnspatial/dataset.hpp"
#include "gcnspatial/errors.hpp"
#include "gcnspatial/gcn.hpp"
#include "gcnspatial/io.hpp"
#include "gcnspatial/raster.hpp"
#include "gcnspatial/spatial_graph.hpp"
#include "gcnspatial/spectral_filters.hpp"
#include "gcnspatial/stats.hpp"
#include "gcnspatial/synth.hpp"
#include "gcnspatial/training.hpp"

namespace gcnspatial::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kOk = 0,
  kIoFailure = 1,
  kConfigError = 2,
  kDataError = 3,
  kDivergence = 4,
  kInternalError = 5,
};

/// Maps the exception currently being handled to an exit code.
inline int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const DivergenceError&) {
    return kDivergence;
  } catch (const ConfigError&) {
    return kConfigError;
  } catch (const IoError&) {
    return kIoFailure;
  } catch (const DataError&) {
    return kDataError;
  } catch (const DimensionError&) {
    return kDataError;
  } catch (const fs::filesystem_error&) {
    return kIoFailure;
  } catch (...) {
    return kInternalError;
  }
}

/// Verbosity from GCNSPATIAL_LOG: quiet, info (default) or debug.
enum class LogLevel { quiet, info, debug };

inline LogLevel log_level() {
  const char* v = std::getenv("GCNSPATIAL_LOG");
  if (!v) return LogLevel::info;
  const std::string s(v);
  if (s == "quiet" || s == "0") return LogLevel::quiet;
  if (s == "debug" || s == "2") return LogLevel::debug;
  return LogLevel::info;
}

inline void log(LogLevel level, const std::string& msg) {
  if (level != LogLevel::quiet && static_cast<int>(level) <= static_cast<int>(log_level()))
    std::cerr << msg << '\n';
}

// ---------------------------------------------------------------- config

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
  try {
    return csv::parse_double(v, key);
  } catch (const DataError&) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
  }
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  const std::string t = csv::trim(v);
  if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError("config key '" + key + "': '" + v + "' is not a nonnegative integer");
  return std::stoull(t);
}

inline std::vector<std::string> to_list(const std::string& v) {
  std::vector<std::string> out;
  for (const auto& f : csv::split(v)) {
    const auto t = csv::trim(f);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

template <typename Target>
using Setter = std::function<void(Target&, const std::string&, const std::string&)>;

template <typename Target>
void apply(Target& target, const io::KeyValues& kv, const std::map<std::string, Setter<Target>>& table,
           const std::string& origin) {
  for (const auto& [k, v] : kv) {
    const auto it = table.find(k);
    if (it == table.end()) throw ConfigError(origin + ": unknown key '" + k + "'");
    it->second(target, k, v);
  }
}

}  // namespace detail

inline const std::map<std::string, detail::Setter<GeneratorConfig>>& generator_keys() {
  using detail::to_double;
  using detail::to_uint;
  static const std::map<std::string, detail::Setter<GeneratorConfig>> table = {
      {"points", [](auto& c, auto& k, auto& v) { c.points = to_uint(k, v); }},
      {"clusters", [](auto& c, auto& k, auto& v) { c.clusters = to_uint(k, v); }},
      {"types", [](auto& c, auto& k, auto& v) { c.types = to_uint(k, v); }},
      {"width", [](auto& c, auto& k, auto& v) { c.width = to_double(k, v); }},
      {"height", [](auto& c, auto& k, auto& v) { c.height = to_double(k, v); }},
      {"scatter_sd", [](auto& c, auto& k, auto& v) { c.scatter_sd = to_double(k, v); }},
      {"mixture_concentration", [](auto& c, auto& k, auto& v) { c.mixture_concentration = to_double(k, v); }},
      {"base_log", [](auto& c, auto& k, auto& v) { c.base_log = to_double(k, v); }},
      {"bump_amplitude", [](auto& c, auto& k, auto& v) { c.bump_amplitude = to_double(k, v); }},
      {"bump_width", [](auto& c, auto& k, auto& v) { c.bump_width = to_double(k, v); }},
      {"type_offset_scale", [](auto& c, auto& k, auto& v) { c.type_offset_scale = to_double(k, v); }},
      {"noise_sd", [](auto& c, auto& k, auto& v) { c.noise_sd = to_double(k, v); }},
      {"seed", [](auto& c, auto& k, auto& v) { c.seed = to_uint(k, v); }},
  };
  return table;
}

/// Everything train, runs and predict read from a config file.
struct CliConfig {
  TrainConfig train;
  fs::path dataset;
  std::optional<fs::path> graph;  // edge list; built from the scheme when absent
  fs::path checkpoint = "model.json";
  fs::path history = "history.csv";
  fs::path out_dir = "runs";
  std::string scheme = "binary";
  std::optional<double> scheme_param;  // defaults to buffer_radius for binary
  std::vector<std::string> types = TypeMap::poi_default().names();
  std::optional<double> min_checkins;
  double cell_size = 200.0;
  double bandwidth = 400.0;
  std::size_t threads = 0;
};

inline const std::map<std::string, detail::Setter<CliConfig>>& cli_keys() {
  using detail::to_double;
  using detail::to_uint;
  static const std::map<std::string, detail::Setter<CliConfig>> table = {
      {"epochs", [](auto& c, auto& k, auto& v) { c.train.epochs = to_uint(k, v); }},
      {"learning_rate", [](auto& c, auto& k, auto& v) { c.train.learning_rate = to_double(k, v); }},
      {"l2_weight", [](auto& c, auto& k, auto& v) { c.train.l2_weight = to_double(k, v); }},
      {"dropout", [](auto& c, auto& k, auto& v) { c.train.dropout = to_double(k, v); }},
      {"hidden_units", [](auto& c, auto& k, auto& v) { c.train.hidden_units = to_uint(k, v); }},
      {"train_fraction", [](auto& c, auto& k, auto& v) { c.train.train_fraction = to_double(k, v); }},
      {"buffer_radius", [](auto& c, auto& k, auto& v) { c.train.buffer_radius = to_double(k, v); }},
      {"seed", [](auto& c, auto& k, auto& v) { c.train.seed = to_uint(k, v); }},
      {"beta1", [](auto& c, auto& k, auto& v) { c.train.beta1 = to_double(k, v); }},
      {"beta2", [](auto& c, auto& k, auto& v) { c.train.beta2 = to_double(k, v); }},
      {"epsilon", [](auto& c, auto& k, auto& v) { c.train.epsilon = to_double(k, v); }},
      {"dataset", [](auto& c, auto&, auto& v) { c.dataset = v; }},
      {"graph", [](auto& c, auto&, auto& v) {
         if (v.empty()) c.graph.reset(); else c.graph = fs::path(v);
       }},
      {"checkpoint", [](auto& c, auto&, auto& v) { c.checkpoint = v; }},
      {"history", [](auto& c, auto&, auto& v) { c.history = v; }},
      {"out_dir", [](auto& c, auto&, auto& v) { c.out_dir = v; }},
      {"scheme", [](auto& c, auto&, auto& v) { c.scheme = v; }},
      {"scheme_param", [](auto& c, auto& k, auto& v) { c.scheme_param = to_double(k, v); }},
      {"types", [](auto& c, auto&, auto& v) { c.types = detail::to_list(v); }},
      {"min_checkins", [](auto& c, auto& k, auto& v) { c.min_checkins = to_double(k, v); }},
      {"cell_size", [](auto& c, auto& k, auto& v) { c.cell_size = to_double(k, v); }},
      {"bandwidth", [](auto& c, auto& k, auto& v) { c.bandwidth = to_double(k, v); }},
      {"threads", [](auto& c, auto& k, auto& v) { c.threads = to_uint(k, v); }},
  };
  return table;
}

/// Config file first, then flag overrides; relative paths in the file are
/// resolved against the file's directory.
inline CliConfig load_cli_config(const std::optional<fs::path>& file, const io::KeyValues& overrides) {
  CliConfig c;
  if (file) {
    if (!fs::exists(*file)) throw ConfigError("config file does not exist: " + file->string());
    io::KeyValues kv = io::load_key_values(*file);
    const fs::path base = file->parent_path();
    for (const char* key : {"dataset", "graph", "checkpoint", "history", "out_dir"}) {
      const auto it = kv.find(key);
      if (it != kv.end() && !it->second.empty() && fs::path(it->second).is_relative())
        it->second = (base / it->second).lexically_normal().string();
    }
    detail::apply(c, kv, cli_keys(), "'" + file->string() + "'");
  }
  detail::apply(c, overrides, cli_keys(), "command line");
  c.train.validate();
  return c;
}

inline GeneratorConfig load_generator_config(const std::optional<fs::path>& file,
                                             const io::KeyValues& overrides) {
  GeneratorConfig g;
  if (file) {
    if (!fs::exists(*file)) throw ConfigError("generator spec does not exist: " + file->string());
    detail::apply(g, io::load_key_values(*file), generator_keys(), "'" + file->string() + "'");
  }
  detail::apply(g, overrides, generator_keys(), "command line");
  g.validate();
  return g;
}

inline void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw ConfigError(what + " path is not set");
  if (!fs::exists(p)) throw ConfigError(what + " path does not exist: " + p.string());
}

// ---------------------------------------------------------------- helpers

/// Parses a scheme name and its parameter (radius, exponent, rate or k).
inline DecayScheme parse_scheme(const std::string& name, std::optional<double> param,
                                double default_radius) {
  if (name == "binary") return BinaryScheme{param.value_or(default_radius)};
  if (!param) throw ConfigError("scheme '" + name + "' needs a parameter");
  if (name == "power") return PowerScheme{*param};
  if (name == "exponential") return ExponentialScheme{*param};
  if (name == "gaussian") {
    if (!(*param >= 1.0) || *param != std::floor(*param))
      throw ConfigError("gaussian scheme needs a positive integer k");
    return GaussianScheme{static_cast<std::size_t>(*param)};
  }
  throw ConfigError("unknown weighting scheme '" + name +
                    "' (expected binary, power, exponential or gaussian)");
}

inline SpatialGraph build_graph(const PointSet& points, const DecayScheme& scheme) {
  if (const auto* b = std::get_if<BinaryScheme>(&scheme)) return buffer_adjacency(points, b->radius);
  return decay_weights(distance_matrix(points), scheme);
}

inline Dataset load_cli_dataset(const CliConfig& c) {
  require_file(c.dataset, "dataset");
  return load_dataset(c.dataset, TypeMap(c.types), LoadOptions{c.min_checkins});
}

inline SpatialGraph load_cli_graph(const CliConfig& c, const Dataset& data) {
  if (c.graph) {
    require_file(*c.graph, "graph");
    return io::load_edge_list(*c.graph, data.points.ids);
  }
  return build_graph(data.points, parse_scheme(c.scheme, c.scheme_param, c.train.buffer_radius));
}

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------- commands

inline std::string cmd_gen(const GeneratorConfig& g, const fs::path& out) {
  const SyntheticData s = synth_generate(g);
  csv::write_atomic(out, dataset_csv(s.points, s.type_names));
  const auto st = distribution_stats(*s.points.intensity, 20);
  return "points = " + std::to_string(s.points.size()) + "\ntypes = " + std::to_string(g.types) +
         "\nclusters = " + std::to_string(g.clusters) + "\ncount_mean = " + fmt(st.mean) +
         "\ncount_min = " + fmt(st.min) + "\ncount_max = " + fmt(st.max) +
         "\ncount_skewness = " + (st.skewness ? fmt(*st.skewness) : "undefined") + "\n";
}

struct GraphOptions {
  fs::path dataset;
  std::vector<std::string> types = TypeMap::poi_default().names();
  std::string scheme = "binary";
  std::optional<double> param;
  fs::path out;
  std::optional<fs::path> dump_spectrum;
};

inline std::string cmd_graph(const GraphOptions& o) {
  require_file(o.dataset, "dataset");
  const Dataset data = load_dataset(o.dataset, TypeMap(o.types));
  const SpatialGraph g = build_graph(data.points, parse_scheme(o.scheme, o.param, 600.0));
  io::save_edge_list(o.out, g, data.points.ids);
  if (o.dump_spectrum)
    csv::write_atomic(*o.dump_spectrum, io::eigenvalues_csv(eigendecompose(laplacian_bundle(g))));
  return "nodes = " + std::to_string(g.size()) + "\nedges = " + std::to_string(g.edge_count()) +
         "\nisolated = " + std::to_string(g.isolated_count()) + "\n";
}

inline std::string cmd_train(const CliConfig& c) {
  const Dataset data = load_cli_dataset(c);
  const SpatialGraph g = load_cli_graph(c, data);
  log(LogLevel::info, "training on " + std::to_string(data.size()) + " nodes, " +
                          std::to_string(g.edge_count()) + " edges");
  const auto observer = [](std::size_t epoch, double loss, double err) {
    if (epoch % 100 == 0)
      log(LogLevel::debug, "epoch " + std::to_string(epoch) + " loss " + fmt(loss) + " abs_error " + fmt(err));
  };
  const PropagationOperator prop = propagation_operator(g);
  const TrainResult r = train(data, prop, c.train, observer);
  io::save_checkpoint(c.checkpoint, {r.model, c.train.seed, c.train.epochs});
  csv::write_atomic(c.history, io::history_csv(r.history));
  return io::metrics_text(evaluate(r.model, data, prop, r.split.validation), "validation_") +
         io::metrics_text(evaluate(r.model, data, prop, r.split.train), "train_") +
         "final_loss = " + csv::format_double(r.history.loss.back()) + "\n";
}

struct PredictOptions {
  CliConfig config;
  fs::path checkpoint;
  fs::path out;
};

inline std::string cmd_predict(const PredictOptions& o) {
  require_file(o.checkpoint, "checkpoint");
  const io::Checkpoint ck = io::load_checkpoint(o.checkpoint);
  const Dataset data = load_cli_dataset(o.config);
  if (ck.model.input_dim() != data.channels())
    throw DimensionError("checkpoint expects C=" + std::to_string(ck.model.input_dim()) +
                         " input channels but the dataset has C=" + std::to_string(data.channels()));
  const SpatialGraph g = load_cli_graph(o.config, data);
  const Eigen::VectorXd counts = inverse_log_transform(predict(ck.model, data.features, propagation_operator(g)));
  std::vector<io::PredictionRow> rows(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    rows[i].id = data.points.ids[i];
    rows[i].predicted = counts(static_cast<Eigen::Index>(i));
    if (data.points.intensity) rows[i].actual = (*data.points.intensity)[i];
  }
  csv::write_atomic(o.out, io::predictions_csv(rows));
  return "rows = " + std::to_string(rows.size()) + "\n";
}

struct EvalOptions {
  fs::path predictions;
  bool distribution = false;
  std::size_t bins = 20;
  bool log_x = false;
  std::optional<fs::path> out;
};

/// Moments from the raw values; with log bins the histogram is taken on
/// 1 + c so zero counts stay on the axis, and edges are reported as counts.
inline std::string distribution_text(std::span<const double> values, std::size_t bins, bool log_x,
                                     const std::string& prefix) {
  const DistributionStats st = distribution_stats(values, bins, false);
  DistributionStats hist = st;
  if (log_x) {
    std::vector<double> shifted(values.begin(), values.end());
    for (auto& v : shifted) v += 1.0;
    hist = distribution_stats(shifted, bins, true);
    for (auto& e : hist.bin_edges) e -= 1.0;
  }
  std::string out;
  out += prefix + "count = " + std::to_string(st.count) + '\n';
  out += prefix + "min = " + csv::format_double(st.min) + '\n';
  out += prefix + "max = " + csv::format_double(st.max) + '\n';
  out += prefix + "mean = " + csv::format_double(st.mean) + '\n';
  out += prefix + "variance = " + csv::format_double(st.variance) + '\n';
  out += prefix + "skewness = " + (st.skewness ? csv::format_double(*st.skewness) : "undefined") + '\n';
  out += prefix + "excess_kurtosis = " +
         (st.excess_kurtosis ? csv::format_double(*st.excess_kurtosis) : "undefined") + '\n';
  out += prefix + "log_bins = " + (log_x ? "true" : "false") + '\n';
  std::string edges, counts;
  for (std::size_t i = 0; i < hist.bin_edges.size(); ++i)
    edges += (i ? "," : "") + csv::format_double(hist.bin_edges[i]);
  for (std::size_t i = 0; i < hist.bin_counts.size(); ++i)
    counts += (i ? "," : "") + std::to_string(hist.bin_counts[i]);
  out += prefix + "bin_edges = " + edges + '\n';
  out += prefix + "bin_counts = " + counts + '\n';
  return out;
}

inline std::string cmd_eval(const EvalOptions& o) {
  require_file(o.predictions, "predictions");
  const auto rows = io::load_predictions(o.predictions);
  if (rows.empty()) throw DataError("'" + o.predictions.string() + "' has no rows");
  std::vector<double> pred, act;
  for (const auto& r : rows) {
    if (!r.actual) throw DataError("'" + o.predictions.string() + "': row '" + r.id + "' has no actual count");
    pred.push_back(r.predicted);
    act.push_back(*r.actual);
  }
  std::string text = io::metrics_text(count_metrics(pred, act));
  if (o.distribution) {
    text += distribution_text(pred, o.bins, o.log_x, "predicted_");
    text += distribution_text(act, o.bins, o.log_x, "actual_");
  }
  if (o.out) csv::write_atomic(*o.out, text);
  return text;
}

struct RunsOptions {
  CliConfig config;
  std::size_t runs = 1;
  std::uint64_t seed_base = 1;
};

/// Writes envelope.csv and history_seed<seed>.csv per run into out_dir.
inline std::string cmd_runs(const RunsOptions& o) {
  if (o.runs < 1) throw ConfigError("runs must be >= 1");
  const Dataset data = load_cli_dataset(o.config);
  const SpatialGraph g = load_cli_graph(o.config, data);
  std::vector<std::uint64_t> seeds;
  for (std::size_t r = 0; r < o.runs; ++r) seeds.push_back(o.seed_base + r);
  const MultiRunResult res = multi_run(data, g, o.config.train, seeds, o.config.threads);
  std::string summary = "runs = " + std::to_string(o.runs) + "\ncompleted = " +
                        std::to_string(res.completed()) + "\n";
  for (const auto& r : res.runs) {
    if (r.result) {
      csv::write_atomic(o.config.out_dir / ("history_seed" + std::to_string(r.seed) + ".csv"),
                        io::history_csv(r.result->history));
    } else {
      summary += "failed_seed_" + std::to_string(r.seed) + " = " + r.failure + "\n";
    }
  }
  if (res.completed() == 0) throw DivergenceError(0, "all runs diverged\n" + summary);
  csv::write_atomic(o.config.out_dir / "envelope.csv", io::envelope_csv(res.envelope));
  summary += "final_mean_abs_error = " + fmt(res.envelope.mean.back()) + "\n";
  return summary;
}

struct HeatmapOptions {
  fs::path predictions;
  fs::path dataset;
  std::vector<std::string> types = TypeMap::poi_default().names();
  std::string column = "predicted";  // or "actual"
  std::optional<std::string> type_filter;
  double cell_size = 200.0;
  double bandwidth = 400.0;
  fs::path out;  // prefix for .csv/.pgm/.meta
  std::optional<fs::path> scale_from;  // .meta of a raster whose scale to share
};

inline std::string cmd_heatmap(const HeatmapOptions& o) {
  require_file(o.predictions, "predictions");
  require_file(o.dataset, "dataset");
  if (o.column != "predicted" && o.column != "actual")
    throw ConfigError("heatmap column must be 'predicted' or 'actual'");
  const TypeMap types(o.types);
  const Dataset data = load_dataset(o.dataset, types);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < data.size(); ++i) index.emplace(data.points.ids[i], i);
  std::optional<std::size_t> wanted;
  if (o.type_filter) {
    wanted = types.find(*o.type_filter);
    if (!wanted) throw ConfigError("unknown type '" + *o.type_filter + "'");
  }
  std::vector<Point> pts;
  std::vector<double> vals;
  for (const auto& r : io::load_predictions(o.predictions)) {
    const auto it = index.find(r.id);
    if (it == index.end()) throw DataError("prediction id '" + r.id + "' is not in the dataset");
    if (wanted && data.points.type_label[it->second] != *wanted) continue;
    double v = r.predicted;
    if (o.column == "actual") {
      if (!r.actual) throw DataError("row '" + r.id + "' has no actual count");
      v = *r.actual;
    }
    pts.push_back(data.points.coords[it->second]);
    vals.push_back(v);
  }
  const RasterGrid grid = raster_heatmap(pts, vals, o.cell_size, o.bandwidth);
  GrayScale scale = GrayScale::of(grid);
  if (o.scale_from) {
    require_file(*o.scale_from, "scale metadata");
    scale = scale_from_metadata(io::load_key_values(*o.scale_from), o.scale_from->string());
  }
  save_raster(o.out, grid, scale);
  return "width = " + std::to_string(grid.width) + "\nheight = " + std::to_string(grid.height) +
         "\npoints = " + std::to_string(pts.size()) + "\nscale_min = " + csv::format_double(scale.min) +
         "\nscale_max = " + csv::format_double(scale.max) + "\n";
}

}  // namespace gcnspatial::cli
