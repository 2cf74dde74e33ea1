// gcnspatial: generate data, build graphs, train, predict, evaluate and
// rasterize. Run `gcnspatial <command> --help` for the flags of a command.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "gcnspatial/commands.hpp"

namespace fs = std::filesystem;
using namespace gcnspatial;

namespace {

std::string dashed(std::string key) {
  for (auto& c : key)
    if (c == '_') c = '-';
  return key;
}

/// One string flag per config key; values are parsed by the config layer so
/// the file and the command line share one validation path.
template <typename Table>
void add_key_flags(CLI::App* app, const Table& table, std::map<std::string, std::string>& sink) {
  for (const auto& [key, setter] : table) {
    (void)setter;
    std::string names = "--" + dashed(key);
    if (key.find('_') != std::string::npos) names += ",--" + key;
    app->add_option(names, sink[key], "overrides config key '" + key + "'");
  }
}

io::KeyValues given(const CLI::App* app, const std::map<std::string, std::string>& sink) {
  io::KeyValues kv;
  for (const auto& [key, value] : sink)
    if (app->count("--" + dashed(key)) > 0) kv[key] = value;
  return kv;
}

std::vector<std::string> type_list(const std::string& s) {
  std::vector<std::string> out;
  for (const auto& f : csv::split(s)) {
    const auto t = csv::trim(f);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial graph convolutional regression of POI check-in counts"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset CSV");
  std::optional<fs::path> gen_spec;
  fs::path gen_out;
  std::map<std::string, std::string> gen_keys;
  gen->add_option("spec", gen_spec, "generator spec (key = value)");
  gen->add_option("-o,--out", gen_out, "output dataset CSV")->required();
  add_key_flags(gen, cli::generator_keys(), gen_keys);

  // graph
  auto* graph = app.add_subcommand("graph", "Build a spatial graph and write its edge list");
  cli::GraphOptions graph_opt;
  std::string graph_types;
  graph->add_option("dataset", graph_opt.dataset, "dataset CSV")->required();
  graph->add_option("--scheme", graph_opt.scheme, "binary, power, exponential or gaussian");
  graph->add_option("--param", graph_opt.param, "radius, exponent, rate or k");
  graph->add_option("--types", graph_types, "comma-separated type map");
  graph->add_option("-o,--out", graph_opt.out, "output edge list CSV")->required();
  graph->add_option("--dump-spectrum", graph_opt.dump_spectrum, "write normalized-Laplacian eigenvalues");

  // train
  auto* train = app.add_subcommand("train", "Train a model");
  std::optional<fs::path> train_cfg;
  std::map<std::string, std::string> train_keys;
  train->add_option("config", train_cfg, "config file (key = value)");
  add_key_flags(train, cli::cli_keys(), train_keys);

  // predict
  auto* predict = app.add_subcommand("predict", "Predict check-ins for every node");
  std::optional<fs::path> predict_cfg;
  std::map<std::string, std::string> predict_keys;
  fs::path predict_out;
  predict->add_option("config", predict_cfg, "config file (key = value)");
  predict->add_option("-o,--out", predict_out, "output prediction CSV")->required();
  add_key_flags(predict, cli::cli_keys(), predict_keys);

  // eval
  auto* eval = app.add_subcommand("eval", "Metrics of a prediction CSV");
  cli::EvalOptions eval_opt;
  eval->add_option("predictions", eval_opt.predictions, "prediction CSV")->required();
  eval->add_flag("--distribution", eval_opt.distribution, "histogram and moments per column");
  eval->add_option("--bins", eval_opt.bins, "histogram bins")->check(CLI::PositiveNumber);
  eval->add_flag("--log-x", eval_opt.log_x, "logarithmic bins");
  eval->add_option("-o,--out", eval_opt.out, "also write the metrics document here");

  // runs
  auto* runs = app.add_subcommand("runs", "Repeated training runs and their error envelope");
  std::optional<fs::path> runs_cfg;
  std::map<std::string, std::string> runs_keys;
  cli::RunsOptions runs_opt;
  runs->add_option("config", runs_cfg, "config file (key = value)");
  runs->add_option("-r,--runs", runs_opt.runs, "number of runs")->check(CLI::PositiveNumber);
  runs->add_option("--seed-base", runs_opt.seed_base, "seed of the first run; runs use consecutive seeds");
  add_key_flags(runs, cli::cli_keys(), runs_keys);

  // heatmap
  auto* heat = app.add_subcommand("heatmap", "Rasterize predicted or actual check-ins");
  cli::HeatmapOptions heat_opt;
  std::string heat_types;
  heat->add_option("predictions", heat_opt.predictions, "prediction CSV")->required();
  heat->add_option("--dataset", heat_opt.dataset, "dataset CSV with coordinates")->required();
  heat->add_option("--column", heat_opt.column, "predicted or actual");
  heat->add_option("--type", heat_opt.type_filter, "only points of this type");
  heat->add_option("--types", heat_types, "comma-separated type map");
  heat->add_option("--cell-size", heat_opt.cell_size, "cell size in meters");
  heat->add_option("--bandwidth", heat_opt.bandwidth, "kernel bandwidth in meters");
  heat->add_option("--share-scale", heat_opt.scale_from, "reuse the gray scale of this .meta file");
  heat->add_option("-o,--out", heat_opt.out, "output prefix (.csv, .pgm, .meta)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? cli::kOk : cli::kConfigError;
  }

  try {
    std::string out;
    if (*gen) {
      out = cli::cmd_gen(cli::load_generator_config(gen_spec, given(gen, gen_keys)), gen_out);
    } else if (*graph) {
      if (!graph_types.empty()) graph_opt.types = type_list(graph_types);
      out = cli::cmd_graph(graph_opt);
    } else if (*train) {
      out = cli::cmd_train(cli::load_cli_config(train_cfg, given(train, train_keys)));
    } else if (*predict) {
      cli::PredictOptions p;
      p.config = cli::load_cli_config(predict_cfg, given(predict, predict_keys));
      p.checkpoint = p.config.checkpoint;
      p.out = predict_out;
      out = cli::cmd_predict(p);
    } else if (*eval) {
      out = cli::cmd_eval(eval_opt);
    } else if (*runs) {
      runs_opt.config = cli::load_cli_config(runs_cfg, given(runs, runs_keys));
      out = cli::cmd_runs(runs_opt);
    } else if (*heat) {
      if (!heat_types.empty()) heat_opt.types = type_list(heat_types);
      out = cli::cmd_heatmap(heat_opt);
    }
    std::cout << out;
    return cli::kOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::exit_code_for_current_exception();
  }
}
