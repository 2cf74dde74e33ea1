#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "gcnspatial/dataset.hpp"
#include "gcnspatial/errors.hpp"
#include "gcnspatial/gcn.hpp"
#include "gcnspatial/spatial_graph.hpp"

namespace gcnspatial {

struct TrainConfig {
  std::size_t epochs = 2000;
  double learning_rate = 3e-4;
  double l2_weight = 5e-5;
  double dropout = 0.2;
  std::size_t hidden_units = 32;
  double train_fraction = 0.05;
  double buffer_radius = 600.0;
  std::uint64_t seed = 7;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
      throw ConfigError("train_fraction must lie in (0, 1)");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
    if (!(l2_weight >= 0.0)) throw ConfigError("l2_weight must be >= 0");
    if (hidden_units == 0) throw ConfigError("hidden_units must be >= 1");
    if (!(buffer_radius > 0.0)) throw ConfigError("buffer_radius must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0))
      throw ConfigError("adam parameters out of range");
  }

  AdamConfig adam() const { return {learning_rate, beta1, beta2, epsilon}; }
};

/// Per-epoch training L1 loss (log scale) and validation MAE (count scale).
struct TrainHistory {
  std::vector<double> loss;
  std::vector<double> abs_error;

  std::size_t epochs() const noexcept { return loss.size(); }
};

struct TrainResult {
  GcnModel model;
  TrainHistory history;
  Split split;
};

/// Count-scale and log-scale error summary over a node subset.
struct Metrics {
  std::size_t count = 0;
  double mae = 0.0;        // mean |predicted - actual| on counts
  double l1_log = 0.0;     // mean |ln(1+predicted) - ln(1+actual)|
  double ratio = 0.0;      // mae / mean(actual)
  double mean_actual = 0.0;
};

/// Metrics from count-scale predictions (already clamped at 0).
inline Metrics count_metrics(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size()) throw DimensionError("metrics: length mismatch");
  if (predicted.empty()) throw ConfigError("metrics over an empty index set");
  Metrics m;
  m.count = predicted.size();
  double abs_sum = 0.0, log_sum = 0.0, act_sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    abs_sum += std::abs(predicted[i] - actual[i]);
    log_sum += std::abs(std::log1p(predicted[i]) - std::log1p(actual[i]));
    act_sum += actual[i];
  }
  const auto n = static_cast<double>(m.count);
  m.mae = abs_sum / n;
  m.l1_log = log_sum / n;
  m.mean_actual = act_sum / n;
  if (m.mean_actual > 0.0)
    m.ratio = m.mae / m.mean_actual;
  else
    m.ratio = m.mae == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return m;
}

/// Eval-mode metrics of a model over the given nodes.
inline Metrics evaluate(const GcnModel& model, const Dataset& data, const PropagationOperator& prop,
                        std::span<const std::size_t> idx) {
  if (idx.empty()) throw ConfigError("evaluate: empty index set");
  const Eigen::VectorXd z = predict(model, data.features, prop);
  const auto& counts = data.counts();
  std::vector<double> pred, act;
  pred.reserve(idx.size());
  act.reserve(idx.size());
  for (std::size_t i : idx) {
    if (i >= data.size()) throw DimensionError("evaluate: index out of range");
    pred.push_back(inverse_log_transform(z(static_cast<Eigen::Index>(i))));
    act.push_back(counts[i]);
  }
  return count_metrics(pred, act);
}

inline Metrics evaluate(const GcnModel& model, const Dataset& data, const SpatialGraph& graph,
                        std::span<const std::size_t> idx) {
  return evaluate(model, data, propagation_operator(graph), idx);
}

namespace detail {

inline double validation_mae(const Eigen::VectorXd& z, const std::vector<double>& counts,
                             const std::vector<std::size_t>& idx) {
  double sum = 0.0;
  for (std::size_t i : idx)
    sum += std::abs(inverse_log_transform(z(static_cast<Eigen::Index>(i))) - counts[i]);
  return sum / static_cast<double>(idx.size());
}

}  // namespace detail

/// Called after every epoch with (epoch, loss, abs_error).
using EpochObserver = std::function<void(std::size_t, double, double)>;

/// Full-batch semi-supervised training on a fixed split.
///
/// The loss and its gradient read targets only at `split.train`; the
/// validation counts are read only to record the per-epoch error.
inline TrainResult train(const Dataset& data, const PropagationOperator& prop,
                         const TrainConfig& cfg, Split split, Rng& rng,
                         const EpochObserver& observer = {}) {
  cfg.validate();
  if (data.size() != prop.size())
    throw DimensionError("train: dataset has " + std::to_string(data.size()) +
                         " nodes but graph has " + std::to_string(prop.size()));
  if (!data.has_targets()) throw DataError("train: dataset has no check-in counts");
  if (split.train.empty() || split.validation.empty())
    throw ConfigError("train: split needs nonempty train and validation sets");

  TrainResult r;
  r.model = GcnModel::glorot(data.channels(), cfg.hidden_units, rng);
  AdamState adam = AdamState::for_model(r.model, cfg.adam());
  r.history.loss.reserve(cfg.epochs);
  r.history.abs_error.reserve(cfg.epochs);
  const auto& counts = data.counts();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const ForwardCache cache = forward(r.model, data.features, prop, cfg.dropout, Mode::train, rng);
    const double loss = l1_loss(cache.output, data.targets_log, split.train);
    if (!std::isfinite(loss))
      throw DivergenceError(epoch, "training diverged: non-finite loss at epoch " +
                                       std::to_string(epoch));
    const GcnGradients g =
        backward(r.model, cache, data.targets_log, split.train, prop, cfg.l2_weight);
    adam_step(adam, r.model, g);
    r.history.loss.push_back(loss);
    r.history.abs_error.push_back(
        detail::validation_mae(predict(r.model, data.features, prop), counts, split.validation));
    if (observer) observer(epoch, loss, r.history.abs_error.back());
  }
  r.split = std::move(split);
  return r;
}

/// Draws the split and initialization from `cfg.seed`, then trains.
inline TrainResult train(const Dataset& data, const PropagationOperator& prop,
                         const TrainConfig& cfg, const EpochObserver& observer = {}) {
  cfg.validate();
  Rng rng(cfg.seed);
  Split s = split(data.size(), cfg.train_fraction, rng);
  return train(data, prop, cfg, std::move(s), rng, observer);
}

inline TrainResult train(const Dataset& data, const SpatialGraph& graph, const TrainConfig& cfg,
                         const EpochObserver& observer = {}) {
  if (data.size() != graph.size())
    throw DimensionError("train: dataset and graph node counts differ");
  return train(data, propagation_operator(graph), cfg, observer);
}

/// Per-epoch statistics of validation error across runs.
struct RunEnvelope {
  std::vector<double> mean;
  std::vector<double> std;  // population standard deviation
  std::vector<double> min;
  std::vector<double> max;
  std::vector<std::uint64_t> seeds;  // seeds of the runs the envelope covers

  std::size_t epochs() const noexcept { return mean.size(); }
};

/// Envelope over equal-length error series, accumulated in the given order.
inline RunEnvelope envelope_from_histories(const std::vector<std::vector<double>>& errors) {
  RunEnvelope env;
  if (errors.empty()) return env;
  const std::size_t epochs = errors.front().size();
  for (const auto& e : errors)
    if (e.size() != epochs) throw DimensionError("envelope: runs have different lengths");
  const auto runs = static_cast<double>(errors.size());
  env.mean.resize(epochs);
  env.std.resize(epochs);
  env.min.resize(epochs);
  env.max.resize(epochs);
  for (std::size_t t = 0; t < epochs; ++t) {
    double sum = 0.0, lo = errors[0][t], hi = errors[0][t];
    for (const auto& e : errors) {
      sum += e[t];
      lo = std::min(lo, e[t]);
      hi = std::max(hi, e[t]);
    }
    const double mean = sum / runs;
    double ss = 0.0;
    for (const auto& e : errors) ss += (e[t] - mean) * (e[t] - mean);
    // mean of identical values can round outside [min, max]
    env.mean[t] = std::clamp(mean, lo, hi);
    env.std[t] = std::sqrt(ss / runs);
    env.min[t] = lo;
    env.max[t] = hi;
  }
  return env;
}

struct RunRecord {
  std::uint64_t seed = 0;
  std::optional<TrainResult> result;
  std::string failure;  // set when the run diverged or failed
};

struct MultiRunResult {
  RunEnvelope envelope;
  std::vector<RunRecord> runs;
  std::size_t completed() const {
    return static_cast<std::size_t>(
        std::count_if(runs.begin(), runs.end(), [](const RunRecord& r) { return r.result.has_value(); }));
  }
};

/// Independent runs, each re-drawing split and initialization from its seed.
/// `threads == 0` uses the hardware concurrency; results do not depend on it.
inline MultiRunResult multi_run(const Dataset& data, const SpatialGraph& graph, const TrainConfig& cfg,
                                const std::vector<std::uint64_t>& seeds, std::size_t threads = 0) {
  if (seeds.empty()) throw ConfigError("multi_run needs at least one seed");
  for (std::size_t i = 0; i < seeds.size(); ++i)
    for (std::size_t j = i + 1; j < seeds.size(); ++j)
      if (seeds[i] == seeds[j]) throw ConfigError("multi_run seeds must be distinct");
  cfg.validate();
  if (data.size() != graph.size()) throw DimensionError("multi_run: dataset and graph sizes differ");
  const PropagationOperator prop = propagation_operator(graph);

  MultiRunResult out;
  out.runs.resize(seeds.size());
  auto run_one = [&](std::size_t i) {
    TrainConfig c = cfg;
    c.seed = seeds[i];
    out.runs[i].seed = seeds[i];
    try {
      out.runs[i].result = train(data, prop, c);
    } catch (const DivergenceError& e) {
      out.runs[i].failure = e.what();
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, seeds.size());
  if (threads <= 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < seeds.size(); i = next++) run_one(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<std::vector<double>> series;
  for (const auto& r : out.runs)
    if (r.result) {
      series.push_back(r.result->history.abs_error);
      out.envelope.seeds.push_back(r.seed);
    }
  auto seeds_kept = std::move(out.envelope.seeds);
  out.envelope = envelope_from_histories(series);
  out.envelope.seeds = std::move(seeds_kept);
  return out;
}

}  // namespace gcnspatial
