#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gcnspatial/errors.hpp"
#include "gcnspatial/spatial_graph.hpp"

namespace gcnspatial {

using Rng = std::mt19937_64;

/// Uniform Glorot initialization on [-s, s], s = sqrt(6 / (fan_in + fan_out)).
inline Eigen::MatrixXd glorot_init(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  if (fan_in == 0 || fan_out == 0) throw ConfigError("glorot init needs positive fans");
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-s, s);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
  return m;
}

/// Two-layer GCN: Z = W^ ReLU(W^ X Theta0) Theta1, dims (C, H, 1).
struct GcnModel {
  Eigen::MatrixXd theta0;  // C x H
  Eigen::MatrixXd theta1;  // H x 1

  static GcnModel glorot(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
    GcnModel m;
    m.theta0 = glorot_init(input_dim, hidden_dim, rng);
    m.theta1 = glorot_init(hidden_dim, 1, rng);
    return m;
  }

  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(theta0.rows()); }
  std::size_t hidden_dim() const noexcept { return static_cast<std::size_t>(theta0.cols()); }

  void validate() const {
    if (theta0.rows() == 0 || theta0.cols() == 0) throw DataError("model has empty first layer");
    if (theta1.rows() != theta0.cols() || theta1.cols() != 1)
      throw DataError("model layer shapes are inconsistent");
    if (!theta0.allFinite() || !theta1.allFinite()) throw DataError("model has non-finite parameters");
  }
};

/// Gradients with the same shapes as the model parameters.
struct GcnGradients {
  Eigen::MatrixXd theta0;
  Eigen::MatrixXd theta1;
};

enum class Mode { train, eval };

/// Intermediates of one forward pass, kept for the backward pass.
struct ForwardCache {
  Eigen::MatrixXd input_mask;      // n x C, 0 or 1/(1-p)
  Eigen::MatrixXd input;           // X after dropout
  Eigen::MatrixXd propagated;      // W^ X_drop
  Eigen::MatrixXd pre_activation;  // W^ X_drop Theta0
  Eigen::MatrixXd hidden;          // ReLU(pre_activation)
  Eigen::MatrixXd hidden_mask;     // n x H
  Eigen::MatrixXd hidden_dropped;
  Eigen::VectorXd output;          // Z
  // parameters the pass ran with; backward refuses a cache from other parameters
  Eigen::MatrixXd theta0;
  Eigen::MatrixXd theta1;

  std::size_t size() const noexcept { return static_cast<std::size_t>(output.size()); }
};

namespace detail {

inline Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Mode mode,
                                    Rng& rng) {
  if (mode == Mode::eval || p == 0.0) return Eigen::MatrixXd::Ones(rows, cols);
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = keep(rng) ? scale : 0.0;
  return m;
}

}  // namespace detail

/// Forward pass with inverted dropout on X and on the hidden activation in
/// train mode. Eval mode is mask-free and never touches the generator.
inline ForwardCache forward(const GcnModel& model, const Eigen::MatrixXd& features,
                            const PropagationOperator& prop, double dropout_p, Mode mode,
                            Rng& rng) {
  const auto n = features.rows();
  if (static_cast<std::size_t>(n) != prop.size())
    throw DimensionError("forward: feature rows " + std::to_string(n) +
                         " != graph size " + std::to_string(prop.size()));
  if (static_cast<std::size_t>(features.cols()) != model.input_dim())
    throw DimensionError("forward: feature columns " + std::to_string(features.cols()) +
                         " != model input dim " + std::to_string(model.input_dim()));
  if (model.theta1.rows() != model.theta0.cols() || model.theta1.cols() != 1)
    throw DimensionError("forward: inconsistent model shapes");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("dropout must lie in [0, 1)");

  ForwardCache c;
  c.input_mask = detail::dropout_mask(n, features.cols(), dropout_p, mode, rng);
  c.input = features.cwiseProduct(c.input_mask);
  c.propagated = prop.matrix * c.input;
  c.pre_activation = c.propagated * model.theta0;
  c.hidden = c.pre_activation.cwiseMax(0.0);
  c.hidden_mask = detail::dropout_mask(n, c.hidden.cols(), dropout_p, mode, rng);
  c.hidden_dropped = c.hidden.cwiseProduct(c.hidden_mask);
  const Eigen::VectorXd projected = c.hidden_dropped * model.theta1;
  c.output = prop.matrix * projected;
  c.theta0 = model.theta0;
  c.theta1 = model.theta1;
  return c;
}

/// Eval-mode prediction without keeping the cache.
inline Eigen::VectorXd predict(const GcnModel& model, const Eigen::MatrixXd& features,
                               const PropagationOperator& prop) {
  Rng unused(0);
  return forward(model, features, prop, 0.0, Mode::eval, unused).output;
}

namespace detail {

inline void check_indices(std::span<const std::size_t> idx, Eigen::Index n, const char* what) {
  if (idx.empty()) throw ConfigError(std::string(what) + ": empty index set");
  for (std::size_t i : idx)
    if (i >= static_cast<std::size_t>(n))
      throw DimensionError(std::string(what) + ": index " + std::to_string(i) + " out of range");
}

}  // namespace detail

/// Mean absolute deviation over the index set (log-scale targets).
inline double l1_loss(const Eigen::VectorXd& output, const Eigen::VectorXd& targets,
                      std::span<const std::size_t> idx) {
  if (output.size() != targets.size()) throw DimensionError("l1 loss: length mismatch");
  detail::check_indices(idx, output.size(), "l1 loss");
  double sum = 0.0;
  for (std::size_t i : idx) {
    const auto k = static_cast<Eigen::Index>(i);
    sum += std::abs(output(k) - targets(k));
  }
  return sum / static_cast<double>(idx.size());
}

/// weight * 1/2 * sum of squared parameters over both layers.
inline double l2_penalty(const GcnModel& model, double weight) {
  return weight * 0.5 * (model.theta0.squaredNorm() + model.theta1.squaredNorm());
}

/// Exact gradients of l1_loss + l2_penalty through the cached forward pass.
/// Subgradients of |u| and ReLU at 0 are taken as 0.
inline GcnGradients backward(const GcnModel& model, const ForwardCache& cache,
                             const Eigen::VectorXd& targets, std::span<const std::size_t> idx,
                             const PropagationOperator& prop, double l2_weight) {
  const Eigen::Index n = cache.output.size();
  if (static_cast<std::size_t>(n) != prop.size() || targets.size() != n)
    throw DimensionError("backward: cache, targets and graph sizes disagree");
  if (cache.theta0.rows() != model.theta0.rows() || cache.theta0.cols() != model.theta0.cols() ||
      cache.theta1.rows() != model.theta1.rows() || cache.theta0 != model.theta0 ||
      cache.theta1 != model.theta1)
    throw DimensionError("backward: cache was produced with different parameters (stale cache)");
  detail::check_indices(idx, n, "backward");

  Eigen::VectorXd d_output = Eigen::VectorXd::Zero(n);
  const double inv = 1.0 / static_cast<double>(idx.size());
  for (std::size_t i : idx) {
    const auto k = static_cast<Eigen::Index>(i);
    const double r = cache.output(k) - targets(k);
    d_output(k) += r > 0.0 ? inv : (r < 0.0 ? -inv : 0.0);
  }

  // W^ is symmetric, so its transpose product is the same sparse product.
  const Eigen::VectorXd d_projected = prop.matrix * d_output;

  GcnGradients g;
  g.theta1 = cache.hidden_dropped.transpose() * d_projected + l2_weight * model.theta1;

  Eigen::MatrixXd d_hidden = d_projected * model.theta1.transpose();
  d_hidden = d_hidden.cwiseProduct(cache.hidden_mask);
  for (Eigen::Index j = 0; j < d_hidden.cols(); ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      if (!(cache.pre_activation(i, j) > 0.0)) d_hidden(i, j) = 0.0;

  g.theta0 = cache.propagated.transpose() * d_hidden + l2_weight * model.theta0;
  return g;
}

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam moments for both parameter matrices.
struct AdamState {
  AdamConfig config;
  Eigen::MatrixXd m0, v0;
  Eigen::MatrixXd m1, v1;
  std::uint64_t step = 0;

  static AdamState for_model(const GcnModel& model, const AdamConfig& config = {}) {
    AdamState s;
    s.config = config;
    s.m0 = Eigen::MatrixXd::Zero(model.theta0.rows(), model.theta0.cols());
    s.v0 = s.m0;
    s.m1 = Eigen::MatrixXd::Zero(model.theta1.rows(), model.theta1.cols());
    s.v1 = s.m1;
    return s;
  }
};

namespace detail {

inline void adam_update(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, Eigen::MatrixXd& m,
                        Eigen::MatrixXd& v, const AdamConfig& cfg, double bias1, double bias2) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
  for (Eigen::Index c = 0; c < param.cols(); ++c)
    for (Eigen::Index r = 0; r < param.rows(); ++r) {
      const double m_hat = m(r, c) / bias1;
      const double v_hat = v(r, c) / bias2;
      param(r, c) -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
}

}  // namespace detail

/// One Adam update of both layers; increments the step counter.
inline void adam_step(AdamState& state, GcnModel& model, const GcnGradients& grads) {
  if (grads.theta0.rows() != model.theta0.rows() || grads.theta0.cols() != model.theta0.cols() ||
      grads.theta1.rows() != model.theta1.rows() || grads.theta1.cols() != model.theta1.cols() ||
      state.m0.rows() != model.theta0.rows() || state.m0.cols() != model.theta0.cols() ||
      state.m1.rows() != model.theta1.rows())
    throw DimensionError("adam step: gradient, state and model shapes disagree");
  ++state.step;
  const auto t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(state.config.beta1, t);
  const double bias2 = 1.0 - std::pow(state.config.beta2, t);
  detail::adam_update(model.theta0, grads.theta0, state.m0, state.v0, state.config, bias1, bias2);
  detail::adam_update(model.theta1, grads.theta1, state.m1, state.v1, state.config, bias1, bias2);
}

/// Everything the objective needs besides the parameters.
struct GradientCheckInstance {
  Eigen::MatrixXd features;
  PropagationOperator prop;
  Eigen::VectorXd targets;
  std::vector<std::size_t> train_idx;
  double l2_weight = 0.0;
};

/// Eval-mode objective l1_loss + l2_penalty.
inline double objective(const GcnModel& model, const GradientCheckInstance& inst) {
  return l1_loss(predict(model, inst.features, inst.prop), inst.targets, inst.train_idx) +
         l2_penalty(model, inst.l2_weight);
}

struct GradientCheckReport {
  double max_rel_error_theta0 = 0.0;
  double max_rel_error_theta1 = 0.0;
  /// Layer (0 or 1), row and column of the worst entry.
  int worst_layer = -1;
  Eigen::Index worst_row = -1;
  Eigen::Index worst_col = -1;
  bool passed = true;
};

/// Floor on the relative-error denominator so two exact zeros compare equal.
inline constexpr double kGradientCheckFloor = 1e-10;

/// Compares given analytic gradients against central differences of the
/// eval-mode objective.
inline GradientCheckReport gradient_check(const GcnModel& model, const GradientCheckInstance& inst,
                                          const GcnGradients& analytic, double tolerance,
                                          double step = 1e-5) {
  GradientCheckReport rep;
  double worst = -1.0;
  auto scan = [&](int layer) {
    GcnModel probe = model;
    Eigen::MatrixXd& param = layer == 0 ? probe.theta0 : probe.theta1;
    const Eigen::MatrixXd& grad = layer == 0 ? analytic.theta0 : analytic.theta1;
    if (grad.rows() != param.rows() || grad.cols() != param.cols())
      throw DimensionError("gradient check: gradient shape mismatch");
    double& layer_max = layer == 0 ? rep.max_rel_error_theta0 : rep.max_rel_error_theta1;
    for (Eigen::Index c = 0; c < param.cols(); ++c)
      for (Eigen::Index r = 0; r < param.rows(); ++r) {
        const double original = param(r, c);
        param(r, c) = original + step;
        const double up = objective(probe, inst);
        param(r, c) = original - step;
        const double down = objective(probe, inst);
        param(r, c) = original;
        const double numeric = (up - down) / (2.0 * step);
        const double a = grad(r, c);
        const double denom = std::max({std::abs(a), std::abs(numeric), kGradientCheckFloor});
        const double rel = std::abs(a - numeric) / denom;
        layer_max = std::max(layer_max, rel);
        if (rel > worst) {
          worst = rel;
          rep.worst_layer = layer;
          rep.worst_row = r;
          rep.worst_col = c;
        }
      }
  };
  scan(0);
  scan(1);
  rep.passed = !(std::max(rep.max_rel_error_theta0, rep.max_rel_error_theta1) > tolerance);
  return rep;
}

/// Runs an eval-mode forward/backward and checks it.
inline GradientCheckReport gradient_check(const GcnModel& model, const GradientCheckInstance& inst,
                                          double tolerance, double step = 1e-5) {
  Rng unused(0);
  const ForwardCache cache = forward(model, inst.features, inst.prop, 0.0, Mode::eval, unused);
  const GcnGradients g = backward(model, cache, inst.targets, inst.train_idx, inst.prop, inst.l2_weight);
  return gradient_check(model, inst, g, tolerance, step);
}

/// Random instance (random sparse weighted graph, features, targets) whose
/// residuals and pre-activations stay clear of the |u| and ReLU kinks.
inline std::pair<GcnModel, GradientCheckInstance> make_gradient_check_instance(
    std::uint64_t seed, std::size_t n = 10, std::size_t channels = 3, std::size_t hidden = 4,
    double l2_weight = 5e-3) {
  constexpr double margin = 1e-3;
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(seed * 7919 + attempt);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<WeightedEdge> edges;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (unit(rng) < 0.35) edges.push_back({i, j, 0.1 + unit(rng)});
    GradientCheckInstance inst;
    inst.prop = propagation_operator(SpatialGraph::from_edges(n, edges));
    inst.features = Eigen::MatrixXd(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(channels));
    for (Eigen::Index c = 0; c < inst.features.cols(); ++c)
      for (Eigen::Index r = 0; r < inst.features.rows(); ++r) inst.features(r, c) = 2.0 * unit(rng) - 0.5;
    GcnModel model = GcnModel::glorot(channels, hidden, rng);
    inst.targets = Eigen::VectorXd(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < inst.targets.size(); ++i) inst.targets(i) = 2.0 * unit(rng) - 1.0;
    for (std::size_t i = 0; i < n; ++i)
      if (i % 3 != 2) inst.train_idx.push_back(i);
    inst.l2_weight = l2_weight;

    Rng unused(0);
    const ForwardCache c = forward(model, inst.features, inst.prop, 0.0, Mode::eval, unused);
    const bool clear_of_kinks =
        (c.output - inst.targets).cwiseAbs().minCoeff() > margin &&
        c.pre_activation.cwiseAbs().minCoeff() > margin;
    if (clear_of_kinks) return {std::move(model), std::move(inst)};
  }
}

}  // namespace gcnspatial
