#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "gcnspatial/errors.hpp"
#include "gcnspatial/point_set.hpp"

namespace gcnspatial {

/// Compressed-row sparse matrix used for every graph operator.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct WeightedEdge {
  std::size_t src = 0;
  std::size_t dst = 0;
  double weight = 0.0;
};

/// Symmetric nonnegative weighted adjacency W without self-loops.
///
/// Only strictly positive weights are stored. Symmetry is exact because each
/// undirected edge is supplied once and mirrored on insertion.
class SpatialGraph {
 public:
  SpatialGraph() = default;

  /// Builds from undirected edges, each given once with src != dst.
  static SpatialGraph from_edges(std::size_t n, const std::vector<WeightedEdge>& edges) {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(edges.size() * 2);
    for (const auto& e : edges) {
      if (e.src >= n || e.dst >= n) throw DataError("edge endpoint out of range");
      if (e.src == e.dst) throw DataError("self-loop edges are not allowed in W");
      if (!std::isfinite(e.weight) || e.weight < 0.0)
        throw DataError("edge weight must be finite and nonnegative");
      if (e.weight == 0.0) continue;
      triplets.emplace_back(static_cast<int>(e.src), static_cast<int>(e.dst), e.weight);
      triplets.emplace_back(static_cast<int>(e.dst), static_cast<int>(e.src), e.weight);
    }
    SpatialGraph g;
    g.weights_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    // duplicate edges would be summed; reject them instead
    auto dup = [](const double&, const double&) -> double {
      throw DataError("duplicate edge in edge list");
    };
    g.weights_.setFromTriplets(triplets.begin(), triplets.end(), dup);
    g.weights_.makeCompressed();
    return g;
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(weights_.rows()); }
  const SparseMatrix& weights() const noexcept { return weights_; }

  std::size_t edge_count() const noexcept {
    return static_cast<std::size_t>(weights_.nonZeros()) / 2;
  }

  std::size_t isolated_count() const {
    std::size_t count = 0;
    for (Eigen::Index r = 0; r < weights_.outerSize(); ++r)
      if (weights_.outerIndexPtr()[r + 1] == weights_.outerIndexPtr()[r]) ++count;
    return count;
  }

  /// Undirected edges with src < dst, in row-major order.
  std::vector<WeightedEdge> edges() const {
    std::vector<WeightedEdge> out;
    out.reserve(edge_count());
    for (Eigen::Index r = 0; r < weights_.outerSize(); ++r)
      for (SparseMatrix::InnerIterator it(weights_, r); it; ++it)
        if (it.col() > r)
          out.push_back({static_cast<std::size_t>(r), static_cast<std::size_t>(it.col()),
                         it.value()});
    return out;
  }

  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(weights_); }

 private:
  SparseMatrix weights_;
};

struct DistanceOptions {
  /// Tiled evaluation starts above this node count.
  std::size_t block_threshold = 4096;
  std::size_t block_size = 256;
  /// Dense distance matrices are refused beyond this size.
  std::size_t max_nodes = 20000;
};

/// Dense pairwise Euclidean distances in meters.
inline Eigen::MatrixXd distance_matrix(const PointSet& points, const DistanceOptions& opt = {}) {
  const std::size_t n = points.size();
  if (n == 0) throw DataError("distance matrix of an empty point set");
  if (n > opt.max_nodes)
    throw ConfigError("dense distance matrix refused for " + std::to_string(n) +
                      " nodes (limit " + std::to_string(opt.max_nodes) + ")");
  const auto N = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(N, N);
  const std::size_t block = n > opt.block_threshold ? std::max<std::size_t>(opt.block_size, 1) : n;
  for (std::size_t bi = 0; bi < n; bi += block) {
    for (std::size_t bj = bi; bj < n; bj += block) {
      const std::size_t ie = std::min(bi + block, n);
      const std::size_t je = std::min(bj + block, n);
      for (std::size_t i = bi; i < ie; ++i) {
        for (std::size_t j = std::max(bj, i + 1); j < je; ++j) {
          const double v = euclidean(points.coords[i], points.coords[j]);
          d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
          d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        }
      }
    }
  }
  return d;
}

/// Distance from each node to its k-th nearest other node.
inline Eigen::VectorXd knn_sigma(const Eigen::MatrixXd& dist, std::size_t k) {
  const auto n = static_cast<std::size_t>(dist.rows());
  if (k == 0) throw ConfigError("knn scale needs k >= 1");
  if (k >= n)
    throw ConfigError("knn scale needs k < n (k=" + std::to_string(k) +
                      ", n=" + std::to_string(n) + ")");
  Eigen::VectorXd sigma(dist.rows());
  std::vector<double> row;
  row.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) row.push_back(dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k - 1), row.end());
    const double s = row[k - 1];
    if (!(s > 0.0))
      throw DegenerateScaleError(i, "degenerate knn scale: node " + std::to_string(i) +
                                        " has zero distance to its k-th neighbour "
                                        "(duplicate coordinates)");
    sigma(static_cast<Eigen::Index>(i)) = s;
  }
  return sigma;
}

inline Eigen::VectorXd knn_sigma(const PointSet& points, std::size_t k) {
  try {
    return knn_sigma(distance_matrix(points), k);
  } catch (const DegenerateScaleError& e) {
    throw DegenerateScaleError(
        e.node(), std::string(e.what()) + " [id '" + points.ids.at(e.node()) + "']");
  }
}

/// Self-tuning kernel W_ij = exp(-d(i,j) / (sigma_i sigma_j)), diagonal omitted.
inline SpatialGraph gaussian_kernel_weights(const Eigen::MatrixXd& dist, const Eigen::VectorXd& sigma) {
  const auto n = static_cast<std::size_t>(dist.rows());
  if (dist.cols() != dist.rows() || static_cast<std::size_t>(sigma.size()) != n)
    throw DimensionError("kernel weights: distance matrix and scale vector disagree");
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (!(sigma(i) > 0.0) || !std::isfinite(sigma(i)))
      throw ConfigError("kernel weights: scale " + std::to_string(i) + " must be positive");
  std::vector<WeightedEdge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto I = static_cast<Eigen::Index>(i);
      const auto J = static_cast<Eigen::Index>(j);
      const double w = std::exp(-dist(I, J) / (sigma(I) * sigma(J)));
      if (w > 0.0) edges.push_back({i, j, w});
    }
  }
  return SpatialGraph::from_edges(n, edges);
}

struct BinaryScheme {
  double radius = 600.0;
};
struct PowerScheme {
  double exponent = 1.0;
};
struct ExponentialScheme {
  double rate = 1.0;
};
struct GaussianScheme {
  std::size_t k = 7;
};

/// Distance-decay weighting families.
using DecayScheme = std::variant<BinaryScheme, PowerScheme, ExponentialScheme, GaussianScheme>;

namespace detail {

template <typename WeightFn>
SpatialGraph pairwise_graph(const Eigen::MatrixXd& dist, WeightFn&& weight) {
  const auto n = static_cast<std::size_t>(dist.rows());
  std::vector<WeightedEdge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double w = weight(i, j, dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      if (w > 0.0) edges.push_back({i, j, w});
    }
  return SpatialGraph::from_edges(n, edges);
}

}  // namespace detail

inline SpatialGraph decay_weights(const Eigen::MatrixXd& dist, const DecayScheme& scheme) {
  if (dist.rows() != dist.cols()) throw DimensionError("distance matrix must be square");
  return std::visit(
      [&](const auto& s) -> SpatialGraph {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, BinaryScheme>) {
          if (!(s.radius > 0.0)) throw ConfigError("binary scheme needs radius > 0");
          return detail::pairwise_graph(
              dist, [&](std::size_t, std::size_t, double d) { return d <= s.radius ? 1.0 : 0.0; });
        } else if constexpr (std::is_same_v<S, PowerScheme>) {
          if (!(s.exponent > 0.0)) throw ConfigError("power scheme needs exponent > 0");
          return detail::pairwise_graph(dist, [&](std::size_t i, std::size_t j, double d) {
            if (d == 0.0)
              throw DegenerateDistanceError(i, j, "power weights undefined at zero distance "
                                                  "between nodes " + std::to_string(i) +
                                                      " and " + std::to_string(j));
            return std::pow(d, -s.exponent);
          });
        } else if constexpr (std::is_same_v<S, ExponentialScheme>) {
          if (!(s.rate > 0.0)) throw ConfigError("exponential scheme needs rate > 0");
          return detail::pairwise_graph(
              dist, [&](std::size_t, std::size_t, double d) { return std::exp(-s.rate * d); });
        } else {
          return gaussian_kernel_weights(dist, knn_sigma(dist, s.k));
        }
      },
      scheme);
}

/// Unweighted buffer graph: edge iff distance <= radius (inclusive).
inline SpatialGraph buffer_adjacency(const PointSet& points, double radius) {
  if (!(radius > 0.0)) throw ConfigError("buffer radius must be positive");
  const std::size_t n = points.size();
  std::vector<WeightedEdge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (euclidean(points.coords[i], points.coords[j]) <= radius) edges.push_back({i, j, 1.0});
  return SpatialGraph::from_edges(n, edges);
}

/// Degree, combinatorial and normalized Laplacians of W.
///
/// Isolated nodes get a zero entry in the inverse square-root degree, so
/// their row of the normalized Laplacian is the identity row.
struct LaplacianBundle {
  Eigen::VectorXd degree;
  SparseMatrix laplacian;
  SparseMatrix normalized;

  std::size_t size() const noexcept { return static_cast<std::size_t>(degree.size()); }

  Eigen::VectorXd inv_sqrt_degree() const {
    Eigen::VectorXd out(degree.size());
    for (Eigen::Index i = 0; i < degree.size(); ++i)
      out(i) = degree(i) > 0.0 ? 1.0 / std::sqrt(degree(i)) : 0.0;
    return out;
  }
};

inline LaplacianBundle laplacian_bundle(const SpatialGraph& graph) {
  const SparseMatrix& w = graph.weights();
  const Eigen::Index n = w.rows();
  LaplacianBundle b;
  b.degree = Eigen::VectorXd::Zero(n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (SparseMatrix::InnerIterator it(w, r); it; ++it) b.degree(r) += it.value();
  const Eigen::VectorXd dinv = b.inv_sqrt_degree();

  std::vector<Eigen::Triplet<double>> lt, nt;
  lt.reserve(static_cast<std::size_t>(w.nonZeros() + n));
  nt.reserve(static_cast<std::size_t>(w.nonZeros() + n));
  for (Eigen::Index r = 0; r < n; ++r) {
    if (b.degree(r) != 0.0) lt.emplace_back(r, r, b.degree(r));
    nt.emplace_back(r, r, 1.0);
    for (SparseMatrix::InnerIterator it(w, r); it; ++it) {
      lt.emplace_back(r, it.col(), -it.value());
      nt.emplace_back(r, it.col(), -it.value() * (dinv(r) * dinv(it.col())));
    }
  }
  b.laplacian.resize(n, n);
  b.laplacian.setFromTriplets(lt.begin(), lt.end());
  b.normalized.resize(n, n);
  b.normalized.setFromTriplets(nt.begin(), nt.end());
  return b;
}

/// Renormalized propagation matrix D~^{-1/2} (W + I) D~^{-1/2}.
struct PropagationOperator {
  SparseMatrix matrix;

  std::size_t size() const noexcept { return static_cast<std::size_t>(matrix.rows()); }

  template <typename Derived>
  Eigen::MatrixXd apply(const Eigen::MatrixBase<Derived>& x) const {
    if (x.rows() != matrix.cols()) throw DimensionError("propagation: row count mismatch");
    return matrix * x;
  }
};

inline PropagationOperator propagation_operator(const SpatialGraph& graph) {
  const SparseMatrix& w = graph.weights();
  const Eigen::Index n = w.rows();
  Eigen::VectorXd dinv(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    double deg = 1.0;
    for (SparseMatrix::InnerIterator it(w, r); it; ++it) deg += it.value();
    dinv(r) = 1.0 / std::sqrt(deg);
  }
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(w.nonZeros() + n));
  for (Eigen::Index r = 0; r < n; ++r) {
    t.emplace_back(r, r, dinv(r) * dinv(r));
    for (SparseMatrix::InnerIterator it(w, r); it; ++it)
      t.emplace_back(r, it.col(), it.value() * (dinv(r) * dinv(it.col())));
  }
  PropagationOperator p;
  p.matrix.resize(n, n);
  p.matrix.setFromTriplets(t.begin(), t.end());
  return p;
}

}  // namespace gcnspatial
