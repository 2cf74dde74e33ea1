#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gcnspatial/point_set.hpp"
#include "gcnspatial/spatial_graph.hpp"

namespace testing_support {

using namespace gcnspatial;

/// Random sparse weighted graph; edge probability p, weights in [0.1, 2.1).
inline SpatialGraph random_graph(std::size_t n, double p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<WeightedEdge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (u(rng) < p) edges.push_back({i, j, 0.1 + 2.0 * u(rng)});
  return SpatialGraph::from_edges(n, edges);
}

/// The shared 25-graph suite (n <= 20); every third graph is sparse enough to
/// leave isolated nodes.
inline std::vector<SpatialGraph> graph_suite(std::uint64_t seed = 2024, std::size_t count = 25) {
  std::mt19937_64 rng(seed);
  std::vector<SpatialGraph> out;
  for (std::size_t g = 0; g < count; ++g) {
    const std::size_t n = 3 + g % 18;
    const double p = g % 3 == 0 ? 0.12 : 0.4;
    out.push_back(random_graph(n, p, rng));
  }
  return out;
}

inline SpatialGraph unit_triangle() {
  return SpatialGraph::from_edges(3, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}});
}

inline SpatialGraph unit_pair() { return SpatialGraph::from_edges(2, {{0, 1, 1.0}}); }

/// Dense normalized Laplacian computed directly from the dense adjacency.
inline Eigen::MatrixXd dense_normalized_laplacian(const Eigen::MatrixXd& w) {
  const auto n = w.rows();
  Eigen::MatrixXd ls = Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd d = w.rowwise().sum();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (d(i) > 0 && d(j) > 0) ls(i, j) -= w(i, j) / std::sqrt(d(i) * d(j));
  return ls;
}

inline PointSet make_points(const std::vector<Point>& coords, std::size_t types = 1) {
  PointSet ps;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    ps.ids.push_back("n" + std::to_string(i));
    ps.coords.push_back(coords[i]);
    ps.type_label.push_back(i % types);
  }
  ps.type_count = types;
  return ps;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("gcnspatial_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace testing_support
