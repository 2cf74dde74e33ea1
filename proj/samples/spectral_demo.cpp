// Filters a step signal on a small ring graph three ways: exactly in the
// eigenbasis, with a Chebyshev expansion, and with the first-order filter.

#include <cmath>
#include <cstdio>
#include <vector>

#include "gcnspatial/spectral_filters.hpp"

using namespace gcnspatial;

int main() {
  const std::size_t n = 12;
  std::vector<WeightedEdge> edges;
  for (std::size_t i = 0; i < n; ++i) edges.push_back({i, (i + 1) % n, 1.0});
  edges.push_back({0, 6, 0.5});  // one chord makes the degrees uneven
  const SpatialGraph g = SpatialGraph::from_edges(n, edges);
  const LaplacianBundle b = laplacian_bundle(g);
  const SpectralBasis basis = eigendecompose(b);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  x.head(n / 2).setOnes();

  // low-pass response 1 - l/2 is T0/2 - T1/2 after rescaling with lambda_max = 2
  Eigen::VectorXd theta = (1.0 - basis.eigenvalues.array() / 2.0).matrix();
  const Eigen::VectorXd exact = spectral_filter(basis, theta, x);
  const Eigen::VectorXd cheb = chebyshev_filter(b, {Eigen::Vector2d(0.5, -0.5), 2.0}, x);
  const Eigen::VectorXd first = first_order_filter(g, 0.5, x, FirstOrderForm::unrenormalized);
  const Eigen::VectorXd renorm = first_order_filter(g, 1.0, x, FirstOrderForm::renormalized);

  std::printf("lambda_max (power iteration) %.6f, dense %.6f\n", estimate_lambda_max(b),
              basis.eigenvalues(n - 1));
  std::printf("%4s %10s %10s %10s %10s %10s\n", "node", "x", "exact", "chebyshev", "1st-order", "renorm");
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    std::printf("%4zu %10.4f %10.4f %10.4f %10.4f %10.4f\n", i, x(k), exact(k), cheb(k), first(k), renorm(k));
  }
}
