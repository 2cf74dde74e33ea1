#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "gcnspatial/errors.hpp"
#include "gcnspatial/spatial_graph.hpp"

namespace gcnspatial {

/// Orthonormal eigenbasis of the normalized Laplacian, eigenvalues ascending.
struct SpectralBasis {
  Eigen::MatrixXd eigenvectors;
  Eigen::VectorXd eigenvalues;

  std::size_t size() const noexcept { return static_cast<std::size_t>(eigenvalues.size()); }
};

/// Polynomial coefficients for sum_k c_k T_k(L~), L~ = (2/lambda_max) L^s - I.
struct ChebyshevCoefficients {
  Eigen::VectorXd coeffs;
  double lambda_max = 2.0;

  std::size_t order() const noexcept {
    return coeffs.size() == 0 ? 0 : static_cast<std::size_t>(coeffs.size() - 1);
  }
};

/// Default node limit for the dense eigensolver.
inline constexpr std::size_t kDenseEigenLimit = 2000;

/// Dense symmetric eigendecomposition of L^s. Reserved for validation and
/// small graphs; larger inputs are refused.
inline SpectralBasis eigendecompose(const LaplacianBundle& bundle,
                                    std::size_t dense_limit = kDenseEigenLimit) {
  const std::size_t n = bundle.size();
  if (n > dense_limit)
    throw ConfigError("eigendecomposition refused for " + std::to_string(n) + " nodes (limit " +
                      std::to_string(dense_limit) +
                      "); use the Chebyshev or first-order filters instead");
  const Eigen::MatrixXd dense(bundle.normalized);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense);
  if (solver.info() != Eigen::Success) throw Error("symmetric eigensolver failed");
  return {solver.eigenvectors(), solver.eigenvalues()};
}

/// x_hat = U^T x.
inline Eigen::VectorXd graph_fourier(const SpectralBasis& basis, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != basis.size())
    throw DimensionError("graph Fourier transform: signal length " + std::to_string(x.size()) +
                         " != " + std::to_string(basis.size()));
  return basis.eigenvectors.transpose() * x;
}

/// x = U x_hat.
inline Eigen::VectorXd inverse_graph_fourier(const SpectralBasis& basis,
                                             const Eigen::VectorXd& x_hat) {
  if (static_cast<std::size_t>(x_hat.size()) != basis.size())
    throw DimensionError("inverse graph Fourier transform: length mismatch");
  return basis.eigenvectors * x_hat;
}

/// U diag(theta) U^T x with one free parameter per eigenvalue.
inline Eigen::VectorXd spectral_filter(const SpectralBasis& basis, const Eigen::VectorXd& theta,
                                       const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(theta.size()) != basis.size())
    throw DimensionError("spectral filter: theta length mismatch");
  const Eigen::VectorXd x_hat = graph_fourier(basis, x);
  return inverse_graph_fourier(basis, theta.cwiseProduct(x_hat));
}

/// Scalar Chebyshev polynomial T_k(t) by the three-term recurrence.
inline double chebyshev_t(std::size_t k, double t) {
  if (k == 0) return 1.0;
  double prev = 1.0;
  double cur = t;
  for (std::size_t i = 1; i < k; ++i) {
    const double next = 2.0 * t * cur - prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

/// sum_k c_k T_k(L~) x evaluated on vectors; cost O(K |E|).
inline Eigen::VectorXd chebyshev_filter(const LaplacianBundle& bundle,
                                        const ChebyshevCoefficients& cheb,
                                        const Eigen::VectorXd& x) {
  if (!(cheb.lambda_max > 0.0)) throw ConfigError("chebyshev filter: lambda_max must be positive");
  if (cheb.coeffs.size() == 0) throw ConfigError("chebyshev filter: no coefficients");
  if (static_cast<std::size_t>(x.size()) != bundle.size())
    throw DimensionError("chebyshev filter: signal length mismatch");

  const double scale = 2.0 / cheb.lambda_max;
  auto rescaled = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return scale * (bundle.normalized * v) - v;
  };

  Eigen::VectorXd t_prev = x;
  Eigen::VectorXd out = cheb.coeffs(0) * t_prev;
  if (cheb.coeffs.size() == 1) return out;
  Eigen::VectorXd t_cur = rescaled(x);
  out += cheb.coeffs(1) * t_cur;
  for (Eigen::Index k = 2; k < cheb.coeffs.size(); ++k) {
    Eigen::VectorXd t_next = 2.0 * rescaled(t_cur) - t_prev;
    out += cheb.coeffs(k) * t_next;
    t_prev = std::move(t_cur);
    t_cur = std::move(t_next);
  }
  return out;
}

struct PowerIterationOptions {
  std::size_t max_iterations = 100000;
  /// Stop once ||L v - rho v|| <= tolerance * rho.
  double tolerance = 1e-7;
  std::uint64_t seed = 0x5eed;
};

/// Raised when power iteration hits its cap; carries the last Rayleigh quotient.
class PowerIterationError : public Error {
 public:
  PowerIterationError(double last, const std::string& what) : Error(what), last_(last) {}
  double last_estimate() const noexcept { return last_; }

 private:
  double last_;
};

/// Largest eigenvalue of L^s by power iteration from a seeded random start.
inline double estimate_lambda_max(const LaplacianBundle& bundle,
                                  const PowerIterationOptions& opt = {}) {
  const auto n = static_cast<Eigen::Index>(bundle.size());
  if (n == 0) throw ConfigError("lambda_max of an empty graph");
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unit(0.5, 1.5);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = (i % 2 == 0 ? 1.0 : -1.0) * unit(rng);
  v.normalize();

  double rho = 0.0;
  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    Eigen::VectorXd lv = bundle.normalized * v;
    rho = v.dot(lv);
    const double residual = (lv - rho * v).norm();
    if (residual <= opt.tolerance * std::max(rho, 1e-300)) return rho;
    const double norm = lv.norm();
    if (norm == 0.0) return 0.0;
    v = lv / norm;
  }
  throw PowerIterationError(rho, "power iteration did not converge after " +
                                     std::to_string(opt.max_iterations) +
                                     " iterations (last estimate " + std::to_string(rho) + ")");
}

enum class FirstOrderForm {
  /// theta * D~^{-1/2} (W + I) D~^{-1/2} x
  renormalized,
  /// theta * (I + D^{-1/2} W D^{-1/2}) x, the form before renormalization
  unrenormalized,
};

/// Single-parameter first-order graph convolution.
inline Eigen::VectorXd first_order_filter(const SpatialGraph& graph, double theta,
                                          const Eigen::VectorXd& x,
                                          FirstOrderForm form = FirstOrderForm::renormalized) {
  if (static_cast<std::size_t>(x.size()) != graph.size())
    throw DimensionError("first-order filter: signal length mismatch");
  if (form == FirstOrderForm::renormalized) return theta * (propagation_operator(graph).matrix * x);
  const Eigen::VectorXd dinv = laplacian_bundle(graph).inv_sqrt_degree();
  const Eigen::VectorXd scaled = dinv.cwiseProduct(x);
  return theta * (x + dinv.cwiseProduct(graph.weights() * scaled));
}

}  // namespace gcnspatial
