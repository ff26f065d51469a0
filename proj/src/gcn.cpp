#include "dkgcm/gcn.hpp"

#include <cmath>

namespace dkgcm {

NormalizedOperator normalized_laplacian(const Matrix& adjacency) {
  const std::size_t n = adjacency.rows();
  require(adjacency.cols() == n, "normalized_laplacian: adjacency not square");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      require(adjacency.at(i, j) >= 0.0, "normalized_laplacian: negative weight");
      require(std::abs(adjacency.at(i, j) - adjacency.at(j, i)) <= 1e-12,
              "normalized_laplacian: adjacency not symmetric");
    }

  std::vector<double> degree(n, 0.0), dinv(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) degree[i] += adjacency.at(i, j);
    dinv[i] = degree[i] > 0.0 ? 1.0 / std::sqrt(degree[i]) : 0.0;
  }

  NormalizedOperator op;
  // l_sym = D^{-1/2} (D - A) D^{-1/2}; isolated nodes get all-zero rows.
  op.l_sym = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double lij = (i == j ? degree[i] : 0.0) - adjacency.at(i, j);
      op.l_sym.at(i, j) = dinv[i] * lij * dinv[j];
    }

  // Spectrum of l_sym lies in [0, 2]; with the fixed lambda_max = 2 bound the
  // rescale (2/lambda_max) l_sym - I reduces to l_sym - I.
  op.l_scaled = op.l_sym;
  for (std::size_t i = 0; i < n; ++i) op.l_scaled.at(i, i) -= 1.0;

  op.a_hat = Matrix(n, n);
  std::vector<double> dtilde_inv(n);
  for (std::size_t i = 0; i < n; ++i) dtilde_inv[i] = 1.0 / std::sqrt(degree[i] + 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double atilde = adjacency.at(i, j) + (i == j ? 1.0 : 0.0);
      op.a_hat.at(i, j) = dtilde_inv[i] * atilde * dtilde_inv[j];
    }
  return op;
}

std::vector<Matrix> cheb_basis(const Matrix& l_scaled, int order) {
  require(order >= 1, "cheb_basis: order must be positive");
  const std::size_t n = l_scaled.rows();
  std::vector<Matrix> basis;
  basis.reserve(static_cast<std::size_t>(order));
  basis.push_back(Matrix::identity(n));
  if (order >= 2) basis.push_back(l_scaled);
  for (int k = 2; k < order; ++k) {
    Matrix next = matmul(l_scaled, basis[static_cast<std::size_t>(k - 1)]);
    for (auto& v : next.data()) v *= 2.0;
    const Matrix& prev = basis[static_cast<std::size_t>(k - 2)];
    for (std::size_t i = 0; i < next.data().size(); ++i)
      next.data()[i] -= prev.data()[i];
    basis.push_back(std::move(next));
  }
  return basis;
}

GcnMode parse_gcn_mode(const std::string& name) {
  if (name == "first-order") return GcnMode::FirstOrder;
  if (name == "chebyshev") return GcnMode::Chebyshev;
  fail("unknown gcn mode '" + name + "' (expected first-order or chebyshev)");
}

}  // namespace dkgcm
