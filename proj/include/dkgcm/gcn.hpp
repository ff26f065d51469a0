#pragma once

#include <string>
#include <vector>

#include "dkgcm/autodiff.hpp"
#include "dkgcm/matrix.hpp"

namespace dkgcm {

/// Graph operators derived from one symmetric non-negative adjacency:
/// l_sym      = D^{-1/2} (D - A) D^{-1/2}  (zero rows for isolated nodes),
/// l_scaled   = l_sym - I                  (spectrum rescaled into [-1, 1]
///                                          using the lambda_max = 2 bound),
/// a_hat      = Dt^{-1/2} (A + I) Dt^{-1/2} with Dt the self-looped degrees.
struct NormalizedOperator {
  Matrix l_sym;
  Matrix l_scaled;
  Matrix a_hat;
};

NormalizedOperator normalized_laplacian(const Matrix& adjacency);

/// Chebyshev basis T_0..T_{K-1} of the scaled operator:
/// T_0 = I, T_1 = X, T_k = 2 X T_{k-1} - T_{k-2}.
std::vector<Matrix> cheb_basis(const Matrix& l_scaled, int order);

enum class GcnMode { FirstOrder, Chebyshev };

GcnMode parse_gcn_mode(const std::string& name);

namespace diffops {

using diff::Var;

/// Chebyshev graph filter: H = sum_k T_k X theta_k. X is m x d_in or
/// batched B x m x d_in; basis matrices are constants.
template <typename T>
Var<T> cheb_gconv(const Var<T>& x, const std::vector<Var<T>>& basis,
                  const std::vector<Var<T>>& theta) {
  require(!basis.empty() && basis.size() == theta.size(),
          "cheb_gconv: basis and theta lengths differ");
  Var<T> acc;
  for (std::size_t k = 0; k < basis.size(); ++k) {
    Var<T> term = matmul(matmul(basis[k], x), theta[k]);
    acc = k == 0 ? term : add(acc, term);
  }
  return acc;
}

/// First-order convolution with self-loops: H = relu(a_hat X W).
template <typename T>
Var<T> gcn_layer(const Var<T>& x, const Var<T>& a_hat, const Var<T>& w) {
  return relu(matmul(matmul(a_hat, x), w));
}

}  // namespace diffops

}  // namespace dkgcm
