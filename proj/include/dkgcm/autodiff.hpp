#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <type_traits>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dkgcm/tensor.hpp"

namespace dkgcm::diff {

// Reverse-mode autodiff over dense tensors. Every operation records a node
// with a closure that routes the output gradient to its parents; backward()
// walks the recorded graph once in reverse topological order. Graphs are
// rebuilt per step; only leaf parameters persist across steps and their
// gradients accumulate until zero_grad().

template <typename T>
class Var;

template <typename T>
struct VarNode {
  Tensor<T> value;
  Tensor<T> grad;  // sized lazily on first accumulation
  bool requires_grad = false;
  std::vector<Var<T>> parents;
  // Receives (output grad, parents); accumulates into parent grads.
  std::function<void(const Tensor<T>&, std::vector<Var<T>>&)> backprop;

  void accum_grad(const Tensor<T>& g) {
    if (grad.numel() == 0) grad = Tensor<T>(value.shape());
    T* dst = grad.data();
    const T* src = g.data();
    for (std::size_t i = 0; i < grad.numel(); ++i) dst[i] += src[i];
  }
};

template <typename T>
class Var;

/// Record one operation node: forward value, parent handles, and the closure
/// that routes the output gradient into the parents. Drops the closure when
/// no parent needs gradients, so constant subgraphs cost nothing on backward.
template <typename T>
using BackpropFn = std::function<void(const Tensor<T>&, std::vector<Var<T>>&)>;

template <typename T>
Var<T> make_op(Tensor<T> value, std::type_identity_t<std::vector<Var<T>>> parents,
               std::type_identity_t<BackpropFn<T>> back);

template <typename T>
class Var {
 public:
  Var() = default;

  static Var constant(Tensor<T> v) {
    Var out;
    out.n_ = std::make_shared<VarNode<T>>();
    out.n_->value = std::move(v);
    return out;
  }
  static Var scalar(T v) { return constant(Tensor<T>::scalar(v)); }
  static Var param(Tensor<T> v) {
    Var out = constant(std::move(v));
    out.n_->requires_grad = true;
    return out;
  }

  bool defined() const { return n_ != nullptr; }
  const Tensor<T>& value() const { return n_->value; }
  const Tensor<T>& grad() const { return n_->grad; }
  bool has_grad() const { return n_->grad.numel() != 0; }
  bool requires_grad() const { return n_ && n_->requires_grad; }
  const Shape& shape() const { return n_->value.shape(); }

  /// Overwrite a leaf's value (optimizer update). Graphs built before the
  /// call keep their recorded values; rebuild the graph after stepping.
  void set_value(Tensor<T> v) {
    require(v.shape() == n_->value.shape(), "set_value: shape changed");
    n_->value = std::move(v);
  }
  std::vector<T>& value_vec() { return n_->value.vec(); }

  void zero_grad() { n_->grad = Tensor<T>(); }

  VarNode<T>* node() const { return n_.get(); }
  const std::shared_ptr<VarNode<T>>& handle() const { return n_; }

  template <typename U>
  friend Var<U> make_op(Tensor<U> value, std::type_identity_t<std::vector<Var<U>>> parents,
                        std::type_identity_t<BackpropFn<U>> back);

 private:
  std::shared_ptr<VarNode<T>> n_;
};

template <typename T>
Var<T> make_op(Tensor<T> value, std::type_identity_t<std::vector<Var<T>>> parents,
               std::type_identity_t<BackpropFn<T>> back) {
  Var<T> out;
  out.n_ = std::make_shared<VarNode<T>>();
  out.n_->value = std::move(value);
  for (const Var<T>& p : parents)
    if (p.requires_grad()) out.n_->requires_grad = true;
  if (out.n_->requires_grad) {
    out.n_->parents = std::move(parents);
    out.n_->backprop = std::move(back);
  }
  return out;
}

/// Populate gradients of every requires_grad ancestor of a scalar loss.
/// Repeated calls accumulate; reset with zero_grad on the leaves.
template <typename T>
void backward(const Var<T>& loss) {
  require(loss.defined() && loss.value().numel() == 1,
          "backward: loss must be a defined scalar");
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS for reverse topological order.
  std::vector<VarNode<T>*> order;
  std::unordered_set<VarNode<T>*> visited;
  std::vector<std::pair<VarNode<T>*, std::size_t>> stack;
  stack.push_back({loss.node(), 0});
  visited.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, child] = stack.back();
    if (child < node->parents.size()) {
      VarNode<T>* p = node->parents[child].node();
      ++child;
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->accum_grad(full(loss.value().shape(), T(1)));
  for (std::size_t i = order.size(); i-- > 0;) {
    VarNode<T>* node = order[i];
    if (!node->backprop) continue;
    if (node->grad.numel() == 0) continue;  // not on a path used by the loss
    node->backprop(node->grad, node->parents);
  }
  // Interior nodes are done; free their buffers so only leaves keep grads.
  for (VarNode<T>* node : order)
    if (node->backprop) node->grad = Tensor<T>();
}

// ---- elementwise binary ops with broadcasting -------------------------

namespace detail {

/// Reduce `g` (shaped `out`) back to `target` by summing broadcast axes.
template <typename T>
Tensor<T> reduce_to_shape(const Tensor<T>& g, const Shape& target) {
  if (g.shape() == target) return g;
  Tensor<T> r(target);
  BroadcastIter it(g.shape(), target, target);
  std::size_t i = 0;
  do {
    r[it.offset_a()] += g[i++];
  } while (it.next());
  return r;
}

/// Walk a broadcast output once, fusing the innermost axis into a tight
/// strided loop. fn receives (out_index, offset_a, offset_b).
template <typename T, typename Fn>
void for_each_broadcast(const Shape& os, const Shape& sa_shape, const Shape& sb_shape,
                        Fn fn) {
  if (os.empty()) {
    fn(std::size_t{0}, std::size_t{0}, std::size_t{0});
    return;
  }
  const Shape sa = broadcast_strides(sa_shape, os);
  const Shape sb = broadcast_strides(sb_shape, os);
  const std::size_t inner = os.back();
  const std::size_t step_a = sa.back(), step_b = sb.back();
  Shape outer(os.begin(), os.end() - 1);
  if (outer.empty()) {
    std::size_t oa = 0, ob = 0;
    for (std::size_t i = 0; i < inner; ++i, oa += step_a, ob += step_b) fn(i, oa, ob);
    return;
  }
  Shape idx(outer.size(), 0);
  std::size_t base_a = 0, base_b = 0, i = 0;
  for (;;) {
    std::size_t oa = base_a, ob = base_b;
    for (std::size_t k = 0; k < inner; ++k, oa += step_a, ob += step_b) fn(i++, oa, ob);
    for (std::size_t d = outer.size(); d-- > 0;) {
      ++idx[d];
      base_a += sa[d];
      base_b += sb[d];
      if (idx[d] < outer[d]) break;
      base_a -= sa[d] * outer[d];
      base_b -= sb[d] * outer[d];
      idx[d] = 0;
      if (d == 0) return;
    }
  }
}

template <typename T, typename FwdFn, typename BackFn>
Var<T> binary_op(const Var<T>& a, const Var<T>& b, FwdFn fwd, BackFn bk) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  Shape os = broadcast_shape(av.shape(), bv.shape());
  Tensor<T> out(os);
  if (av.shape() == bv.shape()) {
    for (std::size_t i = 0; i < out.numel(); ++i) fwd(out[i], av[i], bv[i]);
  } else {
    for_each_broadcast<T>(os, av.shape(), bv.shape(),
                          [&](std::size_t i, std::size_t oa, std::size_t ob) {
                            fwd(out[i], av[oa], bv[ob]);
                          });
  }
  return make_op(std::move(out), {a, b},
                 [bk](const Tensor<T>& g, std::vector<Var<T>>& ps) {
                   const Tensor<T>& av = ps[0].value();
                   const Tensor<T>& bv = ps[1].value();
                   const bool ga = ps[0].requires_grad();
                   const bool gb = ps[1].requires_grad();
                   Tensor<T> da, db;
                   if (ga) da = Tensor<T>(g.shape());
                   if (gb) db = Tensor<T>(g.shape());
                   if (av.shape() == bv.shape()) {
                     for (std::size_t i = 0; i < g.numel(); ++i) {
                       T xa{}, xb{};
                       bk(g[i], av[i], bv[i], xa, xb);
                       if (ga) da[i] = xa;
                       if (gb) db[i] = xb;
                     }
                   } else {
                     for_each_broadcast<T>(g.shape(), av.shape(), bv.shape(),
                                           [&](std::size_t i, std::size_t oa,
                                               std::size_t ob) {
                                             T xa{}, xb{};
                                             bk(g[i], av[oa], bv[ob], xa, xb);
                                             if (ga) da[i] = xa;
                                             if (gb) db[i] = xb;
                                           });
                   }
                   if (ga) ps[0].node()->accum_grad(reduce_to_shape(da, av.shape()));
                   if (gb) ps[1].node()->accum_grad(reduce_to_shape(db, bv.shape()));
                 });
}

template <typename T, typename FwdFn, typename BackFn>
Var<T> unary_op(const Var<T>& a, FwdFn fwd, BackFn bk) {
  const Tensor<T>& av = a.value();
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = fwd(av[i]);
  Tensor<T> saved = out;  // many rules reuse the forward value
  return make_op(std::move(out), {a},
                 [bk, saved](const Tensor<T>& g, std::vector<Var<T>>& ps) {
                   const Tensor<T>& av = ps[0].value();
                   Tensor<T> da(g.shape());
                   for (std::size_t i = 0; i < g.numel(); ++i)
                     da[i] = g[i] * bk(av[i], saved[i]);
                   ps[0].node()->accum_grad(da);
                 });
}

}  // namespace detail

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  return detail::binary_op(
      a, b, [](T& o, T x, T y) { o = x + y; },
      [](T g, T, T, T& da, T& db) { da = g; db = g; });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  return detail::binary_op(
      a, b, [](T& o, T x, T y) { o = x - y; },
      [](T g, T, T, T& da, T& db) { da = g; db = -g; });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  return detail::binary_op(
      a, b, [](T& o, T x, T y) { o = x * y; },
      [](T g, T x, T y, T& da, T& db) { da = g * y; db = g * x; });
}

template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
  return detail::binary_op(
      a, b, [](T& o, T x, T y) { o = x / y; },
      [](T g, T x, T y, T& da, T& db) {
        da = g / y;
        db = -g * x / (y * y);
      });
}

/// sqrt(a^2 + b^2), with gradient 0 at the origin (used for FFT amplitude).
template <typename T>
Var<T> hypot(const Var<T>& a, const Var<T>& b) {
  return detail::binary_op(
      a, b, [](T& o, T x, T y) { o = std::hypot(x, y); },
      [](T g, T x, T y, T& da, T& db) {
        const T h = std::hypot(x, y);
        if (h == T(0)) {
          da = T(0);
          db = T(0);
        } else {
          da = g * x / h;
          db = g * y / h;
        }
      });
}

/// atan2(y, x) elementwise, gradient 0 at the origin (FFT phase).
template <typename T>
Var<T> atan2(const Var<T>& y, const Var<T>& x) {
  return detail::binary_op(
      y, x, [](T& o, T yy, T xx) { o = std::atan2(yy, xx); },
      [](T g, T yy, T xx, T& dy, T& dx) {
        const T d = xx * xx + yy * yy;
        if (d == T(0)) {
          dy = T(0);
          dx = T(0);
        } else {
          dy = g * xx / d;
          dx = -g * yy / d;
        }
      });
}

template <typename T>
Var<T> exp(const Var<T>& a) {
  return detail::unary_op(
      a, [](T x) { return std::exp(x); }, [](T, T o) { return o; });
}

template <typename T>
Var<T> log(const Var<T>& a) {
  return detail::unary_op(
      a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
Var<T> abs(const Var<T>& a) {
  return detail::unary_op(
      a, [](T x) { return std::abs(x); },
      [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  return detail::unary_op(
      a, [](T x) { return x > T(0) ? x : T(0); },
      [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

/// Exact GeLU: x * Phi(x) with the Gaussian CDF.
template <typename T>
Var<T> gelu(const Var<T>& a) {
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  constexpr double inv_sqrt2pi = 0.3989422804014326779;
  return detail::unary_op(
      a,
      [=](T x) {
        const double xd = static_cast<double>(x);
        return static_cast<T>(xd * 0.5 * (1.0 + std::erf(xd * inv_sqrt2)));
      },
      [=](T x, T) {
        const double xd = static_cast<double>(x);
        const double phi = 0.5 * (1.0 + std::erf(xd * inv_sqrt2));
        const double pdf = inv_sqrt2pi * std::exp(-0.5 * xd * xd);
        return static_cast<T>(phi + xd * pdf);
      });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  return detail::unary_op(
      a,
      [](T x) {
        return x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                         : std::exp(x) / (T(1) + std::exp(x));
      },
      [](T, T o) { return o * (T(1) - o); });
}

template <typename T>
Var<T> softplus(const Var<T>& a) {
  return detail::unary_op(
      a,
      [](T x) {
        if (x > T(30)) return x;
        if (x < T(-30)) return std::exp(x);
        return std::log1p(std::exp(x));
      },
      [](T x, T) {
        return x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                         : std::exp(x) / (T(1) + std::exp(x));
      });
}

/// phi1(x) = (e^x - 1) / x, the exponential-integrator factor of the ZOH
/// input matrix; Taylor branch below |x| < 1e-6 keeps it smooth at 0.
template <typename T>
Var<T> phi1(const Var<T>& a) {
  auto f = [](T x) {
    const double xd = static_cast<double>(x);
    if (std::abs(xd) < 1e-6) return static_cast<T>(1.0 + xd / 2.0 + xd * xd / 6.0);
    return static_cast<T>(std::expm1(xd) / xd);
  };
  auto df = [](T x, T) {
    const double xd = static_cast<double>(x);
    if (std::abs(xd) < 1e-6) return static_cast<T>(0.5 + xd / 3.0 + xd * xd / 8.0);
    return static_cast<T>((std::exp(xd) * (xd - 1.0) + 1.0) / (xd * xd));
  };
  return detail::unary_op(a, f, df);
}

// ---- matmul ------------------------------------------------------------

namespace detail {

// C[m x n] += A[m x k] * B[k x n], optionally transposing either input.
template <typename T>
void gemm_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
              std::size_t n, bool ta, bool tb) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T aik = ta ? a[kk * m + i] : a[i * k + kk];
      if (aik == T(0)) continue;
      T* crow = c + i * n;
      if (!tb) {
        const T* brow = b + kk * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) crow[j] += aik * b[j * k + kk];
      }
    }
  }
}

}  // namespace detail

/// Matrix product. Supported layouts: 2Dx2D, 3Dx2D (shared right operand),
/// 2Dx3D (shared left operand), and 3Dx3D with equal batch.
template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  const std::size_t ra = av.rank(), rb = bv.rank();
  require((ra == 2 || ra == 3) && (rb == 2 || rb == 3),
          "matmul: ranks must be 2 or 3, got " + shape_str(av.shape()) + " x " +
              shape_str(bv.shape()));
  const std::size_t m = av.dim(ra - 2), k = av.dim(ra - 1);
  const std::size_t kb = bv.dim(rb - 2), n = bv.dim(rb - 1);
  require(k == kb, "matmul: inner dimensions differ: " + shape_str(av.shape()) +
                       " x " + shape_str(bv.shape()));
  std::size_t batch = 1;
  if (ra == 3) batch = av.dim(0);
  if (rb == 3) {
    require(ra == 2 || bv.dim(0) == batch, "matmul: batch dims differ");
    batch = bv.dim(0);
  }

  Shape os = (ra == 2 && rb == 2) ? Shape{m, n} : Shape{batch, m, n};
  Tensor<T> out(os);
  for (std::size_t bi = 0; bi < batch; ++bi) {
    const T* ap = av.data() + (ra == 3 ? bi * m * k : 0);
    const T* bp = bv.data() + (rb == 3 ? bi * k * n : 0);
    detail::gemm_acc(ap, bp, out.data() + (os.size() == 3 ? bi * m * n : 0), m, k,
                     n, false, false);
  }

  return make_op(std::move(out), {a, b},
                 [=](const Tensor<T>& g, std::vector<Var<T>>& ps) {
                   const Tensor<T>& av = ps[0].value();
                   const Tensor<T>& bv = ps[1].value();
                   if (ps[0].requires_grad()) {
                     Tensor<T> da(av.shape());
                     for (std::size_t bi = 0; bi < batch; ++bi) {
                       const T* gp = g.data() + (g.rank() == 3 ? bi * m * n : 0);
                       const T* bp = bv.data() + (rb == 3 ? bi * k * n : 0);
                       T* dp = da.data() + (ra == 3 ? bi * m * k : 0);
                       // dA = g * B^T
                       detail::gemm_acc(gp, bp, dp, m, n, k, false, true);
                     }
                     ps[0].node()->accum_grad(da);
                   }
                   if (ps[1].requires_grad()) {
                     Tensor<T> db(bv.shape());
                     for (std::size_t bi = 0; bi < batch; ++bi) {
                       const T* gp = g.data() + (g.rank() == 3 ? bi * m * n : 0);
                       const T* ap = av.data() + (ra == 3 ? bi * m * k : 0);
                       T* dp = db.data() + (rb == 3 ? bi * k * n : 0);
                       // dB = A^T * g
                       detail::gemm_acc(ap, gp, dp, k, m, n, true, false);
                     }
                     ps[1].node()->accum_grad(db);
                   }
                 });
}

// ---- shape ops ----------------------------------------------------------

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  const Tensor<T>& av = a.value();
  require(shape_numel(shape) == av.numel(),
          "reshape: element count mismatch " + shape_str(av.shape()) + " -> " +
              shape_str(shape));
  Tensor<T> out(shape, av.vec());
  Shape orig = av.shape();
  return make_op(std::move(out), {a},
                 [orig](const Tensor<T>& g, std::vector<Var<T>>& ps) {
                   ps[0].node()->accum_grad(Tensor<T>(orig, g.vec()));
                 });
}

template <typename T>
Var<T> transpose(const Var<T>& a, const std::vector<std::size_t>& perm) {
  const Tensor<T>& av = a.value();
  require(perm.size() == av.rank(), "transpose: perm rank mismatch");
  Shape os(av.rank());
  for (std::size_t i = 0; i < perm.size(); ++i) os[i] = av.dim(perm[i]);
  const Shape in_st = shape_strides(av.shape());
  Shape mapped(av.rank());
  for (std::size_t i = 0; i < perm.size(); ++i) mapped[i] = in_st[perm[i]];

  Tensor<T> out(os);
  Shape idx(av.rank(), 0);
  std::size_t src = 0;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out[i] = av[src];
    for (std::size_t d = os.size(); d-- > 0;) {
      ++idx[d];
      src += mapped[d];
      if (idx[d] < os[d]) break;
      src -= mapped[d] * os[d];
      idx[d] = 0;
    }
  }
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return make_op(std::move(out), {a},
                 [inv](const Tensor<T>& g, std::vector<Var<T>>& ps) {
                   Var<T> gc = Var<T>::constant(g);
                   ps[0].node()->accum_grad(transpose(gc, inv).value());
                 });
}

/// Swap the last two axes of a rank-2/3 tensor.
template <typename T>
Var<T> transpose_last2(const Var<T>& a) {
  if (a.value().rank() == 2) return transpose(a, {1, 0});
  return transpose(a, {0, 2, 1});
}

template <typename T>
Var<T> reverse(const Var<T>& a, std::size_t axis) {
  const Tensor<T>& av = a.value();
  require(axis < av.rank(), "reverse: axis out of range");
  const Shape st = shape_strides(av.shape());
  const std::size_t n = av.dim(axis);
  const std::size_t inner = st[axis];
  const std::size_t outer = av.numel() / (inner * n);
  Tensor<T> out(av.shape());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      for (std::size_t i = 0; i < n; ++i)
        out[base + i * inner] = av[base + (n - 1 - i) * inner];
    }
  return make_op(std::move(out), {a},
                 [axis](const Tensor<T>& g, std::vector<Var<T>>& ps) {
                   Var<T> gc = Var<T>::constant(g);
                   ps[0].node()->accum_grad(reverse(gc, axis).value());
                 });
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis) {
  require(!parts.empty(), "concat: no inputs");
  const Shape& s0 = parts[0].value().shape();
  require(axis < s0.size(), "concat: axis out of range");
  Shape os = s0;
  os[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.value().shape();
    require(s.size() == s0.size(), "concat: rank mismatch");
    for (std::size_t d = 0; d < s.size(); ++d)
      require(d == axis || s[d] == s0[d], "concat: shape mismatch on axis " +
                                              std::to_string(d));
    os[axis] += s[axis];
  }
  const Shape st = shape_strides(os);
  Tensor<T> out(os);
  const std::size_t inner = st[axis];
  const std::size_t outer = out.numel() / (inner * os[axis]);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const Tensor<T>& pv = p.value();
    const std::size_t len = pv.dim(axis);
    for (std::size_t o = 0; o < outer; ++o)
      std::copy(pv.data() + o * len * inner, pv.data() + (o + 1) * len * inner,
                out.data() + o * os[axis] * inner + off * inner);
    off += len;
  }
  return make_op(std::move(out), {parts.begin(), parts.end()},
                 [axis, os, inner, outer](const Tensor<T>& g, std::vector<Var<T>>& ps) {
                   std::size_t off = 0;
                   for (auto& p : ps) {
                     const std::size_t len = p.value().dim(axis);
                     if (p.requires_grad()) {
                       Tensor<T> dp(p.value().shape());
                       for (std::size_t o = 0; o < outer; ++o)
                         std::copy(g.data() + o * os[axis] * inner + off * inner,
                                   g.data() + o * os[axis] * inner + (off + len) * inner,
                                   dp.data() + o * len * inner);
                       p.node()->accum_grad(dp);
                     }
                     off += len;
                   }
                 });
}

template <typename T>
Var<T> slice(const Var<T>& a, std::size_t axis, std::size_t start, std::size_t len) {
  const Tensor<T>& av = a.value();
  require(axis < av.rank(), "slice: axis out of range");
  require(start + len <= av.dim(axis), "slice: range exceeds dimension");
  Shape os = av.shape();
  os[axis] = len;
  const Shape st = shape_strides(av.shape());
  const std::size_t inner = st[axis];
  const std::size_t outer = av.numel() / (inner * av.dim(axis));
  Tensor<T> out(os);
  for (std::size_t o = 0; o < outer; ++o)
    std::copy(av.data() + (o * av.dim(axis) + start) * inner,
              av.data() + (o * av.dim(axis) + start + len) * inner,
              out.data() + o * len * inner);
  const std::size_t full = av.dim(axis);
  return make_op(std::move(out), {a},
                 [axis, start, len, inner, outer, full](const Tensor<T>& g,
                                                        std::vector<Var<T>>& ps) {
                   Tensor<T> da(ps[0].value().shape());
                   for (std::size_t o = 0; o < outer; ++o)
                     std::copy(g.data() + o * len * inner,
                               g.data() + (o + 1) * len * inner,
                               da.data() + (o * full + start) * inner);
                   ps[0].node()->accum_grad(da);
                 });
}

// ---- reductions ----------------------------------------------------------

template <typename T>
Var<T> sum_all(const Var<T>& a) {
  const Tensor<T>& av = a.value();
  T s = T(0);
  for (std::size_t i = 0; i < av.numel(); ++i) s += av[i];
  return make_op(Tensor<T>::scalar(s), {a},
                 [](const Tensor<T>& g, std::vector<Var<T>>& ps) {
                   ps[0].node()->accum_grad(full(ps[0].value().shape(), g[0]));
                 });
}

template <typename T>
Var<T> mean_all(const Var<T>& a) {
  const T n = static_cast<T>(a.value().numel());
  return mul(sum_all(a), Var<T>::scalar(T(1) / n));
}

template <typename T>
Var<T> sum(const Var<T>& a, std::size_t axis, bool keepdim = false) {
  const Tensor<T>& av = a.value();
  require(axis < av.rank(), "sum: axis out of range");
  const Shape st = shape_strides(av.shape());
  const std::size_t n = av.dim(axis), inner = st[axis];
  const std::size_t outer = av.numel() / (inner * n);
  Shape os = av.shape();
  if (keepdim)
    os[axis] = 1;
  else
    os.erase(os.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor<T> out(os);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t in = 0; in < inner; ++in)
        out[o * inner + in] += av[(o * n + i) * inner + in];
  return make_op(std::move(out), {a},
                 [n, inner, outer](const Tensor<T>& g, std::vector<Var<T>>& ps) {
                   Tensor<T> da(ps[0].value().shape());
                   for (std::size_t o = 0; o < outer; ++o)
                     for (std::size_t i = 0; i < n; ++i)
                       for (std::size_t in = 0; in < inner; ++in)
                         da[(o * n + i) * inner + in] = g[o * inner + in];
                   ps[0].node()->accum_grad(da);
                 });
}

template <typename T>
Var<T> mean(const Var<T>& a, std::size_t axis, bool keepdim = false) {
  const T n = static_cast<T>(a.value().dim(axis));
  return mul(sum(a, axis, keepdim), Var<T>::scalar(T(1) / n));
}

// ---- softmax / layer norm -------------------------------------------------

template <typename T>
Var<T> softmax(const Var<T>& a, std::size_t axis) {
  const Tensor<T>& av = a.value();
  require(axis < av.rank(), "softmax: axis out of range");
  const Shape st = shape_strides(av.shape());
  const std::size_t n = av.dim(axis), inner = st[axis];
  const std::size_t outer = av.numel() / (inner * n);
  Tensor<T> out(av.shape());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      T mx = av[base];
      for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, av[base + i * inner]);
      T z = T(0);
      for (std::size_t i = 0; i < n; ++i) {
        const T e = std::exp(av[base + i * inner] - mx);
        out[base + i * inner] = e;
        z += e;
      }
      for (std::size_t i = 0; i < n; ++i) out[base + i * inner] /= z;
    }
  }
  Tensor<T> saved = out;
  return make_op(std::move(out), {a},
                 [saved, n, inner, outer](const Tensor<T>& g, std::vector<Var<T>>& ps) {
                   Tensor<T> da(g.shape());
                   for (std::size_t o = 0; o < outer; ++o) {
                     for (std::size_t in = 0; in < inner; ++in) {
                       const std::size_t base = o * n * inner + in;
                       T dot = T(0);
                       for (std::size_t i = 0; i < n; ++i)
                         dot += g[base + i * inner] * saved[base + i * inner];
                       for (std::size_t i = 0; i < n; ++i)
                         da[base + i * inner] =
                             saved[base + i * inner] * (g[base + i * inner] - dot);
                     }
                   }
                   ps[0].node()->accum_grad(da);
                 });
}

/// Parameter-free layer norm along `axis`: (x - mean) / sqrt(var + eps).
/// Learnable scale/shift are applied by callers as separate mul/add.
template <typename T>
Var<T> layer_norm(const Var<T>& a, std::size_t axis, T eps = T(1e-5)) {
  const Tensor<T>& av = a.value();
  require(axis < av.rank(), "layer_norm: axis out of range");
  const Shape st = shape_strides(av.shape());
  const std::size_t n = av.dim(axis), inner = st[axis];
  const std::size_t outer = av.numel() / (inner * n);
  Tensor<T> out(av.shape());
  Tensor<T> inv_std(Shape{outer, inner});
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      T mu = T(0);
      for (std::size_t i = 0; i < n; ++i) mu += av[base + i * inner];
      mu /= static_cast<T>(n);
      T var = T(0);
      for (std::size_t i = 0; i < n; ++i) {
        const T d = av[base + i * inner] - mu;
        var += d * d;
      }
      var /= static_cast<T>(n);
      const T is = T(1) / std::sqrt(var + eps);
      inv_std[o * inner + in] = is;
      for (std::size_t i = 0; i < n; ++i)
        out[base + i * inner] = (av[base + i * inner] - mu) * is;
    }
  }
  Tensor<T> saved = out;
  return make_op(
      std::move(out), {a},
      [saved, inv_std, n, inner, outer](const Tensor<T>& g, std::vector<Var<T>>& ps) {
        Tensor<T> da(g.shape());
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * n * inner + in;
            T gm = T(0), gym = T(0);
            for (std::size_t i = 0; i < n; ++i) {
              gm += g[base + i * inner];
              gym += g[base + i * inner] * saved[base + i * inner];
            }
            gm /= static_cast<T>(n);
            gym /= static_cast<T>(n);
            const T is = inv_std[o * inner + in];
            for (std::size_t i = 0; i < n; ++i)
              da[base + i * inner] =
                  is * (g[base + i * inner] - gm - saved[base + i * inner] * gym);
          }
        }
        ps[0].node()->accum_grad(da);
      });
}

// ---- dropout ---------------------------------------------------------------

/// Inverted dropout. Identity when train is false or p == 0; otherwise draws
/// a deterministic mask from rng (keep probability 1-p, kept values scaled).
template <typename T>
Var<T> dropout(const Var<T>& a, double p, bool train, Rng& rng) {
  require(p >= 0.0 && p < 1.0, "dropout: p must be in [0,1)");
  if (!train || p == 0.0) return a;
  const Tensor<T>& av = a.value();
  Tensor<T> mask(av.shape());
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  for (std::size_t i = 0; i < mask.numel(); ++i)
    mask[i] = rng.bernoulli(1.0 - p) ? scale : T(0);
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] * mask[i];
  return make_op(std::move(out), {a},
                 [mask](const Tensor<T>& g, std::vector<Var<T>>& ps) {
                   Tensor<T> da(g.shape());
                   for (std::size_t i = 0; i < g.numel(); ++i) da[i] = g[i] * mask[i];
                   ps[0].node()->accum_grad(da);
                 });
}

// ---- conv1d ---------------------------------------------------------------

/// 1-D convolution (cross-correlation), stride 1. x: B x Cin x L,
/// w: Cout x Cin x k, zero padding `pad` on both ends.
template <typename T>
Var<T> conv1d(const Var<T>& x, const Var<T>& w, std::size_t pad = 0) {
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = w.value();
  require(xv.rank() == 3 && wv.rank() == 3, "conv1d: x must be BxCinxL, w CoutxCinxk");
  const std::size_t B = xv.dim(0), Cin = xv.dim(1), L = xv.dim(2);
  const std::size_t Cout = wv.dim(0), k = wv.dim(2);
  require(wv.dim(1) == Cin, "conv1d: channel mismatch");
  require(L + 2 * pad >= k, "conv1d: kernel longer than padded input");
  const std::size_t Lo = L + 2 * pad - k + 1;
  Tensor<T> out(Shape{B, Cout, Lo});
  if (k == 1 && pad == 0) {
    // Pointwise channel mixing: a plain matrix product per batch item.
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t co = 0; co < Cout; ++co) {
        T* op = out.data() + (b * Cout + co) * Lo;
        for (std::size_t ci = 0; ci < Cin; ++ci) {
          const T wk = wv.data()[co * Cin + ci];
          if (wk == T(0)) continue;
          const T* xp = xv.data() + (b * Cin + ci) * L;
          for (std::size_t o = 0; o < Lo; ++o) op[o] += wk * xp[o];
        }
      }
  } else {
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t co = 0; co < Cout; ++co)
        for (std::size_t ci = 0; ci < Cin; ++ci) {
          const T* xp = xv.data() + (b * Cin + ci) * L;
          const T* wp = wv.data() + (co * Cin + ci) * k;
          T* op = out.data() + (b * Cout + co) * Lo;
          for (std::size_t o = 0; o < Lo; ++o) {
            T acc = T(0);
            for (std::size_t t = 0; t < k; ++t) {
              const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(o + t) -
                                         static_cast<std::ptrdiff_t>(pad);
              if (src >= 0 && src < static_cast<std::ptrdiff_t>(L))
                acc += xp[src] * wp[t];
            }
            op[o] += acc;
          }
        }
  }
  return make_op(
      std::move(out), {x, w},
      [B, Cin, Cout, L, Lo, k, pad](const Tensor<T>& g, std::vector<Var<T>>& ps) {
        const Tensor<T>& xv = ps[0].value();
        const Tensor<T>& wv = ps[1].value();
        if (ps[0].requires_grad()) {
          Tensor<T> dx(xv.shape());
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t co = 0; co < Cout; ++co)
              for (std::size_t ci = 0; ci < Cin; ++ci) {
                const T* gp = g.data() + (b * Cout + co) * Lo;
                const T* wp = wv.data() + (co * Cin + ci) * k;
                T* dp = dx.data() + (b * Cin + ci) * L;
                if (k == 1 && pad == 0) {
                  const T wk = wp[0];
                  for (std::size_t o = 0; o < Lo; ++o) dp[o] += gp[o] * wk;
                  continue;
                }
                for (std::size_t o = 0; o < Lo; ++o)
                  for (std::size_t t = 0; t < k; ++t) {
                    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(o + t) -
                                               static_cast<std::ptrdiff_t>(pad);
                    if (src >= 0 && src < static_cast<std::ptrdiff_t>(L))
                      dp[src] += gp[o] * wp[t];
                  }
              }
          ps[0].node()->accum_grad(dx);
        }
        if (ps[1].requires_grad()) {
          Tensor<T> dw(wv.shape());
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t co = 0; co < Cout; ++co)
              for (std::size_t ci = 0; ci < Cin; ++ci) {
                const T* gp = g.data() + (b * Cout + co) * Lo;
                const T* xp = xv.data() + (b * Cin + ci) * L;
                T* dp = dw.data() + (co * Cin + ci) * k;
                if (k == 1 && pad == 0) {
                  T acc = T(0);
                  for (std::size_t o = 0; o < Lo; ++o) acc += gp[o] * xp[o];
                  dp[0] += acc;
                  continue;
                }
                for (std::size_t o = 0; o < Lo; ++o)
                  for (std::size_t t = 0; t < k; ++t) {
                    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(o + t) -
                                               static_cast<std::ptrdiff_t>(pad);
                    if (src >= 0 && src < static_cast<std::ptrdiff_t>(L))
                      dp[t] += gp[o] * xp[src];
                  }
              }
          ps[1].node()->accum_grad(dw);
        }
      });
}

// ---- cumulative linear scan -------------------------------------------------

/// First-order linear recurrence along axis 1 of B x S x C tensors:
/// h_s = gain_s * h_{s-1} + input_s with h_{-1} = 0. The SSM recurrence and
/// its gradient both reduce to this primitive.
template <typename T>
Var<T> linear_scan(const Var<T>& gain, const Var<T>& input) {
  const Tensor<T>& gv = gain.value();
  const Tensor<T>& uv = input.value();
  require(gv.rank() == 3 && gv.shape() == uv.shape(),
          "linear_scan: gain and input must share a BxSxC shape");
  const std::size_t B = gv.dim(0), S = gv.dim(1), C = gv.dim(2);
  Tensor<T> h(gv.shape());
  for (std::size_t b = 0; b < B; ++b) {
    const T* gp = gv.data() + b * S * C;
    const T* up = uv.data() + b * S * C;
    T* hp = h.data() + b * S * C;
    for (std::size_t c = 0; c < C; ++c) hp[c] = up[c];
    for (std::size_t s = 1; s < S; ++s)
      for (std::size_t c = 0; c < C; ++c)
        hp[s * C + c] = gp[s * C + c] * hp[(s - 1) * C + c] + up[s * C + c];
  }
  Tensor<T> saved = h;
  return make_op(
      std::move(h), {gain, input},
      [B, S, C, saved](const Tensor<T>& g, std::vector<Var<T>>& ps) {
        const Tensor<T>& gv = ps[0].value();
        // delta_s = dL/dh_s + gain_{s+1} * delta_{s+1} (reverse-time scan);
        // dL/dinput_s = delta_s, dL/dgain_s = delta_s * h_{s-1}.
        Tensor<T> dgain, dinput;
        if (ps[0].requires_grad()) dgain = Tensor<T>(gv.shape());
        if (ps[1].requires_grad()) dinput = Tensor<T>(gv.shape());
        std::vector<T> delta(C);
        for (std::size_t b = 0; b < B; ++b) {
          const T* gp = gv.data() + b * S * C;
          const T* hp = saved.data() + b * S * C;
          const T* gg = g.data() + b * S * C;
          std::fill(delta.begin(), delta.end(), T(0));
          for (std::size_t s = S; s-- > 0;) {
            for (std::size_t c = 0; c < C; ++c) {
              delta[c] = gg[s * C + c] +
                         (s + 1 < S ? gp[(s + 1) * C + c] * delta[c] : T(0));
              if (dinput.numel()) dinput[(b * S + s) * C + c] = delta[c];
              if (dgain.numel())
                dgain[(b * S + s) * C + c] =
                    s > 0 ? delta[c] * hp[(s - 1) * C + c] : T(0);
            }
          }
        }
        if (dgain.numel()) ps[0].node()->accum_grad(dgain);
        if (dinput.numel()) ps[1].node()->accum_grad(dinput);
      });
}

// ---- operator sugar and composed helpers -----------------------------------

template <typename T>
Var<T> operator+(const Var<T>& a, const Var<T>& b) { return add(a, b); }
template <typename T>
Var<T> operator-(const Var<T>& a, const Var<T>& b) { return sub(a, b); }
template <typename T>
Var<T> operator*(const Var<T>& a, const Var<T>& b) { return mul(a, b); }
template <typename T>
Var<T> operator/(const Var<T>& a, const Var<T>& b) { return div(a, b); }
template <typename T>
Var<T> operator*(const Var<T>& a, T s) { return mul(a, Var<T>::scalar(s)); }
template <typename T>
Var<T> operator-(const Var<T>& a) { return mul(a, Var<T>::scalar(T(-1))); }

/// Elementwise minimum, composed from primitives: min(a,b) = b - relu(b - a).
template <typename T>
Var<T> minimum(const Var<T>& a, const Var<T>& b) {
  return sub(b, relu(sub(b, a)));
}

/// Clamp to [lo, hi], composed from relu shifts.
template <typename T>
Var<T> clamp(const Var<T>& x, T lo, T hi) {
  Var<T> l = Var<T>::scalar(lo);
  Var<T> h = Var<T>::scalar(hi);
  return add(l, sub(relu(sub(x, l)), relu(sub(x, h))));
}

/// y = x W + b applied along the last axis of x (b may be undefined).
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b = {}) {
  const Shape& xs = x.value().shape();
  require(!xs.empty() && w.value().rank() == 2, "linear: bad operands");
  require(xs.back() == w.value().dim(0),
          "linear: input width " + std::to_string(xs.back()) +
              " does not match weight rows " + std::to_string(w.value().dim(0)));
  Var<T> h;
  if (xs.size() == 2) {
    h = matmul(x, w);
  } else {
    std::size_t lead = 1;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) lead *= xs[i];
    Shape out_shape(xs.begin(), xs.end() - 1);
    out_shape.push_back(w.value().dim(1));
    h = reshape(matmul(reshape(x, {lead, xs.back()}), w), out_shape);
  }
  if (b.defined()) h = add(h, b);
  return h;
}

}  // namespace dkgcm::diff
