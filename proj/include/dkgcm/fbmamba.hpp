#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dkgcm/autodiff.hpp"
#include "dkgcm/optim.hpp"

namespace dkgcm {

// ---- real DFT utilities ----------------------------------------------------
//
// Direct O(L^2) transforms. Window lengths are tiny (L <= 64 in every
// supported configuration), so a radix FFT would buy nothing. Convention:
// unnormalized forward X_k = sum_t x_t e^{-2 pi i k t / L}, 1/L inverse.

inline std::size_t rfft_bins(std::size_t len) { return len / 2 + 1; }

/// Amplitude/phase of the non-negative-frequency bins of a real signal.
/// Phase lies in (-pi, pi].
inline void rfft_amp_phase(const std::vector<double>& x, std::vector<double>& amp,
                           std::vector<double>& phase) {
  const std::size_t len = x.size();
  require(len >= 1, "rfft: empty signal");
  const std::size_t bins = rfft_bins(len);
  amp.assign(bins, 0.0);
  phase.assign(bins, 0.0);
  for (std::size_t k = 0; k < bins; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const double ang = 2.0 * M_PI * static_cast<double>(k) *
                         static_cast<double>(t) / static_cast<double>(len);
      re += x[t] * std::cos(ang);
      im -= x[t] * std::sin(ang);
    }
    amp[k] = std::hypot(re, im);
    double ph = std::atan2(im, re);
    if (ph <= -M_PI) ph = M_PI;
    phase[k] = ph;
  }
}

/// Inverse transform from the half spectrum; reconstructs the original
/// signal of length `len` up to floating-point error.
inline std::vector<double> rfft_reconstruct(const std::vector<double>& amp,
                                            const std::vector<double>& phase,
                                            std::size_t len) {
  require(amp.size() == rfft_bins(len) && phase.size() == amp.size(),
          "rfft_reconstruct: bin count does not match length");
  std::vector<double> x(len, 0.0);
  for (std::size_t k = 0; k < amp.size(); ++k) {
    const double re = amp[k] * std::cos(phase[k]);
    const double im = amp[k] * std::sin(phase[k]);
    const bool shared = k == 0 || (len % 2 == 0 && k == len / 2);
    const double w = shared ? 1.0 : 2.0;
    for (std::size_t t = 0; t < len; ++t) {
      const double ang = 2.0 * M_PI * static_cast<double>(k) *
                         static_cast<double>(t) / static_cast<double>(len);
      x[t] += w * (re * std::cos(ang) - im * std::sin(ang));
    }
  }
  for (double& v : x) v /= static_cast<double>(len);
  return x;
}

/// Spectral energy matching sum_t x_t^2 under the convention above.
inline double rfft_energy(const std::vector<double>& amp, std::size_t len) {
  double e = 0.0;
  for (std::size_t k = 0; k < amp.size(); ++k) {
    const bool shared = k == 0 || (len % 2 == 0 && k == len / 2);
    e += (shared ? 1.0 : 2.0) * amp[k] * amp[k];
  }
  return e / static_cast<double>(len);
}

/// Batch decomposition of B x N x L signals into amplitude and phase,
/// each B x N x K with K = L/2 + 1.
template <typename T>
std::pair<diff::Tensor<T>, diff::Tensor<T>> fft_decompose(const diff::Tensor<T>& x) {
  require(x.rank() == 3, "fft_decompose: expected B x N x L");
  const std::size_t b = x.dim(0), n = x.dim(1), len = x.dim(2);
  const std::size_t bins = rfft_bins(len);
  diff::Tensor<T> amp(diff::Shape{b, n, bins});
  diff::Tensor<T> phase(diff::Shape{b, n, bins});
  std::vector<double> sig(len), a, p;
  for (std::size_t i = 0; i < b * n; ++i) {
    for (std::size_t t = 0; t < len; ++t)
      sig[t] = static_cast<double>(x[i * len + t]);
    rfft_amp_phase(sig, a, p);
    for (std::size_t k = 0; k < bins; ++k) {
      amp[i * bins + k] = static_cast<T>(a[k]);
      phase[i * bins + k] = static_cast<T>(p[k]);
    }
  }
  return {std::move(amp), std::move(phase)};
}

// ---- zero-order-hold discretization ----------------------------------------

/// ZOH step for one diagonal element: abar = exp(delta a),
/// bbar = (delta a)^{-1} (exp(delta a) - 1) delta b. Requires delta > 0 and
/// a < 0; switches to the series limit below |delta a| < 1e-6 so that
/// delta -> 0 gives abar -> 1, bbar -> delta b.
inline std::pair<double, double> ssm_discretize(double delta, double a, double b) {
  require(delta > 0.0, "ssm_discretize: delta must be positive");
  require(a < 0.0, "ssm_discretize: a must be negative");
  const double da = delta * a;
  const double abar = std::exp(da);
  double factor;  // (exp(da) - 1) / da
  if (std::abs(da) < 1e-6) {
    factor = 1.0 + da / 2.0 + da * da / 6.0;
  } else {
    factor = std::expm1(da) / da;
  }
  return {abar, factor * delta * b};
}

// ---- trainable layers --------------------------------------------------

namespace diffops {

using diff::ParameterStore;
using diff::Shape;
using diff::Tensor;
using diff::Var;
using diff::concat;
using diff::slice;

template <typename T>
Tensor<T> uniform_init(Shape shape, double bound, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

/// Look a parameter up in the store when training, or wrap the snapshot
/// value as a constant when replaying a frozen policy.
template <typename T>
class ParamSource {
 public:
  explicit ParamSource(ParameterStore<T>& store, Rng& rng)
      : store_(&store), rng_(&rng) {}
  explicit ParamSource(const std::map<std::string, Tensor<T>>& values)
      : values_(&values) {}

  Var<T> get(const std::string& name, const std::function<Tensor<T>()>& init) const {
    if (store_) {
      if (store_->contains(name)) return store_->get(name);
      return store_->create(name, init());
    }
    auto it = values_->find(name);
    require(it != values_->end(), "snapshot is missing parameter " + name);
    return Var<T>::constant(it->second);
  }

  Rng& rng() const {
    require(rng_ != nullptr, "ParamSource: no rng in snapshot mode");
    return *rng_;
  }

 private:
  ParameterStore<T>* store_ = nullptr;
  Rng* rng_ = nullptr;
  const std::map<std::string, Tensor<T>>* values_ = nullptr;
};

// ---- FFT embedding (time/frequency fusion) ---------------------------------

template <typename T>
struct FftEmbedParams {
  Var<T> wt, bt;            // time projection L -> d_h
  Var<T> wf, bf;            // frequency projection 2K -> d_h
  Var<T> wg, bg;            // 2 d_h -> 2 fusion gate logits
  Var<T> ln_scale, ln_shift;
  Var<T> dft_cos, dft_nsin;  // constant L x K transform matrices
  double dropout_p = 0.1;
  std::size_t seq_len = 0;

  static FftEmbedParams build(const ParamSource<T>& src, const std::string& prefix,
                              std::size_t seq_len, std::size_t d_h, double dropout_p) {
    FftEmbedParams p;
    p.seq_len = seq_len;
    p.dropout_p = dropout_p;
    const std::size_t bins = rfft_bins(seq_len);
    auto uni = [&](Shape shape, std::size_t fan_in) {
      return [&src, shape, fan_in]() {
        return uniform_init<T>(shape, 1.0 / std::sqrt(static_cast<double>(fan_in)),
                               src.rng());
      };
    };
    p.wt = src.get(prefix + "/time_w", uni({seq_len, d_h}, seq_len));
    p.bt = src.get(prefix + "/time_b", uni({d_h}, seq_len));
    p.wf = src.get(prefix + "/freq_w", uni({2 * bins, d_h}, 2 * bins));
    p.bf = src.get(prefix + "/freq_b", uni({d_h}, 2 * bins));
    p.wg = src.get(prefix + "/gate_w", uni({2 * d_h, 2}, 2 * d_h));
    p.bg = src.get(prefix + "/gate_b", uni({2}, 2 * d_h));
    p.ln_scale = src.get(prefix + "/ln_scale",
                         [d_h] { return diff::full<T>({d_h}, T(1)); });
    p.ln_shift = src.get(prefix + "/ln_shift",
                         [d_h] { return Tensor<T>(Shape{d_h}); });

    Tensor<T> cosm(Shape{seq_len, bins});
    Tensor<T> nsinm(Shape{seq_len, bins});
    for (std::size_t t = 0; t < seq_len; ++t)
      for (std::size_t k = 0; k < bins; ++k) {
        const double ang = 2.0 * M_PI * static_cast<double>(k) *
                           static_cast<double>(t) / static_cast<double>(seq_len);
        cosm[t * bins + k] = static_cast<T>(std::cos(ang));
        nsinm[t * bins + k] = static_cast<T>(-std::sin(ang));
      }
    p.dft_cos = Var<T>::constant(std::move(cosm));
    p.dft_nsin = Var<T>::constant(std::move(nsinm));
    return p;
  }
};

/// Fused time/frequency embedding: a learned 2-way softmax gate blends the
/// time projection with a projection of the amplitude+phase spectrum, then
/// dropout and layer norm.
template <typename T>
Var<T> fft_embed(const Var<T>& x, const FftEmbedParams<T>& p, bool train, Rng& rng) {
  require(x.value().rank() == 3 && x.value().dim(2) == p.seq_len,
          "fft_embed: expected B x N x L input with L = " + std::to_string(p.seq_len));
  Var<T> tfeat = linear(x, p.wt, p.bt);
  Var<T> re = matmul(x, p.dft_cos);
  Var<T> im = matmul(x, p.dft_nsin);
  Var<T> amp = diff::hypot(re, im);
  Var<T> phase = diff::atan2(im, re);
  Var<T> ffeat = linear(concat<T>({amp, phase}, 2), p.wf, p.bf);
  Var<T> logits = linear(concat<T>({tfeat, ffeat}, 2), p.wg, p.bg);
  Var<T> alpha = softmax(logits, 2);
  Var<T> z = add(mul(slice(alpha, 2, 0, 1), tfeat), mul(slice(alpha, 2, 1, 1), ffeat));
  z = dropout(z, p.dropout_p, train, rng);
  return add(mul(layer_norm(z, 2), p.ln_scale), p.ln_shift);
}

// ---- selective scan ----------------------------------------------------

template <typename T>
struct MambaDirParams {
  Var<T> a_log;       // d_inner x d_state; A = -exp(a_log)
  Var<T> wd, bd;      // delta projection d_inner -> d_inner (+ bias)
  Var<T> wb, wc;      // B/C projections d_inner -> d_state
  Var<T> wo;          // output mixing d_inner -> d_inner, bias-free so the
                      // block is zero-preserving
  std::size_t d_inner = 0, d_state = 0;

  static MambaDirParams build(const ParamSource<T>& src, const std::string& prefix,
                              std::size_t d_inner, std::size_t d_state) {
    MambaDirParams p;
    p.d_inner = d_inner;
    p.d_state = d_state;
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_inner));
    auto uni = [&](Shape shape) {
      return [&src, shape, bound]() { return uniform_init<T>(shape, bound, src.rng()); };
    };
    p.a_log = src.get(prefix + "/a_log", [d_inner, d_state]() {
      // S4D-real style: state n decays at rate n+1.
      Tensor<T> t(Shape{d_inner, d_state});
      for (std::size_t c = 0; c < d_inner; ++c)
        for (std::size_t s = 0; s < d_state; ++s)
          t[c * d_state + s] = static_cast<T>(std::log(static_cast<double>(s + 1)));
      return t;
    });
    p.wd = src.get(prefix + "/delta_w", uni({d_inner, d_inner}));
    p.bd = src.get(prefix + "/delta_b", [&src, d_inner]() {
      // softplus(bias) lands in [0.01, 0.1].
      Tensor<T> t(Shape{d_inner});
      for (std::size_t i = 0; i < d_inner; ++i) {
        const double dt = std::exp(src.rng().uniform(std::log(0.01), std::log(0.1)));
        t[i] = static_cast<T>(std::log(std::expm1(dt)));
      }
      return t;
    });
    p.wb = src.get(prefix + "/b_w", uni({d_inner, d_state}));
    p.wc = src.get(prefix + "/c_w", uni({d_inner, d_state}));
    p.wo = src.get(prefix + "/out_w", uni({d_inner, d_inner}));
    return p;
  }
};

/// Input-selective SSM recurrence over axis 1 of U (B x S x d_inner):
///   delta_s = softplus(U_s Wd + bd), B_s = U_s Wb, C_s = U_s Wc,
///   abar = exp(delta A), bbar_u = phi1(delta A) * delta * B_s * U_s,
///   h_s = abar h_{s-1} + bbar_u,  y_s[c] = sum_n C_s[n] h_s[c,n].
template <typename T>
Var<T> selective_scan(const Var<T>& u, const MambaDirParams<T>& p) {
  const auto& us = u.value().shape();
  require(us.size() == 3 && us[2] == p.d_inner,
          "selective_scan: expected B x S x d_inner input");
  const std::size_t b = us[0], s = us[1], c = p.d_inner, n = p.d_state;

  Var<T> delta = softplus(linear(u, p.wd, p.bd));          // B x S x C
  Var<T> bsel = linear(u, p.wb);                           // B x S x N
  Var<T> csel = linear(u, p.wc);                           // B x S x N
  Var<T> a = -diff::exp(p.a_log);                          // C x N, strictly negative

  Var<T> delta4 = reshape(delta, {b, s, c, 1});
  Var<T> u4 = reshape(u, {b, s, c, 1});
  Var<T> bsel4 = reshape(bsel, {b, s, 1, n});
  Var<T> csel4 = reshape(csel, {b, s, 1, n});

  Var<T> da = mul(delta4, a);                              // B x S x C x N
  Var<T> abar = diff::exp(da);
  Var<T> input = mul(mul(phi1(da), mul(delta4, u4)), bsel4);

  Var<T> h = linear_scan(reshape(abar, {b, s, c * n}), reshape(input, {b, s, c * n}));
  h = reshape(h, {b, s, c, n});
  return sum(mul(h, csel4), 3);                            // B x S x C
}

/// One scan direction followed by its output mixing layer.
template <typename T>
Var<T> mamba_direction(const Var<T>& u, const MambaDirParams<T>& p) {
  return linear(selective_scan(u, p), p.wo);
}

enum class ScanAxis { Embedding, Node };

inline ScanAxis parse_scan_axis(const std::string& name) {
  if (name == "embedding") return ScanAxis::Embedding;
  if (name == "node") return ScanAxis::Node;
  fail("unknown scan axis '" + name + "' (expected embedding or node)");
}

/// Forward scan plus reversed backward scan, summed:
/// Y = F(Z) + reverse(Bwd(reverse(Z))). With the embedding scan axis the
/// latent d_h dimension is treated as the sequence (channels = nodes);
/// with the node axis the nodes are the sequence (channels = d_h).
template <typename T>
Var<T> bidirectional_mamba(const Var<T>& z, const MambaDirParams<T>& fwd,
                           const MambaDirParams<T>& bwd, ScanAxis axis) {
  Var<T> u = axis == ScanAxis::Embedding ? transpose(z, {0, 2, 1}) : z;
  Var<T> yf = mamba_direction(u, fwd);
  Var<T> yr = reverse(mamba_direction(reverse(u, 1), bwd), 1);
  Var<T> y = add(yf, yr);
  return axis == ScanAxis::Embedding ? transpose(y, {0, 2, 1}) : y;
}

// ---- output head ---------------------------------------------------------

template <typename T>
struct OutputHeadParams {
  Var<T> ln1_scale, ln1_shift;
  Var<T> conv1_w, conv1_b;  // d_h -> d_h pointwise conv
  Var<T> conv2_w, conv2_b;
  Var<T> ln2_scale, ln2_shift;
  Var<T> w_out, b_out;      // d_h -> F per node
  std::size_t d_h = 0, horizon = 0;

  static OutputHeadParams build(const ParamSource<T>& src, const std::string& prefix,
                                std::size_t d_h, std::size_t horizon) {
    OutputHeadParams p;
    p.d_h = d_h;
    p.horizon = horizon;
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_h));
    auto uni = [&](Shape shape) {
      return [&src, shape, bound]() { return uniform_init<T>(shape, bound, src.rng()); };
    };
    auto ones = [d_h] { return diff::full<T>({d_h}, T(1)); };
    auto zeros = [d_h] { return Tensor<T>(Shape{d_h}); };
    p.ln1_scale = src.get(prefix + "/ln1_scale", ones);
    p.ln1_shift = src.get(prefix + "/ln1_shift", zeros);
    p.conv1_w = src.get(prefix + "/conv1_w", uni({d_h, d_h, 1}));
    p.conv1_b = src.get(prefix + "/conv1_b", uni({d_h, 1}));
    p.conv2_w = src.get(prefix + "/conv2_w", uni({d_h, d_h, 1}));
    p.conv2_b = src.get(prefix + "/conv2_b", uni({d_h, 1}));
    p.ln2_scale = src.get(prefix + "/ln2_scale", ones);
    p.ln2_shift = src.get(prefix + "/ln2_shift", zeros);
    p.w_out = src.get(prefix + "/out_w", uni({d_h, horizon}));
    p.b_out = src.get(prefix + "/out_b", uni({horizon}));
    return p;
  }
};

/// Two pointwise convolutions with a GeLU between them, layer norms on both
/// sides, then the horizon projection: B x N x d_h -> B x N x F.
template <typename T>
Var<T> output_head(const Var<T>& y, const OutputHeadParams<T>& p) {
  Var<T> h = add(mul(layer_norm(y, 2), p.ln1_scale), p.ln1_shift);
  Var<T> ht = transpose(h, {0, 2, 1});  // B x d_h x N: channels are features
  Var<T> c1 = add(conv1d(ht, p.conv1_w), p.conv1_b);
  Var<T> c2 = add(conv1d(gelu(c1), p.conv2_w), p.conv2_b);
  Var<T> x1 = transpose(c2, {0, 2, 1});
  Var<T> z = add(mul(layer_norm(x1, 2), p.ln2_scale), p.ln2_shift);
  return linear(z, p.w_out, p.b_out);
}

}  // namespace diffops

}  // namespace dkgcm
