// Acceptance suite: one verdict line per criterion, nonzero exit if any
// fails. Criteria 1-7 and 9 are property/oracle checks; criterion 8 is the
// scaled synthetic end-to-end run (several minutes on two cores).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <string>
#include <vector>

#include "dkgcm/config.hpp"
#include "dkgcm/fbmamba.hpp"
#include "dkgcm/synthdata.hpp"
#include "dkgcm/trainer.hpp"
#include "../tests/test_support.hpp"

using namespace dkgcm;
using namespace dkgcm::diff;
using diff::Shape;
using diff::Tensor;
using diff::Var;

namespace {

class Harness {
 public:
  void report(int num, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s%s%s\n", pass ? "PASS" : "FAIL", num,
                name.c_str(), detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures_;
  }
  int failures() const { return failures_; }

 private:
  int failures_ = 0;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
  char buf[256];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// ---- criterion 1: DTW vs exhaustive path enumeration -----------------------

void criterion_dtw(Harness& h) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2024);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(1 + rng.index(8)), b(1 + rng.index(8));
    for (auto& v : a) v = std::floor(rng.uniform(-5, 6));
    for (auto& v : b) v = std::floor(rng.uniform(-5, 6));
    const double got = dtw_distance(a, b);
    const double want = testsupport::dtw_bruteforce(a, b);
    if (got != want) ++mismatches;  // integer-valued data: exact equality
  }
  const double secs = seconds_since(t0);
  h.report(1, "DTW equals exhaustive alignment enumeration (200 pairs)",
           mismatches == 0 && secs < 10.0,
           fmt("%d mismatches, %.2f s", mismatches, secs));
}

// ---- criterion 2: Chebyshev spectral identity ------------------------------

void criterion_chebyshev(Harness& h) {
  Rng rng(7);
  double worst = 0.0;
  for (int trial = 0; trial < 25; ++trial) {
    Matrix adj(4, 4);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = i + 1; j < 4; ++j)
        if (rng.uniform(0, 1) < 0.7) {
          const double w = rng.uniform(0.2, 2.0);
          adj.at(i, j) = w;
          adj.at(j, i) = w;
        }
    NormalizedOperator op = normalized_laplacian(adj);
    auto basis = cheb_basis(op.l_scaled, 6);  // T_0 .. T_5
    Matrix vecs;
    auto eig = testsupport::jacobi_eigen(op.l_scaled, &vecs);
    for (std::size_t k = 0; k < basis.size(); ++k)
      for (std::size_t e = 0; e < 4; ++e) {
        const double lambda = std::clamp(eig[e], -1.0, 1.0);
        const double expected = std::cos(static_cast<double>(k) * std::acos(lambda));
        for (std::size_t r = 0; r < 4; ++r) {
          double got = 0;
          for (std::size_t c = 0; c < 4; ++c) got += basis[k].at(r, c) * vecs.at(c, e);
          worst = std::max(worst, std::abs(got - expected * vecs.at(r, e)));
        }
      }
  }
  h.report(2, "Chebyshev operators act as cos(k acos lambda) on the spectrum",
           worst < 1e-9, fmt("max |T_k v - cos v| = %.2e", worst));
}

// ---- criterion 3: FFT round trip, Parseval, bin count ----------------------

void criterion_fft(Harness& h) {
  Rng rng(11);
  double worst_rt = 0.0, worst_pv = 0.0;
  bool bins_ok = true;
  for (std::size_t len : {8u, 12u, 13u, 64u}) {
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> sig(len), amp, phase;
      for (auto& v : sig) v = rng.uniform(-3, 3);
      rfft_amp_phase(sig, amp, phase);
      bins_ok = bins_ok && amp.size() == len / 2 + 1;
      auto back = rfft_reconstruct(amp, phase, len);
      double energy = 0;
      for (std::size_t t = 0; t < len; ++t) {
        worst_rt = std::max(worst_rt, std::abs(back[t] - sig[t]));
        energy += sig[t] * sig[t];
      }
      worst_pv = std::max(worst_pv, std::abs(rfft_energy(amp, len) - energy));
    }
  }
  h.report(3, "FFT round trip and Parseval within 1e-6, K = L/2+1",
           bins_ok && worst_rt < 1e-6 && worst_pv < 1e-6,
           fmt("round-trip %.2e, Parseval %.2e", worst_rt, worst_pv));
}

// ---- criterion 4: gradient checks -------------------------------------------

void criterion_gradients(Harness& h) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_prim = 0.0;
  bool prim_pass = true;
  std::string first_fail;

  auto check = [&](const char* name, const std::function<Var<double>(
                                         diff::ParameterStore<double>&, Rng&, int)>& build,
                   double tol = 1e-4) {
    for (int trial = 0; trial < 5; ++trial) {
      diff::ParameterStore<double> store;
      Rng rng(500 + static_cast<std::uint64_t>(trial));
      auto f = [&] { return build(store, rng, trial); };
      f();
      auto report = diff::grad_check<double>(f, store, 1e-5, tol);
      worst_prim = std::max(worst_prim, report.max_rel_err);
      if (!report.pass && prim_pass) {
        prim_pass = false;
        first_fail = name;
      }
    }
  };

  auto make = [](diff::ParameterStore<double>& store, const char* name, Shape shape,
                 Rng& rng, double lo, double hi) {
    if (store.contains(name)) return store.get(name);
    Tensor<double> t(shape);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return store.create(name, std::move(t));
  };
  auto weigh = [](const Var<double>& v) {
    Rng wrng(9);
    Tensor<double> w(v.value().shape());
    for (std::size_t i = 0; i < w.numel(); ++i) w[i] = wrng.uniform(-1, 1);
    return sum_all(mul(v, Var<double>::constant(w)));
  };

  using PS = diff::ParameterStore<double>;
  check("matmul", [&](PS& s, Rng& r, int trial) {
    Shape sa = trial % 2 ? Shape{2, 3, 4} : Shape{3, 4};
    Shape sb = trial % 3 ? Shape{4, 2} : Shape{2, 4, 2};
    if (sa.size() == 2 && sb.size() == 3) sa = {2, 3, 4};
    return weigh(matmul(make(s, "a", sa, r, -1, 1), make(s, "b", sb, r, -1, 1)));
  });
  check("add_mul_div_sub", [&](PS& s, Rng& r, int) {
    auto a = make(s, "a", {2, 3, 4}, r, 0.5, 1.5);
    auto b = make(s, "b", {4}, r, 0.5, 1.5);
    return weigh(div(mul(add(a, b), sub(a, b)), b));
  });
  check("exp_log_abs", [&](PS& s, Rng& r, int) {
    auto a = make(s, "a", {3, 4}, r, 0.4, 1.6);
    return weigh(diff::log(add(diff::exp(a), diff::abs(a))));
  });
  check("activations", [&](PS& s, Rng& r, int) {
    auto a = make(s, "a", {3, 5}, r, -2, 2);
    return weigh(add(add(relu(a), gelu(a)), add(sigmoid(a), softplus(a))));
  });
  check("softmax_layer_norm", [&](PS& s, Rng& r, int trial) {
    auto a = make(s, "a", {2, 3, 4}, r, -1, 1);
    const std::size_t axis = static_cast<std::size_t>(trial % 3);
    return weigh(add(softmax(a, axis), layer_norm(a, axis)));
  });
  check("shape_ops", [&](PS& s, Rng& r, int trial) {
    auto a = make(s, "a", {2, 3, 4}, r, -1, 1);
    auto t = transpose(a, {2, 0, 1});
    auto rv = reverse(reshape(t, {4, 6}), static_cast<std::size_t>(trial % 2));
    auto cc = diff::concat<double>({rv, rv}, 1);
    return weigh(diff::slice(cc, 1, 2, 6));
  });
  check("reductions", [&](PS& s, Rng& r, int trial) {
    auto a = make(s, "a", {2, 3, 4}, r, -1, 1);
    return add(weigh(sum(a, static_cast<std::size_t>(trial % 3))), mean_all(a));
  });
  check("conv1d", [&](PS& s, Rng& r, int trial) {
    auto x = make(s, "x", {2, 3, 6}, r, -1, 1);
    auto w = make(s, "w", {4, 3, 1 + static_cast<std::size_t>(trial % 3)}, r, -1, 1);
    return weigh(conv1d(x, w, static_cast<std::size_t>(trial % 2)));
  });
  check("linear_scan", [&](PS& s, Rng& r, int) {
    auto g = make(s, "g", {2, 5, 3}, r, 0.1, 0.9);
    auto u = make(s, "u", {2, 5, 3}, r, -1, 1);
    return weigh(linear_scan(g, u));
  });
  check("hypot_atan2_phi1", [&](PS& s, Rng& r, int) {
    auto a = make(s, "a", {3, 4}, r, 0.3, 1.5);
    auto b = make(s, "b", {3, 4}, r, 0.3, 1.5);
    return weigh(add(diff::hypot(a, b), add(diff::atan2(a, b), phi1(sub(a, b)))));
  });

  // Composite model at the sizes the criterion pins:
  // B=2, N=4, L=8, d_h=8, d_state=4, F=3.
  ModelConfig mc;
  mc.seq_len = 8;
  mc.horizon = 3;
  mc.hidden_dim = 8;
  mc.d_state = 4;
  mc.dropout = 0.0;
  Matrix adj(4, 4);
  auto edge = [&](std::size_t i, std::size_t j) {
    adj.at(i, j) = 1.0;
    adj.at(j, i) = 1.0;
  };
  edge(0, 1);
  edge(1, 2);
  edge(2, 3);
  edge(0, 2);
  diff::ParameterStore<double> store;
  Rng rng(77);
  diffops::ParamSource<double> src(store, rng);
  auto model = ClusterModel<double>::build(src, "m", mc, adj);
  Tensor<double> x = random_tensor({2, 4, 8}, rng);
  Rng drng(0);
  auto f = [&] { return mean_all(model.forward(x, false, drng)); };
  auto composite = diff::grad_check<double>(f, store, 1e-5, 1e-3);

  const double secs = seconds_since(t0);
  h.report(4, "finite-difference checks: primitives at 1e-4, composite at 1e-3",
           prim_pass && composite.pass && secs < 60.0,
           fmt("primitive worst %.2e%s%s, composite worst %.2e, %.1f s", worst_prim,
               first_fail.empty() ? "" : " FAILED at ", first_fail.c_str(),
               composite.max_rel_err, secs));
}

// ---- criterion 5: SSM properties --------------------------------------------

void criterion_ssm(Harness& h) {
  Rng rng(13);
  bool abar_ok = true;
  for (int trial = 0; trial < 500; ++trial) {
    const double delta = std::exp(rng.uniform(-8, 3));
    const double a = -std::exp(rng.uniform(-4, 3));
    auto [abar, bbar] = ssm_discretize(delta, a, rng.uniform(-2, 2));
    abar_ok = abar_ok && abar > 0.0 && abar < 1.0;
  }

  auto [a0, b0] = ssm_discretize(1e-10, -3.0, 2.0);
  const bool limit_ok =
      std::abs(a0 - 1.0) < 1e-8 && std::abs(b0 - 1e-10 * 2.0) < 1e-16;

  // Linearity of the fixed-parameter scan (constants driven by an
  // always-one channel; channel 0 carries the signal).
  std::map<std::string, Tensor<double>> vals;
  vals["q/a_log"] = Tensor<double>(Shape{2, 3}, {0.1, 0.4, -0.3, 0.0, 0.2, -0.5});
  vals["q/delta_w"] = Tensor<double>(Shape{2, 2});
  vals["q/delta_b"] = Tensor<double>(Shape{2}, {0.3, -0.2});
  vals["q/b_w"] = Tensor<double>(Shape{2, 3}, {0, 0, 0, 0.7, -0.4, 0.9});
  vals["q/c_w"] = Tensor<double>(Shape{2, 3}, {0, 0, 0, 0.6, 1.1, -0.8});
  vals["q/out_w"] = Tensor<double>(Shape{2, 2}, {1, 0, 0, 1});
  diffops::ParamSource<double> src(vals);
  auto params = diffops::MambaDirParams<double>::build(src, "q", 2, 3);
  auto embed = [&](const std::vector<double>& sig) {
    Tensor<double> u(Shape{1, 6, 2});
    for (std::size_t s = 0; s < 6; ++s) {
      u[s * 2] = sig[s];
      u[s * 2 + 1] = 1.0;
    }
    return u;
  };
  double lin_err = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> s1(6), s2(6), sc(6);
    const double ca = rng.uniform(-2, 2), cb = rng.uniform(-2, 2);
    for (std::size_t i = 0; i < 6; ++i) {
      s1[i] = rng.uniform(-1, 1);
      s2[i] = rng.uniform(-1, 1);
      sc[i] = ca * s1[i] + cb * s2[i];
    }
    auto y1 = diffops::selective_scan(Var<double>::constant(embed(s1)), params).value();
    auto y2 = diffops::selective_scan(Var<double>::constant(embed(s2)), params).value();
    auto yc = diffops::selective_scan(Var<double>::constant(embed(sc)), params).value();
    for (std::size_t s = 0; s < 6; ++s)
      lin_err = std::max(lin_err,
                         std::abs(yc[s * 2] - (ca * y1[s * 2] + cb * y2[s * 2])));
  }

  // Tied-parameter bidirectional reversal equivariance.
  diff::ParameterStore<double> store;
  Rng prng(17);
  diffops::ParamSource<double> psrc(store, prng);
  auto dir = diffops::MambaDirParams<double>::build(psrc, "d", 3, 4);
  Tensor<double> z = random_tensor({2, 3, 7}, prng);
  auto yx = diffops::bidirectional_mamba(Var<double>::constant(z), dir, dir,
                                         diffops::ScanAxis::Embedding);
  auto yrev = diffops::bidirectional_mamba(reverse(Var<double>::constant(z), 2), dir,
                                           dir, diffops::ScanAxis::Embedding);
  auto ryx = reverse(yx, 2);
  double equi_err = 0.0;
  for (std::size_t i = 0; i < z.numel(); ++i)
    equi_err = std::max(equi_err, std::abs(yrev.value()[i] - ryx.value()[i]));

  // Bounded state over 10000 steps.
  std::map<std::string, Tensor<double>> svals;
  svals["p/a_log"] = Tensor<double>(Shape{1, 1}, {0.0});
  svals["p/delta_w"] = Tensor<double>(Shape{1, 1}, {0.0});
  svals["p/delta_b"] = Tensor<double>(Shape{1}, {std::log(std::exp(1.0) - 1.0)});
  svals["p/b_w"] = Tensor<double>(Shape{1, 1}, {1.0});
  svals["p/c_w"] = Tensor<double>(Shape{1, 1}, {1.0});
  svals["p/out_w"] = Tensor<double>(Shape{1, 1}, {1.0});
  diffops::ParamSource<double> ssrc(svals);
  auto sparams = diffops::MambaDirParams<double>::build(ssrc, "p", 1, 1);
  Tensor<double> u(Shape{1, 10000, 1});
  for (std::size_t i = 0; i < u.numel(); ++i) u[i] = rng.uniform(-1, 1);
  auto y = diffops::selective_scan(Var<double>::constant(u), sparams).value();
  bool bounded = true;
  for (std::size_t i = 0; i < y.numel(); ++i)
    bounded = bounded && std::isfinite(y[i]) && std::abs(y[i]) < 1e3;

  h.report(5, "SSM: abar in (0,1), ZOH limit, scan linearity, reversal, stability",
           abar_ok && limit_ok && lin_err < 1e-9 && equi_err < 1e-6 && bounded,
           fmt("linearity %.2e, equivariance %.2e", lin_err, equi_err));
}

// ---- criterion 6: metric identities ------------------------------------------

void criterion_metrics(Harness& h) {
  Rng rng(19);
  bool order_ok = true;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Matrix> pred{Matrix(3, 4)}, truth{Matrix(3, 4)};
    for (auto& v : pred[0].data()) v = rng.uniform(-20, 20);
    for (auto& v : truth[0].data()) v = rng.uniform(-20, 20);
    MetricPair m = compute_metrics(pred, truth);
    order_ok = order_ok && m.rmse >= m.mae - 1e-12;
  }
  std::vector<Matrix> pred{Matrix(1, 2, {3.0, 4.0})};
  std::vector<Matrix> truth{Matrix(1, 2, {0.0, 0.0})};
  MetricPair worked = compute_metrics(pred, truth);
  const bool worked_ok = std::abs(worked.mae - 3.5) < 1e-12 &&
                         std::abs(worked.rmse - std::sqrt(12.5)) < 1e-9;
  h.report(6, "RMSE >= MAE on 1000 random vectors; errors [3,4] -> 3.5 / 3.5355",
           order_ok && worked_ok,
           fmt("worked example MAE %.4f RMSE %.4f", worked.mae, worked.rmse));
}

// ---- criterion 7: GRPO identities ---------------------------------------------

void criterion_grpo(Harness& h) {
  // r(new = old) = 1 and the clip arithmetic example.
  std::vector<Matrix> p{Matrix(1, 2, {1.0, 2.0})};
  const bool r_one = policy_ratio(p, p, p, 1.0)[0] == 1.0;
  const bool clip_ok =
      std::abs(grpo_loss(0.0, {2.0}, {1.0}, 0.3, 1.0) - (-1.3)) < 1e-12;

  Rng rng(23);
  bool adv_ok = true;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> errs(6);
    for (auto& v : errs) v = rng.uniform(0, 4);
    auto adv = group_advantage(errs);
    double mean = 0, var = 0;
    for (double v : adv) mean += v;
    mean /= 6;
    for (double v : adv) var += (v - mean) * (v - mean);
    var /= 6;
    adv_ok = adv_ok && std::abs(mean) < 1e-9 && std::abs(std::sqrt(var) - 1.0) < 1e-6;
  }

  // tau = 0 is bit-identical to GRPO disabled.
  SyntheticData data = generate_synthetic(6, 260, 31);
  TrainRunConfig cfg;
  cfg.n_clusters = 2;
  cfg.model.seq_len = 6;
  cfg.model.horizon = 4;
  cfg.model.hidden_dim = 8;
  cfg.model.d_state = 4;
  cfg.batch_size = 16;
  cfg.epochs = 3;
  cfg.lr = 0.002;
  cfg.seed = 9;
  cfg.cluster_seed = 9;
  PreparedData prep = prepare_data(data.series, data.adjacency, cfg);
  TrainRunConfig off = cfg;
  off.grpo.enabled = false;
  TrainRunConfig tz = cfg;
  tz.grpo.tau = 0.0;
  auto m_off = train_model<float>(off, prep, data.series.node_ids);
  auto m_tz = train_model<float>(tz, prep, data.series.node_ids);
  bool bit_identical = m_off.epoch_loss == m_tz.epoch_loss;
  auto va = m_off.parameter_values();
  auto vb = m_tz.parameter_values();
  for (const auto& [name, ta] : va) {
    const auto& tb = vb.at(name);
    for (std::size_t i = 0; i < ta.numel(); ++i)
      bit_identical = bit_identical && ta[i] == tb[i];
  }

  h.report(7, "GRPO: tau=0 bit-identical to MAE, r(new=old)=1, clip example, advantages",
           r_one && clip_ok && adv_ok && bit_identical,
           fmt("bit-identical=%s", bit_identical ? "yes" : "no"));
}

// ---- criterion 8: synthetic end-to-end ----------------------------------------

double train_mae_normalized(const TrainedModel<float>& model, const SampleSet& windows,
                            std::size_t batch_size) {
  Rng rng(0);
  double abs_sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < model.models.size(); ++c) {
    const std::vector<int>& nodes = model.graphs[c].member_nodes;
    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t b0 = 0; b0 < windows.size(); b0 += batch_size) {
      const std::size_t count = std::min(batch_size, windows.size() - b0);
      auto inputs = dkgcm::detail::gather_batch<float>(windows.inputs, order, b0, count, nodes);
      auto targets = dkgcm::detail::gather_batch<float>(windows.targets, order, b0, count, nodes);
      auto pred = model.models[c].forward(inputs, false, rng).value();
      for (std::size_t i = 0; i < pred.numel(); ++i) {
        abs_sum += std::abs(static_cast<double>(pred[i]) -
                            static_cast<double>(targets[i]));
        ++n;
      }
    }
  }
  return abs_sum / static_cast<double>(n);
}

void criterion_synthetic(Harness& h, int convergence_epochs, int comparison_epochs) {
  const auto t0 = std::chrono::steady_clock::now();
  SyntheticData data = generate_synthetic(20, 2000, 42);

  TrainRunConfig cfg;
  cfg.n_clusters = 2;
  cfg.model.seq_len = 12;
  cfg.model.horizon = 12;
  cfg.model.hidden_dim = 32;
  cfg.model.d_state = 16;
  cfg.batch_size = 32;
  cfg.lr = 0.001;

  // (a) clustering recovers the two families.
  cfg.seed = 1;
  cfg.cluster_seed = 1;
  cfg.epochs = 1;
  PreparedData prep = prepare_data(data.series, data.adjacency, cfg);
  const double ari =
      testsupport::adjusted_rand_index(data.true_labels, prep.assignment.labels);
  h.report(8, "(a) clustering recovers the latent families (ARI >= 0.9)", ari >= 0.9,
           fmt("ARI %.3f", ari));

  // (b) the full model fits the training set below 0.1 normalized MAE.
  cfg.epochs = convergence_epochs;
  auto full = train_model<float>(cfg, prep, data.series.node_ids);
  const double mae = train_mae_normalized(full, prep.train_windows, cfg.batch_size);
  h.report(8, fmt("(b) training MAE < 0.1 normalized within %d epochs (<= 200)",
                  convergence_epochs),
           convergence_epochs <= 200 && mae < 0.1, fmt("train MAE %.4f", mae));

  // (c) median-of-3-seeds test MAE: clustered vs no-clustering.
  std::vector<double> full_mae, flat_mae;
  for (std::uint64_t seed : {101ull, 202ull, 303ull}) {
    TrainRunConfig fc = cfg;
    fc.epochs = comparison_epochs;
    fc.seed = seed;
    fc.cluster_seed = seed;
    PreparedData fprep = prepare_data(data.series, data.adjacency, fc);
    auto fm = train_model<float>(fc, fprep, data.series.node_ids);
    full_mae.push_back(evaluate_model(fm.models, fm.graphs, fm.stats,
                                      fprep.test_windows, fc.batch_size)
                           .pooled.mae);

    TrainRunConfig nc = fc;
    nc.n_clusters = 1;
    PreparedData nprep = prepare_data(data.series, data.adjacency, nc);
    auto nm = train_model<float>(nc, nprep, data.series.node_ids);
    flat_mae.push_back(evaluate_model(nm.models, nm.graphs, nm.stats,
                                      nprep.test_windows, nc.batch_size)
                           .pooled.mae);
  }
  std::sort(full_mae.begin(), full_mae.end());
  std::sort(flat_mae.begin(), flat_mae.end());
  const double secs = seconds_since(t0);
  h.report(8, "(c) median test MAE: clustered <= no-clustering; runtime < 15 min",
           full_mae[1] <= flat_mae[1] && secs < 900.0,
           fmt("clustered %.3f vs flat %.3f (flow scale), total %.0f s", full_mae[1],
               flat_mae[1], secs));
}

// ---- criterion 9: split arithmetic --------------------------------------------

void criterion_split(Harness& h) {
  auto sizes = [](std::size_t t) {
    TrafficSeries s;
    s.node_ids = {"a"};
    s.values = Matrix(t, 1);
    SplitSeries sp = split_chronological(s);
    return std::array<std::size_t, 3>{sp.train.steps(), sp.val.steps(), sp.test.steps()};
  };
  const auto p08 = sizes(17856);
  const auto p04 = sizes(16992);
  const bool ok = p08 == std::array<std::size_t, 3>{14284, 1785, 1787} &&
                  p04 == std::array<std::size_t, 3>{13593, 1699, 1700};
  h.report(9, "8:1:1 split arithmetic on the published dataset lengths", ok,
           fmt("17856 -> (%zu,%zu,%zu), 16992 -> (%zu,%zu,%zu)", p08[0], p08[1], p08[2],
               p04[0], p04[1], p04[2]));
}

}  // namespace

int main(int argc, char** argv) {
  // Criterion 10 (full PEMS08 accuracy reproduction) is an optional
  // long-running job, executed via the CLI rather than this suite; see the
  // README for the recipe.
  int convergence_epochs = 80;
  int comparison_epochs = 12;
  if (argc > 1) convergence_epochs = std::atoi(argv[1]);
  if (argc > 2) comparison_epochs = std::atoi(argv[2]);

  Harness h;
  criterion_dtw(h);
  criterion_chebyshev(h);
  criterion_fft(h);
  criterion_gradients(h);
  criterion_ssm(h);
  criterion_metrics(h);
  criterion_grpo(h);
  criterion_synthetic(h, convergence_epochs, comparison_epochs);
  criterion_split(h);

  if (h.failures() == 0) {
    std::printf("acceptance: all criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d criterion check(s) FAILED\n", h.failures());
  return 1;
}
