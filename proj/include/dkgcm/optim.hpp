#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "dkgcm/autodiff.hpp"

#include <json.hpp>

namespace dkgcm::diff {

/// Named leaf parameters plus Adam state. Iteration order is the map order
/// (lexicographic by name), which fixes checkpoint layout and init order.
template <typename T>
class ParameterStore {
 public:
  Var<T> create(const std::string& name, Tensor<T> init) {
    require(!params_.count(name), "ParameterStore: duplicate parameter " + name);
    Var<T> p = Var<T>::param(std::move(init));
    params_.emplace(name, p);
    return p;
  }

  Var<T> get(const std::string& name) const {
    auto it = params_.find(name);
    require(it != params_.end(), "ParameterStore: unknown parameter " + name);
    return it->second;
  }
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  const std::map<std::string, Var<T>>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }

  void zero_grad() {
    for (auto& [name, p] : params_) p.zero_grad();
  }

  std::int64_t step_count() const { return step_; }

  /// One Adam update with bias correction. Every parameter must carry a
  /// gradient (zero counts; absent does not).
  void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8) {
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
    for (auto& [name, p] : params_) {
      require(p.has_grad(), "adam_step: parameter " + name + " has no gradient");
      auto& slot = adam_[name];
      if (slot.m.numel() == 0) {
        slot.m = Tensor<T>(p.value().shape());
        slot.v = Tensor<T>(p.value().shape());
      }
      const Tensor<T>& g = p.grad();
      Tensor<T> next = p.value();
      for (std::size_t i = 0; i < next.numel(); ++i) {
        const double gi = static_cast<double>(g[i]);
        const double m = beta1 * static_cast<double>(slot.m[i]) + (1.0 - beta1) * gi;
        const double v = beta2 * static_cast<double>(slot.v[i]) + (1.0 - beta2) * gi * gi;
        slot.m[i] = static_cast<T>(m);
        slot.v[i] = static_cast<T>(v);
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        next[i] = static_cast<T>(static_cast<double>(next[i]) -
                                 lr * mhat / (std::sqrt(vhat) + eps));
      }
      p.set_value(std::move(next));
    }
  }

  std::map<std::string, Tensor<T>> snapshot_values() const {
    std::map<std::string, Tensor<T>> out;
    for (const auto& [name, p] : params_) out.emplace(name, p.value());
    return out;
  }

  void load_values(const std::map<std::string, Tensor<T>>& values) {
    for (auto& [name, p] : params_) {
      auto it = values.find(name);
      require(it != values.end(), "load_values: missing parameter " + name);
      p.set_value(it->second);
    }
  }

 private:
  struct AdamSlot {
    Tensor<T> m, v;
  };
  std::map<std::string, Var<T>> params_;
  std::map<std::string, AdamSlot> adam_;
  std::int64_t step_ = 0;
};

// ---- gradient checking -------------------------------------------------

struct GradCheckFailure {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::vector<GradCheckFailure> failures;
  bool pass = true;
};

/// Compare analytic gradients of the scalar f() against central finite
/// differences over every entry of every parameter. f must be deterministic
/// and rebuild its graph on each call. Relative error uses the denominator
/// max(|analytic|, |numeric|, 1e-8). Run in double.
template <typename T>
GradCheckReport grad_check(const std::function<Var<T>()>& f,
                           ParameterStore<T>& params, double h = 1e-4,
                           double tol = 1e-4) {
  GradCheckReport report;
  params.zero_grad();
  Var<T> loss = f();
  backward(loss);
  std::map<std::string, Tensor<T>> analytic;
  for (const auto& [name, p] : params.all()) {
    require(p.has_grad(), "grad_check: parameter " + name + " received no gradient");
    analytic.emplace(name, p.grad());
  }

  for (auto& [name, p] : params.all()) {
    Tensor<T> base = p.value();
    for (std::size_t i = 0; i < base.numel(); ++i) {
      Tensor<T> bumped = base;
      bumped[i] = static_cast<T>(static_cast<double>(base[i]) + h);
      const_cast<Var<T>&>(p).set_value(bumped);
      const double fp = static_cast<double>(f().value().item());
      bumped[i] = static_cast<T>(static_cast<double>(base[i]) - h);
      const_cast<Var<T>&>(p).set_value(bumped);
      const double fm = static_cast<double>(f().value().item());
      const_cast<Var<T>&>(p).set_value(base);

      const double numeric = (fp - fm) / (2.0 * h);
      const double an = static_cast<double>(analytic.at(name)[i]);
      const double denom = std::max({std::abs(an), std::abs(numeric), 1e-8});
      const double rel = std::abs(an - numeric) / denom;
      report.max_rel_err = std::max(report.max_rel_err, rel);
      if (rel >= tol) {
        report.pass = false;
        if (report.failures.size() < 32)
          report.failures.push_back({name, i, an, numeric, rel});
      }
    }
  }
  return report;
}

// ---- checkpoint I/O ------------------------------------------------------

// Layout: one magic line, one line with the manifest byte count, the JSON
// manifest, then raw little-endian float32 values concatenated in manifest
// order.
inline constexpr const char* kCheckpointMagic = "DKGCM-CKPT-1";

inline void write_f32_le(std::ostream& os, float v) {
  std::uint32_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, sizeof(bits));
  char buf[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                 static_cast<char>((bits >> 16) & 0xff),
                 static_cast<char>((bits >> 24) & 0xff)};
  os.write(buf, 4);
}

inline float read_f32_le(std::istream& is) {
  unsigned char buf[4];
  is.read(reinterpret_cast<char*>(buf), 4);
  std::uint32_t bits = static_cast<std::uint32_t>(buf[0]) |
                       (static_cast<std::uint32_t>(buf[1]) << 8) |
                       (static_cast<std::uint32_t>(buf[2]) << 16) |
                       (static_cast<std::uint32_t>(buf[3]) << 24);
  float v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

/// Serialize named parameter tensors (typically the union of the per-cluster
/// stores). `extra` is merged into the manifest (run config, clustering,
/// normalization stats).
template <typename T>
void save_checkpoint(const std::string& path,
                     const std::map<std::string, Tensor<T>>& params,
                     const nlohmann::json& extra = {}) {
  nlohmann::json manifest;
  manifest["precision"] = "float32";
  nlohmann::json plist = nlohmann::json::array();
  for (const auto& [name, t] : params) {
    nlohmann::json e;
    e["name"] = name;
    e["shape"] = t.shape();
    plist.push_back(e);
  }
  manifest["params"] = plist;
  if (!extra.is_null())
    for (auto it = extra.begin(); it != extra.end(); ++it) manifest[it.key()] = it.value();

  std::ofstream os(path, std::ios::binary);
  require(os.good(), "save_checkpoint: cannot open " + path);
  const std::string mtext = manifest.dump();
  os << kCheckpointMagic << "\n" << mtext.size() << "\n" << mtext;
  for (const auto& [name, t] : params)
    for (std::size_t i = 0; i < t.numel(); ++i)
      write_f32_le(os, static_cast<float>(t[i]));
  require(os.good(), "save_checkpoint: write failed for " + path);
}

struct Checkpoint {
  nlohmann::json manifest;
  std::map<std::string, Tensor<float>> params;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "load_checkpoint: cannot open " + path);
  std::string magic;
  std::getline(is, magic);
  require(magic == kCheckpointMagic, "load_checkpoint: bad magic in " + path);
  std::string lenline;
  std::getline(is, lenline);
  const std::size_t mlen = static_cast<std::size_t>(std::stoull(lenline));
  std::string mtext(mlen, '\0');
  is.read(mtext.data(), static_cast<std::streamsize>(mlen));
  require(is.good(), "load_checkpoint: truncated manifest in " + path);

  Checkpoint ck;
  ck.manifest = nlohmann::json::parse(mtext);
  for (const auto& e : ck.manifest.at("params")) {
    const std::string name = e.at("name");
    Shape shape = e.at("shape").get<Shape>();
    Tensor<float> t(shape);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = read_f32_le(is);
    require(!is.fail(), "load_checkpoint: truncated blob at " + name);
    ck.params.emplace(name, std::move(t));
  }
  return ck;
}

}  // namespace dkgcm::diff
