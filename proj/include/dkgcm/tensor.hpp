#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "dkgcm/common.hpp"

namespace dkgcm::diff {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

/// Row-major element strides.
inline Shape shape_strides(const Shape& s) {
  Shape st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

/// Dense row-major tensor of arbitrary rank. Rank-0 is a scalar with one
/// element. T is float (training) or double (verification).
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{})
      : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    require(data_.size() == shape_numel(shape_),
            "Tensor: data size does not match shape " + shape_str(shape_));
  }

  static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  T item() const {
    require(numel() == 1, "Tensor::item: tensor is not scalar");
    return data_[0];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  Tensor<double> to_double() const {
    std::vector<double> d(data_.begin(), data_.end());
    return Tensor<double>(shape_, std::move(d));
  }
  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> d(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) d[i] = static_cast<U>(data_[i]);
    return Tensor<U>(shape_, std::move(d));
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
Tensor<T> zeros_like(const Tensor<T>& t) {
  return Tensor<T>(t.shape());
}

template <typename T>
Tensor<T> full(Shape shape, T v) {
  Tensor<T> t(std::move(shape));
  std::fill(t.vec().begin(), t.vec().end(), v);
  return t;
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
  for (T v : t.vec())
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

// ---- broadcasting -----------------------------------------------------

/// NumPy broadcast of two shapes (align trailing axes, size-1 stretches).
inline Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    require(da == db || da == 1 || db == 1,
            "broadcast: incompatible shapes " + shape_str(a) + " and " + shape_str(b));
    out[i] = std::max(da, db);
  }
  return out;
}

/// Strides of `shape` viewed as `out` (0 where broadcast).
inline Shape broadcast_strides(const Shape& shape, const Shape& out) {
  Shape st = shape_strides(shape);
  Shape r(out.size(), 0);
  const std::size_t off = out.size() - shape.size();
  for (std::size_t i = 0; i < shape.size(); ++i)
    r[off + i] = shape[i] == 1 ? 0 : st[i];
  return r;
}

/// Odometer over an output shape tracking linear offsets into two broadcast
/// operands. Hot loops special-case the trivial layouts before using this.
class BroadcastIter {
 public:
  BroadcastIter(const Shape& out, const Shape& sa, const Shape& sb)
      : out_(out),
        sa_(broadcast_strides(sa, out)),
        sb_(broadcast_strides(sb, out)),
        idx_(out.size(), 0) {}

  std::size_t offset_a() const { return oa_; }
  std::size_t offset_b() const { return ob_; }

  bool next() {
    for (std::size_t i = out_.size(); i-- > 0;) {
      ++idx_[i];
      oa_ += sa_[i];
      ob_ += sb_[i];
      if (idx_[i] < out_[i]) return true;
      oa_ -= sa_[i] * out_[i];
      ob_ -= sb_[i] * out_[i];
      idx_[i] = 0;
    }
    return false;
  }

 private:
  Shape out_, sa_, sb_, idx_;
  std::size_t oa_ = 0, ob_ = 0;
};

}  // namespace dkgcm::diff
