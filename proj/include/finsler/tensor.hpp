#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace finsler {

enum class Variance : char { up = 'u', down = 'd' };

/// Dense multi-index array over index ranges 0..n-1 per slot.
///
/// Index convention, used by every curvature block in the engine:
///   R(delta_k, delta_l) d_j = R^i_jkl d_i,
/// i.e. slot 0 is the output (contravariant) index, slot 1 the acted-on
/// vector, and slots 2, 3 the two arguments of the curvature 2-form.
/// Horizontal derivatives of a tensor append the direction index as the last
/// slot: dh_gamma(i, j, k, m) = delta_m Gamma*^i_jk.
template <class T>
class Tensor {
 public:
  Tensor() = default;

  /// `variance` is a string of 'u'/'d', one per slot, e.g. "uddd".
  Tensor(int n, std::string_view variance, T fill = T{})
      : n_(n), variance_(variance.begin(), variance.end()) {
    std::size_t sz = 1;
    for (std::size_t r = 0; r < variance_.size(); ++r) sz *= static_cast<std::size_t>(n);
    data_.assign(sz, fill);
  }

  int dim() const { return n_; }
  int rank() const { return static_cast<int>(variance_.size()); }
  const std::string& variance() const { return variance_; }
  Variance slot_variance(int s) const { return static_cast<Variance>(variance_[s]); }

  template <class... I>
  T& operator()(I... idx) {
    return data_[offset({static_cast<int>(idx)...})];
  }
  template <class... I>
  const T& operator()(I... idx) const {
    return data_[offset({static_cast<int>(idx)...})];
  }

  T& at(std::span<const int> idx) { return data_[offset(idx)]; }
  const T& at(std::span<const int> idx) const { return data_[offset(idx)]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::size_t size() const { return data_.size(); }

 private:
  std::size_t offset(std::initializer_list<int> idx) const {
    return offset(std::span<const int>(idx.begin(), idx.size()));
  }
  std::size_t offset(std::span<const int> idx) const {
    assert(static_cast<int>(idx.size()) == rank());
    std::size_t o = 0;
    for (int i : idx) {
      assert(i >= 0 && i < n_);
      o = o * static_cast<std::size_t>(n_) + static_cast<std::size_t>(i);
    }
    return o;
  }

  int n_ = 0;
  std::string variance_;
  std::vector<T> data_;
};

using TensorBlock = Tensor<double>;

inline double max_abs(const TensorBlock& t) {
  double m = 0.0;
  for (double e : t.data()) m = std::max(m, std::abs(e));
  return m;
}

inline double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double e : a) m = std::max(m, std::abs(e));
  return m;
}

/// max |a - b| over matching entries.
inline double max_abs_diff(const TensorBlock& a, const TensorBlock& b) {
  assert(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

/// Scale used for tensor-relative tolerances: max(1, |t|_inf).
inline double tensor_scale(const TensorBlock& t) { return std::max(1.0, max_abs(t)); }

}  // namespace finsler
