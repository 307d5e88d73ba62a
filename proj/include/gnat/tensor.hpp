#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace gnat {

// Dense n^rank array, row-major, with a variance string ('u' upper, 'l' lower per slot).
template <class T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(int dim, std::string variance, T fill = T())
      : dim_(dim), variance_(std::move(variance)), data_(count(dim, static_cast<int>(variance_.size())), fill) {
    for (char c : variance_)
      if (c != 'u' && c != 'l') throw std::invalid_argument("Tensor: variance must be 'u' or 'l'");
  }

  int dim() const { return dim_; }
  int rank() const { return static_cast<int>(variance_.size()); }
  const std::string& variance() const { return variance_; }
  std::size_t size() const { return data_.size(); }
  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  template <class... I>
  T& operator()(I... idx) {
    return data_[offset(idx...)];
  }
  template <class... I>
  const T& operator()(I... idx) const {
    return data_[offset(idx...)];
  }
  T& at(const std::vector<int>& idx) { return data_[flat(idx)]; }
  const T& at(const std::vector<int>& idx) const { return data_[flat(idx)]; }

  std::size_t flat(const std::vector<int>& idx) const {
    if (static_cast<int>(idx.size()) != rank()) throw std::invalid_argument("Tensor: index rank mismatch");
    std::size_t off = 0;
    for (int i : idx) off = off * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(i);
    return off;
  }
  std::vector<int> unflat(std::size_t off) const {
    std::vector<int> idx(static_cast<std::size_t>(rank()));
    for (int s = rank() - 1; s >= 0; --s) {
      idx[static_cast<std::size_t>(s)] = static_cast<int>(off % static_cast<std::size_t>(dim_));
      off /= static_cast<std::size_t>(dim_);
    }
    return idx;
  }

  static std::size_t count(int dim, int rank) {
    std::size_t c = 1;
    for (int i = 0; i < rank; ++i) c *= static_cast<std::size_t>(dim);
    return c;
  }

 private:
  template <class... I>
  std::size_t offset(I... idx) const {
    static_assert((std::is_integral_v<I> && ...));
    std::size_t off = 0;
    ((off = off * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(idx)), ...);
    return off;
  }

  int dim_ = 0;
  std::string variance_;
  std::vector<T> data_;
};

using TensorValue = Tensor<double>;

inline double max_abs(const TensorValue& t) {
  double m = 0.0;
  for (double v : t.data()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace gnat
