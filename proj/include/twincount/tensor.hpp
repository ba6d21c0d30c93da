#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace twincount {

// Dense NCHW tensor. Fully connected activations use (n, f, 1, 1).
template <typename T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_) { resize(n_, c_, h_, w_); }

  void resize(int n_, int c_, int h_, int w_) {
    n = n_;
    c = c_;
    h = h_;
    w = w_;
    data.assign(static_cast<size_t>(n) * c * h * w, T(0));
  }

  size_t size() const { return data.size(); }
  size_t sample_size() const { return static_cast<size_t>(c) * h * w; }

  T* ptr(int i) { return data.data() + i * sample_size(); }
  const T* ptr(int i) const { return data.data() + i * sample_size(); }

  T& at(int i, int ci, int hi, int wi) {
    return data[((static_cast<size_t>(i) * c + ci) * h + hi) * w + wi];
  }
  T at(int i, int ci, int hi, int wi) const {
    return data[((static_cast<size_t>(i) * c + ci) * h + hi) * w + wi];
  }

  void zero() { std::fill(data.begin(), data.end(), T(0)); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(n, c, h, w);
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

}  // namespace twincount
