#pragma once

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "twincount/gemm.hpp"
#include "twincount/rng.hpp"
#include "twincount/tensor.hpp"

namespace twincount::nn {

enum class Mode { train, eval };

template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;

  void init_shape(std::string n, std::vector<int> s) {
    name = std::move(n);
    shape = std::move(s);
    size_t total = 1;
    for (int d : shape) total *= static_cast<size_t>(d);
    value.assign(total, T(0));
    grad.assign(total, T(0));
  }
  size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

// Orthogonal init of a (rows x cols) matrix: WW^T = I when rows <= cols,
// W^T W = I otherwise.
template <typename T>
void orthogonal_init(std::vector<T>& w, int rows, int cols, uint64_t seed) {
  const int big = std::max(rows, cols);
  const int small = std::min(rows, cols);
  std::vector<double> q(static_cast<size_t>(big) * small);
  random_orthonormal_columns(big, small, q.data(), seed);
  // q has orthonormal columns (big x small)
  if (rows <= cols) {
    // W = Q^T: rows x cols, orthonormal rows
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        w[static_cast<size_t>(r) * cols + c] = static_cast<T>(q[static_cast<size_t>(c) * small + r]);
  } else {
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        w[static_cast<size_t>(r) * cols + c] = static_cast<T>(q[static_cast<size_t>(r) * small + c]);
  }
}

inline int conv_out_size(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}
inline int tconv_out_size(int in, int kernel, int stride) {
  return (in - 1) * stride + kernel;
}

// im2col for one sample: src (C,H,W) -> dst (C*k*k, OH*OW)
template <typename T>
void im2col(const T* src, int ch, int h, int w, int kernel, int stride, int pad,
            T* dst) {
  const int oh = conv_out_size(h, kernel, stride, pad);
  const int ow = conv_out_size(w, kernel, stride, pad);
  const int ohw = oh * ow;
  for (int c = 0; c < ch; ++c) {
    const T* plane = src + static_cast<size_t>(c) * h * w;
    for (int kh = 0; kh < kernel; ++kh)
      for (int kw = 0; kw < kernel; ++kw) {
        T* row = dst + (static_cast<size_t>(c) * kernel * kernel + kh * kernel + kw) * ohw;
        for (int y = 0; y < oh; ++y) {
          const int sy = y * stride + kh - pad;
          if (sy < 0 || sy >= h) {
            std::fill(row + y * ow, row + (y + 1) * ow, T(0));
            continue;
          }
          for (int x = 0; x < ow; ++x) {
            const int sx = x * stride + kw - pad;
            row[y * ow + x] = (sx >= 0 && sx < w) ? plane[sy * w + sx] : T(0);
          }
        }
      }
  }
}

// adjoint of im2col: scatter-add dst (C*k*k, OH*OW) back into src (C,H,W)
template <typename T>
void col2im_add(const T* cols, int ch, int h, int w, int kernel, int stride,
                int pad, T* dst) {
  const int oh = conv_out_size(h, kernel, stride, pad);
  const int ow = conv_out_size(w, kernel, stride, pad);
  const int ohw = oh * ow;
  for (int c = 0; c < ch; ++c) {
    T* plane = dst + static_cast<size_t>(c) * h * w;
    for (int kh = 0; kh < kernel; ++kh)
      for (int kw = 0; kw < kernel; ++kw) {
        const T* row = cols + (static_cast<size_t>(c) * kernel * kernel + kh * kernel + kw) * ohw;
        for (int y = 0; y < oh; ++y) {
          const int sy = y * stride + kh - pad;
          if (sy < 0 || sy >= h) continue;
          for (int x = 0; x < ow; ++x) {
            const int sx = x * stride + kw - pad;
            if (sx >= 0 && sx < w) plane[sy * w + sx] += row[y * ow + x];
          }
        }
      }
  }
}

template <typename T>
std::vector<T>& thread_scratch(int which, size_t size) {
  static thread_local std::vector<T> bufs[2];
  auto& b = bufs[which];
  if (b.size() < size) b.resize(size);
  return b;
}

// 2-D convolution, weight (out_ch, in_ch*k*k), per-sample im2col + GEMM.
template <typename T>
class Conv2d {
 public:
  Param<T> weight, bias;

  Conv2d() = default;
  Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad)
      : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad) {
    weight.init_shape(name + ".weight", {out_ch, in_ch, kernel, kernel});
    bias.init_shape(name + ".bias", {out_ch});
  }

  void init(uint64_t seed) {
    orthogonal_init(weight.value, out_ch_, in_ch_ * kernel_ * kernel_, seed);
  }

  void forward(const Tensor<T>& in, Tensor<T>& out) {
    in_cache_ = in;
    const int oh = conv_out_size(in.h, kernel_, stride_, pad_);
    const int ow = conv_out_size(in.w, kernel_, stride_, pad_);
    out.resize(in.n, out_ch_, oh, ow);
    const int k2 = in_ch_ * kernel_ * kernel_;
    const int ohw = oh * ow;
#pragma omp parallel for schedule(static)
    for (int n = 0; n < in.n; ++n) {
      auto& cols = thread_scratch<T>(0, static_cast<size_t>(k2) * ohw);
      im2col(in.ptr(n), in_ch_, in.h, in.w, kernel_, stride_, pad_, cols.data());
      T* o = out.ptr(n);
      gemm(false, false, out_ch_, ohw, k2, T(1), weight.value.data(), k2,
           cols.data(), ohw, T(0), o, ohw);
      for (int c = 0; c < out_ch_; ++c) {
        const T b = bias.value[c];
        T* oc = o + static_cast<size_t>(c) * ohw;
        for (int i = 0; i < ohw; ++i) oc[i] += b;
      }
    }
  }

  Tensor<T> backward(const Tensor<T>& gout) {
    const Tensor<T>& in = in_cache_;
    Tensor<T> gin(in.n, in.c, in.h, in.w);
    const int k2 = in_ch_ * kernel_ * kernel_;
    const int ohw = gout.h * gout.w;
    const int nthreads = omp_get_max_threads();
    std::vector<std::vector<T>> gw_tl(nthreads), gb_tl(nthreads);
    for (int t = 0; t < nthreads; ++t) {
      gw_tl[t].assign(weight.size(), T(0));
      gb_tl[t].assign(bias.size(), T(0));
    }
#pragma omp parallel for schedule(static)
    for (int n = 0; n < in.n; ++n) {
      const int tid = omp_get_thread_num();
      auto& cols = thread_scratch<T>(0, static_cast<size_t>(k2) * ohw);
      auto& gcols = thread_scratch<T>(1, static_cast<size_t>(k2) * ohw);
      im2col(in.ptr(n), in_ch_, in.h, in.w, kernel_, stride_, pad_, cols.data());
      const T* go = gout.ptr(n);
      // dW += gout * cols^T
      gemm(false, true, out_ch_, k2, ohw, T(1), go, ohw, cols.data(), ohw, T(1),
           gw_tl[tid].data(), k2);
      for (int c = 0; c < out_ch_; ++c) {
        T acc = T(0);
        const T* goc = go + static_cast<size_t>(c) * ohw;
        for (int i = 0; i < ohw; ++i) acc += goc[i];
        gb_tl[tid][c] += acc;
      }
      // dIn = col2im(W^T * gout)
      gemm(true, false, k2, ohw, out_ch_, T(1), weight.value.data(), k2, go, ohw,
           T(0), gcols.data(), ohw);
      col2im_add(gcols.data(), in_ch_, in.h, in.w, kernel_, stride_, pad_, gin.ptr(n));
    }
    for (int t = 0; t < nthreads; ++t) {
      for (size_t i = 0; i < weight.size(); ++i) weight.grad[i] += gw_tl[t][i];
      for (size_t i = 0; i < bias.size(); ++i) bias.grad[i] += gb_tl[t][i];
    }
    return gin;
  }

  int out_channels() const { return out_ch_; }
  int kernel() const { return kernel_; }
  int stride() const { return stride_; }
  int pad() const { return pad_; }

 private:
  int in_ch_ = 0, out_ch_ = 0, kernel_ = 0, stride_ = 0, pad_ = 0;
  Tensor<T> in_cache_;
};

// Transposed 2-D convolution, weight (in_ch, out_ch*k*k); out = col2im(W^T x).
template <typename T>
class ConvTranspose2d {
 public:
  Param<T> weight, bias;

  ConvTranspose2d() = default;
  ConvTranspose2d(std::string name, int in_ch, int out_ch, int kernel, int stride)
      : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride) {
    weight.init_shape(name + ".weight", {in_ch, out_ch, kernel, kernel});
    bias.init_shape(name + ".bias", {out_ch});
  }

  // flattened as (out-features x in-features*k*k) for the orthogonality
  // contract: rows indexed by out_ch, columns by (in_ch, kh, kw)
  void init(uint64_t seed) {
    const int rows = out_ch_;
    const int cols = in_ch_ * kernel_ * kernel_;
    std::vector<T> flat(static_cast<size_t>(rows) * cols);
    orthogonal_init(flat, rows, cols, seed);
    // scatter back into (in_ch, out_ch, k, k) storage
    for (int ic = 0; ic < in_ch_; ++ic)
      for (int oc = 0; oc < out_ch_; ++oc)
        for (int kk = 0; kk < kernel_ * kernel_; ++kk)
          weight.value[(static_cast<size_t>(ic) * out_ch_ + oc) * kernel_ * kernel_ + kk] =
              flat[static_cast<size_t>(oc) * cols + ic * kernel_ * kernel_ + kk];
  }

  void forward(const Tensor<T>& in, Tensor<T>& out) {
    in_cache_ = in;
    const int oh = tconv_out_size(in.h, kernel_, stride_);
    const int ow = tconv_out_size(in.w, kernel_, stride_);
    out.resize(in.n, out_ch_, oh, ow);
    const int k2 = out_ch_ * kernel_ * kernel_;
    const int ihw = in.h * in.w;
#pragma omp parallel for schedule(static)
    for (int n = 0; n < in.n; ++n) {
      auto& cols = thread_scratch<T>(0, static_cast<size_t>(k2) * ihw);
      // cols = W^T (k2 x in_ch) * x (in_ch x ihw)
      gemm(true, false, k2, ihw, in_ch_, T(1), weight.value.data(), k2,
           in.ptr(n), ihw, T(0), cols.data(), ihw);
      T* o = out.ptr(n);
      col2im_add(cols.data(), out_ch_, oh, ow, kernel_, stride_, 0, o);
      const int ohw = oh * ow;
      for (int c = 0; c < out_ch_; ++c) {
        const T b = bias.value[c];
        T* oc = o + static_cast<size_t>(c) * ohw;
        for (int i = 0; i < ohw; ++i) oc[i] += b;
      }
    }
  }

  Tensor<T> backward(const Tensor<T>& gout) {
    const Tensor<T>& in = in_cache_;
    Tensor<T> gin(in.n, in.c, in.h, in.w);
    const int k2 = out_ch_ * kernel_ * kernel_;
    const int ihw = in.h * in.w;
    const int ohw = gout.h * gout.w;
    const int nthreads = omp_get_max_threads();
    std::vector<std::vector<T>> gw_tl(nthreads), gb_tl(nthreads);
    for (int t = 0; t < nthreads; ++t) {
      gw_tl[t].assign(weight.size(), T(0));
      gb_tl[t].assign(bias.size(), T(0));
    }
#pragma omp parallel for schedule(static)
    for (int n = 0; n < in.n; ++n) {
      const int tid = omp_get_thread_num();
      auto& gcols = thread_scratch<T>(0, static_cast<size_t>(k2) * ihw);
      im2col(gout.ptr(n), out_ch_, gout.h, gout.w, kernel_, stride_, 0, gcols.data());
      // dIn = W (in_ch x k2) * gcols (k2 x ihw)
      gemm(false, false, in_ch_, ihw, k2, T(1), weight.value.data(), k2,
           gcols.data(), ihw, T(0), gin.ptr(n), ihw);
      // dW += x (in_ch x ihw) * gcols^T (ihw x k2)
      gemm(false, true, in_ch_, k2, ihw, T(1), in.ptr(n), ihw, gcols.data(), ihw,
           T(1), gw_tl[tid].data(), k2);
      const T* go = gout.ptr(n);
      for (int c = 0; c < out_ch_; ++c) {
        T acc = T(0);
        const T* goc = go + static_cast<size_t>(c) * ohw;
        for (int i = 0; i < ohw; ++i) acc += goc[i];
        gb_tl[tid][c] += acc;
      }
    }
    for (int t = 0; t < nthreads; ++t) {
      for (size_t i = 0; i < weight.size(); ++i) weight.grad[i] += gw_tl[t][i];
      for (size_t i = 0; i < bias.size(); ++i) bias.grad[i] += gb_tl[t][i];
    }
    return gin;
  }

  int out_channels() const { return out_ch_; }
  int kernel() const { return kernel_; }
  int stride() const { return stride_; }

 private:
  int in_ch_ = 0, out_ch_ = 0, kernel_ = 0, stride_ = 0;
  Tensor<T> in_cache_;
};

// Fully connected, weight (out, in). Activations are (N, F, 1, 1).
template <typename T>
class Linear {
 public:
  Param<T> weight, bias;

  Linear() = default;
  Linear(std::string name, int in, int out) : in_(in), out_(out) {
    weight.init_shape(name + ".weight", {out, in});
    bias.init_shape(name + ".bias", {out});
  }

  void init(uint64_t seed) { orthogonal_init(weight.value, out_, in_, seed); }

  void forward(const Tensor<T>& in, Tensor<T>& out) {
    in_cache_ = in;
    out.resize(in.n, out_, 1, 1);
    gemm(false, true, in.n, out_, in_, T(1), in.data.data(), in_,
         weight.value.data(), in_, T(0), out.data.data(), out_);
    for (int n = 0; n < in.n; ++n) {
      T* o = out.ptr(n);
      for (int c = 0; c < out_; ++c) o[c] += bias.value[c];
    }
  }

  Tensor<T> backward(const Tensor<T>& gout) {
    const Tensor<T>& in = in_cache_;
    Tensor<T> gin(in.n, in.c, in.h, in.w);
    // dW += gout^T (out x N) * in (N x in)
    gemm(true, false, out_, in_, in.n, T(1), gout.data.data(), out_,
         in.data.data(), in_, T(1), weight.grad.data(), in_);
    for (int n = 0; n < in.n; ++n) {
      const T* go = gout.ptr(n);
      for (int c = 0; c < out_; ++c) bias.grad[c] += go[c];
    }
    // dIn = gout (N x out) * W (out x in)
    gemm(false, false, in.n, in_, out_, T(1), gout.data.data(), out_,
         weight.value.data(), in_, T(0), gin.data.data(), in_);
    return gin;
  }

  int out_features() const { return out_; }
  int in_features() const { return in_; }

 private:
  int in_ = 0, out_ = 0;
  Tensor<T> in_cache_;
};

template <typename T>
class LeakyReLU {
 public:
  explicit LeakyReLU(double slope = 0.2) : slope_(static_cast<T>(slope)) {}

  void forward(const Tensor<T>& in, Tensor<T>& out) {
    in_cache_ = in;
    out.resize(in.n, in.c, in.h, in.w);
    for (size_t i = 0; i < in.data.size(); ++i) {
      const T v = in.data[i];
      out.data[i] = v > T(0) ? v : slope_ * v;
    }
  }

  Tensor<T> backward(const Tensor<T>& gout) {
    Tensor<T> gin(gout.n, gout.c, gout.h, gout.w);
    for (size_t i = 0; i < gout.data.size(); ++i)
      gin.data[i] = in_cache_.data[i] > T(0) ? gout.data[i] : slope_ * gout.data[i];
    return gin;
  }

 private:
  T slope_;
  Tensor<T> in_cache_;
};

template <typename T>
class Sigmoid {
 public:
  void forward(const Tensor<T>& in, Tensor<T>& out) {
    out.resize(in.n, in.c, in.h, in.w);
    for (size_t i = 0; i < in.data.size(); ++i)
      out.data[i] = T(1) / (T(1) + std::exp(-in.data[i]));
    out_cache_ = out;
  }

  Tensor<T> backward(const Tensor<T>& gout) {
    Tensor<T> gin(gout.n, gout.c, gout.h, gout.w);
    for (size_t i = 0; i < gout.data.size(); ++i) {
      const T y = out_cache_.data[i];
      gin.data[i] = gout.data[i] * y * (T(1) - y);
    }
    return gin;
  }

 private:
  Tensor<T> out_cache_;
};

// Inverted dropout. Masks derive from (step_seed, layer uid, sample index), so
// results are independent of threading and reproducible across runs.
template <typename T>
class Dropout {
 public:
  Dropout() = default;
  Dropout(double rate, uint64_t uid) : rate_(rate), uid_(uid) {}

  void forward(const Tensor<T>& in, Tensor<T>& out, Mode mode, uint64_t step_seed) {
    out.resize(in.n, in.c, in.h, in.w);
    if (mode == Mode::eval || rate_ <= 0.0) {
      out.data = in.data;
      active_ = false;
      return;
    }
    active_ = true;
    mask_.resize(in.n, in.c, in.h, in.w);
    const T scale = static_cast<T>(1.0 / (1.0 - rate_));
    const size_t per = in.sample_size();
#pragma omp parallel for schedule(static)
    for (int n = 0; n < in.n; ++n) {
      Rng rng(derive_seed(step_seed, uid_, static_cast<uint64_t>(n)));
      const T* src = in.ptr(n);
      T* msk = mask_.ptr(n);
      T* dst = out.ptr(n);
      for (size_t i = 0; i < per; ++i) {
        const T m = rng.uniform() < rate_ ? T(0) : scale;
        msk[i] = m;
        dst[i] = src[i] * m;
      }
    }
  }

  Tensor<T> backward(const Tensor<T>& gout) {
    Tensor<T> gin(gout.n, gout.c, gout.h, gout.w);
    if (!active_) {
      gin.data = gout.data;
      return gin;
    }
    for (size_t i = 0; i < gout.data.size(); ++i)
      gin.data[i] = gout.data[i] * mask_.data[i];
    return gin;
  }

 private:
  double rate_ = 0.0;
  uint64_t uid_ = 0;
  bool active_ = false;
  Tensor<T> mask_;
};

// Batch normalization over (N,H,W) per channel. Running stats use the biased
// batch variance; eval mode normalizes with the running estimates.
template <typename T>
class BatchNorm2d {
 public:
  Param<T> gamma, beta;

  BatchNorm2d() = default;
  BatchNorm2d(std::string name, int channels, double momentum = 0.1, double eps = 1e-5)
      : channels_(channels), momentum_(momentum), eps_(eps) {
    gamma.init_shape(name + ".gamma", {channels});
    beta.init_shape(name + ".beta", {channels});
    std::fill(gamma.value.begin(), gamma.value.end(), T(1));
    running_mean_.assign(channels, T(0));
    running_var_.assign(channels, T(1));
  }

  void forward(const Tensor<T>& in, Tensor<T>& out, Mode mode) {
    out.resize(in.n, in.c, in.h, in.w);
    const int hw = in.h * in.w;
    const size_t m = static_cast<size_t>(in.n) * hw;
    mode_ = mode;
    if (mode == Mode::train) {
      xhat_.resize(in.n, in.c, in.h, in.w);
      mean_.assign(channels_, T(0));
      invstd_.assign(channels_, T(0));
      for (int c = 0; c < channels_; ++c) {
        double mu = 0.0;
        for (int n = 0; n < in.n; ++n) {
          const T* p = in.ptr(n) + static_cast<size_t>(c) * hw;
          for (int i = 0; i < hw; ++i) mu += p[i];
        }
        mu /= static_cast<double>(m);
        double var = 0.0;
        for (int n = 0; n < in.n; ++n) {
          const T* p = in.ptr(n) + static_cast<size_t>(c) * hw;
          for (int i = 0; i < hw; ++i) {
            const double d = p[i] - mu;
            var += d * d;
          }
        }
        var /= static_cast<double>(m);
        const double inv = 1.0 / std::sqrt(var + eps_);
        mean_[c] = static_cast<T>(mu);
        invstd_[c] = static_cast<T>(inv);
        running_mean_[c] = static_cast<T>((1.0 - momentum_) * running_mean_[c] + momentum_ * mu);
        running_var_[c] = static_cast<T>((1.0 - momentum_) * running_var_[c] + momentum_ * var);
        for (int n = 0; n < in.n; ++n) {
          const T* p = in.ptr(n) + static_cast<size_t>(c) * hw;
          T* xh = xhat_.ptr(n) + static_cast<size_t>(c) * hw;
          T* o = out.ptr(n) + static_cast<size_t>(c) * hw;
          for (int i = 0; i < hw; ++i) {
            xh[i] = static_cast<T>((p[i] - mu) * inv);
            o[i] = gamma.value[c] * xh[i] + beta.value[c];
          }
        }
      }
    } else {
      for (int c = 0; c < channels_; ++c) {
        const T inv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var_[c]) + eps_));
        for (int n = 0; n < in.n; ++n) {
          const T* p = in.ptr(n) + static_cast<size_t>(c) * hw;
          T* o = out.ptr(n) + static_cast<size_t>(c) * hw;
          for (int i = 0; i < hw; ++i)
            o[i] = gamma.value[c] * (p[i] - running_mean_[c]) * inv + beta.value[c];
        }
      }
    }
  }

  Tensor<T> backward(const Tensor<T>& gout) {
    Tensor<T> gin(gout.n, gout.c, gout.h, gout.w);
    const int hw = gout.h * gout.w;
    const size_t m = static_cast<size_t>(gout.n) * hw;
    if (mode_ == Mode::eval) {
      for (int c = 0; c < channels_; ++c) {
        const T s = static_cast<T>(
            gamma.value[c] / std::sqrt(static_cast<double>(running_var_[c]) + eps_));
        for (int n = 0; n < gout.n; ++n) {
          const T* go = gout.ptr(n) + static_cast<size_t>(c) * hw;
          T* gi = gin.ptr(n) + static_cast<size_t>(c) * hw;
          for (int i = 0; i < hw; ++i) gi[i] = go[i] * s;
        }
      }
      return gin;
    }
    for (int c = 0; c < channels_; ++c) {
      double sum_go = 0.0, sum_goxh = 0.0;
      for (int n = 0; n < gout.n; ++n) {
        const T* go = gout.ptr(n) + static_cast<size_t>(c) * hw;
        const T* xh = xhat_.ptr(n) + static_cast<size_t>(c) * hw;
        for (int i = 0; i < hw; ++i) {
          sum_go += go[i];
          sum_goxh += static_cast<double>(go[i]) * xh[i];
        }
      }
      gamma.grad[c] += static_cast<T>(sum_goxh);
      beta.grad[c] += static_cast<T>(sum_go);
      const double g = gamma.value[c];
      const double inv = invstd_[c];
      const double mean_go = sum_go / static_cast<double>(m);
      const double mean_goxh = sum_goxh / static_cast<double>(m);
      for (int n = 0; n < gout.n; ++n) {
        const T* go = gout.ptr(n) + static_cast<size_t>(c) * hw;
        const T* xh = xhat_.ptr(n) + static_cast<size_t>(c) * hw;
        T* gi = gin.ptr(n) + static_cast<size_t>(c) * hw;
        for (int i = 0; i < hw; ++i)
          gi[i] = static_cast<T>(g * inv * (go[i] - mean_go - xh[i] * mean_goxh));
      }
    }
    return gin;
  }

  std::vector<T>& running_mean() { return running_mean_; }
  std::vector<T>& running_var() { return running_var_; }

 private:
  int channels_ = 0;
  double momentum_ = 0.1, eps_ = 1e-5;
  Mode mode_ = Mode::train;
  Tensor<T> xhat_;
  std::vector<T> mean_, invstd_, running_mean_, running_var_;
};

template <typename T>
Tensor<T> reshape(Tensor<T> t, int n, int c, int h, int w) {
  t.n = n;
  t.c = c;
  t.h = h;
  t.w = w;
  return t;
}

}  // namespace twincount::nn
