#pragma once

#include <vector>

#include "unmix/autograd.hpp"
#include "unmix/gemm.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace unmix {
namespace convdet {

// Geometry shared by conv (big -> small) and transposed conv (small -> big).
// "big" is the higher-resolution grid, "small" the strided one:
//   hs in [0, Hs), tap (kh,kw):  hb = hs*stride - pad + kh.
struct ConvGeom {
  int64_t n, c_big, h_big, w_big;
  int64_t c_small, h_small, w_small;
  int64_t k, stride, pad;
  int64_t p_small() const { return h_small * w_small; }
  int64_t p_big() const { return h_big * w_big; }
};

inline int64_t conv_out_dim(int64_t in, int64_t k, int64_t stride, int64_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

inline int64_t tconv_out_dim(int64_t in, int64_t k, int64_t stride, int64_t pad) {
  return (in - 1) * stride - 2 * pad + k;
}

// cols is (c_big*K*K) x (N*Ps), columns grouped per image.
template <typename T>
void im2col(const T* src, const ConvGeom& g, T* cols) {
  const int64_t ps = g.p_small(), kk = g.k * g.k;
  const int64_t row_len = g.n * ps;
#pragma omp parallel for schedule(static)
  for (int64_t n = 0; n < g.n; ++n) {
    const T* img = src + n * g.c_big * g.p_big();
    for (int64_t c = 0; c < g.c_big; ++c) {
      const T* plane = img + c * g.p_big();
      for (int64_t kh = 0; kh < g.k; ++kh) {
        for (int64_t kw = 0; kw < g.k; ++kw) {
          T* dst = cols + (c * kk + kh * g.k + kw) * row_len + n * ps;
          for (int64_t hs = 0; hs < g.h_small; ++hs) {
            const int64_t hb = hs * g.stride - g.pad + kh;
            if (hb < 0 || hb >= g.h_big) {
              for (int64_t ws = 0; ws < g.w_small; ++ws) dst[hs * g.w_small + ws] = T(0);
              continue;
            }
            for (int64_t ws = 0; ws < g.w_small; ++ws) {
              const int64_t wb = ws * g.stride - g.pad + kw;
              dst[hs * g.w_small + ws] =
                  (wb < 0 || wb >= g.w_big) ? T(0) : plane[hb * g.w_big + wb];
            }
          }
        }
      }
    }
  }
}

// Scatter-accumulate back onto the big grid. Images are independent, so the
// parallel loop stays deterministic.
template <typename T>
void col2im_acc(const T* cols, const ConvGeom& g, T* dst) {
  const int64_t ps = g.p_small(), kk = g.k * g.k;
  const int64_t row_len = g.n * ps;
#pragma omp parallel for schedule(static)
  for (int64_t n = 0; n < g.n; ++n) {
    T* img = dst + n * g.c_big * g.p_big();
    for (int64_t c = 0; c < g.c_big; ++c) {
      T* plane = img + c * g.p_big();
      for (int64_t kh = 0; kh < g.k; ++kh) {
        for (int64_t kw = 0; kw < g.k; ++kw) {
          const T* src = cols + (c * kk + kh * g.k + kw) * row_len + n * ps;
          for (int64_t hs = 0; hs < g.h_small; ++hs) {
            const int64_t hb = hs * g.stride - g.pad + kh;
            if (hb < 0 || hb >= g.h_big) continue;
            for (int64_t ws = 0; ws < g.w_small; ++ws) {
              const int64_t wb = ws * g.stride - g.pad + kw;
              if (wb >= 0 && wb < g.w_big) plane[hb * g.w_big + wb] += src[hs * g.w_small + ws];
            }
          }
        }
      }
    }
  }
}

// (N,C,P) -> (C, N*P)
template <typename T>
void nchw_to_cnp(const T* src, int64_t n, int64_t c, int64_t p, T* dst) {
#pragma omp parallel for schedule(static)
  for (int64_t in = 0; in < n; ++in)
    for (int64_t ic = 0; ic < c; ++ic) {
      const T* s = src + (in * c + ic) * p;
      T* d = dst + ic * n * p + in * p;
      std::copy(s, s + p, d);
    }
}

// (C, N*P) -> (N,C,P), optionally adding a per-channel bias.
template <typename T>
void cnp_to_nchw(const T* src, int64_t n, int64_t c, int64_t p, const T* bias, T* dst) {
#pragma omp parallel for schedule(static)
  for (int64_t in = 0; in < n; ++in)
    for (int64_t ic = 0; ic < c; ++ic) {
      const T* s = src + ic * n * p + in * p;
      T* d = dst + (in * c + ic) * p;
      if (bias) {
        const T b = bias[ic];
        for (int64_t i = 0; i < p; ++i) d[i] = s[i] + b;
      } else {
        std::copy(s, s + p, d);
      }
    }
}

// Same as cnp_to_nchw but accumulating (for gradients).
template <typename T>
void cnp_to_nchw_acc(const T* src, int64_t n, int64_t c, int64_t p, T* dst) {
#pragma omp parallel for schedule(static)
  for (int64_t in = 0; in < n; ++in)
    for (int64_t ic = 0; ic < c; ++ic) {
      const T* s = src + ic * n * p + in * p;
      T* d = dst + (in * c + ic) * p;
      for (int64_t i = 0; i < p; ++i) d[i] += s[i];
    }
}

template <typename T>
std::vector<T>& scratch(int which) {
  static thread_local std::vector<T> bufs[4];
  return bufs[which];
}

template <typename T>
T* scratch_ptr(int which, size_t n) {
  auto& v = scratch<T>(which);
  if (v.size() < n) v.resize(n);
  return v.data();
}

}  // namespace convdet

// y = conv2d(x, w, b): x (N,Ci,H,W), w (Co,Ci,K,K), b (Co), NCHW output.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int64_t stride, int64_t pad) {
  using namespace convdet;
  const auto& xs = x->value.shape();
  const auto& ws = w->value.shape();
  if (xs.size() != 4 || ws.size() != 4)
    throw DimensionError("conv2d: expected rank-4 input and weight");
  if (xs[1] != ws[1])
    throw DimensionError("conv2d: channel mismatch " + x->value.shape_str() + " vs " +
                         w->value.shape_str());
  if (ws[2] != ws[3]) throw DimensionError("conv2d: only square kernels supported");
  if (b->value.numel() != ws[0]) throw DimensionError("conv2d: bias size mismatch");

  ConvGeom g;
  g.n = xs[0];
  g.c_big = xs[1];
  g.h_big = xs[2];
  g.w_big = xs[3];
  g.c_small = ws[0];
  g.k = ws[2];
  g.stride = stride;
  g.pad = pad;
  g.h_small = conv_out_dim(g.h_big, g.k, stride, pad);
  g.w_small = conv_out_dim(g.w_big, g.k, stride, pad);
  if (g.h_small <= 0 || g.w_small <= 0)
    throw DimensionError("conv2d: input smaller than kernel");

  const int64_t krows = g.c_big * g.k * g.k;
  const int64_t cols_n = g.n * g.p_small();

  T* cols = scratch_ptr<T>(0, static_cast<size_t>(krows * cols_n));
  im2col(x->value.data(), g, cols);
  T* out_perm = scratch_ptr<T>(1, static_cast<size_t>(g.c_small * cols_n));
  gemm(w->value.data(), cols, out_perm, g.c_small, krows, cols_n);

  Tensor<T> y({g.n, g.c_small, g.h_small, g.w_small});
  cnp_to_nchw(out_perm, g.n, g.c_small, g.p_small(), b->value.data(), y.data());

  return detail::make_op<T>(std::move(y), {x, w, b}, [x, w, b, g](Node<T>& self) {
    const int64_t krows = g.c_big * g.k * g.k;
    const int64_t cols_n = g.n * g.p_small();
    T* dy_perm = scratch_ptr<T>(2, static_cast<size_t>(g.c_small * cols_n));
    nchw_to_cnp(self.grad.data(), g.n, g.c_small, g.p_small(), dy_perm);

    if (w->requires_grad) {
      T* cols = scratch_ptr<T>(0, static_cast<size_t>(krows * cols_n));
      im2col(x->value.data(), g, cols);
      auto& gw = w->ensure_grad();
      ConstMatMap<T> DY(dy_perm, g.c_small, cols_n);
      ConstMatMap<T> C(cols, krows, cols_n);
      MatMap<T> GW(gw.data(), g.c_small, krows);
      GW.noalias() += DY * C.transpose();
    }
    if (b->requires_grad) {
      auto& gb = b->ensure_grad();
      for (int64_t c = 0; c < g.c_small; ++c) {
        double acc = 0.0;
        const T* row = dy_perm + c * cols_n;
        for (int64_t i = 0; i < cols_n; ++i) acc += static_cast<double>(row[i]);
        gb[c] += static_cast<T>(acc);
      }
    }
    if (x->requires_grad) {
      T* dcols = scratch_ptr<T>(3, static_cast<size_t>(krows * cols_n));
      gemm_at_b(w->value.data(), dy_perm, dcols, krows, g.c_small, cols_n);
      col2im_acc(dcols, g, x->ensure_grad().data());
    }
  });
}

// y = conv_transpose2d(x, w, b): x (N,Ci,H,W), w (Ci,Co,K,K), b (Co).
// Exact adjoint of conv2d with the same stride/pad.
template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int64_t stride,
                        int64_t pad) {
  using namespace convdet;
  const auto& xs = x->value.shape();
  const auto& ws = w->value.shape();
  if (xs.size() != 4 || ws.size() != 4)
    throw DimensionError("conv_transpose2d: expected rank-4 input and weight");
  if (xs[1] != ws[0])
    throw DimensionError("conv_transpose2d: channel mismatch " + x->value.shape_str() + " vs " +
                         w->value.shape_str());
  if (ws[2] != ws[3]) throw DimensionError("conv_transpose2d: only square kernels supported");
  if (b->value.numel() != ws[1]) throw DimensionError("conv_transpose2d: bias size mismatch");

  ConvGeom g;
  g.n = xs[0];
  g.c_small = xs[1];  // tconv input lives on the small grid
  g.h_small = xs[2];
  g.w_small = xs[3];
  g.c_big = ws[1];
  g.k = ws[2];
  g.stride = stride;
  g.pad = pad;
  g.h_big = tconv_out_dim(g.h_small, g.k, stride, pad);
  g.w_big = tconv_out_dim(g.w_small, g.k, stride, pad);
  if (g.h_big <= 0 || g.w_big <= 0) throw DimensionError("conv_transpose2d: bad output size");

  // Reinterpret the geometry for shared im2col/col2im: channels on the big
  // grid are the tconv output channels.
  ConvGeom gc = g;
  gc.c_big = ws[1];
  gc.c_small = ws[0];

  const int64_t krows = gc.c_big * g.k * g.k;  // Co*K*K
  const int64_t cols_n = g.n * g.p_small();

  T* x_perm = scratch_ptr<T>(1, static_cast<size_t>(xs[1] * cols_n));
  nchw_to_cnp(x->value.data(), g.n, xs[1], g.p_small(), x_perm);
  T* cols = scratch_ptr<T>(0, static_cast<size_t>(krows * cols_n));
  // cols (Co*K*K x N*Ps) = W^T (viewed (Ci x Co*K*K)) * x_perm
  gemm_at_b(w->value.data(), x_perm, cols, krows, xs[1], cols_n);

  Tensor<T> y({g.n, gc.c_big, g.h_big, g.w_big});
  {
    T* yd = y.data();
    const T* bias = b->value.data();
#pragma omp parallel for schedule(static)
    for (int64_t n = 0; n < g.n; ++n)
      for (int64_t c = 0; c < gc.c_big; ++c) {
        T* plane = yd + (n * gc.c_big + c) * g.p_big();
        std::fill(plane, plane + g.p_big(), bias[c]);
      }
  }
  col2im_acc(cols, gc, y.data());

  return detail::make_op<T>(std::move(y), {x, w, b}, [x, w, b, gc](Node<T>& self) {
    const ConvGeom& g = gc;
    const int64_t ci = w->value.dim(0);
    const int64_t krows = g.c_big * g.k * g.k;
    const int64_t cols_n = g.n * g.p_small();
    // im2col over the output-side gradient
    T* dy_cols = scratch_ptr<T>(2, static_cast<size_t>(krows * cols_n));
    im2col(self.grad.data(), g, dy_cols);

    if (w->requires_grad) {
      T* x_perm = scratch_ptr<T>(1, static_cast<size_t>(ci * cols_n));
      nchw_to_cnp(x->value.data(), g.n, ci, g.p_small(), x_perm);
      auto& gw = w->ensure_grad();
      ConstMatMap<T> XP(x_perm, ci, cols_n);
      ConstMatMap<T> DC(dy_cols, krows, cols_n);
      MatMap<T> GW(gw.data(), ci, krows);
      GW.noalias() += XP * DC.transpose();
    }
    if (b->requires_grad) {
      auto& gb = b->ensure_grad();
      const T* gd = self.grad.data();
      for (int64_t c = 0; c < g.c_big; ++c) {
        double acc = 0.0;
        for (int64_t n = 0; n < g.n; ++n) {
          const T* plane = gd + (n * g.c_big + c) * g.p_big();
          for (int64_t i = 0; i < g.p_big(); ++i) acc += static_cast<double>(plane[i]);
        }
        gb[c] += static_cast<T>(acc);
      }
    }
    if (x->requires_grad) {
      T* dx_perm = scratch_ptr<T>(3, static_cast<size_t>(ci * cols_n));
      gemm(w->value.data(), dy_cols, dx_perm, ci, krows, cols_n);
      cnp_to_nchw_acc(dx_perm, g.n, ci, g.p_small(), x->ensure_grad().data());
    }
  });
}

}  // namespace unmix
