#pragma once

// Flat float32 kernels behind runtime-selected function pointers. Every
// entry has a scalar reference implementation; the AVX2 variants are swapped
// in at startup when the CPU supports them. The scalar table stays reachable
// for equivalence tests and as the fallback.

#include <cstddef>
#include <type_traits>

namespace tgseg::kern {

struct Ops {
  float (*dot)(const float* a, const float* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(float alpha, const float* x, float* y, std::size_t n);
  void (*add)(const float* a, const float* b, float* out, std::size_t n);
  void (*sub)(const float* a, const float* b, float* out, std::size_t n);
  void (*mul)(const float* a, const float* b, float* out, std::size_t n);
  void (*scale)(float alpha, const float* x, float* out, std::size_t n);
  float (*sum)(const float* x, std::size_t n);
  float (*sum_abs)(const float* x, std::size_t n);
  float (*sum_sq)(const float* x, std::size_t n);
  void (*relu)(const float* x, float* out, std::size_t n);
  // gx += g where x > 0
  void (*relu_bwd)(const float* x, const float* g, float* gx, std::size_t n);
  void (*clamp)(const float* x, float lo, float hi, float* out, std::size_t n);
  // Fused decoupled-weight-decay Adam update; inv_bc1/inv_bc2 are the
  // precomputed 1/(1-beta^t) bias corrections.
  void (*adamw)(float* p, const float* g, float* m, float* v, std::size_t n,
                float lr, float beta1, float beta2, float eps, float wd,
                float inv_bc1, float inv_bc2);

  // Whole-plane stride-1 zero-padded convolution passes over one sample.
  // out/gin/gk are accumulated into (callers zero them first).
  void (*conv2d_s1)(const float* in, std::size_t c, std::size_t h, std::size_t w,
                    const float* k, std::size_t f, std::size_t kh, std::size_t kw,
                    std::size_t pad, float* out, std::size_t oh, std::size_t ow);
  void (*conv2d_s1_bwd_in)(const float* gout, const float* k, std::size_t c,
                           std::size_t h, std::size_t w, std::size_t f,
                           std::size_t kh, std::size_t kw, std::size_t pad,
                           float* gin, std::size_t oh, std::size_t ow);
  void (*conv2d_s1_bwd_k)(const float* gout, const float* in, std::size_t c,
                          std::size_t h, std::size_t w, std::size_t f,
                          std::size_t kh, std::size_t kw, std::size_t pad,
                          float* gk, std::size_t oh, std::size_t ow);
};

const Ops& scalar_ops();
// Null when the binary's AVX2 TU cannot run on this CPU.
const Ops* avx2_ops();
// Active table: AVX2 when available unless forced to scalar.
const Ops& ops();
const char* active_isa();
void force_scalar(bool on);

// Typed wrappers used by the templated autodiff layer: float goes through
// the dispatch table, any other scalar type takes the plain loop.

template <typename T>
inline T vdot(const T* a, const T* b, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    return ops().dot(a, b, n);
  } else {
    T s = 0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
  }
}

template <typename T>
inline void vaxpy(T alpha, const T* x, T* y, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    ops().axpy(alpha, x, y, n);
  } else {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
  }
}

template <typename T>
inline void vadd(const T* a, const T* b, T* out, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    ops().add(a, b, out, n);
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
  }
}

template <typename T>
inline void vsub(const T* a, const T* b, T* out, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    ops().sub(a, b, out, n);
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
  }
}

template <typename T>
inline void vmul(const T* a, const T* b, T* out, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    ops().mul(a, b, out, n);
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
  }
}

template <typename T>
inline void vscale(T alpha, const T* x, T* out, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    ops().scale(alpha, x, out, n);
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i];
  }
}

template <typename T>
inline T vsum(const T* x, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    return ops().sum(x, n);
  } else {
    T s = 0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
}

template <typename T>
inline T vsum_abs(const T* x, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    return ops().sum_abs(x, n);
  } else {
    T s = 0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] < 0 ? -x[i] : x[i];
    return s;
  }
}

template <typename T>
inline T vsum_sq(const T* x, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    return ops().sum_sq(x, n);
  } else {
    T s = 0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
    return s;
  }
}

template <typename T>
inline void vrelu(const T* x, T* out, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    ops().relu(x, out, n);
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0 ? x[i] : T(0);
  }
}

template <typename T>
inline void vrelu_bwd(const T* x, const T* g, T* gx, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    ops().relu_bwd(x, g, gx, n);
  } else {
    for (std::size_t i = 0; i < n; ++i)
      if (x[i] > 0) gx[i] += g[i];
  }
}

template <typename T>
inline void vclamp(const T* x, T lo, T hi, T* out, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    ops().clamp(x, lo, hi, out, n);
  } else {
    for (std::size_t i = 0; i < n; ++i)
      out[i] = x[i] < lo ? lo : (x[i] > hi ? hi : x[i]);
  }
}

}  // namespace tgseg::kern
