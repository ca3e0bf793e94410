// Scalar reference kernels. These define the semantics the SIMD variants
// are tested against.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "tgseg/kern/kernels.hpp"

namespace tgseg::kern {

namespace {

float dot_ref(const float* a, const float* b, std::size_t n) {
  float s = 0.0f;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_ref(float alpha, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void add_ref(const float* a, const float* b, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_ref(const float* a, const float* b, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_ref(const float* a, const float* b, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_ref(float alpha, const float* x, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

float sum_ref(const float* x, std::size_t n) {
  float s = 0.0f;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

float sum_abs_ref(const float* x, std::size_t n) {
  float s = 0.0f;
  for (std::size_t i = 0; i < n; ++i) s += std::fabs(x[i]);
  return s;
}

float sum_sq_ref(const float* x, std::size_t n) {
  float s = 0.0f;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

void relu_ref(const float* x, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_ref(const float* x, const float* g, float* gx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] > 0.0f) gx[i] += g[i];
}

void clamp_ref(const float* x, float lo, float hi, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    out[i] = x[i] < lo ? lo : (x[i] > hi ? hi : x[i]);
}

void adamw_ref(float* p, const float* g, float* m, float* v, std::size_t n,
               float lr, float beta1, float beta2, float eps, float wd,
               float inv_bc1, float inv_bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0f - beta2) * g[i] * g[i];
    const float mhat = m[i] * inv_bc1;
    const float vhat = v[i] * inv_bc2;
    p[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * p[i]);
  }
}

// Valid output-row bounds for a kernel offset under zero padding: the input
// row index oy+ky-pad must stay inside [0,h), likewise for columns.
struct TapRange {
  std::size_t lo, hi;
};
inline TapRange tap_range(std::size_t k, std::size_t pad, std::size_t extent,
                          std::size_t out_extent) {
  const std::size_t lo = pad > k ? pad - k : 0;
  const std::size_t hi = std::min(out_extent, extent + pad - k);
  return {lo, hi < lo ? lo : hi};
}

void conv2d_s1_ref(const float* in, std::size_t c, std::size_t h, std::size_t w,
                   const float* k, std::size_t f, std::size_t kh, std::size_t kw,
                   std::size_t pad, float* out, std::size_t oh, std::size_t ow) {
  for (std::size_t fi = 0; fi < f; ++fi) {
    float* oplane = out + fi * oh * ow;
    for (std::size_t ci = 0; ci < c; ++ci) {
      const float* iplane = in + ci * h * w;
      const float* kplane = k + (fi * c + ci) * kh * kw;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const TapRange ry = tap_range(ky, pad, h, oh);
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const TapRange rx = tap_range(kx, pad, w, ow);
          if (rx.hi <= rx.lo) continue;
          const float wv = kplane[ky * kw + kx];
          for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
            const float* irow = iplane + (oy + ky - pad) * w + (rx.lo + kx - pad);
            float* orow = oplane + oy * ow + rx.lo;
            for (std::size_t i = 0; i < rx.hi - rx.lo; ++i) orow[i] += wv * irow[i];
          }
        }
      }
    }
  }
}

void conv2d_s1_bwd_in_ref(const float* gout, const float* k, std::size_t c,
                          std::size_t h, std::size_t w, std::size_t f,
                          std::size_t kh, std::size_t kw, std::size_t pad,
                          float* gin, std::size_t oh, std::size_t ow) {
  for (std::size_t fi = 0; fi < f; ++fi) {
    const float* goplane = gout + fi * oh * ow;
    for (std::size_t ci = 0; ci < c; ++ci) {
      float* giplane = gin + ci * h * w;
      const float* kplane = k + (fi * c + ci) * kh * kw;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const TapRange ry = tap_range(ky, pad, h, oh);
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const TapRange rx = tap_range(kx, pad, w, ow);
          if (rx.hi <= rx.lo) continue;
          const float wv = kplane[ky * kw + kx];
          for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
            const float* gorow = goplane + oy * ow + rx.lo;
            float* girow = giplane + (oy + ky - pad) * w + (rx.lo + kx - pad);
            for (std::size_t i = 0; i < rx.hi - rx.lo; ++i) girow[i] += wv * gorow[i];
          }
        }
      }
    }
  }
}

void conv2d_s1_bwd_k_ref(const float* gout, const float* in, std::size_t c,
                         std::size_t h, std::size_t w, std::size_t f,
                         std::size_t kh, std::size_t kw, std::size_t pad,
                         float* gk, std::size_t oh, std::size_t ow) {
  for (std::size_t fi = 0; fi < f; ++fi) {
    const float* goplane = gout + fi * oh * ow;
    for (std::size_t ci = 0; ci < c; ++ci) {
      const float* iplane = in + ci * h * w;
      float* kplane = gk + (fi * c + ci) * kh * kw;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const TapRange ry = tap_range(ky, pad, h, oh);
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const TapRange rx = tap_range(kx, pad, w, ow);
          if (rx.hi <= rx.lo) continue;
          float acc = 0.0f;
          for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
            const float* gorow = goplane + oy * ow + rx.lo;
            const float* irow = iplane + (oy + ky - pad) * w + (rx.lo + kx - pad);
            for (std::size_t i = 0; i < rx.hi - rx.lo; ++i) acc += gorow[i] * irow[i];
          }
          kplane[ky * kw + kx] += acc;
        }
      }
    }
  }
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops table = {
      dot_ref,  axpy_ref,    add_ref,  sub_ref,      mul_ref,
      scale_ref, sum_ref,    sum_abs_ref, sum_sq_ref, relu_ref,
      relu_bwd_ref, clamp_ref, adamw_ref,
      conv2d_s1_ref, conv2d_s1_bwd_in_ref, conv2d_s1_bwd_k_ref,
  };
  return table;
}

}  // namespace tgseg::kern
