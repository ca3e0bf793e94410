// AVX2+FMA kernel variants. This is the only translation unit compiled with
// -mavx2 -mfma; dispatch.cpp only installs the table after a runtime CPU
// feature check, so the rest of the binary stays ISA-generic.

#include "tgseg/kern/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cmath>
#include <cstddef>

namespace tgseg::kern {

namespace {

inline float hsum256(__m256 v) {
  const __m128 lo = _mm256_castps256_ps128(v);
  const __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_hadd_ps(s, s);
  s = _mm_hadd_ps(s, s);
  return _mm_cvtss_f32(s);
}

float dot_avx2(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  }
  float s = hsum256(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    _mm256_storeu_ps(y + i + 8,
                     _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8)));
  }
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void add_avx2(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_avx2(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_avx2(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_avx2(float alpha, const float* x, float* out, std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
  for (; i < n; ++i) out[i] = alpha * x[i];
}

float sum_avx2(const float* x, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
  float s = hsum256(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

float sum_abs_avx2(const float* x, std::size_t n) {
  const __m256 mask = _mm256_castsi256_ps(_mm256_set1_epi32(0x7fffffff));
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    acc = _mm256_add_ps(acc, _mm256_and_ps(mask, _mm256_loadu_ps(x + i)));
  float s = hsum256(acc);
  for (; i < n; ++i) s += std::fabs(x[i]);
  return s;
}

float sum_sq_avx2(const float* x, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    acc = _mm256_fmadd_ps(v, v, acc);
  }
  float s = hsum256(acc);
  for (; i < n; ++i) s += x[i] * x[i];
  return s;
}

void relu_avx2(const float* x, float* out, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_max_ps(zero, _mm256_loadu_ps(x + i)));
  for (; i < n; ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_avx2(const float* x, const float* g, float* gx, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 m = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
    const __m256 masked = _mm256_and_ps(m, _mm256_loadu_ps(g + i));
    _mm256_storeu_ps(gx + i, _mm256_add_ps(_mm256_loadu_ps(gx + i), masked));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0f) gx[i] += g[i];
}

void clamp_avx2(const float* x, float lo, float hi, float* out, std::size_t n) {
  const __m256 vlo = _mm256_set1_ps(lo);
  const __m256 vhi = _mm256_set1_ps(hi);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_min_ps(vhi, _mm256_max_ps(vlo, _mm256_loadu_ps(x + i))));
  for (; i < n; ++i) out[i] = x[i] < lo ? lo : (x[i] > hi ? hi : x[i]);
}

void adamw_avx2(float* p, const float* g, float* m, float* v, std::size_t n,
                float lr, float beta1, float beta2, float eps, float wd,
                float inv_bc1, float inv_bc2) {
  const __m256 vb1 = _mm256_set1_ps(beta1);
  const __m256 vb2 = _mm256_set1_ps(beta2);
  const __m256 vomb1 = _mm256_set1_ps(1.0f - beta1);
  const __m256 vomb2 = _mm256_set1_ps(1.0f - beta2);
  const __m256 vlr = _mm256_set1_ps(lr);
  const __m256 veps = _mm256_set1_ps(eps);
  const __m256 vwd = _mm256_set1_ps(wd);
  const __m256 vbc1 = _mm256_set1_ps(inv_bc1);
  const __m256 vbc2 = _mm256_set1_ps(inv_bc2);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 gi = _mm256_loadu_ps(g + i);
    __m256 mi = _mm256_fmadd_ps(vomb1, gi, _mm256_mul_ps(vb1, _mm256_loadu_ps(m + i)));
    __m256 vi = _mm256_fmadd_ps(vomb2, _mm256_mul_ps(gi, gi),
                                _mm256_mul_ps(vb2, _mm256_loadu_ps(v + i)));
    _mm256_storeu_ps(m + i, mi);
    _mm256_storeu_ps(v + i, vi);
    const __m256 mhat = _mm256_mul_ps(mi, vbc1);
    const __m256 vhat = _mm256_mul_ps(vi, vbc2);
    const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(vhat), veps);
    const __m256 pi = _mm256_loadu_ps(p + i);
    const __m256 step = _mm256_fmadd_ps(vwd, pi, _mm256_div_ps(mhat, denom));
    _mm256_storeu_ps(p + i, _mm256_fnmadd_ps(vlr, step, pi));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0f - beta2) * g[i] * g[i];
    const float mhat = m[i] * inv_bc1;
    const float vhat = v[i] * inv_bc2;
    p[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * p[i]);
  }
}

// Row helpers that inline into the convolution nests below.
inline void axpy_row(float a, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

inline float dot_row(const float* a, const float* b, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc);
  float s = hsum256(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

struct TapRange {
  std::size_t lo, hi;
};
inline TapRange tap_range(std::size_t k, std::size_t pad, std::size_t extent,
                          std::size_t out_extent) {
  const std::size_t lo = pad > k ? pad - k : 0;
  std::size_t hi = out_extent < extent + pad - k ? out_extent : extent + pad - k;
  if (hi < lo) hi = lo;
  return {lo, hi};
}

// Nine-tap register-blocked 3x3/pad-1 pass: out_plane += in_plane (*) w9.
// One store amortizes nine FMAs; borders fall back to scalar taps.
void conv3x3_acc(const float* iplane, const float w9[9], float* oplane,
                 std::size_t h, std::size_t w) {
  const __m256 vw[9] = {
      _mm256_set1_ps(w9[0]), _mm256_set1_ps(w9[1]), _mm256_set1_ps(w9[2]),
      _mm256_set1_ps(w9[3]), _mm256_set1_ps(w9[4]), _mm256_set1_ps(w9[5]),
      _mm256_set1_ps(w9[6]), _mm256_set1_ps(w9[7]), _mm256_set1_ps(w9[8])};
  for (std::size_t oy = 0; oy < h; ++oy) {
    const float* rows[3] = {
        oy > 0 ? iplane + (oy - 1) * w : nullptr,
        iplane + oy * w,
        oy + 1 < h ? iplane + (oy + 1) * w : nullptr,
    };
    float* orow = oplane + oy * w;
    std::size_t ox = 1;
    for (; ox + 8 <= w - 1; ox += 8) {
      __m256 acc = _mm256_loadu_ps(orow + ox);
      for (int ky = 0; ky < 3; ++ky) {
        const float* r = rows[ky];
        if (!r) continue;
        acc = _mm256_fmadd_ps(vw[ky * 3 + 0], _mm256_loadu_ps(r + ox - 1), acc);
        acc = _mm256_fmadd_ps(vw[ky * 3 + 1], _mm256_loadu_ps(r + ox), acc);
        acc = _mm256_fmadd_ps(vw[ky * 3 + 2], _mm256_loadu_ps(r + ox + 1), acc);
      }
      _mm256_storeu_ps(orow + ox, acc);
    }
    auto scalar_col = [&](std::size_t oxx) {
      float acc = orow[oxx];
      for (int ky = 0; ky < 3; ++ky) {
        const float* r = rows[ky];
        if (!r) continue;
        if (oxx > 0) acc += w9[ky * 3 + 0] * r[oxx - 1];
        acc += w9[ky * 3 + 1] * r[oxx];
        if (oxx + 1 < w) acc += w9[ky * 3 + 2] * r[oxx + 1];
      }
      orow[oxx] = acc;
    };
    scalar_col(0);
    for (; ox < w; ++ox) scalar_col(ox);
  }
}

void conv2d_s1_avx2(const float* in, std::size_t c, std::size_t h, std::size_t w,
                    const float* k, std::size_t f, std::size_t kh, std::size_t kw,
                    std::size_t pad, float* out, std::size_t oh, std::size_t ow) {
  if (kh == 3 && kw == 3 && pad == 1 && w >= 2) {
    for (std::size_t fi = 0; fi < f; ++fi)
      for (std::size_t ci = 0; ci < c; ++ci)
        conv3x3_acc(in + ci * h * w, k + (fi * c + ci) * 9, out + fi * oh * ow, h, w);
    return;
  }
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
          for (std::size_t oy = ry.lo; oy < ry.hi; ++oy)
            axpy_row(wv, iplane + (oy + ky - pad) * w + (rx.lo + kx - pad),
                     oplane + oy * ow + rx.lo, rx.hi - rx.lo);
        }
      }
    }
  }
}

void conv2d_s1_bwd_in_avx2(const float* gout, const float* k, std::size_t c,
                           std::size_t h, std::size_t w, std::size_t f,
                           std::size_t kh, std::size_t kw, std::size_t pad,
                           float* gin, std::size_t oh, std::size_t ow) {
  if (kh == 3 && kw == 3 && pad == 1 && w >= 2) {
    // Input gradient is correlation with the 180-degree-rotated kernel.
    for (std::size_t fi = 0; fi < f; ++fi)
      for (std::size_t ci = 0; ci < c; ++ci) {
        const float* kp = k + (fi * c + ci) * 9;
        const float kr[9] = {kp[8], kp[7], kp[6], kp[5], kp[4],
                             kp[3], kp[2], kp[1], kp[0]};
        conv3x3_acc(gout + fi * oh * ow, kr, gin + ci * h * w, h, w);
      }
    return;
  }
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
          for (std::size_t oy = ry.lo; oy < ry.hi; ++oy)
            axpy_row(wv, goplane + oy * ow + rx.lo,
                     giplane + (oy + ky - pad) * w + (rx.lo + kx - pad),
                     rx.hi - rx.lo);
        }
      }
    }
  }
}

void conv2d_s1_bwd_k_avx2(const float* gout, const float* in, std::size_t c,
                          std::size_t h, std::size_t w, std::size_t f,
                          std::size_t kh, std::size_t kw, std::size_t pad,
                          float* gk, std::size_t oh, std::size_t ow) {
  if (kh == 3 && kw == 3 && pad == 1 && w >= 2) {
    for (std::size_t fi = 0; fi < f; ++fi) {
      const float* goplane = gout + fi * oh * ow;
      for (std::size_t ci = 0; ci < c; ++ci) {
        const float* iplane = in + ci * h * w;
        __m256 vacc[9];
        for (auto& v : vacc) v = _mm256_setzero_ps();
        float sacc[9] = {0};
        for (std::size_t oy = 0; oy < h; ++oy) {
          const float* rows[3] = {
              oy > 0 ? iplane + (oy - 1) * w : nullptr,
              iplane + oy * w,
              oy + 1 < h ? iplane + (oy + 1) * w : nullptr,
          };
          const float* gorow = goplane + oy * ow;
          std::size_t ox = 1;
          for (; ox + 8 <= w - 1; ox += 8) {
            const __m256 go = _mm256_loadu_ps(gorow + ox);
            for (int ky = 0; ky < 3; ++ky) {
              const float* r = rows[ky];
              if (!r) continue;
              vacc[ky * 3 + 0] =
                  _mm256_fmadd_ps(go, _mm256_loadu_ps(r + ox - 1), vacc[ky * 3 + 0]);
              vacc[ky * 3 + 1] =
                  _mm256_fmadd_ps(go, _mm256_loadu_ps(r + ox), vacc[ky * 3 + 1]);
              vacc[ky * 3 + 2] =
                  _mm256_fmadd_ps(go, _mm256_loadu_ps(r + ox + 1), vacc[ky * 3 + 2]);
            }
          }
          auto scalar_col = [&](std::size_t oxx) {
            const float go = gorow[oxx];
            for (int ky = 0; ky < 3; ++ky) {
              const float* r = rows[ky];
              if (!r) continue;
              if (oxx > 0) sacc[ky * 3 + 0] += go * r[oxx - 1];
              sacc[ky * 3 + 1] += go * r[oxx];
              if (oxx + 1 < w) sacc[ky * 3 + 2] += go * r[oxx + 1];
            }
          };
          scalar_col(0);
          for (; ox < w; ++ox) scalar_col(ox);
        }
        float* kplane = gk + (fi * c + ci) * 9;
        for (int t = 0; t < 9; ++t) kplane[t] += hsum256(vacc[t]) + sacc[t];
      }
    }
    return;
  }
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
          for (std::size_t oy = ry.lo; oy < ry.hi; ++oy)
            acc += dot_row(goplane + oy * ow + rx.lo,
                           iplane + (oy + ky - pad) * w + (rx.lo + kx - pad),
                           rx.hi - rx.lo);
          kplane[ky * kw + kx] += acc;
        }
      }
    }
  }
}

}  // namespace

const Ops* avx2_ops_table() {
  static const Ops table = {
      dot_avx2,  axpy_avx2,    add_avx2,  sub_avx2,      mul_avx2,
      scale_avx2, sum_avx2,    sum_abs_avx2, sum_sq_avx2, relu_avx2,
      relu_bwd_avx2, clamp_avx2, adamw_avx2,
      conv2d_s1_avx2, conv2d_s1_bwd_in_avx2, conv2d_s1_bwd_k_avx2,
  };
  return &table;
}

}  // namespace tgseg::kern

#else

namespace tgseg::kern {
const Ops* avx2_ops_table() { return nullptr; }
}  // namespace tgseg::kern

#endif
