#include "tgseg/ad/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "tgseg/kern/kernels.hpp"

namespace tgseg::ad {

namespace {

template <typename T>
void check_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape != b.shape)
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                     " vs " + shape_str(b.shape));
}

template <typename T>
void check_scalar(const char* op, const Tensor<T>& s) {
  if (s.numel() != 1)
    throw ShapeError(std::string(op) + ": expected scalar node, got " +
                     shape_str(s.shape));
}

// Views a CHW tensor as NCHW with N=1 so conv/pool code handles both ranks.
struct Chw4 {
  std::size_t n, c, h, w;
  bool batched;
};

template <typename T>
Chw4 as_nchw(const char* op, const Tensor<T>& t) {
  if (t.rank() == 3) return {1, t.shape[0], t.shape[1], t.shape[2], false};
  if (t.rank() == 4) return {t.shape[0], t.shape[1], t.shape[2], t.shape[3], true};
  throw ShapeError(std::string(op) + ": expected rank 3 or 4 input, got " +
                   shape_str(t.shape));
}

Shape make_spatial_shape(bool batched, std::size_t n, std::size_t c,
                         std::size_t h, std::size_t w) {
  if (batched) return {n, c, h, w};
  return {c, h, w};
}

}  // namespace

template <typename T>
Var Graph<T>::push(Tensor<T> value, bool requires_grad,
                   std::function<void(Graph&)> bwd) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.bwd = std::move(bwd);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
Var Graph<T>::leaf(Tensor<T> value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

template <typename T>
T* Graph<T>::grad_buf(Var v) {
  auto& n = node(v);
  if (n.grad.empty()) n.grad.assign(n.value.numel(), T(0));
  return n.grad.data();
}

template <typename T>
void Graph<T>::accum(Var v, const T* g, std::size_t n) {
  if (!node(v).requires_grad) return;
  kern::vaxpy(T(1), g, grad_buf(v), n);
}

template <typename T>
const std::vector<T>& Graph<T>::grad(Var v) const {
  static const std::vector<T> empty;
  const auto& n = node(v);
  return n.grad.empty() ? empty : n.grad;
}

template <typename T>
void Graph<T>::zero_grads() {
  for (auto& n : nodes_) n.grad.clear();
}

template <typename T>
void Graph<T>::backward(Var loss) {
  if (!loss.valid() || loss.id >= nodes_.size())
    throw ContractError("backward: invalid loss node");
  if (node(loss).value.numel() != 1)
    throw ContractError("backward: loss must be scalar, got " +
                        shape_str(node(loss).value.shape));
  // Interior gradients are per-sweep scratch; only leaf gradients persist
  // and accumulate across calls.
  for (auto& n : nodes_)
    if (n.bwd) n.grad.clear();
  grad_buf(loss)[0] += T(1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.requires_grad && !n.grad.empty() && n.bwd) n.bwd(*this);
  }
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Var Graph<T>::add(Var a, Var b) {
  check_same_shape("add", val(a), val(b));
  Tensor<T> out(val(a).shape);
  kern::vadd(val(a).data.data(), val(b).data.data(), out.data.data(), out.numel());
  const bool rg = requires_grad(a) || requires_grad(b);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg, rg ? [a, b, self](Graph& g) {
    const auto& gr = g.node(self).grad;
    g.accum(a, gr.data(), gr.size());
    g.accum(b, gr.data(), gr.size());
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::sub(Var a, Var b) {
  check_same_shape("sub", val(a), val(b));
  Tensor<T> out(val(a).shape);
  kern::vsub(val(a).data.data(), val(b).data.data(), out.data.data(), out.numel());
  const bool rg = requires_grad(a) || requires_grad(b);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg, rg ? [a, b, self](Graph& g) {
    const auto& gr = g.node(self).grad;
    g.accum(a, gr.data(), gr.size());
    if (g.requires_grad(b)) {
      T* gb = g.grad_buf(b);
      kern::vaxpy(T(-1), gr.data(), gb, gr.size());
    }
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::mul(Var a, Var b) {
  check_same_shape("mul", val(a), val(b));
  Tensor<T> out(val(a).shape);
  kern::vmul(val(a).data.data(), val(b).data.data(), out.data.data(), out.numel());
  const bool rg = requires_grad(a) || requires_grad(b);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg, rg ? [a, b, self](Graph& g) {
    const auto& gr = g.node(self).grad;
    const std::size_t n = gr.size();
    if (g.requires_grad(a)) {
      T* ga = g.grad_buf(a);
      const T* vb = g.val(b).data.data();
      for (std::size_t i = 0; i < n; ++i) ga[i] += gr[i] * vb[i];
    }
    if (g.requires_grad(b)) {
      T* gb = g.grad_buf(b);
      const T* va = g.val(a).data.data();
      for (std::size_t i = 0; i < n; ++i) gb[i] += gr[i] * va[i];
    }
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::scale_const(Var x, T c) {
  Tensor<T> out(val(x).shape);
  kern::vscale(c, val(x).data.data(), out.data.data(), out.numel());
  const bool rg = requires_grad(x);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg, rg ? [x, c, self](Graph& g) {
    const auto& gr = g.node(self).grad;
    if (g.requires_grad(x)) kern::vaxpy(c, gr.data(), g.grad_buf(x), gr.size());
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::add_const(Var x, T c) {
  Tensor<T> out(val(x).shape);
  const T* px = val(x).data.data();
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = px[i] + c;
  const bool rg = requires_grad(x);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg, rg ? [x, self](Graph& g) {
    const auto& gr = g.node(self).grad;
    g.accum(x, gr.data(), gr.size());
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::pow_const(Var x, T gamma) {
  Tensor<T> out(val(x).shape);
  const T* px = val(x).data.data();
  for (std::size_t i = 0; i < out.numel(); ++i)
    out.data[i] = px[i] > T(0) ? std::pow(px[i], gamma) : T(0);
  const bool rg = requires_grad(x);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg, rg ? [x, gamma, self](Graph& g) {
    const auto& gr = g.node(self).grad;
    if (!g.requires_grad(x)) return;
    T* gx = g.grad_buf(x);
    const T* px = g.val(x).data.data();
    for (std::size_t i = 0; i < gr.size(); ++i)
      if (px[i] > T(0)) gx[i] += gr[i] * gamma * std::pow(px[i], gamma - T(1));
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::clamp(Var x, T lo, T hi) {
  Tensor<T> out(val(x).shape);
  kern::vclamp(val(x).data.data(), lo, hi, out.data.data(), out.numel());
  const bool rg = requires_grad(x);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg, rg ? [x, lo, hi, self](Graph& g) {
    const auto& gr = g.node(self).grad;
    if (!g.requires_grad(x)) return;
    T* gx = g.grad_buf(x);
    const T* px = g.val(x).data.data();
    for (std::size_t i = 0; i < gr.size(); ++i)
      if (px[i] > lo && px[i] < hi) gx[i] += gr[i];
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::mul_scalar(Var x, Var s) {
  check_scalar("mul_scalar", val(s));
  const T sv = val(s).data[0];
  Tensor<T> out(val(x).shape);
  kern::vscale(sv, val(x).data.data(), out.data.data(), out.numel());
  const bool rg = requires_grad(x) || requires_grad(s);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg, rg ? [x, s, sv, self](Graph& g) {
    const auto& gr = g.node(self).grad;
    if (g.requires_grad(x)) kern::vaxpy(sv, gr.data(), g.grad_buf(x), gr.size());
    if (g.requires_grad(s))
      g.grad_buf(s)[0] += kern::vdot(gr.data(), g.val(x).data.data(), gr.size());
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::sub_scalar(Var x, Var s) {
  check_scalar("sub_scalar", val(s));
  const T sv = val(s).data[0];
  Tensor<T> out(val(x).shape);
  const T* px = val(x).data.data();
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = px[i] - sv;
  const bool rg = requires_grad(x) || requires_grad(s);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg, rg ? [x, s, self](Graph& g) {
    const auto& gr = g.node(self).grad;
    g.accum(x, gr.data(), gr.size());
    if (g.requires_grad(s)) g.grad_buf(s)[0] -= kern::vsum(gr.data(), gr.size());
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::reciprocal(Var x) {
  Tensor<T> out(val(x).shape);
  const T* px = val(x).data.data();
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = T(1) / px[i];
  const bool rg = requires_grad(x);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg, rg ? [x, self](Graph& g) {
    const auto& gr = g.node(self).grad;
    if (!g.requires_grad(x)) return;
    T* gx = g.grad_buf(x);
    const T* py = g.node(self).value.data.data();
    for (std::size_t i = 0; i < gr.size(); ++i) gx[i] -= gr[i] * py[i] * py[i];
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::relu(Var x) {
  Tensor<T> out(val(x).shape);
  kern::vrelu(val(x).data.data(), out.data.data(), out.numel());
  const bool rg = requires_grad(x);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg, rg ? [x, self](Graph& g) {
    const auto& gr = g.node(self).grad;
    if (!g.requires_grad(x)) return;
    kern::vrelu_bwd(g.val(x).data.data(), gr.data(), g.grad_buf(x), gr.size());
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::sigmoid(Var x) {
  // Stable on both tails, then nudged inside the open interval (0,1).
  static const T kHi = std::nextafter(T(1), T(0));
  static const T kLo = std::numeric_limits<T>::min();
  Tensor<T> out(val(x).shape);
  const T* px = val(x).data.data();
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const T v = px[i];
    T s;
    if (v >= T(0)) {
      s = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      s = e / (T(1) + e);
    }
    out.data[i] = std::min(kHi, std::max(kLo, s));
  }
  const bool rg = requires_grad(x);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg, rg ? [x, self](Graph& g) {
    const auto& gr = g.node(self).grad;
    if (!g.requires_grad(x)) return;
    T* gx = g.grad_buf(x);
    const T* s = g.node(self).value.data.data();
    for (std::size_t i = 0; i < gr.size(); ++i)
      gx[i] += gr[i] * s[i] * (T(1) - s[i]);
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::log(Var x) {
  Tensor<T> out(val(x).shape);
  const T* px = val(x).data.data();
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = std::log(px[i]);
  const bool rg = requires_grad(x);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg, rg ? [x, self](Graph& g) {
    const auto& gr = g.node(self).grad;
    if (!g.requires_grad(x)) return;
    T* gx = g.grad_buf(x);
    const T* px = g.val(x).data.data();
    for (std::size_t i = 0; i < gr.size(); ++i) gx[i] += gr[i] / px[i];
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::reshape(Var x, Shape s) {
  if (shape_numel(s) != val(x).numel())
    throw ShapeError("reshape: cannot view " + shape_str(val(x).shape) + " as " +
                     shape_str(s));
  Tensor<T> out(std::move(s), val(x).data);
  const bool rg = requires_grad(x);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg, rg ? [x, self](Graph& g) {
    const auto& gr = g.node(self).grad;
    g.accum(x, gr.data(), gr.size());
  } : std::function<void(Graph&)>{});
}

// ---------------------------------------------------------------------------
// Linear algebra

template <typename T>
Var Graph<T>::matmul(Var a, Var b) {
  const auto& va = val(a);
  const auto& vb = val(b);
  if (va.rank() != 2 || vb.rank() != 2)
    throw ShapeError("matmul: expected rank-2 operands, got " +
                     shape_str(va.shape) + " x " + shape_str(vb.shape));
  if (va.shape[1] != vb.shape[0])
    throw ShapeError("matmul: inner dimensions disagree, " + shape_str(va.shape) +
                     " x " + shape_str(vb.shape));
  const std::size_t m = va.shape[0], k = va.shape[1], n = vb.shape[1];
  Tensor<T> out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    T* orow = out.data.data() + i * n;
    const T* arow = va.data.data() + i * k;
    for (std::size_t l = 0; l < k; ++l)
      kern::vaxpy(arow[l], vb.data.data() + l * n, orow, n);
  }
  const bool rg = requires_grad(a) || requires_grad(b);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg, rg ? [a, b, m, k, n, self](Graph& g) {
    const auto& gr = g.node(self).grad;
    if (g.requires_grad(a)) {
      T* ga = g.grad_buf(a);
      const T* pb = g.val(b).data.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t l = 0; l < k; ++l)
          ga[i * k + l] += kern::vdot(gr.data() + i * n, pb + l * n, n);
    }
    if (g.requires_grad(b)) {
      T* gb = g.grad_buf(b);
      const T* pa = g.val(a).data.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t l = 0; l < k; ++l)
          kern::vaxpy(pa[i * k + l], gr.data() + i * n, gb + l * n, n);
    }
  } : std::function<void(Graph&)>{});
}

// ---------------------------------------------------------------------------
// Convolution and friends

template <typename T>
Var Graph<T>::conv2d(Var input, Var kernel, int stride, int padding) {
  const auto& vi = val(input);
  const auto& vk = val(kernel);
  const Chw4 in = as_nchw("conv2d", vi);
  if (vk.rank() != 4)
    throw ShapeError("conv2d: kernel must be rank 4 [F,C,kh,kw], got " +
                     shape_str(vk.shape));
  if (stride < 1) throw ShapeError("conv2d: stride must be positive");
  if (padding < 0) throw ShapeError("conv2d: padding must be non-negative");
  const std::size_t F = vk.shape[0], C = vk.shape[1], kh = vk.shape[2],
                    kw = vk.shape[3];
  if (C != in.c)
    throw ShapeError("conv2d: input channels C=" + std::to_string(in.c) +
                     " but kernel expects C=" + std::to_string(C));
  const std::size_t p = static_cast<std::size_t>(padding);
  if (in.h + 2 * p < kh || in.w + 2 * p < kw)
    throw ShapeError("conv2d: kernel " + std::to_string(kh) + "x" +
                     std::to_string(kw) + " exceeds padded input " +
                     std::to_string(in.h + 2 * p) + "x" + std::to_string(in.w + 2 * p));
  const std::size_t s = static_cast<std::size_t>(stride);
  const std::size_t oh = (in.h + 2 * p - kh) / s + 1;
  const std::size_t ow = (in.w + 2 * p - kw) / s + 1;

  Tensor<T> out(make_spatial_shape(in.batched, in.n, F, oh, ow));
  const T* pin = vi.data.data();
  const T* pk = vk.data.data();
  T* pout = out.data.data();
  const std::size_t in_cs = in.h * in.w;     // channel stride
  const std::size_t in_ns = in.c * in_cs;    // sample stride
  const std::size_t out_fs = oh * ow;
  const std::size_t out_ns = F * out_fs;

  for (std::size_t nn = 0; nn < in.n; ++nn) {
    if constexpr (std::is_same_v<T, float>) {
      if (s == 1) {
        kern::ops().conv2d_s1(pin + nn * in_ns, C, in.h, in.w, pk, F, kh, kw, p,
                              pout + nn * out_ns, oh, ow);
        continue;
      }
    }
    for (std::size_t f = 0; f < F; ++f) {
      T* oplane = pout + nn * out_ns + f * out_fs;
      for (std::size_t c = 0; c < C; ++c) {
        const T* iplane = pin + nn * in_ns + c * in_cs;
        const T* kplane = pk + (f * C + c) * kh * kw;
        for (std::size_t ky = 0; ky < kh; ++ky) {
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const T w = kplane[ky * kw + kx];
            if (s == 1) {
              // ih = oy + ky - p must lie in [0, H); same for columns.
              const std::size_t oy0 = p > ky ? p - ky : 0;
              const std::size_t oy1 = std::min(oh, in.h + p - ky);
              const std::size_t ox0 = p > kx ? p - kx : 0;
              const std::size_t ox1 = std::min(ow, in.w + p - kx);
              if (ox1 <= ox0) continue;
              for (std::size_t oy = oy0; oy < oy1; ++oy) {
                const T* irow = iplane + (oy + ky - p) * in.w + (ox0 + kx - p);
                kern::vaxpy(w, irow, oplane + oy * ow + ox0, ox1 - ox0);
              }
            } else {
              for (std::size_t oy = 0; oy < oh; ++oy) {
                const std::ptrdiff_t iy =
                    static_cast<std::ptrdiff_t>(oy * s + ky) - static_cast<std::ptrdiff_t>(p);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.h)) continue;
                for (std::size_t ox = 0; ox < ow; ++ox) {
                  const std::ptrdiff_t ix =
                      static_cast<std::ptrdiff_t>(ox * s + kx) - static_cast<std::ptrdiff_t>(p);
                  if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.w)) continue;
                  oplane[oy * ow + ox] += w * iplane[iy * in.w + ix];
                }
              }
            }
          }
        }
      }
    }
  }

  const bool rg = requires_grad(input) || requires_grad(kernel);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  auto bwd = [input, kernel, in, F, C, kh, kw, s, p, oh, ow, self](Graph& g) {
    const auto& gr = g.node(self).grad;
    const T* pgo = gr.data();
    const std::size_t in_cs = in.h * in.w;
    const std::size_t in_ns = in.c * in_cs;
    const std::size_t out_fs = oh * ow;
    const std::size_t out_ns = F * out_fs;
    const bool want_in = g.requires_grad(input);
    const bool want_k = g.requires_grad(kernel);
    T* gin = want_in ? g.grad_buf(input) : nullptr;
    T* gk = want_k ? g.grad_buf(kernel) : nullptr;
    const T* pin = g.val(input).data.data();
    const T* pk = g.val(kernel).data.data();

    for (std::size_t nn = 0; nn < in.n; ++nn) {
      if constexpr (std::is_same_v<T, float>) {
        if (s == 1) {
          if (want_in)
            kern::ops().conv2d_s1_bwd_in(pgo + nn * out_ns, pk, C, in.h, in.w, F,
                                         kh, kw, p, gin + nn * in_ns, oh, ow);
          if (want_k)
            kern::ops().conv2d_s1_bwd_k(pgo + nn * out_ns, pin + nn * in_ns, C,
                                        in.h, in.w, F, kh, kw, p, gk, oh, ow);
          continue;
        }
      }
      for (std::size_t f = 0; f < F; ++f) {
        const T* goplane = pgo + nn * out_ns + f * out_fs;
        for (std::size_t c = 0; c < C; ++c) {
          const std::size_t koff = (f * C + c) * kh * kw;
          for (std::size_t ky = 0; ky < kh; ++ky) {
            for (std::size_t kx = 0; kx < kw; ++kx) {
              if (s == 1) {
                const std::size_t oy0 = p > ky ? p - ky : 0;
                const std::size_t oy1 = std::min(oh, in.h + p - ky);
                const std::size_t ox0 = p > kx ? p - kx : 0;
                const std::size_t ox1 = std::min(ow, in.w + p - kx);
                if (ox1 <= ox0) continue;
                const std::size_t len = ox1 - ox0;
                if (want_in) {
                  const T w = pk[koff + ky * kw + kx];
                  for (std::size_t oy = oy0; oy < oy1; ++oy) {
                    T* girow = gin + nn * in_ns + c * in_cs +
                               (oy + ky - p) * in.w + (ox0 + kx - p);
                    kern::vaxpy(w, goplane + oy * ow + ox0, girow, len);
                  }
                }
                if (want_k) {
                  T acc = 0;
                  for (std::size_t oy = oy0; oy < oy1; ++oy) {
                    const T* irow = pin + nn * in_ns + c * in_cs +
                                    (oy + ky - p) * in.w + (ox0 + kx - p);
                    acc += kern::vdot(goplane + oy * ow + ox0, irow, len);
                  }
                  gk[koff + ky * kw + kx] += acc;
                }
              } else {
                for (std::size_t oy = 0; oy < oh; ++oy) {
                  const std::ptrdiff_t iy =
                      static_cast<std::ptrdiff_t>(oy * s + ky) - static_cast<std::ptrdiff_t>(p);
                  if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.h)) continue;
                  for (std::size_t ox = 0; ox < ow; ++ox) {
                    const std::ptrdiff_t ix =
                        static_cast<std::ptrdiff_t>(ox * s + kx) - static_cast<std::ptrdiff_t>(p);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.w)) continue;
                    const T go = goplane[oy * ow + ox];
                    const std::size_t iidx = nn * in_ns + c * in_cs + iy * in.w + ix;
                    if (want_in) gin[iidx] += pk[koff + ky * kw + kx] * go;
                    if (want_k) gk[koff + ky * kw + kx] += pin[iidx] * go;
                  }
                }
              }
            }
          }
        }
      }
    }
  };
  return push(std::move(out), rg, rg ? std::function<void(Graph&)>(bwd)
                                     : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::add_channel_bias(Var x, Var bias) {
  const auto& vx = val(x);
  const auto& vb = val(bias);
  const Chw4 in = as_nchw("add_channel_bias", vx);
  if (vb.rank() != 1 || vb.shape[0] != in.c)
    throw ShapeError("add_channel_bias: bias " + shape_str(vb.shape) +
                     " does not match channel count " + std::to_string(in.c));
  Tensor<T> out = vx;
  const std::size_t plane = in.h * in.w;
  for (std::size_t nn = 0; nn < in.n; ++nn)
    for (std::size_t c = 0; c < in.c; ++c) {
      T* p = out.data.data() + (nn * in.c + c) * plane;
      const T b = vb.data[c];
      for (std::size_t i = 0; i < plane; ++i) p[i] += b;
    }
  const bool rg = requires_grad(x) || requires_grad(bias);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg, rg ? [x, bias, in, self](Graph& g) {
    const auto& gr = g.node(self).grad;
    g.accum(x, gr.data(), gr.size());
    if (g.requires_grad(bias)) {
      T* gb = g.grad_buf(bias);
      const std::size_t plane = in.h * in.w;
      for (std::size_t nn = 0; nn < in.n; ++nn)
        for (std::size_t c = 0; c < in.c; ++c)
          gb[c] += kern::vsum(gr.data() + (nn * in.c + c) * plane, plane);
    }
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::max_pool2d(Var x) {
  const auto& vx = val(x);
  const Chw4 in = as_nchw("max_pool2d", vx);
  if (in.h < 2 || in.w < 2)
    throw ShapeError("max_pool2d: spatial dims must be at least 2x2, got " +
                     std::to_string(in.h) + "x" + std::to_string(in.w));
  // Floor semantics: a trailing odd row/column is not pooled.
  const std::size_t oh = in.h / 2, ow = in.w / 2;
  Tensor<T> out(make_spatial_shape(in.batched, in.n, in.c, oh, ow));
  std::vector<std::uint32_t> argmax(out.numel());
  const T* pin = vx.data.data();
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < in.n * in.c; ++nc) {
    const T* plane = pin + nc * in.h * in.w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xcol = 0; xcol < ow; ++xcol, ++o) {
        const std::size_t base = (2 * y) * in.w + 2 * xcol;
        std::size_t best = base;
        T bv = plane[base];
        const std::size_t cand[3] = {base + 1, base + in.w, base + in.w + 1};
        for (std::size_t k = 0; k < 3; ++k)
          if (plane[cand[k]] > bv) {
            bv = plane[cand[k]];
            best = cand[k];
          }
        out.data[o] = bv;
        argmax[o] = static_cast<std::uint32_t>(nc * in.h * in.w + best);
      }
    }
  }
  const bool rg = requires_grad(x);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg, rg ? [x, am = std::move(argmax), self](Graph& g) {
    const auto& gr = g.node(self).grad;
    if (!g.requires_grad(x)) return;
    T* gx = g.grad_buf(x);
    for (std::size_t i = 0; i < gr.size(); ++i) gx[am[i]] += gr[i];
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::nearest_upsample2d(Var x) {
  const auto& vx = val(x);
  const Chw4 in = as_nchw("nearest_upsample2d", vx);
  const std::size_t oh = in.h * 2, ow = in.w * 2;
  Tensor<T> out(make_spatial_shape(in.batched, in.n, in.c, oh, ow));
  const T* pin = vx.data.data();
  for (std::size_t nc = 0; nc < in.n * in.c; ++nc) {
    const T* plane = pin + nc * in.h * in.w;
    T* oplane = out.data.data() + nc * oh * ow;
    for (std::size_t y = 0; y < in.h; ++y)
      for (std::size_t xcol = 0; xcol < in.w; ++xcol) {
        const T v = plane[y * in.w + xcol];
        T* d = oplane + (2 * y) * ow + 2 * xcol;
        d[0] = v;
        d[1] = v;
        d[ow] = v;
        d[ow + 1] = v;
      }
  }
  const bool rg = requires_grad(x);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg, rg ? [x, in, oh, ow, self](Graph& g) {
    const auto& gr = g.node(self).grad;
    if (!g.requires_grad(x)) return;
    T* gx = g.grad_buf(x);
    for (std::size_t nc = 0; nc < in.n * in.c; ++nc) {
      const T* gplane = gr.data() + nc * oh * ow;
      T* gxplane = gx + nc * in.h * in.w;
      for (std::size_t y = 0; y < in.h; ++y)
        for (std::size_t xcol = 0; xcol < in.w; ++xcol) {
          const T* s = gplane + (2 * y) * ow + 2 * xcol;
          gxplane[y * in.w + xcol] += s[0] + s[1] + s[ow] + s[ow + 1];
        }
    }
  } : std::function<void(Graph&)>{});
}

namespace {

// Channel axis position for rank 1/3/4 tensors.
template <typename T>
std::size_t channel_axis(const char* op, const Tensor<T>& t) {
  switch (t.rank()) {
    case 1: return 0;
    case 3: return 0;
    case 4: return 1;
    default:
      throw ShapeError(std::string(op) + ": expected rank 1, 3 or 4, got " +
                       shape_str(t.shape));
  }
}

}  // namespace

template <typename T>
Var Graph<T>::concat_channels(Var a, Var b) {
  const auto& va = val(a);
  const auto& vb = val(b);
  const std::size_t ax = channel_axis("concat_channels", va);
  if (va.rank() != vb.rank())
    throw ShapeError("concat_channels: rank mismatch " + shape_str(va.shape) +
                     " vs " + shape_str(vb.shape));
  for (std::size_t d = 0; d < va.rank(); ++d)
    if (d != ax && va.shape[d] != vb.shape[d])
      throw ShapeError("concat_channels: non-channel dims differ, " +
                       shape_str(va.shape) + " vs " + shape_str(vb.shape));
  Shape os = va.shape;
  os[ax] += vb.shape[ax];
  // outer = product of dims before the channel axis, inner = after.
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < ax; ++d) outer *= va.shape[d];
  for (std::size_t d = ax + 1; d < va.rank(); ++d) inner *= va.shape[d];
  const std::size_t ca = va.shape[ax], cb = vb.shape[ax];
  Tensor<T> out(os);
  for (std::size_t oidx = 0; oidx < outer; ++oidx) {
    std::memcpy(out.data.data() + oidx * (ca + cb) * inner,
                va.data.data() + oidx * ca * inner, ca * inner * sizeof(T));
    std::memcpy(out.data.data() + (oidx * (ca + cb) + ca) * inner,
                vb.data.data() + oidx * cb * inner, cb * inner * sizeof(T));
  }
  const bool rg = requires_grad(a) || requires_grad(b);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg,
              rg ? [a, b, outer, inner, ca, cb, self](Graph& g) {
    const auto& gr = g.node(self).grad;
    if (g.requires_grad(a)) {
      T* ga = g.grad_buf(a);
      for (std::size_t oidx = 0; oidx < outer; ++oidx)
        kern::vaxpy(T(1), gr.data() + oidx * (ca + cb) * inner,
                    ga + oidx * ca * inner, ca * inner);
    }
    if (g.requires_grad(b)) {
      T* gb = g.grad_buf(b);
      for (std::size_t oidx = 0; oidx < outer; ++oidx)
        kern::vaxpy(T(1), gr.data() + (oidx * (ca + cb) + ca) * inner,
                    gb + oidx * cb * inner, cb * inner);
    }
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::slice_channels(Var x, std::size_t c0, std::size_t c1) {
  const auto& vx = val(x);
  const std::size_t ax = channel_axis("slice_channels", vx);
  const std::size_t c = vx.shape[ax];
  if (c0 >= c1 || c1 > c)
    throw ShapeError("slice_channels: range [" + std::to_string(c0) + "," +
                     std::to_string(c1) + ") invalid for " + std::to_string(c) +
                     " channels");
  Shape os = vx.shape;
  os[ax] = c1 - c0;
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < ax; ++d) outer *= vx.shape[d];
  for (std::size_t d = ax + 1; d < vx.rank(); ++d) inner *= vx.shape[d];
  Tensor<T> out(os);
  const std::size_t cs = c1 - c0;
  for (std::size_t oidx = 0; oidx < outer; ++oidx)
    std::memcpy(out.data.data() + oidx * cs * inner,
                vx.data.data() + (oidx * c + c0) * inner, cs * inner * sizeof(T));
  const bool rg = requires_grad(x);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg, rg ? [x, outer, inner, c, c0, cs, self](Graph& g) {
    const auto& gr = g.node(self).grad;
    if (!g.requires_grad(x)) return;
    T* gx = g.grad_buf(x);
    for (std::size_t oidx = 0; oidx < outer; ++oidx)
      kern::vaxpy(T(1), gr.data() + oidx * cs * inner,
                  gx + (oidx * c + c0) * inner, cs * inner);
  } : std::function<void(Graph&)>{});
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
Var Graph<T>::sum(Var x) {
  Tensor<T> out = Tensor<T>::scalar(kern::vsum(val(x).data.data(), val(x).numel()));
  const bool rg = requires_grad(x);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg, rg ? [x, self](Graph& g) {
    const T go = g.node(self).grad[0];
    if (!g.requires_grad(x)) return;
    T* gx = g.grad_buf(x);
    const std::size_t n = g.val(x).numel();
    for (std::size_t i = 0; i < n; ++i) gx[i] += go;
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::mean(Var x) {
  const std::size_t n = val(x).numel();
  Tensor<T> out = Tensor<T>::scalar(kern::vsum(val(x).data.data(), n) / static_cast<T>(n));
  const bool rg = requires_grad(x);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg, rg ? [x, n, self](Graph& g) {
    const T go = g.node(self).grad[0] / static_cast<T>(n);
    if (!g.requires_grad(x)) return;
    T* gx = g.grad_buf(x);
    for (std::size_t i = 0; i < n; ++i) gx[i] += go;
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::reduce_min(Var x) {
  const auto& d = val(x).data;
  std::size_t arg = 0;
  for (std::size_t i = 1; i < d.size(); ++i)
    if (d[i] < d[arg]) arg = i;
  const bool rg = requires_grad(x);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(Tensor<T>::scalar(d[arg]), rg, rg ? [x, arg, self](Graph& g) {
    if (g.requires_grad(x)) g.grad_buf(x)[arg] += g.node(self).grad[0];
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::reduce_max(Var x) {
  const auto& d = val(x).data;
  std::size_t arg = 0;
  for (std::size_t i = 1; i < d.size(); ++i)
    if (d[i] > d[arg]) arg = i;
  const bool rg = requires_grad(x);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(Tensor<T>::scalar(d[arg]), rg, rg ? [x, arg, self](Graph& g) {
    if (g.requires_grad(x)) g.grad_buf(x)[arg] += g.node(self).grad[0];
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::l1_distance(Var a, Var b) {
  check_same_shape("l1_distance", val(a), val(b));
  const std::size_t n = val(a).numel();
  const T* pa = val(a).data.data();
  const T* pb = val(b).data.data();
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(pa[i] - pb[i]);
  const bool rg = requires_grad(a) || requires_grad(b);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(Tensor<T>::scalar(acc / static_cast<T>(n)), rg,
              rg ? [a, b, n, self](Graph& g) {
    const T go = g.node(self).grad[0] / static_cast<T>(n);
    const T* pa = g.val(a).data.data();
    const T* pb = g.val(b).data.data();
    const bool wa = g.requires_grad(a), wb = g.requires_grad(b);
    T* ga = wa ? g.grad_buf(a) : nullptr;
    T* gb = wb ? g.grad_buf(b) : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
      const T d = pa[i] - pb[i];
      const T sgn = d > 0 ? T(1) : (d < 0 ? T(-1) : T(0));
      if (wa) ga[i] += go * sgn;
      if (wb) gb[i] -= go * sgn;
    }
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::squared_l2_distance(Var a, Var b) {
  check_same_shape("squared_l2_distance", val(a), val(b));
  const std::size_t n = val(a).numel();
  const T* pa = val(a).data.data();
  const T* pb = val(b).data.data();
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T d = pa[i] - pb[i];
    acc += d * d;
  }
  const bool rg = requires_grad(a) || requires_grad(b);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(Tensor<T>::scalar(acc), rg, rg ? [a, b, n, self](Graph& g) {
    const T go = g.node(self).grad[0];
    const T* pa = g.val(a).data.data();
    const T* pb = g.val(b).data.data();
    const bool wa = g.requires_grad(a), wb = g.requires_grad(b);
    T* ga = wa ? g.grad_buf(a) : nullptr;
    T* gb = wb ? g.grad_buf(b) : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
      const T d = T(2) * go * (pa[i] - pb[i]);
      if (wa) ga[i] += d;
      if (wb) gb[i] -= d;
    }
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::cosine_similarity(Var a, Var b) {
  check_same_shape("cosine_similarity", val(a), val(b));
  const std::size_t n = val(a).numel();
  const T* pa = val(a).data.data();
  const T* pb = val(b).data.data();
  const T na = std::sqrt(kern::vsum_sq(pa, n));
  const T nb = std::sqrt(kern::vsum_sq(pb, n));
  constexpr T kEps = T(1e-8);
  if (na < kEps || nb < kEps)
    throw DegenerateInput("cosine_similarity: zero-norm vector (|a|=" +
                          std::to_string(static_cast<double>(na)) + ", |b|=" +
                          std::to_string(static_cast<double>(nb)) + ")");
  const T c = std::clamp(kern::vdot(pa, pb, n) / (na * nb), T(-1), T(1));
  const bool rg = requires_grad(a) || requires_grad(b);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(Tensor<T>::scalar(c), rg, rg ? [a, b, n, na, nb, c, self](Graph& g) {
    const T go = g.node(self).grad[0];
    const T* pa = g.val(a).data.data();
    const T* pb = g.val(b).data.data();
    if (g.requires_grad(a)) {
      T* ga = g.grad_buf(a);
      const T s1 = go / (na * nb);
      const T s2 = go * c / (na * na);
      for (std::size_t i = 0; i < n; ++i) ga[i] += s1 * pb[i] - s2 * pa[i];
    }
    if (g.requires_grad(b)) {
      T* gb = g.grad_buf(b);
      const T s1 = go / (na * nb);
      const T s2 = go * c / (nb * nb);
      for (std::size_t i = 0; i < n; ++i) gb[i] += s1 * pa[i] - s2 * pb[i];
    }
  } : std::function<void(Graph&)>{});
}

// ---------------------------------------------------------------------------
// Geometric transforms (CHW)

template <typename T>
Var Graph<T>::flip_h(Var x) {
  const auto& vx = val(x);
  if (vx.rank() != 3)
    throw ShapeError("flip_h: expected CHW, got " + shape_str(vx.shape));
  const std::size_t c = vx.shape[0], h = vx.shape[1], w = vx.shape[2];
  Tensor<T> out(vx.shape);
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t y = 0; y < h; ++y) {
      const T* src = vx.data.data() + (ci * h + y) * w;
      T* dst = out.data.data() + (ci * h + y) * w;
      for (std::size_t xcol = 0; xcol < w; ++xcol) dst[xcol] = src[w - 1 - xcol];
    }
  const bool rg = requires_grad(x);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg, rg ? [x, c, h, w, self](Graph& g) {
    const auto& gr = g.node(self).grad;
    if (!g.requires_grad(x)) return;
    T* gx = g.grad_buf(x);
    for (std::size_t ci = 0; ci < c; ++ci)
      for (std::size_t y = 0; y < h; ++y) {
        const T* src = gr.data() + (ci * h + y) * w;
        T* dst = gx + (ci * h + y) * w;
        for (std::size_t xcol = 0; xcol < w; ++xcol) dst[w - 1 - xcol] += src[xcol];
      }
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::rot90(Var x, int quarter_turns) {
  const auto& vx = val(x);
  if (vx.rank() != 3)
    throw ShapeError("rot90: expected CHW, got " + shape_str(vx.shape));
  const int k = ((quarter_turns % 4) + 4) % 4;
  if (k == 0) {
    Tensor<T> out = vx;
    const bool rg = requires_grad(x);
    Var self{static_cast<std::uint32_t>(nodes_.size())};
    return push(std::move(out), rg, rg ? [x, self](Graph& g) {
      const auto& gr = g.node(self).grad;
      g.accum(x, gr.data(), gr.size());
    } : std::function<void(Graph&)>{});
  }
  const std::size_t c = vx.shape[0], h = vx.shape[1], w = vx.shape[2];
  const std::size_t ohh = (k % 2 == 0) ? h : w;
  const std::size_t oww = (k % 2 == 0) ? w : h;
  // src index for every destination pixel; reused by the backward scatter.
  std::vector<std::uint32_t> srcmap(h * w);
  for (std::size_t oy = 0; oy < ohh; ++oy)
    for (std::size_t ox = 0; ox < oww; ++ox) {
      std::size_t sy, sx;
      switch (k) {
        case 1:  // counter-clockwise 90: dst(y,x) <- src(x, W-1-y)... for CHW planes
          sy = ox;
          sx = w - 1 - oy;
          break;
        case 2:
          sy = h - 1 - oy;
          sx = w - 1 - ox;
          break;
        default:  // k == 3
          sy = h - 1 - ox;
          sx = oy;
          break;
      }
      srcmap[oy * oww + ox] = static_cast<std::uint32_t>(sy * w + sx);
    }
  Tensor<T> out({c, ohh, oww});
  for (std::size_t ci = 0; ci < c; ++ci) {
    const T* plane = vx.data.data() + ci * h * w;
    T* oplane = out.data.data() + ci * ohh * oww;
    for (std::size_t i = 0; i < ohh * oww; ++i) oplane[i] = plane[srcmap[i]];
  }
  const bool rg = requires_grad(x);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg,
              rg ? [x, c, h, w, ohh, oww, sm = std::move(srcmap), self](Graph& g) {
    const auto& gr = g.node(self).grad;
    if (!g.requires_grad(x)) return;
    T* gx = g.grad_buf(x);
    for (std::size_t ci = 0; ci < c; ++ci) {
      const T* gplane = gr.data() + ci * ohh * oww;
      T* gxplane = gx + ci * h * w;
      for (std::size_t i = 0; i < ohh * oww; ++i) gxplane[sm[i]] += gplane[i];
    }
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::crop_resize_bilinear(Var x, std::size_t y0, std::size_t x0,
                                   std::size_t ch, std::size_t cw) {
  const auto& vx = val(x);
  if (vx.rank() != 3)
    throw ShapeError("crop_resize_bilinear: expected CHW, got " + shape_str(vx.shape));
  const std::size_t c = vx.shape[0], h = vx.shape[1], w = vx.shape[2];
  if (ch == 0 || cw == 0 || y0 + ch > h || x0 + cw > w)
    throw ShapeError("crop_resize_bilinear: crop [" + std::to_string(y0) + "," +
                     std::to_string(x0) + "," + std::to_string(ch) + "," +
                     std::to_string(cw) + "] outside " + std::to_string(h) + "x" +
                     std::to_string(w));
  // Four taps per output pixel, shared across channels.
  struct Tap {
    std::uint32_t idx[4];
    T wgt[4];
  };
  std::vector<Tap> taps(h * w);
  const double sy_scale = static_cast<double>(ch) / static_cast<double>(h);
  const double sx_scale = static_cast<double>(cw) / static_cast<double>(w);
  for (std::size_t oy = 0; oy < h; ++oy) {
    double sy = static_cast<double>(y0) + (static_cast<double>(oy) + 0.5) * sy_scale - 0.5;
    sy = std::clamp(sy, static_cast<double>(y0), static_cast<double>(y0 + ch - 1));
    const std::size_t iy0 = static_cast<std::size_t>(std::floor(sy));
    const std::size_t iy1 = std::min(iy0 + 1, y0 + ch - 1);
    const T fy = static_cast<T>(sy - static_cast<double>(iy0));
    for (std::size_t ox = 0; ox < w; ++ox) {
      double sx = static_cast<double>(x0) + (static_cast<double>(ox) + 0.5) * sx_scale - 0.5;
      sx = std::clamp(sx, static_cast<double>(x0), static_cast<double>(x0 + cw - 1));
      const std::size_t ix0 = static_cast<std::size_t>(std::floor(sx));
      const std::size_t ix1 = std::min(ix0 + 1, x0 + cw - 1);
      const T fx = static_cast<T>(sx - static_cast<double>(ix0));
      Tap& t = taps[oy * w + ox];
      t.idx[0] = static_cast<std::uint32_t>(iy0 * w + ix0);
      t.idx[1] = static_cast<std::uint32_t>(iy0 * w + ix1);
      t.idx[2] = static_cast<std::uint32_t>(iy1 * w + ix0);
      t.idx[3] = static_cast<std::uint32_t>(iy1 * w + ix1);
      t.wgt[0] = (T(1) - fy) * (T(1) - fx);
      t.wgt[1] = (T(1) - fy) * fx;
      t.wgt[2] = fy * (T(1) - fx);
      t.wgt[3] = fy * fx;
    }
  }
  Tensor<T> out(vx.shape);
  for (std::size_t ci = 0; ci < c; ++ci) {
    const T* plane = vx.data.data() + ci * h * w;
    T* oplane = out.data.data() + ci * h * w;
    for (std::size_t i = 0; i < h * w; ++i) {
      const Tap& t = taps[i];
      oplane[i] = t.wgt[0] * plane[t.idx[0]] + t.wgt[1] * plane[t.idx[1]] +
                  t.wgt[2] * plane[t.idx[2]] + t.wgt[3] * plane[t.idx[3]];
    }
  }
  const bool rg = requires_grad(x);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), rg,
              rg ? [x, c, h, w, tp = std::move(taps), self](Graph& g) {
    const auto& gr = g.node(self).grad;
    if (!g.requires_grad(x)) return;
    T* gx = g.grad_buf(x);
    for (std::size_t ci = 0; ci < c; ++ci) {
      const T* gplane = gr.data() + ci * h * w;
      T* gxplane = gx + ci * h * w;
      for (std::size_t i = 0; i < h * w; ++i) {
        const Tap& t = tp[i];
        const T go = gplane[i];
        gxplane[t.idx[0]] += t.wgt[0] * go;
        gxplane[t.idx[1]] += t.wgt[1] * go;
        gxplane[t.idx[2]] += t.wgt[2] * go;
        gxplane[t.idx[3]] += t.wgt[3] * go;
      }
    }
  } : std::function<void(Graph&)>{});
}

template <typename T>
Var Graph<T>::custom(Tensor<T> value, const std::vector<Var>& inputs,
                     std::function<void(Graph&, Var self)> backward) {
  bool rg = false;
  for (Var v : inputs) rg = rg || requires_grad(v);
  Var self{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(value), rg,
              rg ? [self, backward = std::move(backward)](Graph& g) {
    backward(g, self);
  } : std::function<void(Graph&)>{});
}

template class Graph<float>;
template class Graph<double>;

}  // namespace tgseg::ad
