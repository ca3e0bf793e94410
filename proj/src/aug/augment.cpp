#include "tgseg/aug/augment.hpp"

#include <algorithm>
#include <cmath>

#include "tgseg/util/rng.hpp"

namespace tgseg::aug {

SpatialSpec draw_spatial(std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  SpatialSpec s;
  s.flip = rng.bernoulli(0.5);
  s.quarter_turns = static_cast<int>(rng.below(4));
  const double scale = rng.uniform(0.8, 1.0);
  s.crop_h = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(scale * static_cast<double>(h))), 1, h);
  s.crop_w = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(scale * static_cast<double>(w))), 1, w);
  s.crop_y0 = rng.below(h - s.crop_h + 1);
  s.crop_x0 = rng.below(w - s.crop_w + 1);
  return s;
}

ViewDraws draw_views(std::size_t real_channels, std::size_t h, std::size_t w,
                     std::uint64_t seed_weak, std::uint64_t seed_strong) {
  ViewDraws d;
  Rng rw(seed_weak);
  d.weak_offset = rw.uniform_f(-0.1f, 0.1f);
  d.weak_scale = rw.uniform_f(0.9f, 1.1f);
  Rng rs(seed_strong);
  d.strong_offset = rs.uniform_f(-0.3f, 0.3f);
  d.strong_scale = rs.uniform_f(0.7f, 1.3f);
  d.strong_gamma = rs.uniform_f(0.7f, 1.4f);
  d.strong_noise = ad::TensorF({real_channels, h, w});
  for (auto& v : d.strong_noise.data)
    v = static_cast<float>(0.05 * rs.gaussian());
  return d;
}

template <typename T>
ad::Var apply_spatial(ad::Graph<T>& g, ad::Var x, const SpatialSpec& spec) {
  const ad::Shape shape = g.val(x).shape;
  if (shape.size() != 3)
    throw ad::ShapeError("apply_spatial: expected CHW, got " + ad::shape_str(shape));
  const std::size_t h = shape[1], w = shape[2];
  if (spec.quarter_turns % 2 != 0 && h != w)
    throw ad::ShapeError("apply_spatial: quarter turns need square input, got " +
                         ad::shape_str(shape));
  ad::Var out = x;
  if (spec.flip) out = g.flip_h(out);
  if (spec.quarter_turns % 4 != 0) out = g.rot90(out, spec.quarter_turns);
  if (!spec.is_identity_crop(h, w))
    out = g.crop_resize_bilinear(out, spec.crop_y0, spec.crop_x0, spec.crop_h,
                                 spec.crop_w);
  return out;
}

namespace {

ad::TensorF flip_mask(const ad::TensorF& y) {
  const std::size_t c = y.shape[0], h = y.shape[1], w = y.shape[2];
  ad::TensorF out(y.shape);
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t yy = 0; yy < h; ++yy)
      for (std::size_t xx = 0; xx < w; ++xx)
        out.data[(ci * h + yy) * w + xx] = y.data[(ci * h + yy) * w + (w - 1 - xx)];
  return out;
}

ad::TensorF rot_mask(const ad::TensorF& y, int k) {
  k = ((k % 4) + 4) % 4;
  if (k == 0) return y;
  const std::size_t c = y.shape[0], h = y.shape[1], w = y.shape[2];
  const std::size_t oh = (k % 2 == 0) ? h : w;
  const std::size_t ow = (k % 2 == 0) ? w : h;
  ad::TensorF out({c, oh, ow});
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t sy, sx;
        switch (k) {
          case 1: sy = ox; sx = w - 1 - oy; break;
          case 2: sy = h - 1 - oy; sx = w - 1 - ox; break;
          default: sy = h - 1 - ox; sx = oy; break;
        }
        out.data[(ci * oh + oy) * ow + ox] = y.data[(ci * h + sy) * w + sx];
      }
  return out;
}

ad::TensorF crop_resize_nearest(const ad::TensorF& y, const SpatialSpec& s) {
  const std::size_t c = y.shape[0], h = y.shape[1], w = y.shape[2];
  ad::TensorF out(y.shape);
  for (std::size_t oy = 0; oy < h; ++oy) {
    double sy = static_cast<double>(s.crop_y0) +
                (static_cast<double>(oy) + 0.5) * static_cast<double>(s.crop_h) /
                    static_cast<double>(h) - 0.5;
    const std::size_t iy = static_cast<std::size_t>(std::clamp(
        std::llround(sy), static_cast<long long>(s.crop_y0),
        static_cast<long long>(s.crop_y0 + s.crop_h - 1)));
    for (std::size_t ox = 0; ox < w; ++ox) {
      double sx = static_cast<double>(s.crop_x0) +
                  (static_cast<double>(ox) + 0.5) * static_cast<double>(s.crop_w) /
                      static_cast<double>(w) - 0.5;
      const std::size_t ix = static_cast<std::size_t>(std::clamp(
          std::llround(sx), static_cast<long long>(s.crop_x0),
          static_cast<long long>(s.crop_x0 + s.crop_w - 1)));
      for (std::size_t ci = 0; ci < c; ++ci)
        out.data[(ci * h + oy) * w + ox] = y.data[(ci * h + iy) * w + ix];
    }
  }
  return out;
}

}  // namespace

ad::TensorF apply_spatial_mask(const ad::TensorF& y, const SpatialSpec& spec) {
  if (y.rank() != 3)
    throw ad::ShapeError("apply_spatial_mask: expected CHW, got " + ad::shape_str(y.shape));
  ad::TensorF out = y;
  if (spec.flip) out = flip_mask(out);
  if (spec.quarter_turns % 4 != 0) out = rot_mask(out, spec.quarter_turns);
  if (!spec.is_identity_crop(y.shape[1], y.shape[2]))
    out = crop_resize_nearest(out, spec);
  return out;
}

template <typename T>
ad::Var normalize_pseudo(ad::Graph<T>& g, ad::Var xp) {
  const ad::Shape shape = g.val(xp).shape;
  if (shape.size() != 3)
    throw ad::ShapeError("normalize_pseudo: expected CHW, got " + ad::shape_str(shape));
  const std::size_t c = shape[0];
  ad::Var out{};
  for (std::size_t ci = 0; ci < c; ++ci) {
    ad::Var chan = c == 1 ? xp : g.slice_channels(xp, ci, ci + 1);
    const auto& d = g.val(chan).data;
    const auto [mn, mx] = std::minmax_element(d.begin(), d.end());
    ad::Var norm;
    if (static_cast<double>(*mx - *mn) < 1e-12) {
      norm = chan;  // constant channel passes through unchanged
    } else {
      ad::Var lo = g.reduce_min(chan);
      ad::Var span = g.sub(g.reduce_max(chan), lo);
      norm = g.mul_scalar(g.sub_scalar(chan, lo), g.reciprocal(span));
    }
    out = ci == 0 ? norm : g.concat_channels(out, norm);
  }
  return out;
}

template <typename T>
std::pair<ad::Var, ad::Var> build_views(ad::Graph<T>& g, ad::Var x_g,
                                        std::size_t real_channels,
                                        const ViewDraws& d) {
  // Copy, not reference: pushing nodes may reallocate the tape.
  const ad::Shape shape = g.val(x_g).shape;
  if (shape.size() != 3 || shape[0] <= real_channels)
    throw ad::ShapeError("build_views: need real+pseudo channels, got " +
                         ad::shape_str(shape));
  ad::Var xr = g.slice_channels(x_g, 0, real_channels);
  ad::Var xp = g.slice_channels(x_g, real_channels, shape[0]);
  ad::Var np = normalize_pseudo(g, xp);

  ad::Var weak = g.clamp(
      g.add_const(g.scale_const(xr, static_cast<T>(d.weak_scale)),
                  static_cast<T>(d.weak_offset)),
      T(0), T(1));

  ad::Var strong = g.clamp(
      g.add_const(g.scale_const(xr, static_cast<T>(d.strong_scale)),
                  static_cast<T>(d.strong_offset)),
      T(0), T(1));
  if (d.strong_gamma != 1.0f)
    strong = g.pow_const(strong, static_cast<T>(d.strong_gamma));
  if (!d.strong_noise.data.empty()) {
    strong = g.clamp(g.add(strong, g.constant(d.strong_noise.template cast<T>())),
                     T(0), T(1));
  }
  return {g.concat_channels(weak, np), g.concat_channels(strong, np)};
}

template ad::Var apply_spatial<float>(ad::Graph<float>&, ad::Var, const SpatialSpec&);
template ad::Var apply_spatial<double>(ad::Graph<double>&, ad::Var, const SpatialSpec&);
template ad::Var normalize_pseudo<float>(ad::Graph<float>&, ad::Var);
template ad::Var normalize_pseudo<double>(ad::Graph<double>&, ad::Var);
template std::pair<ad::Var, ad::Var> build_views<float>(ad::Graph<float>&, ad::Var,
                                                        std::size_t, const ViewDraws&);
template std::pair<ad::Var, ad::Var> build_views<double>(ad::Graph<double>&, ad::Var,
                                                         std::size_t, const ViewDraws&);

}  // namespace tgseg::aug
