#pragma once

// Joint spatial augmentation, weak/strong view construction and the pseudo
// channel normalization. Randomness is drawn up front into plain structs so
// the graph-side application is deterministic and shared across scalar
// types.

#include <cstdint>
#include <utility>

#include "tgseg/ad/graph.hpp"

namespace tgseg::aug {

struct SpatialSpec {
  bool flip = false;
  int quarter_turns = 0;
  // crop_h == H and crop_w == W with zero offsets resamples exactly to the
  // identity and is skipped.
  std::size_t crop_y0 = 0, crop_x0 = 0, crop_h = 0, crop_w = 0;

  static SpatialSpec identity(std::size_t h, std::size_t w) {
    return SpatialSpec{false, 0, 0, 0, h, w};
  }
  bool is_identity_crop(std::size_t h, std::size_t w) const {
    return crop_y0 == 0 && crop_x0 == 0 && crop_h == h && crop_w == w;
  }
};

// Flip p=0.5, rotation from {0,90,180,270}, crop scale U(0.8,1.0) with
// uniform offsets, resized back to the original size.
SpatialSpec draw_spatial(std::size_t h, std::size_t w, std::uint64_t seed);

struct ViewDraws {
  float weak_offset = 0.0f;
  float weak_scale = 1.0f;
  float strong_offset = 0.0f;
  float strong_scale = 1.0f;
  float strong_gamma = 1.0f;
  ad::TensorF strong_noise;  // [C_real,H,W]; empty disables the noise term

  static ViewDraws identity() { return ViewDraws{}; }
};

// Weak: offset U(-0.1,0.1), scale U(0.9,1.1). Strong: offset U(-0.3,0.3),
// scale U(0.7,1.3), gamma U(0.7,1.4), additive gaussian noise sigma=0.05.
ViewDraws draw_views(std::size_t real_channels, std::size_t h, std::size_t w,
                     std::uint64_t seed_weak, std::uint64_t seed_strong);

struct AugDraws {
  SpatialSpec spatial;
  ViewDraws views;
};

// Applies flip/rotation/crop-resize to every channel of a CHW node.
template <typename T>
ad::Var apply_spatial(ad::Graph<T>& g, ad::Var x, const SpatialSpec& spec);

// Same geometric transform on the mask, nearest-neighbor resample so values
// stay binary. Plain tensor: the mask is never differentiated.
ad::TensorF apply_spatial_mask(const ad::TensorF& y, const SpatialSpec& spec);

// Per-channel min-max rescale to [0,1]; constant channels pass through.
template <typename T>
ad::Var normalize_pseudo(ad::Graph<T>& g, ad::Var xp);

// Splits x_g into real/pseudo channels, perturbs the real channels per view
// and concatenates both views with one shared normalized pseudo block.
template <typename T>
std::pair<ad::Var, ad::Var> build_views(ad::Graph<T>& g, ad::Var x_g,
                                        std::size_t real_channels,
                                        const ViewDraws& d);

extern template ad::Var apply_spatial<float>(ad::Graph<float>&, ad::Var, const SpatialSpec&);
extern template ad::Var apply_spatial<double>(ad::Graph<double>&, ad::Var, const SpatialSpec&);
extern template ad::Var normalize_pseudo<float>(ad::Graph<float>&, ad::Var);
extern template ad::Var normalize_pseudo<double>(ad::Graph<double>&, ad::Var);
extern template std::pair<ad::Var, ad::Var> build_views<float>(
    ad::Graph<float>&, ad::Var, std::size_t, const ViewDraws&);
extern template std::pair<ad::Var, ad::Var> build_views<double>(
    ad::Graph<double>&, ad::Var, std::size_t, const ViewDraws&);

}  // namespace tgseg::aug
