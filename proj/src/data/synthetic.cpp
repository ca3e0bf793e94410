#include "tgseg/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tgseg/util/rng.hpp"

namespace tgseg::data {

namespace {

struct Ellipse {
  double cy, cx;    // center, pixels
  double ry, rx;    // semi-axes, pixels
  double cos_t, sin_t;
};

// Normalized elliptical radius; <= 1 is inside.
double radius(const Ellipse& e, double y, double x) {
  const double dy = y - e.cy;
  const double dx = x - e.cx;
  const double u = (dx * e.cos_t + dy * e.sin_t) / e.rx;
  const double v = (-dx * e.sin_t + dy * e.cos_t) / e.ry;
  return std::sqrt(u * u + v * v);
}

// Two-octave value noise in [0,1] on a seeded lattice.
std::vector<float> value_noise(std::size_t side, Rng& rng) {
  std::vector<float> out(side * side, 0.0f);
  float amp = 0.65f;
  for (int octave = 0; octave < 2; ++octave) {
    const std::size_t cell = std::max<std::size_t>(2, side >> (3 + octave));
    const std::size_t gw = side / cell + 2;
    std::vector<float> lattice(gw * gw);
    for (auto& v : lattice) v = rng.uniform_f(0.0f, 1.0f);
    for (std::size_t y = 0; y < side; ++y) {
      const double fy = static_cast<double>(y) / cell;
      const std::size_t iy = static_cast<std::size_t>(fy);
      const float ty = static_cast<float>(fy - iy);
      for (std::size_t x = 0; x < side; ++x) {
        const double fx = static_cast<double>(x) / cell;
        const std::size_t ix = static_cast<std::size_t>(fx);
        const float tx = static_cast<float>(fx - ix);
        const float a = lattice[iy * gw + ix];
        const float b = lattice[iy * gw + ix + 1];
        const float c = lattice[(iy + 1) * gw + ix];
        const float d = lattice[(iy + 1) * gw + ix + 1];
        const float top = a + (b - a) * tx;
        const float bot = c + (d - c) * tx;
        out[y * side + x] += amp * (top + (bot - top) * ty);
      }
    }
    amp *= 0.5f;
  }
  return out;
}

}  // namespace

int area_bin_of(double fg_fraction) {
  if (fg_fraction < 0.06) return 0;
  if (fg_fraction < 0.11) return 1;
  if (fg_fraction < 0.18) return 2;
  return 3;
}

ad::TensorF text_embedding_of(const SynthAttributes& a, std::size_t d_t) {
  // One-hot: 3 count, 4 area bin, 4 quadrant.
  float attrs[11] = {0};
  attrs[a.lesion_count - 1] = 1.0f;
  attrs[3 + a.area_bin] = 1.0f;
  attrs[7 + a.quadrant] = 1.0f;
  ad::TensorF out({d_t});
  for (std::size_t r = 0; r < d_t; ++r) {
    Rng rng(derive_seed(0x7e57c0defeedULL, "text-proj-row", r));
    float acc = 0.0f;
    for (int k = 0; k < 11; ++k) acc += rng.uniform_f(-1.0f, 1.0f) * attrs[k];
    out.data[r] = acc;
  }
  return out;
}

SynthAttributes attributes_of_mask(const ad::TensorF& mask) {
  const std::size_t side = mask.shape[1];
  std::size_t fg = 0;
  double sy = 0, sx = 0;
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x)
      if (mask.data[y * side + x] > 0.5f) {
        ++fg;
        sy += static_cast<double>(y);
        sx += static_cast<double>(x);
      }
  SynthAttributes a;
  a.fg_fraction = static_cast<double>(fg) / static_cast<double>(side * side);
  a.area_bin = area_bin_of(a.fg_fraction);
  if (fg > 0) {
    const double cy = sy / static_cast<double>(fg);
    const double cx = sx / static_cast<double>(fg);
    a.quadrant = (cy >= side / 2.0 ? 2 : 0) + (cx >= side / 2.0 ? 1 : 0);
  }
  return a;
}

Dataset generate_synthetic(std::size_t n, std::size_t image_side, std::size_t d_t,
                           std::uint64_t seed, const std::string& split) {
  if (n == 0) throw DataError(DataErrorKind::bad_fraction, "generate_synthetic: n must be positive");
  const std::size_t side = image_side;
  Dataset d;
  d.samples.reserve(n);
  for (std::size_t si = 0; si < n; ++si) {
    Rng rng(derive_seed(seed, "synth-sample", si));
    const int count = 1 + static_cast<int>(rng.below(3));

    // Redraw the lesion set until the union stays inside the target
    // foreground range; the RNG stream keeps this deterministic.
    std::vector<Ellipse> lesions;
    ad::TensorF mask({1, side, side});
    double frac = 0.0;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      lesions.clear();
      for (int k = 0; k < count; ++k) {
        Ellipse e;
        e.cy = rng.uniform(0.25, 0.75) * side;
        e.cx = rng.uniform(0.25, 0.75) * side;
        e.ry = rng.uniform(0.10, 0.22) * side;
        e.rx = rng.uniform(0.10, 0.22) * side;
        const double theta = rng.uniform(0.0, 3.141592653589793);
        e.cos_t = std::cos(theta);
        e.sin_t = std::sin(theta);
        lesions.push_back(e);
      }
      std::size_t fg = 0;
      for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x) {
          bool inside = false;
          for (const auto& e : lesions)
            if (radius(e, static_cast<double>(y), static_cast<double>(x)) <= 1.0) {
              inside = true;
              break;
            }
          mask.data[y * side + x] = inside ? 1.0f : 0.0f;
          if (inside) ++fg;
        }
      frac = static_cast<double>(fg) / static_cast<double>(side * side);
      if (frac >= 0.02 && frac <= 0.40) break;
    }

    // Textured background; lesions brighten with a soft rim inside their
    // support so the mask boundary stays the intensity boundary.
    const std::vector<float> noise = value_noise(side, rng);
    const float gain = rng.uniform_f(0.30f, 0.45f);
    ad::TensorF image({3, side, side});
    const float chan_gain[3] = {1.0f, 0.9f, 0.8f};
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x) {
        const std::size_t px = y * side + x;
        const float bg = 0.15f + 0.4f * noise[px];
        float bump = 0.0f;
        for (const auto& e : lesions) {
          const double r = radius(e, static_cast<double>(y), static_cast<double>(x));
          if (r <= 1.0) {
            const float ramp = static_cast<float>(std::min(1.0, (1.0 - r) * 6.0));
            bump = std::max(bump, gain * ramp);
          }
        }
        for (int c = 0; c < 3; ++c) {
          const float v = bg + chan_gain[c] * bump;
          image.data[c * side * side + px] = std::clamp(v, 0.0f, 1.0f);
        }
      }

    Sample s;
    char buf[16];
    std::snprintf(buf, sizeof buf, "s%04zu", si);
    s.id = buf;
    s.split = split;
    s.image = std::move(image);
    s.mask = std::move(mask);
    SynthAttributes attrs = attributes_of_mask(s.mask);
    attrs.lesion_count = count;
    s.text = text_embedding_of(attrs, d_t);
    d.samples.push_back(std::move(s));
  }
  return d;
}

}  // namespace tgseg::data
