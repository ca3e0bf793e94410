#include "tgseg/aug/corrupt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "tgseg/util/rng.hpp"

namespace tgseg::aug {

CorruptionSpec CorruptionSpec::parse(const std::string& text) {
  CorruptionSpec spec;
  if (text == "clean") return spec;
  const auto c1 = text.find(':');
  const std::string kind = text.substr(0, c1);
  if (kind == "poisson") {
    if (c1 == std::string::npos)
      throw std::invalid_argument("corruption 'poisson' needs a dose, e.g. poisson:140");
    spec.kind = Kind::poisson;
    spec.dose = std::stod(text.substr(c1 + 1));
    if (!(spec.dose > 0.0))
      throw std::invalid_argument("poisson dose must be > 0, got " + text.substr(c1 + 1));
    return spec;
  }
  if (kind == "blur") {
    if (c1 == std::string::npos)
      throw std::invalid_argument("corruption 'blur' needs a kernel size, e.g. blur:7");
    spec.kind = Kind::blur;
    const auto c2 = text.find(':', c1 + 1);
    spec.kernel = std::stoi(text.substr(c1 + 1, c2 == std::string::npos
                                                    ? std::string::npos
                                                    : c2 - c1 - 1));
    if (spec.kernel < 1 || spec.kernel % 2 == 0)
      throw std::invalid_argument("blur kernel must be odd and >= 1, got " +
                                  std::to_string(spec.kernel));
    if (c2 != std::string::npos) spec.angle_deg = std::stod(text.substr(c2 + 1));
    return spec;
  }
  throw std::invalid_argument("unknown corruption '" + text +
                              "', expected clean|poisson:<dose>|blur:<k>[:<angle>]");
}

std::string CorruptionSpec::label() const {
  switch (kind) {
    case Kind::none:
      return "clean";
    case Kind::poisson: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "poisson:%g", dose);
      return buf;
    }
    case Kind::blur: {
      char buf[48];
      if (angle_deg != 0.0)
        std::snprintf(buf, sizeof buf, "blur:%d:%g", kernel, angle_deg);
      else
        std::snprintf(buf, sizeof buf, "blur:%d", kernel);
      return buf;
    }
  }
  return "clean";
}

ad::TensorF poisson_dose(const ad::TensorF& image, double dose, std::uint64_t seed) {
  if (!(dose > 0.0)) throw std::invalid_argument("poisson_dose: dose must be > 0");
  Rng rng(derive_seed(seed, "poisson-dose"));
  ad::TensorF out(image.shape);
  for (std::size_t i = 0; i < image.numel(); ++i) {
    const double v = static_cast<double>(image.data[i]);
    const double k = static_cast<double>(rng.poisson(dose * v));
    out.data[i] = static_cast<float>(std::min(k / dose, 1.0));
  }
  return out;
}

ad::TensorF motion_blur(const ad::TensorF& image, int k, double angle_deg) {
  if (k < 1 || k % 2 == 0)
    throw std::invalid_argument("motion_blur: kernel must be odd and >= 1, got " +
                                std::to_string(k));
  if (k == 1) return image;
  if (image.rank() != 3)
    throw ad::ShapeError("motion_blur: expected CHW, got " + ad::shape_str(image.shape));

  // March k cells along the dominant axis of the direction vector; every
  // step lands on a distinct cell, so the kernel is exactly k taps of 1/k.
  const double theta = angle_deg * 3.141592653589793 / 180.0;
  const double dx = std::cos(theta);
  const double dy = std::sin(theta);
  const double major = std::max(std::abs(dx), std::abs(dy));
  const double sx = dx / major;
  const double sy = dy / major;
  const int c = (k - 1) / 2;
  std::vector<std::pair<int, int>> taps;  // (dy, dx) offsets from center
  taps.reserve(k);
  for (int i = -c; i <= c; ++i)
    taps.emplace_back(static_cast<int>(std::llround(i * sy)),
                      static_cast<int>(std::llround(i * sx)));
  const float w = 1.0f / static_cast<float>(k);

  const std::size_t ch = image.shape[0], h = image.shape[1], wid = image.shape[2];
  auto reflect = [](long long i, long long n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
    return static_cast<std::size_t>(std::clamp<long long>(i, 0, n - 1));
  };
  ad::TensorF out(image.shape);
  for (std::size_t ci = 0; ci < ch; ++ci) {
    const float* plane = image.data.data() + ci * h * wid;
    float* oplane = out.data.data() + ci * h * wid;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < wid; ++x) {
        float acc = 0.0f;
        for (const auto& [ty, tx] : taps) {
          const std::size_t iy = reflect(static_cast<long long>(y) + ty,
                                         static_cast<long long>(h));
          const std::size_t ix = reflect(static_cast<long long>(x) + tx,
                                         static_cast<long long>(wid));
          acc += plane[iy * wid + ix];
        }
        oplane[y * wid + x] = acc * w;
      }
  }
  return out;
}

ad::TensorF apply_corruption(const ad::TensorF& image, const CorruptionSpec& spec,
                             std::uint64_t seed) {
  switch (spec.kind) {
    case CorruptionSpec::Kind::none:
      return image;
    case CorruptionSpec::Kind::poisson:
      return poisson_dose(image, spec.dose, seed);
    case CorruptionSpec::Kind::blur:
      return motion_blur(image, spec.kernel, spec.angle_deg);
  }
  return image;
}

}  // namespace tgseg::aug
