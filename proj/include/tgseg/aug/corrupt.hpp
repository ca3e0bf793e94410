#pragma once

// Test-time corruption simulators: photon-count (Poisson) noise at a dose
// level and directional motion blur. Both operate on plain [0,1] tensors;
// they are applied to held-out images before inference, never inside the
// training graph.

#include <cstdint>
#include <string>

#include "tgseg/ad/tensor.hpp"

namespace tgseg::aug {

struct CorruptionSpec {
  enum class Kind { none, poisson, blur };
  Kind kind = Kind::none;
  double dose = 0.0;
  int kernel = 1;
  double angle_deg = 0.0;

  // Grammar: "clean" | "poisson:<dose>" | "blur:<k>[:<angle>]".
  static CorruptionSpec parse(const std::string& text);
  std::string label() const;
};

// v -> min(Poisson(dose*v)/dose, 1) per pixel, seeded.
ad::TensorF poisson_dose(const ad::TensorF& image, double dose, std::uint64_t seed);

// Convolution with a normalized k-pixel line kernel through the center at
// the given angle; reflect padding at borders. k=1 is the identity.
ad::TensorF motion_blur(const ad::TensorF& image, int k, double angle_deg);

ad::TensorF apply_corruption(const ad::TensorF& image, const CorruptionSpec& spec,
                             std::uint64_t seed);

}  // namespace tgseg::aug
