#pragma once

#include <stdexcept>

#include "tgseg/ad/tensor.hpp"

namespace tgseg::eval {

struct MetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MetricResult {
  double dice = 0.0;
  double iou = 0.0;
  std::size_t n_samples = 0;
};

// Overlap scores on strictly binary masks. Convention: both masks empty
// scores 1.0, exactly one empty scores 0.0.
double dice(const ad::TensorF& pred, const ad::TensorF& gt);
double iou(const ad::TensorF& pred, const ad::TensorF& gt);

// probs > thresh -> 1.
ad::TensorF threshold_mask(const ad::TensorF& probs, float thresh = 0.5f);

}  // namespace tgseg::eval
