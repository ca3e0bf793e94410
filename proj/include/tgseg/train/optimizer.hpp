#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "tgseg/model/params.hpp"

namespace tgseg::train {

struct OptimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

// Decoupled weight decay: the decay term acts on the parameter directly and
// never passes through the moment estimates.
class AdamW {
 public:
  AdamW(const model::ParamStore& ps, AdamWConfig cfg);

  // grads[i] pairs with parameter i; throws OptimError naming the parameter
  // on any non-finite gradient.
  void step(model::ParamStore& ps, const std::vector<std::vector<float>>& grads,
            double lr);

  std::size_t step_count() const { return step_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  AdamWConfig cfg_;
  std::size_t step_ = 0;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
};

// Scales grads in place so the global L2 norm is at most max_norm;
// max_norm <= 0 disables clipping. Returns the pre-clip norm.
double clip_global_norm(std::vector<std::vector<float>>& grads, double max_norm);

}  // namespace tgseg::train
