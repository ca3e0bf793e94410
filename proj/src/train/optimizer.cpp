#include "tgseg/train/optimizer.hpp"

#include <cmath>

#include "tgseg/kern/kernels.hpp"

namespace tgseg::train {

AdamW::AdamW(const model::ParamStore& ps, AdamWConfig cfg) : cfg_(cfg) {
  m_.resize(ps.count());
  v_.resize(ps.count());
  for (std::size_t i = 0; i < ps.count(); ++i) {
    m_[i].assign(ps.value(static_cast<int>(i)).numel(), 0.0f);
    v_[i].assign(ps.value(static_cast<int>(i)).numel(), 0.0f);
  }
}

void AdamW::step(model::ParamStore& ps, const std::vector<std::vector<float>>& grads,
                 double lr) {
  if (grads.size() != ps.count())
    throw OptimError("adamw: got " + std::to_string(grads.size()) +
                     " gradients for " + std::to_string(ps.count()) + " parameters");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    for (float gv : grads[i])
      if (!std::isfinite(gv))
        throw OptimError("adamw: non-finite gradient in parameter '" +
                         ps.name(static_cast<int>(i)) + "'");
    if (grads[i].size() != m_[i].size())
      throw OptimError("adamw: gradient size mismatch for parameter '" +
                       ps.name(static_cast<int>(i)) + "'");
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    kern::ops().adamw(ps.value(static_cast<int>(i)).data.data(), grads[i].data(),
                      m_[i].data(), v_[i].data(), grads[i].size(),
                      static_cast<float>(lr), static_cast<float>(cfg_.beta1),
                      static_cast<float>(cfg_.beta2), static_cast<float>(cfg_.eps),
                      static_cast<float>(cfg_.weight_decay),
                      static_cast<float>(1.0 / bc1), static_cast<float>(1.0 / bc2));
  }
}

double clip_global_norm(std::vector<std::vector<float>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    sq += static_cast<double>(kern::ops().sum_sq(g.data(), g.size()));
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const float s = static_cast<float>(max_norm / norm);
    for (auto& g : grads) kern::ops().scale(s, g.data(), g.data(), g.size());
  }
  return norm;
}

}  // namespace tgseg::train
