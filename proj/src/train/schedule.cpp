#include "tgseg/train/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace tgseg::train {

double cosine_lr(double t_in_cycle, double cycle_len, double lr_max, double lr_min) {
  if (!(cycle_len > 0)) throw std::invalid_argument("cosine_lr: cycle_len must be > 0");
  const double phase = 3.141592653589793 * t_in_cycle / cycle_len;
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(phase));
}

double cosine_warm_restart_lr(std::size_t tick, std::size_t t0, std::size_t t_mult,
                              double lr_max, double lr_min) {
  if (t0 < 1) throw std::invalid_argument("cosine_warm_restart_lr: t0 must be >= 1");
  if (t_mult < 1) throw std::invalid_argument("cosine_warm_restart_lr: t_mult must be >= 1");
  std::size_t rem = tick;
  std::size_t cycle = t0;
  while (rem >= cycle) {
    rem -= cycle;
    cycle *= t_mult;
  }
  return cosine_lr(static_cast<double>(rem), static_cast<double>(cycle), lr_max, lr_min);
}

}  // namespace tgseg::train
