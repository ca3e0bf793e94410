#pragma once

#include <cstddef>

namespace tgseg::train {

// Cosine decay within one cycle: lr_min + (lr_max-lr_min)(1+cos(pi t/T))/2.
double cosine_lr(double t_in_cycle, double cycle_len, double lr_max, double lr_min);

// Warm restarts: cycle i has length t0 * t_mult^i; tick is mapped to its
// cycle-local position, so the first tick of every cycle returns lr_max.
double cosine_warm_restart_lr(std::size_t tick, std::size_t t0, std::size_t t_mult,
                              double lr_max, double lr_min);

}  // namespace tgseg::train
