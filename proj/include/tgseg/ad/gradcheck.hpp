#pragma once

// Central finite-difference gradient checking. The comparison uses a
// combined relative/absolute criterion: the absolute floor is derived from
// the function's own rounding noise at the chosen step, so coordinates whose
// true derivative sits below finite-difference resolution cannot produce
// spurious failures. Coordinates where the two half-step estimates disagree
// badly sit on a kink (relu, max, clamp) and are reported as skipped rather
// than compared.

#include <cstdint>
#include <functional>
#include <string>

#include "tgseg/ad/tensor.hpp"

namespace tgseg::ad {

struct GradCheckOptions {
  double eps = 1e-3;
  double tol = 1e-3;
  // atol = noise_scale * machine_eps(T) * max(1,|f|) / eps
  double noise_scale = 64.0;
  // 0 checks every coordinate; otherwise a seeded subset of this size.
  std::size_t max_coords = 0;
  std::uint64_t coord_seed = 17;
  bool detect_kinks = true;
};

struct GradCheckReport {
  bool pass = true;
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_nonsmooth = 0;
  std::size_t failures = 0;
  std::size_t worst_coord = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// fn(x, grad): returns f(x); when grad is non-null it must also be filled
// with df/dx (same length as x). The analytic side comes from the caller's
// graph; the numeric side from re-evaluating fn with perturbed copies.
template <typename T>
GradCheckReport grad_check(
    const std::function<T(const Tensor<T>&, std::vector<T>*)>& fn,
    const Tensor<T>& point, const GradCheckOptions& opt = {});

extern template GradCheckReport grad_check<float>(
    const std::function<float(const Tensor<float>&, std::vector<float>*)>&,
    const Tensor<float>&, const GradCheckOptions&);
extern template GradCheckReport grad_check<double>(
    const std::function<double(const Tensor<double>&, std::vector<double>*)>&,
    const Tensor<double>&, const GradCheckOptions&);

}  // namespace tgseg::ad
