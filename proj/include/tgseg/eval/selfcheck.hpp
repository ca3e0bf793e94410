#pragma once

// Gradient integrity suite: every graph primitive checked against central
// finite differences, plus the full composite training loss on a 16x16
// synthetic sample. Runs in float32 and in a float64 oracle mode with a
// tighter tolerance.

#include <string>
#include <vector>

#include "tgseg/ad/gradcheck.hpp"

namespace tgseg::eval {

struct CheckResult {
  std::string name;
  ad::GradCheckReport report;
};

std::vector<CheckResult> primitive_grad_checks_f32(double tol = 5e-3);
std::vector<CheckResult> primitive_grad_checks_f64(double tol = 1e-6);
CheckResult composite_grad_check_f32(double tol = 5e-3, std::size_t max_coords = 256);
CheckResult composite_grad_check_f64(double tol = 1e-6, std::size_t max_coords = 256);

bool all_pass(const std::vector<CheckResult>& checks);

}  // namespace tgseg::eval
