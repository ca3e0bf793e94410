#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "tgseg/kern/kernels.hpp"
#include "tgseg/util/rng.hpp"

using namespace tgseg;

namespace {

std::vector<float> random_vec(std::size_t n, std::uint64_t seed, float lo = -2.0f,
                              float hi = 2.0f) {
  std::vector<float> v(n);
  Rng rng(derive_seed(seed, "kern-test"));
  for (auto& x : v) x = rng.uniform_f(lo, hi);
  return v;
}

// Sizes straddling the 8- and 16-lane boundaries.
const std::size_t kSizes[] = {1, 3, 7, 8, 9, 15, 16, 17, 31, 64, 67, 257};

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1.0});
}

}  // namespace

TEST_CASE("kernel dispatch reports a valid table") {
  CHECK(kern::scalar_ops().dot != nullptr);
  // On hosts without AVX2 the accelerated table is absent and dispatch
  // falls back to scalar; both states are legal.
  if (kern::avx2_ops() != nullptr) {
    CHECK(std::string(kern::active_isa()) == "avx2");
  } else {
    CHECK(std::string(kern::active_isa()) == "scalar");
  }
  kern::force_scalar(true);
  CHECK(std::string(kern::active_isa()) == "scalar");
  kern::force_scalar(false);
}

TEST_CASE("avx2 variants match scalar reference") {
  const kern::Ops* simd = kern::avx2_ops();
  if (simd == nullptr) return;  // host without AVX2
  const kern::Ops& ref = kern::scalar_ops();

  for (std::size_t n : kSizes) {
    CAPTURE(n);
    const auto a = random_vec(n, 100 + n);
    const auto b = random_vec(n, 200 + n);

    // Elementwise maps are computed in the same per-element order: exact.
    std::vector<float> r1(n), r2(n);
    ref.add(a.data(), b.data(), r1.data(), n);
    simd->add(a.data(), b.data(), r2.data(), n);
    CHECK(r1 == r2);
    ref.sub(a.data(), b.data(), r1.data(), n);
    simd->sub(a.data(), b.data(), r2.data(), n);
    CHECK(r1 == r2);
    ref.mul(a.data(), b.data(), r1.data(), n);
    simd->mul(a.data(), b.data(), r2.data(), n);
    CHECK(r1 == r2);
    ref.scale(1.7f, a.data(), r1.data(), n);
    simd->scale(1.7f, a.data(), r2.data(), n);
    CHECK(r1 == r2);
    ref.relu(a.data(), r1.data(), n);
    simd->relu(a.data(), r2.data(), n);
    CHECK(r1 == r2);
    ref.clamp(a.data(), -0.5f, 0.5f, r1.data(), n);
    simd->clamp(a.data(), -0.5f, 0.5f, r2.data(), n);
    CHECK(r1 == r2);

    // Reductions and fused updates reassociate; compare within rounding.
    CHECK(close_rel(ref.dot(a.data(), b.data(), n), simd->dot(a.data(), b.data(), n), 1e-5));
    CHECK(close_rel(ref.sum(a.data(), n), simd->sum(a.data(), n), 1e-5));
    CHECK(close_rel(ref.sum_abs(a.data(), n), simd->sum_abs(a.data(), n), 1e-5));
    CHECK(close_rel(ref.sum_sq(a.data(), n), simd->sum_sq(a.data(), n), 1e-5));

    std::vector<float> y1 = b, y2 = b;
    ref.axpy(0.37f, a.data(), y1.data(), n);
    simd->axpy(0.37f, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(close_rel(y1[i], y2[i], 1e-6));

    std::vector<float> g1 = a, g2 = a;
    ref.relu_bwd(b.data(), a.data(), g1.data(), n);
    simd->relu_bwd(b.data(), a.data(), g2.data(), n);
    CHECK(g1 == g2);
  }
}

TEST_CASE("avx2 adamw matches scalar reference") {
  const kern::Ops* simd = kern::avx2_ops();
  if (simd == nullptr) return;
  for (std::size_t n : kSizes) {
    CAPTURE(n);
    auto p1 = random_vec(n, 1), g = random_vec(n, 2);
    auto m1 = random_vec(n, 3, 0.0f, 0.1f), v1 = random_vec(n, 4, 0.0f, 0.1f);
    auto p2 = p1, m2 = m1, v2 = v1;
    kern::scalar_ops().adamw(p1.data(), g.data(), m1.data(), v1.data(), n, 1e-3f,
                             0.9f, 0.999f, 1e-8f, 1e-2f, 1.1f, 1.05f);
    simd->adamw(p2.data(), g.data(), m2.data(), v2.data(), n, 1e-3f, 0.9f, 0.999f,
                1e-8f, 1e-2f, 1.1f, 1.05f);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(close_rel(p1[i], p2[i], 1e-6));
      CHECK(close_rel(m1[i], m2[i], 1e-6));
      CHECK(close_rel(v1[i], v2[i], 1e-6));
    }
  }
}

TEST_CASE("poisson sampler hits mean and variance at large rates") {
  // Rate 70 exercises the rejection path where exp(-rate) underflows single
  // precision; the sample mean and variance should both approach the rate.
  Rng rng(42);
  const double lambda = 70.0;
  const int n = 20000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double k = static_cast<double>(rng.poisson(lambda));
    s += k;
    s2 += k * k;
  }
  const double mean = s / n;
  const double var = s2 / n - mean * mean;
  CHECK(mean == doctest::Approx(lambda).epsilon(0.01));
  CHECK(var == doctest::Approx(lambda).epsilon(0.05));
}
