#include "tgseg/eval/selfcheck.hpp"

#include <functional>

#include "tgseg/ad/graph.hpp"
#include "tgseg/data/synthetic.hpp"
#include "tgseg/model/model.hpp"
#include "tgseg/util/rng.hpp"

namespace tgseg::eval {

namespace {

template <typename T>
using OpFn = std::function<ad::Var(ad::Graph<T>&, ad::Var)>;

// Values drawn away from zero so relu/abs/log style kinks are not sampled.
template <typename T>
ad::Tensor<T> off_kink_point(ad::Shape shape, std::uint64_t seed, bool positive = false) {
  ad::Tensor<T> t(std::move(shape));
  Rng rng(derive_seed(seed, "gc-point"));
  for (auto& v : t.data) {
    const double mag = 0.2 + 0.8 * rng.uniform();
    const double sgn = positive ? 1.0 : (rng.bernoulli(0.5) ? 1.0 : -1.0);
    v = static_cast<T>(sgn * mag);
  }
  return t;
}

// Reduces an op output to a scalar through fixed positive weights, then
// compares the graph gradient to finite differences.
template <typename T>
ad::GradCheckReport check_op(const OpFn<T>& op, const ad::Tensor<T>& point,
                             const ad::GradCheckOptions& opt) {
  auto fn = [&op](const ad::Tensor<T>& x, std::vector<T>* grad) -> T {
    ad::Graph<T> g;
    ad::Var xv = g.leaf(x, true);
    ad::Var y = op(g, xv);
    ad::Var s;
    if (g.val(y).numel() == 1) {
      s = y;
    } else {
      ad::Tensor<T> w(g.val(y).shape);
      Rng rng(derive_seed(421, "gc-weights"));
      for (auto& v : w.data) v = static_cast<T>(0.25 + rng.uniform());
      s = g.sum(g.mul(y, g.constant(w)));
    }
    if (grad) {
      g.backward(s);
      *grad = g.grad(xv);
      if (grad->empty()) grad->assign(x.numel(), T(0));
    }
    return g.val(s).data[0];
  };
  return ad::grad_check<T>(fn, point, opt);
}

template <typename T>
std::vector<CheckResult> primitive_checks(double eps, double tol) {
  ad::GradCheckOptions opt;
  opt.eps = eps;
  opt.tol = tol;
  std::vector<CheckResult> out;
  auto run = [&](const std::string& name, const OpFn<T>& op, ad::Tensor<T> point) {
    out.push_back({name, check_op<T>(op, point, opt)});
  };

  const ad::Tensor<T> small = off_kink_point<T>({2, 3}, 1);
  const ad::Tensor<T> vec = off_kink_point<T>({7}, 2);
  const ad::Tensor<T> img = off_kink_point<T>({2, 6, 6}, 3);
  const ad::Tensor<T> kern = off_kink_point<T>({3, 2, 3, 3}, 4);

  run("add", [&](auto& g, ad::Var x) {
    return g.add(x, g.constant(off_kink_point<T>({2, 3}, 11)));
  }, small);
  run("sub_rhs", [&](auto& g, ad::Var x) {
    return g.sub(g.constant(off_kink_point<T>({2, 3}, 12)), x);
  }, small);
  run("mul", [&](auto& g, ad::Var x) {
    return g.mul(x, g.constant(off_kink_point<T>({2, 3}, 13)));
  }, small);
  run("scale_const", [](auto& g, ad::Var x) { return g.scale_const(x, T(-1.7)); }, small);
  run("add_const", [](auto& g, ad::Var x) { return g.add_const(x, T(0.3)); }, small);
  run("pow_const", [](auto& g, ad::Var x) { return g.pow_const(x, T(1.3)); },
      off_kink_point<T>({2, 3}, 14, true));
  run("clamp", [](auto& g, ad::Var x) { return g.clamp(x, T(-2), T(2)); }, small);
  run("mul_scalar_x", [&](auto& g, ad::Var x) {
    return g.mul_scalar(x, g.constant(ad::Tensor<T>::scalar(T(0.7))));
  }, small);
  run("mul_scalar_s", [&](auto& g, ad::Var s) {
    return g.mul_scalar(g.constant(off_kink_point<T>({2, 3}, 15)), s);
  }, ad::Tensor<T>::scalar(T(0.8)));
  run("sub_scalar_x", [&](auto& g, ad::Var x) {
    return g.sub_scalar(x, g.constant(ad::Tensor<T>::scalar(T(0.4))));
  }, small);
  run("sub_scalar_s", [&](auto& g, ad::Var s) {
    return g.sub_scalar(g.constant(off_kink_point<T>({2, 3}, 16)), s);
  }, ad::Tensor<T>::scalar(T(0.4)));
  run("reciprocal", [](auto& g, ad::Var x) { return g.reciprocal(x); },
      off_kink_point<T>({2, 3}, 17, true));
  run("relu", [](auto& g, ad::Var x) { return g.relu(x); }, small);
  run("sigmoid", [](auto& g, ad::Var x) { return g.sigmoid(x); }, small);
  run("log", [](auto& g, ad::Var x) { return g.log(x); },
      off_kink_point<T>({2, 3}, 18, true));
  run("reshape", [](auto& g, ad::Var x) { return g.reshape(x, {6}); }, small);
  run("matmul_a", [&](auto& g, ad::Var x) {
    return g.matmul(x, g.constant(off_kink_point<T>({3, 4}, 19)));
  }, small);
  run("matmul_b", [&](auto& g, ad::Var x) {
    return g.matmul(g.constant(off_kink_point<T>({4, 2}, 20)), x);
  }, small);
  run("conv2d_input", [&](auto& g, ad::Var x) {
    return g.conv2d(x, g.constant(kern), 1, 1);
  }, img);
  run("conv2d_kernel", [&](auto& g, ad::Var x) {
    return g.conv2d(g.constant(img), x, 1, 1);
  }, kern);
  run("conv2d_stride2", [&](auto& g, ad::Var x) {
    return g.conv2d(x, g.constant(off_kink_point<T>({2, 2, 3, 3}, 21)), 2, 0);
  }, img);
  run("add_channel_bias_x", [&](auto& g, ad::Var x) {
    return g.add_channel_bias(x, g.constant(off_kink_point<T>({2}, 22)));
  }, img);
  run("add_channel_bias_b", [&](auto& g, ad::Var bias) {
    return g.add_channel_bias(g.constant(img), bias);
  }, off_kink_point<T>({2}, 23));
  run("max_pool2d", [](auto& g, ad::Var x) { return g.max_pool2d(x); }, img);
  run("nearest_upsample2d", [](auto& g, ad::Var x) { return g.nearest_upsample2d(x); },
      img);
  run("concat_channels", [&](auto& g, ad::Var x) {
    return g.concat_channels(x, g.constant(off_kink_point<T>({1, 6, 6}, 24)));
  }, img);
  run("slice_channels", [](auto& g, ad::Var x) { return g.slice_channels(x, 1, 2); },
      img);
  run("sum", [](auto& g, ad::Var x) { return g.sum(x); }, small);
  run("mean", [](auto& g, ad::Var x) { return g.mean(x); }, small);
  run("reduce_min", [](auto& g, ad::Var x) { return g.reduce_min(x); }, vec);
  run("reduce_max", [](auto& g, ad::Var x) { return g.reduce_max(x); }, vec);
  run("l1_distance", [&](auto& g, ad::Var x) {
    return g.l1_distance(x, g.constant(ad::Tensor<T>::full({7}, T(2.5))));
  }, vec);
  run("squared_l2_distance", [&](auto& g, ad::Var x) {
    return g.squared_l2_distance(x, g.constant(off_kink_point<T>({7}, 25)));
  }, vec);
  run("cosine_similarity_a", [&](auto& g, ad::Var x) {
    return g.cosine_similarity(x, g.constant(off_kink_point<T>({7}, 26)));
  }, vec);
  run("cosine_similarity_b", [&](auto& g, ad::Var x) {
    return g.cosine_similarity(g.constant(off_kink_point<T>({7}, 27)), x);
  }, vec);
  run("flip_h", [](auto& g, ad::Var x) { return g.flip_h(x); }, img);
  run("rot90", [](auto& g, ad::Var x) { return g.rot90(x, 1); }, img);
  run("crop_resize_bilinear", [](auto& g, ad::Var x) {
    return g.crop_resize_bilinear(x, 1, 1, 4, 4);
  }, img);
  return out;
}

template <typename T>
CheckResult composite_check(const char* name, double eps, double tol,
                            std::size_t max_coords) {
  model::ModelConfig mc;
  mc.d_raw = 64;
  mc.d_t = 32;
  mc.d_i = 32;
  mc.d_p = 32;
  mc.c_p = 1;
  mc.image_side = 16;
  mc.unet_depth = 3;
  mc.unet_width = 8;
  // Heads randomly initialized so every loss path carries gradient.
  const model::Model m(mc, 7, /*zero_init_heads=*/false);
  const data::Dataset ds = data::generate_synthetic(1, mc.image_side, mc.d_raw, 11);
  const data::Sample& s = ds.samples[0];
  aug::AugDraws draws;
  draws.spatial =
      aug::draw_spatial(mc.image_side, mc.image_side, derive_seed(5, "gc-spatial"));
  draws.views = aug::draw_views(3, mc.image_side, mc.image_side,
                                derive_seed(5, "gc-weak"), derive_seed(5, "gc-strong"));
  const T lg = T(1.0), li = T(0.1), lc = T(0.1);

  const model::ParamStore& ps = m.params();
  const std::vector<float> flat = ps.flatten();
  ad::Tensor<T> point({flat.size()});
  for (std::size_t i = 0; i < flat.size(); ++i)
    point.data[i] = static_cast<T>(flat[i]);

  auto fn = [&](const ad::Tensor<T>& x, std::vector<T>* grad) -> T {
    ad::Graph<T> g;
    model::Bound<T> b;
    b.g = &g;
    b.vars.reserve(ps.count());
    std::size_t off = 0;
    for (std::size_t i = 0; i < ps.count(); ++i) {
      const auto& shape = ps.value(static_cast<int>(i)).shape;
      ad::Tensor<T> t(shape);
      std::copy(x.data.begin() + off, x.data.begin() + off + t.numel(),
                t.data.begin());
      off += t.numel();
      b.vars.push_back(g.leaf(std::move(t), true));
    }
    auto fwd = model::forward_train_sample(m, b, s, draws);
    ad::Var total = g.add(g.add(fwd.l_seg, g.scale_const(fwd.l_gen, lg)),
                          g.add(g.scale_const(fwd.l_iac, li),
                                g.scale_const(fwd.l_cycle, lc)));
    if (grad) {
      g.backward(total);
      grad->clear();
      grad->reserve(x.numel());
      for (std::size_t i = 0; i < b.vars.size(); ++i) {
        const auto& gr = g.grad(b.vars[i]);
        if (gr.empty())
          grad->insert(grad->end(), g.val(b.vars[i]).numel(), T(0));
        else
          grad->insert(grad->end(), gr.begin(), gr.end());
      }
    }
    return g.val(total).data[0];
  };

  ad::GradCheckOptions opt;
  opt.eps = eps;
  opt.tol = tol;
  opt.max_coords = max_coords;
  opt.coord_seed = 29;
  return {name, ad::grad_check<T>(fn, point, opt)};
}

}  // namespace

std::vector<CheckResult> primitive_grad_checks_f32(double tol) {
  return primitive_checks<float>(1e-2, tol);
}

std::vector<CheckResult> primitive_grad_checks_f64(double tol) {
  return primitive_checks<double>(1e-5, tol);
}

CheckResult composite_grad_check_f32(double tol, std::size_t max_coords) {
  return composite_check<float>("composite_total_loss_f32", 2e-2, tol, max_coords);
}

CheckResult composite_grad_check_f64(double tol, std::size_t max_coords) {
  return composite_check<double>("composite_total_loss_f64", 1e-5, tol, max_coords);
}

bool all_pass(const std::vector<CheckResult>& checks) {
  for (const auto& c : checks)
    if (!c.report.pass) return false;
  return true;
}

}  // namespace tgseg::eval
