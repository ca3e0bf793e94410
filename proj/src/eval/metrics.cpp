#include "tgseg/eval/metrics.hpp"

namespace tgseg::eval {

namespace {

struct Overlap {
  std::size_t np = 0, ng = 0, inter = 0;
};

Overlap count(const ad::TensorF& pred, const ad::TensorF& gt) {
  if (pred.shape != gt.shape)
    throw MetricError("metric: shape mismatch " + ad::shape_str(pred.shape) + " vs " +
                      ad::shape_str(gt.shape));
  Overlap o;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const float p = pred.data[i];
    const float g = gt.data[i];
    if ((p != 0.0f && p != 1.0f) || (g != 0.0f && g != 1.0f))
      throw MetricError("metric: inputs must be binary");
    o.np += p == 1.0f;
    o.ng += g == 1.0f;
    o.inter += (p == 1.0f) && (g == 1.0f);
  }
  return o;
}

}  // namespace

double dice(const ad::TensorF& pred, const ad::TensorF& gt) {
  const Overlap o = count(pred, gt);
  if (o.np + o.ng == 0) return 1.0;
  return 2.0 * static_cast<double>(o.inter) / static_cast<double>(o.np + o.ng);
}

double iou(const ad::TensorF& pred, const ad::TensorF& gt) {
  const Overlap o = count(pred, gt);
  const std::size_t uni = o.np + o.ng - o.inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(o.inter) / static_cast<double>(uni);
}

ad::TensorF threshold_mask(const ad::TensorF& probs, float thresh) {
  ad::TensorF out(probs.shape);
  for (std::size_t i = 0; i < probs.numel(); ++i)
    out.data[i] = probs.data[i] > thresh ? 1.0f : 0.0f;
  return out;
}

}  // namespace tgseg::eval
