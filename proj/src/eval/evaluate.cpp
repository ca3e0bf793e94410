#include "tgseg/eval/evaluate.hpp"

#include <fstream>

#include "tgseg/data/btsr.hpp"
#include "tgseg/util/rng.hpp"

namespace tgseg::eval {

namespace {

void check_compatible(const model::Model& m, const data::Dataset& ds) {
  if (ds.empty()) throw MetricError("evaluate: dataset is empty");
  if (ds.image_side() != m.config().image_side)
    throw ad::ShapeError("evaluate: checkpoint built for side " +
                         std::to_string(m.config().image_side) + ", dataset is " +
                         std::to_string(ds.image_side()));
  if (ds.text_dim() != m.config().d_raw)
    throw ad::ShapeError("evaluate: checkpoint expects text dim " +
                         std::to_string(m.config().d_raw) + ", dataset has " +
                         std::to_string(ds.text_dim()));
}

ad::TensorF infer_probs(const model::Model& m, const data::Sample& s,
                        const ad::TensorF& image) {
  ad::Graph<float> g;
  auto b = m.bind(g, /*requires_grad=*/false);
  ad::Var y_hat = model::forward_infer_sample(m, b, image, s.text);
  return g.val(y_hat);
}

}  // namespace

MetricResult evaluate_model(const model::Model& m, const data::Dataset& ds,
                            const aug::CorruptionSpec* corrupt,
                            std::uint64_t corrupt_seed) {
  check_compatible(m, ds);
  MetricResult r;
  double dice_sum = 0.0, iou_sum = 0.0;
  for (const auto& s : ds.samples) {
    ad::TensorF image = s.image;
    if (corrupt && corrupt->kind != aug::CorruptionSpec::Kind::none)
      image = aug::apply_corruption(image, *corrupt,
                                    derive_seed(corrupt_seed, "corrupt:" + s.id));
    const ad::TensorF pred = threshold_mask(infer_probs(m, s, image));
    dice_sum += dice(pred, s.mask);
    iou_sum += iou(pred, s.mask);
  }
  r.n_samples = ds.size();
  r.dice = dice_sum / static_cast<double>(ds.size());
  r.iou = iou_sum / static_cast<double>(ds.size());
  return r;
}

MetricResult evaluate_checkpoint(const std::filesystem::path& ckpt_dir,
                                 const data::Dataset& ds,
                                 const aug::CorruptionSpec* corrupt,
                                 std::uint64_t corrupt_seed) {
  const model::Model m = model::load_checkpoint(ckpt_dir);
  return evaluate_model(m, ds, corrupt, corrupt_seed);
}

double mean_view_cosine_distance(const model::Model& m, const data::Dataset& ds,
                                 std::uint64_t seed) {
  check_compatible(m, ds);
  const std::size_t side = ds.image_side();
  double acc = 0.0;
  for (const auto& s : ds.samples) {
    aug::AugDraws draws;
    draws.spatial = aug::draw_spatial(side, side,
                                      derive_seed(seed, "consist-spatial:" + s.id));
    draws.views = aug::draw_views(3, side, side,
                                  derive_seed(seed, "consist-weak:" + s.id),
                                  derive_seed(seed, "consist-strong:" + s.id));
    ad::Graph<float> g;
    auto b = m.bind(g, /*requires_grad=*/false);
    auto fwd = model::forward_train_sample(m, b, s, draws);
    acc += static_cast<double>(g.val(fwd.l_iac).data[0]);
  }
  return acc / static_cast<double>(ds.size());
}

void dump_predictions(const model::Model& m, const data::Dataset& ds,
                      const std::filesystem::path& out_dir) {
  check_compatible(m, ds);
  std::filesystem::create_directories(out_dir);
  for (const auto& s : ds.samples) {
    const ad::TensorF probs = infer_probs(m, s, s.image);
    const ad::TensorF pred = threshold_mask(probs);
    data::write_tensor_file(pred, out_dir / (s.id + ".pred.btsr"));

    const std::size_t h = s.image.shape[1], w = s.image.shape[2];
    std::ofstream pgm(out_dir / (s.id + ".overlay.pgm"), std::ios::binary);
    pgm << "P5\n" << w << " " << h << "\n255\n";
    for (std::size_t i = 0; i < h * w; ++i) {
      float v = s.image.data[i] * 180.0f;
      if (pred.data[i] == 1.0f) v += 75.0f;
      const unsigned char byte =
          static_cast<unsigned char>(std::min(255.0f, std::max(0.0f, v)));
      pgm.write(reinterpret_cast<const char*>(&byte), 1);
    }
  }
}

}  // namespace tgseg::eval
