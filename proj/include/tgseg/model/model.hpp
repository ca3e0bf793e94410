#pragma once

// The segmentation architecture: text projection, global image encoder,
// residual text-image fusion, pseudo-image generator with an image-to-text
// return head, a small U-Net backbone with projection and prediction heads,
// and the four training losses.

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tgseg/ad/graph.hpp"
#include "tgseg/aug/augment.hpp"
#include "tgseg/data/dataset.hpp"
#include "tgseg/model/params.hpp"

namespace tgseg::model {

struct ModelConfig {
  std::size_t d_raw = 128;      // frozen text-source embedding size
  std::size_t d_t = 64;
  std::size_t d_i = 64;
  std::size_t d_p = 64;
  std::size_t c_p = 1;          // pseudo image channels
  std::size_t image_side = 64;
  std::size_t unet_depth = 3;   // resolution levels
  std::size_t unet_width = 16;  // channels at full resolution
};

class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t init_seed, bool zero_init_heads = true);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  template <typename T>
  Bound<T> bind(ad::Graph<T>& g, bool requires_grad = true) const {
    return bind_params(g, params_, requires_grad);
  }

  // t = proj(raw); the raw source is bound frozen by callers.
  template <typename T>
  ad::Var project_text(Bound<T>& b, ad::Var raw) const;

  // Three conv/relu/pool blocks, global average pool, linear to d_i.
  template <typename T>
  ad::Var encode_image_global(Bound<T>& b, ad::Var image) const;

  // delta_t = mlp([t;i]); returns (delta_t, t + delta_t).
  template <typename T>
  std::pair<ad::Var, ad::Var> fuse(Bound<T>& b, ad::Var t, ad::Var i) const;

  // Linear seed map at side/8, three upsample+conv blocks, sigmoid output
  // in [0,1] at [c_p, side, side].
  template <typename T>
  ad::Var generate_pseudo(Bound<T>& b, ad::Var t_refined, std::size_t side) const;

  // Small conv stack + global pool + linear back to the text space.
  template <typename T>
  ad::Var image_to_text(Bound<T>& b, ad::Var pseudo) const;

  // Encoder-decoder with skip connections; output spatial size equals input.
  template <typename T>
  ad::Var unet_forward(Bound<T>& b, ad::Var x_view) const;

  // Global pooling + linear to d_p.
  template <typename T>
  ad::Var project(Bound<T>& b, ad::Var f) const;

  // sigmoid(conv1x1(f)), shape [1,H,W].
  template <typename T>
  ad::Var predict(Bound<T>& b, ad::Var f_w) const;

  int param_id(const std::string& name) const { return params_.find(name); }

 private:
  struct ConvIds {
    int w = -1, bias = -1;
  };
  ConvIds add_conv(const std::string& name, std::size_t out_c, std::size_t in_c,
                   std::size_t k, std::uint64_t seed, bool zero = false);
  ConvIds add_linear(const std::string& name, std::size_t out_d, std::size_t in_d,
                     std::uint64_t seed, bool zero = false);
  template <typename T>
  ad::Var conv_block(Bound<T>& b, ad::Var x, const ConvIds& ids) const;

  ModelConfig cfg_;
  ParamStore params_;

  ConvIds text_proj_;
  ConvIds imgenc_conv_[3];
  ConvIds imgenc_lin_;
  ConvIds fuse_fc1_, fuse_fc2_;
  ConvIds pseudo_lin_;
  ConvIds pseudo_conv_[3];
  ConvIds pseudo_out_;
  ConvIds i2t_conv_[2];
  ConvIds i2t_lin_;
  struct Stage {
    ConvIds a, b;
  };
  std::vector<Stage> enc_;
  Stage bottleneck_;
  std::vector<Stage> dec_;
  ConvIds proj_head_;
  ConvIds pred_head_;
};

// --- losses -----------------------------------------------------------------

// Dice + clamped binary cross-entropy; y must be binary.
template <typename T>
ad::Var seg_loss(ad::Graph<T>& g, ad::Var y_hat, const ad::Tensor<T>& y);

template <typename T>
ad::Var cycle_loss(ad::Graph<T>& g, ad::Var t, ad::Var t_hat) {
  return g.squared_l2_distance(t, t_hat);
}

template <typename T>
ad::Var gen_loss(ad::Graph<T>& g, ad::Var pseudo, ad::Var supervision) {
  return g.l1_distance(pseudo, supervision);
}

template <typename T>
ad::Var iac_loss(ad::Graph<T>& g, ad::Var p_w, ad::Var p_s) {
  return g.add_const(g.scale_const(g.cosine_similarity(p_w, p_s), T(-1)), T(1));
}

// Ground-truth mask replicated to the pseudo channel count.
ad::TensorF mask_supervision(const ad::TensorF& mask, std::size_t c_p);

// --- full per-sample passes --------------------------------------------------

template <typename T>
struct TrainForward {
  ad::Var t, i, delta_t, t_refined, pseudo, t_hat;
  ad::Var x_cat, x_g, x_w, x_s;
  ad::Tensor<T> y_g;
  ad::Var f_w, f_s, p_w, p_s, y_hat;
  ad::Var l_seg, l_gen, l_iac, l_cycle;
};

template <typename T>
TrainForward<T> forward_train_sample(const Model& m, Bound<T>& b,
                                     const data::Sample& s,
                                     const aug::AugDraws& draws);

template <typename T>
ad::Var forward_infer_sample(const Model& m, Bound<T>& b,
                             const ad::Tensor<T>& image,
                             const ad::Tensor<T>& text);

// --- checkpoints --------------------------------------------------------------

// Directory of <param>.btsr files plus config.echo (key=value).
void save_checkpoint(const Model& m, const std::filesystem::path& dir,
                     const std::vector<std::pair<std::string, std::string>>& echo);
std::map<std::string, std::string> read_config_echo(const std::filesystem::path& dir);
Model load_checkpoint(const std::filesystem::path& dir);

extern template ad::Var seg_loss<float>(ad::Graph<float>&, ad::Var,
                                        const ad::Tensor<float>&);
extern template ad::Var seg_loss<double>(ad::Graph<double>&, ad::Var,
                                         const ad::Tensor<double>&);
extern template TrainForward<float> forward_train_sample<float>(
    const Model&, Bound<float>&, const data::Sample&, const aug::AugDraws&);
extern template TrainForward<double> forward_train_sample<double>(
    const Model&, Bound<double>&, const data::Sample&, const aug::AugDraws&);
extern template ad::Var forward_infer_sample<float>(const Model&, Bound<float>&,
                                                    const ad::Tensor<float>&,
                                                    const ad::Tensor<float>&);
extern template ad::Var forward_infer_sample<double>(const Model&, Bound<double>&,
                                                     const ad::Tensor<double>&,
                                                     const ad::Tensor<double>&);

}  // namespace tgseg::model
