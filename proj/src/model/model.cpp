#include "tgseg/model/model.hpp"

#include <cmath>
#include <fstream>

#include "tgseg/data/btsr.hpp"

namespace tgseg::model {

namespace {

constexpr std::size_t kImgEncWidths[3] = {8, 16, 32};
constexpr std::size_t kPseudoWidth = 8;
constexpr std::size_t kI2tWidths[2] = {8, 16};

float he_limit(std::size_t fan_in) {
  return std::sqrt(6.0f / static_cast<float>(fan_in));
}

template <typename T>
ad::Var gap(ad::Graph<T>& g, ad::Var x) {
  const ad::Shape s = g.val(x).shape;
  const std::size_t c = s[0], hw = s[1] * s[2];
  ad::Var flat = g.reshape(x, {c, hw});
  ad::Var ones = g.constant(ad::Tensor<T>::full({hw, 1}, T(1)));
  return g.scale_const(g.reshape(g.matmul(flat, ones), {c}), T(1) / static_cast<T>(hw));
}

template <typename T>
ad::Var linear(ad::Graph<T>& g, ad::Var x, ad::Var w, ad::Var bias) {
  const std::size_t in = g.val(x).numel();
  const std::size_t out = g.val(w).shape[0];
  ad::Var y = g.matmul(w, g.reshape(x, {in, 1}));
  return g.add(g.reshape(y, {out}), bias);
}

}  // namespace

Model::ConvIds Model::add_conv(const std::string& name, std::size_t out_c,
                               std::size_t in_c, std::size_t k, std::uint64_t seed,
                               bool zero) {
  ConvIds ids;
  const float lim = zero ? 0.0f : he_limit(in_c * k * k);
  ids.w = params_.add(name + ".weight", {out_c, in_c, k, k}, lim, seed);
  ids.bias = params_.add(name + ".bias", {out_c}, 0.0f, seed);
  return ids;
}

Model::ConvIds Model::add_linear(const std::string& name, std::size_t out_d,
                                 std::size_t in_d, std::uint64_t seed, bool zero) {
  ConvIds ids;
  const float lim = zero ? 0.0f : he_limit(in_d);
  ids.w = params_.add(name + ".weight", {out_d, in_d}, lim, seed);
  ids.bias = params_.add(name + ".bias", {out_d}, 0.0f, seed);
  return ids;
}

Model::Model(ModelConfig cfg, std::uint64_t init_seed, bool zero_init_heads)
    : cfg_(cfg) {
  const std::uint64_t s = init_seed;
  // The projection starts small so the initial text embedding has O(1) norm;
  // otherwise the cycle term dwarfs the other losses for the first epochs.
  text_proj_.w = params_.add("text_proj.weight", {cfg_.d_t, cfg_.d_raw},
                             he_limit(cfg_.d_raw) /
                                 std::sqrt(static_cast<float>(cfg_.d_raw)),
                             s);
  text_proj_.bias = params_.add("text_proj.bias", {cfg_.d_t}, 0.0f, s);

  std::size_t in_c = 3;
  for (int k = 0; k < 3; ++k) {
    imgenc_conv_[k] = add_conv("imgenc.conv" + std::to_string(k), kImgEncWidths[k],
                               in_c, 3, s);
    in_c = kImgEncWidths[k];
  }
  imgenc_lin_ = add_linear("imgenc.linear", cfg_.d_i, kImgEncWidths[2], s);

  const std::size_t fuse_in = cfg_.d_t + cfg_.d_i;
  const std::size_t fuse_hidden = 2 * fuse_in;
  fuse_fc1_ = add_linear("fuse.fc1", fuse_hidden, fuse_in, s);
  fuse_fc2_ = add_linear("fuse.fc2", cfg_.d_t, fuse_hidden, s, zero_init_heads);

  const std::size_t seed_side = cfg_.image_side / 8;
  pseudo_lin_ = add_linear("pseudo.linear", cfg_.c_p * seed_side * seed_side,
                           cfg_.d_t, s);
  in_c = cfg_.c_p;
  for (int k = 0; k < 3; ++k) {
    pseudo_conv_[k] = add_conv("pseudo.conv" + std::to_string(k), kPseudoWidth,
                               in_c, 3, s);
    in_c = kPseudoWidth;
  }
  pseudo_out_ = add_conv("pseudo.out", cfg_.c_p, kPseudoWidth, 3, s);

  in_c = cfg_.c_p;
  for (int k = 0; k < 2; ++k) {
    i2t_conv_[k] = add_conv("i2t.conv" + std::to_string(k), kI2tWidths[k], in_c, 3, s);
    in_c = kI2tWidths[k];
  }
  i2t_lin_ = add_linear("i2t.linear", cfg_.d_t, kI2tWidths[1], s, zero_init_heads);

  const std::size_t levels = cfg_.unet_depth;
  const std::size_t w0 = cfg_.unet_width;
  std::size_t prev = 3 + cfg_.c_p;
  for (std::size_t lv = 0; lv + 1 < levels; ++lv) {
    const std::size_t wc = w0 << lv;
    Stage st;
    st.a = add_conv("unet.enc" + std::to_string(lv) + ".conv0", wc, prev, 3, s);
    st.b = add_conv("unet.enc" + std::to_string(lv) + ".conv1", wc, wc, 3, s);
    enc_.push_back(st);
    prev = wc;
  }
  const std::size_t wb = w0 << (levels - 1);
  bottleneck_.a = add_conv("unet.bottleneck.conv0", wb, prev, 3, s);
  bottleneck_.b = add_conv("unet.bottleneck.conv1", wb, wb, 3, s);
  dec_.resize(levels - 1);
  for (std::size_t lv = levels - 1; lv-- > 0;) {
    const std::size_t wc = w0 << lv;
    const std::size_t from_below = wc * 2;
    Stage st;
    st.a = add_conv("unet.dec" + std::to_string(lv) + ".conv0", wc, from_below + wc,
                    3, s);
    st.b = add_conv("unet.dec" + std::to_string(lv) + ".conv1", wc, wc, 3, s);
    dec_[lv] = st;
  }
  proj_head_ = add_linear("proj_head", cfg_.d_p, w0, s);
  pred_head_ = add_conv("pred_head", 1, w0, 1, s);
}

template <typename T>
ad::Var Model::conv_block(Bound<T>& b, ad::Var x, const ConvIds& ids) const {
  ad::Graph<T>& g = *b.g;
  return g.relu(g.add_channel_bias(g.conv2d(x, b[ids.w], 1, 1), b[ids.bias]));
}

template <typename T>
ad::Var Model::project_text(Bound<T>& b, ad::Var raw) const {
  ad::Graph<T>& g = *b.g;
  if (g.val(raw).numel() != cfg_.d_raw)
    throw ad::ShapeError("project_text: raw embedding has " +
                         std::to_string(g.val(raw).numel()) + " dims, expected " +
                         std::to_string(cfg_.d_raw));
  return linear(g, raw, b[text_proj_.w], b[text_proj_.bias]);
}

template <typename T>
ad::Var Model::encode_image_global(Bound<T>& b, ad::Var image) const {
  ad::Graph<T>& g = *b.g;
  const ad::Shape s = g.val(image).shape;
  if (s.size() != 3 || s[1] < 16 || s[2] < 16)
    throw ad::ShapeError(
        "encode_image_global: input too small for three pooling stages, got " +
        ad::shape_str(s));
  ad::Var x = image;
  for (int k = 0; k < 3; ++k)
    x = g.max_pool2d(conv_block(b, x, imgenc_conv_[k]));
  return linear(g, gap(g, x), b[imgenc_lin_.w], b[imgenc_lin_.bias]);
}

template <typename T>
std::pair<ad::Var, ad::Var> Model::fuse(Bound<T>& b, ad::Var t, ad::Var i) const {
  ad::Graph<T>& g = *b.g;
  ad::Var z = g.concat_channels(t, i);
  ad::Var hidden = g.relu(linear(g, z, b[fuse_fc1_.w], b[fuse_fc1_.bias]));
  ad::Var delta = linear(g, hidden, b[fuse_fc2_.w], b[fuse_fc2_.bias]);
  return {delta, g.add(t, delta)};
}

template <typename T>
ad::Var Model::generate_pseudo(Bound<T>& b, ad::Var t_refined, std::size_t side) const {
  ad::Graph<T>& g = *b.g;
  if (side % 8 != 0)
    throw ad::ShapeError("generate_pseudo: spatial size " + std::to_string(side) +
                         " not divisible by 8");
  if (side != cfg_.image_side)
    throw ad::ShapeError("generate_pseudo: model built for side " +
                         std::to_string(cfg_.image_side) + ", got " +
                         std::to_string(side));
  const std::size_t s8 = side / 8;
  ad::Var x = linear(g, t_refined, b[pseudo_lin_.w], b[pseudo_lin_.bias]);
  x = g.reshape(x, {cfg_.c_p, s8, s8});
  for (int k = 0; k < 3; ++k)
    x = conv_block(b, g.nearest_upsample2d(x), pseudo_conv_[k]);
  x = g.add_channel_bias(g.conv2d(x, b[pseudo_out_.w], 1, 1), b[pseudo_out_.bias]);
  return g.sigmoid(x);
}

template <typename T>
ad::Var Model::image_to_text(Bound<T>& b, ad::Var pseudo) const {
  ad::Graph<T>& g = *b.g;
  ad::Var x = pseudo;
  for (int k = 0; k < 2; ++k)
    x = g.max_pool2d(conv_block(b, x, i2t_conv_[k]));
  return linear(g, gap(g, x), b[i2t_lin_.w], b[i2t_lin_.bias]);
}

template <typename T>
ad::Var Model::unet_forward(Bound<T>& b, ad::Var x_view) const {
  ad::Graph<T>& g = *b.g;
  const ad::Shape s = g.val(x_view).shape;
  const std::size_t div = std::size_t{1} << cfg_.unet_depth;
  if (s.size() != 3 || s[1] % div != 0 || s[2] % div != 0)
    throw ad::ShapeError("unet_forward: spatial dims of " + ad::shape_str(s) +
                         " not divisible by " + std::to_string(div));
  std::vector<ad::Var> skips;
  ad::Var cur = x_view;
  for (const Stage& st : enc_) {
    cur = conv_block(b, conv_block(b, cur, st.a), st.b);
    skips.push_back(cur);
    cur = g.max_pool2d(cur);
  }
  cur = conv_block(b, conv_block(b, cur, bottleneck_.a), bottleneck_.b);
  for (std::size_t lv = dec_.size(); lv-- > 0;) {
    cur = g.concat_channels(g.nearest_upsample2d(cur), skips[lv]);
    cur = conv_block(b, conv_block(b, cur, dec_[lv].a), dec_[lv].b);
  }
  return cur;
}

template <typename T>
ad::Var Model::project(Bound<T>& b, ad::Var f) const {
  ad::Graph<T>& g = *b.g;
  return linear(g, gap(g, f), b[proj_head_.w], b[proj_head_.bias]);
}

template <typename T>
ad::Var Model::predict(Bound<T>& b, ad::Var f_w) const {
  ad::Graph<T>& g = *b.g;
  return g.sigmoid(
      g.add_channel_bias(g.conv2d(f_w, b[pred_head_.w], 1, 0), b[pred_head_.bias]));
}

// ---------------------------------------------------------------------------

template <typename T>
ad::Var seg_loss(ad::Graph<T>& g, ad::Var y_hat, const ad::Tensor<T>& y) {
  if (g.val(y_hat).shape != y.shape)
    throw ad::ShapeError("seg_loss: prediction " + ad::shape_str(g.val(y_hat).shape) +
                         " vs mask " + ad::shape_str(y.shape));
  for (T v : y.data)
    if (v != T(0) && v != T(1))
      throw ad::DegenerateInput("seg_loss: mask is not binary (found " +
                                std::to_string(static_cast<double>(v)) + ")");
  constexpr T kSmooth = T(1);
  ad::Var yc = g.constant(y);
  ad::Var inter = g.sum(g.mul(y_hat, yc));
  ad::Var sums = g.add(g.sum(y_hat), g.sum(yc));
  ad::Var ratio = g.mul(g.add_const(g.scale_const(inter, T(2)), kSmooth),
                        g.reciprocal(g.add_const(sums, kSmooth)));
  ad::Var l_dice = g.add_const(g.scale_const(ratio, T(-1)), T(1));

  const T lo = T(1e-7);
  ad::Var p = g.clamp(y_hat, lo, T(1) - lo);
  ad::Tensor<T> inv = y;
  for (auto& v : inv.data) v = T(1) - v;
  ad::Var t1 = g.mul(yc, g.log(p));
  ad::Var ones = g.constant(ad::Tensor<T>::full(y.shape, T(1)));
  ad::Var t2 = g.mul(g.constant(inv), g.log(g.sub(ones, p)));
  ad::Var l_bce = g.scale_const(g.mean(g.add(t1, t2)), T(-1));
  return g.add(l_dice, l_bce);
}

ad::TensorF mask_supervision(const ad::TensorF& mask, std::size_t c_p) {
  if (c_p == 1) return mask;
  const std::size_t hw = mask.shape[1] * mask.shape[2];
  ad::TensorF out({c_p, mask.shape[1], mask.shape[2]});
  for (std::size_t c = 0; c < c_p; ++c)
    std::copy(mask.data.begin(), mask.data.begin() + hw, out.data.begin() + c * hw);
  return out;
}

template <typename T>
TrainForward<T> forward_train_sample(const Model& m, Bound<T>& b,
                                     const data::Sample& s,
                                     const aug::AugDraws& draws) {
  ad::Graph<T>& g = *b.g;
  if (s.image.shape[1] != s.image.shape[2])
    throw ad::ShapeError("forward_train_sample: expected square image, got " +
                         ad::shape_str(s.image.shape));
  TrainForward<T> out;
  // Frozen source: the raw embedding enters as a non-trainable constant.
  ad::Var raw = g.constant(s.text.template cast<T>());
  ad::Var image = g.constant(s.image.template cast<T>());
  out.t = m.project_text(b, raw);
  out.i = m.encode_image_global(b, image);
  std::tie(out.delta_t, out.t_refined) = m.fuse(b, out.t, out.i);
  out.pseudo = m.generate_pseudo(b, out.t_refined, s.image.shape[1]);
  out.t_hat = m.image_to_text(b, out.pseudo);
  out.l_cycle = cycle_loss(g, out.t, out.t_hat);

  ad::TensorF sup = mask_supervision(s.mask, m.config().c_p);
  out.l_gen = gen_loss(g, out.pseudo, g.constant(sup.template cast<T>()));

  out.x_cat = g.concat_channels(image, out.pseudo);
  out.x_g = aug::apply_spatial(g, out.x_cat, draws.spatial);
  ad::TensorF y_g_f = aug::apply_spatial_mask(s.mask, draws.spatial);
  out.y_g = y_g_f.template cast<T>();
  std::tie(out.x_w, out.x_s) = aug::build_views(g, out.x_g, 3, draws.views);

  out.f_w = m.unet_forward(b, out.x_w);
  out.f_s = m.unet_forward(b, out.x_s);
  out.p_w = m.project(b, out.f_w);
  out.p_s = m.project(b, out.f_s);
  out.l_iac = iac_loss(g, out.p_w, out.p_s);

  out.y_hat = m.predict(b, out.f_w);
  out.l_seg = seg_loss(g, out.y_hat, out.y_g);
  return out;
}

template <typename T>
ad::Var forward_infer_sample(const Model& m, Bound<T>& b,
                             const ad::Tensor<T>& image,
                             const ad::Tensor<T>& text) {
  ad::Graph<T>& g = *b.g;
  ad::Var raw = g.constant(text);
  ad::Var img = g.constant(image);
  ad::Var t = m.project_text(b, raw);
  ad::Var i = m.encode_image_global(b, img);
  auto [delta, t_ref] = m.fuse(b, t, i);
  (void)delta;
  ad::Var pseudo = m.generate_pseudo(b, t_ref, image.shape[1]);
  ad::Var x_cat = g.concat_channels(img, pseudo);
  // Inference keeps the clean pipeline: no spatial or appearance draws, but
  // the pseudo channel is still normalized before entering the backbone.
  ad::Var xr = g.slice_channels(x_cat, 0, 3);
  ad::Var xp = g.slice_channels(x_cat, 3, g.val(x_cat).shape[0]);
  ad::Var x_eval = g.concat_channels(xr, aug::normalize_pseudo(g, xp));
  ad::Var f = m.unet_forward(b, x_eval);
  return m.predict(b, f);
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const Model& m, const std::filesystem::path& dir,
                     const std::vector<std::pair<std::string, std::string>>& echo) {
  std::filesystem::create_directories(dir);
  const ParamStore& ps = m.params();
  for (std::size_t i = 0; i < ps.count(); ++i)
    data::write_tensor_file(ps.value(static_cast<int>(i)),
                            dir / (ps.name(static_cast<int>(i)) + ".btsr"));
  const ModelConfig& c = m.config();
  std::ofstream out(dir / "config.echo", std::ios::trunc);
  out << "d_raw=" << c.d_raw << "\n";
  out << "d_t=" << c.d_t << "\n";
  out << "d_i=" << c.d_i << "\n";
  out << "d_p=" << c.d_p << "\n";
  out << "c_p=" << c.c_p << "\n";
  out << "image_side=" << c.image_side << "\n";
  out << "unet_depth=" << c.unet_depth << "\n";
  out << "unet_width=" << c.unet_width << "\n";
  for (const auto& [k, v] : echo) out << k << "=" << v << "\n";
}

std::map<std::string, std::string> read_config_echo(const std::filesystem::path& dir) {
  std::ifstream in(dir / "config.echo");
  if (!in)
    throw data::IoError(data::IoErrorKind::open_failed,
                        "cannot open " + (dir / "config.echo").string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

Model load_checkpoint(const std::filesystem::path& dir) {
  const auto kv = read_config_echo(dir);
  auto get = [&](const char* key) -> std::size_t {
    const auto it = kv.find(key);
    if (it == kv.end())
      throw data::IoError(data::IoErrorKind::open_failed,
                          std::string("config.echo missing key ") + key);
    return static_cast<std::size_t>(std::stoull(it->second));
  };
  ModelConfig cfg;
  cfg.d_raw = get("d_raw");
  cfg.d_t = get("d_t");
  cfg.d_i = get("d_i");
  cfg.d_p = get("d_p");
  cfg.c_p = get("c_p");
  cfg.image_side = get("image_side");
  cfg.unet_depth = get("unet_depth");
  cfg.unet_width = get("unet_width");
  Model m(cfg, 0, true);
  ParamStore& ps = m.params();
  for (std::size_t i = 0; i < ps.count(); ++i) {
    const int id = static_cast<int>(i);
    ad::TensorF t = data::read_tensor_file(dir / (ps.name(id) + ".btsr"));
    if (t.shape != ps.value(id).shape)
      throw ad::ShapeError("checkpoint: parameter " + ps.name(id) + " has shape " +
                           ad::shape_str(t.shape) + ", model expects " +
                           ad::shape_str(ps.value(id).shape));
    ps.value(id) = std::move(t);
  }
  return m;
}

// ---------------------------------------------------------------------------

#define TGSEG_INSTANTIATE(T)                                                      \
  template ad::Var Model::project_text<T>(Bound<T>&, ad::Var) const;              \
  template ad::Var Model::encode_image_global<T>(Bound<T>&, ad::Var) const;       \
  template std::pair<ad::Var, ad::Var> Model::fuse<T>(Bound<T>&, ad::Var,         \
                                                      ad::Var) const;             \
  template ad::Var Model::generate_pseudo<T>(Bound<T>&, ad::Var, std::size_t)     \
      const;                                                                      \
  template ad::Var Model::image_to_text<T>(Bound<T>&, ad::Var) const;             \
  template ad::Var Model::unet_forward<T>(Bound<T>&, ad::Var) const;              \
  template ad::Var Model::project<T>(Bound<T>&, ad::Var) const;                   \
  template ad::Var Model::predict<T>(Bound<T>&, ad::Var) const;                   \
  template ad::Var seg_loss<T>(ad::Graph<T>&, ad::Var, const ad::Tensor<T>&);     \
  template TrainForward<T> forward_train_sample<T>(const Model&, Bound<T>&,       \
                                                   const data::Sample&,           \
                                                   const aug::AugDraws&);         \
  template ad::Var forward_infer_sample<T>(const Model&, Bound<T>&,               \
                                           const ad::Tensor<T>&,                  \
                                           const ad::Tensor<T>&);

TGSEG_INSTANTIATE(float)
TGSEG_INSTANTIATE(double)

#undef TGSEG_INSTANTIATE

}  // namespace tgseg::model
