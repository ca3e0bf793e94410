#include "tgseg/train/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "tgseg/eval/evaluate.hpp"
#include "tgseg/train/optimizer.hpp"
#include "tgseg/train/schedule.hpp"
#include "tgseg/util/rng.hpp"

namespace tgseg::train {

namespace {

std::string fmt_row(const EpochRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                r.epoch, r.lr, r.l_seg, r.l_gen, r.l_iac, r.l_cycle, r.l_total,
                r.val_dice, r.val_miou);
  return buf;
}

std::string describe(const LossBreakdown& b) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "l_seg=%g l_gen=%g l_iac=%g l_cycle=%g l_total=%g", b.l_seg, b.l_gen,
                b.l_iac, b.l_cycle, b.l_total);
  return buf;
}

}  // namespace

std::string metrics_csv(const std::vector<EpochRow>& log) {
  std::string out = "epoch,lr,l_seg,l_gen,l_iac,l_cycle,l_total,val_dice,val_miou\n";
  for (const auto& r : log) out += fmt_row(r);
  return out;
}

TrainResult train(const TrainConfig& cfg, const data::Dataset& train_data,
                  const data::Dataset& val_data,
                  const std::filesystem::path& out_dir) {
  cfg.validate();
  if (train_data.empty()) throw TrainError("training dataset is empty");
  const data::Dataset tset = cfg.data_fraction < 1.0
                                 ? data::subsample(train_data, cfg.data_fraction, cfg.seed)
                                 : train_data;
  if (tset.image_side() != cfg.image_side)
    throw TrainError("config image_side=" + std::to_string(cfg.image_side) +
                     " but dataset images are " + std::to_string(tset.image_side()));
  const data::Dataset& vset = val_data.empty() ? tset : val_data;
  const std::size_t side = cfg.image_side;

  model::Model m(cfg.model_config(tset.text_dim()), derive_seed(cfg.seed, "init"));
  AdamWConfig ocfg;
  ocfg.weight_decay = cfg.weight_decay;
  AdamW opt(m.params(), ocfg);
  const std::size_t n_params = m.params().count();

  std::vector<EpochRow> log;
  std::size_t global_step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr =
        cosine_warm_restart_lr(epoch, cfg.t_0, cfg.t_mult, cfg.lr_initial, cfg.lr_min);

    std::vector<std::size_t> order(tset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", epoch));
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      const std::size_t j = i + shuffle_rng.below(order.size() - i);
      std::swap(order[i], order[j]);
    }

    double acc_seg = 0, acc_gen = 0, acc_iac = 0, acc_cycle = 0, acc_total = 0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      ad::Graph<float> g;
      auto b = m.bind(g, /*requires_grad=*/true);

      ad::Var l_seg{}, l_gen{}, l_iac{}, l_cycle{};
      for (std::size_t k = start; k < stop; ++k) {
        const data::Sample& s = tset.samples[order[k]];
        aug::AugDraws draws;
        draws.spatial = aug::draw_spatial(
            side, side, derive_seed(cfg.seed, "aug-spatial:" + s.id, epoch));
        draws.views = aug::draw_views(
            3, side, side, derive_seed(cfg.seed, "aug-weak:" + s.id, epoch),
            derive_seed(cfg.seed, "aug-strong:" + s.id, epoch));
        auto fwd = model::forward_train_sample(m, b, s, draws);
        l_seg = k == start ? fwd.l_seg : g.add(l_seg, fwd.l_seg);
        l_gen = k == start ? fwd.l_gen : g.add(l_gen, fwd.l_gen);
        l_iac = k == start ? fwd.l_iac : g.add(l_iac, fwd.l_iac);
        l_cycle = k == start ? fwd.l_cycle : g.add(l_cycle, fwd.l_cycle);
      }
      const float inv_b = 1.0f / static_cast<float>(stop - start);
      l_seg = g.scale_const(l_seg, inv_b);
      l_gen = g.scale_const(l_gen, inv_b);
      l_iac = g.scale_const(l_iac, inv_b);
      l_cycle = g.scale_const(l_cycle, inv_b);
      ad::Var total = g.add(
          g.add(l_seg, g.scale_const(l_gen, static_cast<float>(cfg.lambda_gen))),
          g.add(g.scale_const(l_iac, static_cast<float>(cfg.lambda_iac)),
                g.scale_const(l_cycle, static_cast<float>(cfg.lambda_cycle))));

      LossBreakdown bd;
      bd.l_seg = g.val(l_seg).data[0];
      bd.l_gen = g.val(l_gen).data[0];
      bd.l_iac = g.val(l_iac).data[0];
      bd.l_cycle = g.val(l_cycle).data[0];
      bd.lambda_gen = cfg.lambda_gen;
      bd.lambda_iac = cfg.lambda_iac;
      bd.lambda_cycle = cfg.lambda_cycle;
      bd.l_total = g.val(total).data[0];
      if (!std::isfinite(bd.l_total))
        throw TrainError("non-finite total loss at step " +
                         std::to_string(global_step) + ": " + describe(bd));

      g.backward(total);
      std::vector<std::vector<float>> grads(n_params);
      for (std::size_t i = 0; i < n_params; ++i) {
        const auto& gv = g.grad(b.vars[i]);
        grads[i] = gv.empty() ? std::vector<float>(
                                    m.params().value(static_cast<int>(i)).numel(), 0.0f)
                              : gv;
      }
      clip_global_norm(grads, cfg.grad_clip);
      opt.step(m.params(), grads, lr);

      acc_seg += bd.l_seg;
      acc_gen += bd.l_gen;
      acc_iac += bd.l_iac;
      acc_cycle += bd.l_cycle;
      acc_total += bd.l_total;
      ++steps;
      ++global_step;
    }

    const eval::MetricResult vm = eval::evaluate_model(m, vset, nullptr, 0);
    EpochRow row;
    row.epoch = epoch;
    row.lr = lr;
    row.l_seg = acc_seg / static_cast<double>(steps);
    row.l_gen = acc_gen / static_cast<double>(steps);
    row.l_iac = acc_iac / static_cast<double>(steps);
    row.l_cycle = acc_cycle / static_cast<double>(steps);
    row.l_total = acc_total / static_cast<double>(steps);
    row.val_dice = vm.dice;
    row.val_miou = vm.iou;
    log.push_back(row);
  }

  std::filesystem::create_directories(out_dir);
  {
    std::ofstream csv(out_dir / "metrics.csv", std::ios::trunc | std::ios::binary);
    csv << metrics_csv(log);
  }
  auto echo = cfg.echo();
  echo.emplace_back("d_raw_from_data", std::to_string(tset.text_dim()));
  model::save_checkpoint(m, out_dir / cfg.checkpoint_path, echo);
  return TrainResult{std::move(log), std::move(m)};
}

}  // namespace tgseg::train
