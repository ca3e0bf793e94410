#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tgseg/data/dataset.hpp"
#include "tgseg/model/model.hpp"
#include "tgseg/train/config.hpp"

namespace tgseg::train {

struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EpochRow {
  std::size_t epoch = 0;
  double lr = 0;
  double l_seg = 0, l_gen = 0, l_iac = 0, l_cycle = 0, l_total = 0;
  double val_dice = 0, val_miou = 0;
};

struct TrainResult {
  std::vector<EpochRow> log;
  model::Model model;
};

std::string metrics_csv(const std::vector<EpochRow>& log);

// Full training loop: per-epoch cosine warm-restart learning rate, seeded
// shuffling and augmentation draws, AdamW with global-norm clipping,
// per-epoch validation metrics. Writes <out_dir>/metrics.csv and the
// checkpoint directory. When val_data is empty the val columns are measured
// on the (subsampled) training split.
TrainResult train(const TrainConfig& cfg, const data::Dataset& train_data,
                  const data::Dataset& val_data,
                  const std::filesystem::path& out_dir);

}  // namespace tgseg::train
