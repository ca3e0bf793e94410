#pragma once

// Flat key=value training configuration. Every field is a documented key;
// unknown keys and negative loss weights are rejected at load.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tgseg/model/model.hpp"

namespace tgseg::train {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  // Optimization
  std::size_t batch_size = 8;
  std::size_t epochs = 25;
  double lr_initial = 1e-3;
  std::size_t t_0 = 10;   // epochs in the first cosine cycle
  std::size_t t_mult = 2;
  double lr_min = 1e-6;
  double weight_decay = 1e-2;
  double grad_clip = 5.0;
  // Loss weights
  double lambda_gen = 1.0;
  double lambda_iac = 0.1;
  double lambda_cycle = 0.1;
  // Protocol
  std::uint64_t seed = 1;
  double data_fraction = 1.0;
  std::string checkpoint_path = "checkpoint";
  // Model dimensions (d_raw follows the dataset)
  std::size_t image_side = 64;
  std::size_t d_t = 64;
  std::size_t d_i = 64;
  std::size_t d_p = 64;
  std::size_t c_p = 1;
  std::size_t unet_depth = 3;
  std::size_t unet_width = 16;

  model::ModelConfig model_config(std::size_t d_raw) const;
  void validate() const;

  static TrainConfig parse_text(const std::string& text);
  static TrainConfig load(const std::filesystem::path& path);
  // Key order is fixed so echoes are byte-stable.
  std::vector<std::pair<std::string, std::string>> echo() const;
};

struct LossBreakdown {
  double l_seg = 0, l_gen = 0, l_iac = 0, l_cycle = 0;
  double lambda_gen = 0, lambda_iac = 0, lambda_cycle = 0;
  double l_total = 0;
};

// l_seg + lambda_gen*l_gen + lambda_iac*l_iac + lambda_cycle*l_cycle.
double compose_total(double l_seg, double l_gen, double l_iac, double l_cycle,
                     double lambda_gen, double lambda_iac, double lambda_cycle);

}  // namespace tgseg::train
