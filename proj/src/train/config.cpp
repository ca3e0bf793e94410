#include "tgseg/train/config.hpp"

#include <fstream>
#include <sstream>

namespace tgseg::train {

model::ModelConfig TrainConfig::model_config(std::size_t d_raw) const {
  model::ModelConfig mc;
  mc.d_raw = d_raw;
  mc.d_t = d_t;
  mc.d_i = d_i;
  mc.d_p = d_p;
  mc.c_p = c_p;
  mc.image_side = image_side;
  mc.unet_depth = unet_depth;
  mc.unet_width = unet_width;
  return mc;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (lambda_gen < 0 || lambda_iac < 0 || lambda_cycle < 0)
    throw ConfigError("loss weights (lambda_*) must be non-negative");
  if (!(lr_initial > 0)) throw ConfigError("lr_initial must be > 0");
  if (lr_min < 0) throw ConfigError("lr_min must be >= 0");
  if (t_0 < 1) throw ConfigError("t_0 must be >= 1");
  if (t_mult < 1) throw ConfigError("t_mult must be >= 1");
  if (!(data_fraction > 0 && data_fraction <= 1))
    throw ConfigError("data_fraction must lie in (0,1]");
  if (unet_depth < 2) throw ConfigError("unet_depth must be >= 2");
  if (image_side % (std::size_t{1} << unet_depth) != 0 || image_side % 8 != 0)
    throw ConfigError("image_side must be divisible by 8 and 2^unet_depth");
}

TrainConfig TrainConfig::parse_text(const std::string& text) {
  TrainConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value, got '" +
                        line + "'");
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    try {
      if (key == "batch_size") c.batch_size = std::stoull(val);
      else if (key == "epochs") c.epochs = std::stoull(val);
      else if (key == "lr_initial") c.lr_initial = std::stod(val);
      else if (key == "t_0") c.t_0 = std::stoull(val);
      else if (key == "t_mult") c.t_mult = std::stoull(val);
      else if (key == "lr_min") c.lr_min = std::stod(val);
      else if (key == "weight_decay") c.weight_decay = std::stod(val);
      else if (key == "grad_clip") c.grad_clip = std::stod(val);
      else if (key == "lambda_gen") c.lambda_gen = std::stod(val);
      else if (key == "lambda_iac") c.lambda_iac = std::stod(val);
      else if (key == "lambda_cycle") c.lambda_cycle = std::stod(val);
      else if (key == "seed") c.seed = std::stoull(val);
      else if (key == "data_fraction") c.data_fraction = std::stod(val);
      else if (key == "checkpoint_path") c.checkpoint_path = val;
      else if (key == "image_side") c.image_side = std::stoull(val);
      else if (key == "d_t") c.d_t = std::stoull(val);
      else if (key == "d_i") c.d_i = std::stoull(val);
      else if (key == "d_p") c.d_p = std::stoull(val);
      else if (key == "c_p") c.c_p = std::stoull(val);
      else if (key == "unet_depth") c.unet_depth = std::stoull(val);
      else if (key == "unet_width") c.unet_width = std::stoull(val);
      else throw ConfigError("unknown config key '" + key + "'");
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("line " + std::to_string(lineno) + ": cannot parse value '" +
                        val + "' for key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str());
}

std::vector<std::pair<std::string, std::string>> TrainConfig::echo() const {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::string(buf);
  };
  return {
      {"batch_size", std::to_string(batch_size)},
      {"epochs", std::to_string(epochs)},
      {"lr_initial", num(lr_initial)},
      {"t_0", std::to_string(t_0)},
      {"t_mult", std::to_string(t_mult)},
      {"lr_min", num(lr_min)},
      {"weight_decay", num(weight_decay)},
      {"grad_clip", num(grad_clip)},
      {"lambda_gen", num(lambda_gen)},
      {"lambda_iac", num(lambda_iac)},
      {"lambda_cycle", num(lambda_cycle)},
      {"seed", std::to_string(seed)},
      {"data_fraction", num(data_fraction)},
      {"checkpoint_path", checkpoint_path},
  };
}

double compose_total(double l_seg, double l_gen, double l_iac, double l_cycle,
                     double lambda_gen, double lambda_iac, double lambda_cycle) {
  return l_seg + lambda_gen * l_gen + lambda_iac * l_iac + lambda_cycle * l_cycle;
}

}  // namespace tgseg::train
