#pragma once

#include <filesystem>
#include <optional>

#include "tgseg/aug/corrupt.hpp"
#include "tgseg/data/dataset.hpp"
#include "tgseg/eval/metrics.hpp"
#include "tgseg/model/model.hpp"

namespace tgseg::eval {

// Mean per-sample Dice/IoU at threshold 0.5. A corruption, when given, is
// applied to each test image before the forward pass with a seed derived
// per sample id, so results do not depend on iteration order.
MetricResult evaluate_model(const model::Model& m, const data::Dataset& ds,
                            const aug::CorruptionSpec* corrupt,
                            std::uint64_t corrupt_seed);

MetricResult evaluate_checkpoint(const std::filesystem::path& ckpt_dir,
                                 const data::Dataset& ds,
                                 const aug::CorruptionSpec* corrupt,
                                 std::uint64_t corrupt_seed);

// Mean cosine distance 1-cos(p_w,p_s) over seeded weak/strong view pairs;
// the consistency measurement behind the training objective.
double mean_view_cosine_distance(const model::Model& m, const data::Dataset& ds,
                                 std::uint64_t seed);

// Per-sample prediction masks (BTSR) plus grayscale overlay renderings (PGM)
// with the predicted region brightened.
void dump_predictions(const model::Model& m, const data::Dataset& ds,
                      const std::filesystem::path& out_dir);

}  // namespace tgseg::eval
