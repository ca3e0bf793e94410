#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "tgseg/ad/tensor.hpp"

namespace tgseg::data {

enum class DataErrorKind {
  missing_file,
  non_binary_mask,
  inconsistent_text_dim,
  image_out_of_range,
  bad_manifest,
  duplicate_id,
  bad_fraction,
};

class DataError : public std::runtime_error {
 public:
  DataError(DataErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  DataErrorKind kind() const { return kind_; }

 private:
  DataErrorKind kind_;
};

struct Sample {
  std::string id;
  std::string split;        // train / val / test
  ad::TensorF image;        // [3,H,W], values in [0,1]
  ad::TensorF mask;         // [1,H,W], strictly {0,1}
  ad::TensorF text;         // [D], the frozen-source embedding
};

struct Dataset {
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::size_t text_dim() const { return samples.empty() ? 0 : samples[0].text.numel(); }
  std::size_t image_side() const { return samples.empty() ? 0 : samples[0].image.shape[1]; }

  Dataset with_split(const std::string& split) const {
    Dataset out;
    for (const auto& s : samples)
      if (s.split == split) out.samples.push_back(s);
    return out;
  }
};

// Directory layout: <root>/<id>.img.btsr, <id>.mask.btsr, <id>.txt.btsr and
// manifest.tsv with header "id<TAB>split".
Dataset load_dataset(const std::filesystem::path& root);
void save_dataset(const Dataset& d, const std::filesystem::path& root);

// max(1, round(fraction*n)) samples drawn uniformly without replacement.
// fraction 1.0 returns the dataset unchanged, original order.
std::size_t subsample_count(double fraction, std::size_t n);
Dataset subsample(const Dataset& d, double fraction, std::uint64_t seed);

}  // namespace tgseg::data
