#pragma once

#include <cstdint>

#include "tgseg/data/dataset.hpp"

namespace tgseg::data {

// Lesion-count / area-bin / quadrant attributes backing the synthetic text
// embeddings. Exposed so tests can probe that the embeddings carry them.
struct SynthAttributes {
  int lesion_count = 0;   // 1..3
  int area_bin = 0;       // 0..3, foreground-fraction quantile bin
  int quadrant = 0;       // 0..3, centroid quadrant (row-major)
  double fg_fraction = 0.0;
};

// Fixed thresholds splitting the generator's foreground-fraction range into
// the four bins the embedding encodes.
int area_bin_of(double fg_fraction);

// Embedding = fixed seeded projection of the one-hot attribute vector; the
// projection matrix is a global constant so separately generated datasets
// share one text space.
ad::TensorF text_embedding_of(const SynthAttributes& a, std::size_t d_t);

// n samples of [3,side,side] images: value-noise background plus 1-3 soft
// elliptical lesions; mask is the union of the lesion supports with
// foreground fraction kept inside [0.02, 0.40]. Bit-reproducible from seed.
Dataset generate_synthetic(std::size_t n, std::size_t image_side, std::size_t d_t,
                           std::uint64_t seed, const std::string& split = "train");

SynthAttributes attributes_of_mask(const ad::TensorF& mask);

}  // namespace tgseg::data
