#include "tgseg/model/params.hpp"

#include <cstring>

#include "tgseg/util/rng.hpp"

namespace tgseg::model {

int ParamStore::add(std::string name, ad::Shape shape, float init_limit,
                    std::uint64_t seed) {
  ad::TensorF t(std::move(shape));
  if (init_limit > 0.0f) {
    Rng rng(derive_seed(seed, "param:" + name));
    for (auto& v : t.data) v = rng.uniform_f(-init_limit, init_limit);
  }
  names_.push_back(std::move(name));
  values_.push_back(std::move(t));
  return static_cast<int>(values_.size() - 1);
}

std::size_t ParamStore::total_scalars() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.numel();
  return n;
}

int ParamStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return static_cast<int>(i);
  return -1;
}

std::vector<float> ParamStore::flatten() const {
  std::vector<float> flat;
  flat.reserve(total_scalars());
  for (const auto& v : values_) flat.insert(flat.end(), v.data.begin(), v.data.end());
  return flat;
}

void ParamStore::unflatten(const std::vector<float>& flat) {
  if (flat.size() != total_scalars())
    throw ad::ShapeError("unflatten: got " + std::to_string(flat.size()) +
                         " scalars, store holds " + std::to_string(total_scalars()));
  std::size_t off = 0;
  for (auto& v : values_) {
    std::memcpy(v.data.data(), flat.data() + off, v.numel() * sizeof(float));
    off += v.numel();
  }
}

}  // namespace tgseg::model
