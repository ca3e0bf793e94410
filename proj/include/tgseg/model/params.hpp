#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tgseg/ad/graph.hpp"
#include "tgseg/ad/tensor.hpp"

namespace tgseg::model {

// Named trainable tensors. Initialization draws one independent stream per
// parameter name so insertion order never affects the weights.
class ParamStore {
 public:
  // init_limit > 0 draws U(-limit, limit); 0 leaves zeros.
  int add(std::string name, ad::Shape shape, float init_limit, std::uint64_t seed);

  std::size_t count() const { return values_.size(); }
  const std::string& name(int id) const { return names_[id]; }
  ad::TensorF& value(int id) { return values_[id]; }
  const ad::TensorF& value(int id) const { return values_[id]; }
  std::size_t total_scalars() const;

  int find(const std::string& name) const;  // -1 when absent

  // Flattened round-trip in parameter order, used by the composite-loss
  // gradient check.
  std::vector<float> flatten() const;
  void unflatten(const std::vector<float>& flat);

 private:
  std::vector<std::string> names_;
  std::vector<ad::TensorF> values_;
};

// Per-pass binding of every parameter as a graph leaf.
template <typename T>
struct Bound {
  ad::Graph<T>* g = nullptr;
  std::vector<ad::Var> vars;
  ad::Var operator[](int id) const { return vars[id]; }
};

template <typename T>
Bound<T> bind_params(ad::Graph<T>& g, const ParamStore& ps, bool requires_grad) {
  Bound<T> b;
  b.g = &g;
  b.vars.reserve(ps.count());
  for (std::size_t i = 0; i < ps.count(); ++i)
    b.vars.push_back(g.leaf(ps.value(static_cast<int>(i)).cast<T>(), requires_grad));
  return b;
}

}  // namespace tgseg::model
