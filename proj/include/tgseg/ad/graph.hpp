#pragma once

// Reverse-mode tape. Each operation appends a node holding its forward
// value and a closure that scatters the node's gradient into its inputs.
// Creation order is the topological order, so backward() is a single
// reverse sweep. One graph serves one forward/backward pass and is then
// discarded; leaf gradients accumulate across repeated backward() calls.

#include <cstdint>
#include <functional>
#include <vector>

#include "tgseg/ad/tensor.hpp"

namespace tgseg::ad {

struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

template <typename T>
class Graph {
 public:
  Var leaf(Tensor<T> value, bool requires_grad);
  Var constant(Tensor<T> value) { return leaf(std::move(value), false); }

  // Elementwise, same shape.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  // Elementwise against compile-time constants.
  Var scale_const(Var x, T c);
  Var add_const(Var x, T c);
  Var pow_const(Var x, T gamma);
  Var clamp(Var x, T lo, T hi);
  // Elementwise against a scalar node (numel 1).
  Var mul_scalar(Var x, Var s);
  Var sub_scalar(Var x, Var s);
  Var reciprocal(Var x);
  Var relu(Var x);
  Var sigmoid(Var x);
  Var log(Var x);

  Var reshape(Var x, Shape s);
  Var matmul(Var a, Var b);  // [m,k] x [k,n] -> [m,n]

  // NCHW (or CHW, treated as N=1).
  Var conv2d(Var input, Var kernel, int stride, int padding);
  Var add_channel_bias(Var x, Var bias);
  Var max_pool2d(Var x);          // 2x2, stride 2
  Var nearest_upsample2d(Var x);  // x2
  // Concatenate / slice along the channel axis (rank 1: the only axis).
  Var concat_channels(Var a, Var b);
  Var slice_channels(Var x, std::size_t c0, std::size_t c1);

  // Reductions to scalar nodes (shape [1]).
  Var sum(Var x);
  Var mean(Var x);
  Var reduce_min(Var x);
  Var reduce_max(Var x);
  Var l1_distance(Var a, Var b);          // mean |a-b|
  Var squared_l2_distance(Var a, Var b);  // sum (a-b)^2
  Var cosine_similarity(Var a, Var b);

  // Seeded geometric transforms on CHW planes.
  Var flip_h(Var x);
  Var rot90(Var x, int quarter_turns);
  // Crop rect (y0,x0,ch,cw) resampled bilinearly back to the input size.
  Var crop_resize_bilinear(Var x, std::size_t y0, std::size_t x0,
                           std::size_t ch, std::size_t cw);

  // Raw extension point: appends a node with a caller-supplied backward.
  Var custom(Tensor<T> value, const std::vector<Var>& inputs,
             std::function<void(Graph&, Var self)> backward);

  // Seeds d(loss)/d(loss)=1 and sweeps the tape once. Loss must be scalar.
  void backward(Var loss);
  void zero_grads();

  const Tensor<T>& val(Var v) const { return nodes_[v.id].value; }
  bool has_grad(Var v) const { return !nodes_[v.id].grad.empty(); }
  const std::vector<T>& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t node_count() const { return nodes_.size(); }

  // Exposed for op implementations and the gradient checker.
  T* grad_buf(Var v);
  void accum(Var v, const T* g, std::size_t n);

 private:
  struct Node {
    Tensor<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    std::function<void(Graph&)> bwd;  // empty for leaves
  };

  Var push(Tensor<T> value, bool requires_grad, std::function<void(Graph&)> bwd);
  const Node& node(Var v) const { return nodes_[v.id]; }
  Node& node(Var v) { return nodes_[v.id]; }

  std::vector<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace tgseg::ad
