#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "subtext/tensor.hpp"

namespace subtext {

// Eager reverse-mode tape over the fixed op set the LM needs. Values are
// computed at node creation; backward() walks the record in reverse.
// Single-threaded per instance.
class Tape {
 public:
  using NodeId = int;

  // constant leaf (copied in)
  NodeId input(Tensor value, std::string name = "input");
  // trainable leaf bound to external storage; gradients accumulate per node
  NodeId param(Tensor* storage, std::string name = "param");

  NodeId matmul(NodeId a, NodeId b);     // (N,K) x (K,M)
  NodeId matmul_nt(NodeId a, NodeId b);  // (N,K) x (M,K)^T — weight tying
  NodeId add(NodeId a, NodeId b);        // same shape
  NodeId add_bias(NodeId m, NodeId bias);  // (N,C) + (1,C) broadcast over rows
  NodeId mul(NodeId a, NodeId b);        // elementwise
  NodeId scale(NodeId a, double factor);
  NodeId tanh_op(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId relu(NodeId a);
  // rows of a table selected by ids (embedding lookup)
  NodeId rows(NodeId table, std::vector<int> ids);
  NodeId concat_cols(NodeId a, NodeId b);
  NodeId slice_cols(NodeId a, std::size_t lo, std::size_t hi);
  // mean negative log-likelihood over rows; scalar (1,1) output
  NodeId softmax_xent(NodeId logits, std::vector<int> targets);

  const Tensor& value(NodeId id) const;
  double scalar(NodeId id) const;

  // Reverse pass from `output` seeded with gradient 1 (or `seed`).
  void backward(NodeId output, double seed = 1.0);

  // Gradient of a leaf created by param(); zero tensor when backward never
  // reached it.
  const Tensor& grad(NodeId id) const;

  // (storage, accumulated gradient) for every param leaf, in registration
  // order. Valid after backward().
  std::vector<std::pair<Tensor*, const Tensor*>> param_grads() const;

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    input,
    param,
    matmul,
    matmul_nt,
    add,
    add_bias,
    mul,
    scale,
    tanh_,
    sigmoid,
    relu,
    rows,
    concat_cols,
    slice_cols,
    softmax_xent,
  };

  struct Node {
    Op op;
    NodeId a = -1;
    NodeId b = -1;
    Tensor value;
    Tensor grad;           // allocated lazily during backward
    bool grad_live = false;
    Tensor* storage = nullptr;  // param leaves
    std::vector<int> ids;       // rows / softmax targets
    Tensor probs;               // softmax cache
    double factor = 1.0;        // scale
    std::size_t lo = 0, hi = 0; // slice bounds
    std::string name;
  };

  NodeId push(Node node);
  const Node& at(NodeId id) const;
  Tensor& grad_buf(NodeId id);
  void check_finite(const Node& n) const;
  [[noreturn]] void shape_error(const std::string& op, const Node& x,
                                const Node& y) const;

  std::vector<Node> nodes_;
  std::vector<NodeId> params_;
};

// ---------------------------------------------------------------------------
// Optimizers

enum class OptAlgo { sgd_momentum, adam };

struct OptimizerConfig {
  OptAlgo algorithm = OptAlgo::adam;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::optional<double> gradient_clip_norm;  // global norm
};

// Per-parameter moment slots keyed by storage pointer; the update order is
// the caller's vector order, so steps are deterministic.
class OptimizerState {
 public:
  explicit OptimizerState(const OptimizerConfig& config) : config_(config) {}

  void step(const std::vector<std::pair<Tensor*, const Tensor*>>& grads);

  const OptimizerConfig& config() const { return config_; }

 private:
  struct Slot {
    Tensor m;  // momentum / first moment
    Tensor v;  // second moment (adam)
  };
  OptimizerConfig config_;
  std::unordered_map<Tensor*, Slot> slots_;
  std::int64_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Gradient verification

// Central-difference check: builds the loss through `loss_fn` once for
// analytic gradients, then perturbs >= samples_per_param random coordinates
// of every param tensor. loss_fn must register the given params via
// tape.param() and return the scalar loss node. Returns
// max |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double finite_difference_check(
    std::span<Tensor* const> params,
    const std::function<Tape::NodeId(Tape&)>& loss_fn, double epsilon,
    std::uint64_t seed, int samples_per_param = 25);

}  // namespace subtext
