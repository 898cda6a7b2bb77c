#include "subtext/graph.hpp"

#include <algorithm>
#include <cmath>

namespace subtext {

// ---------------------------------------------------------------------------
// Tape

Tape::NodeId Tape::push(Node node) {
  check_finite(node);
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

const Tape::Node& Tape::at(NodeId id) const {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) {
    throw Error("tape: invalid node id " + std::to_string(id));
  }
  return nodes_[id];
}

void Tape::check_finite(const Node& n) const {
  if (!n.value.all_finite()) {
    throw Error("non-finite value in node '" + n.name + "'");
  }
}

void Tape::shape_error(const std::string& op, const Node& x,
                       const Node& y) const {
  throw Error("shape mismatch in " + op + ": " + x.name + " " +
              x.value.shape_str() + " vs " + y.name + " " +
              y.value.shape_str());
}

Tape::NodeId Tape::input(Tensor value, std::string name) {
  Node n;
  n.op = Op::input;
  n.value = std::move(value);
  n.name = std::move(name);
  return push(std::move(n));
}

Tape::NodeId Tape::param(Tensor* storage, std::string name) {
  if (storage == nullptr) throw Error("param storage is null");
  Node n;
  n.op = Op::param;
  n.value = *storage;
  n.storage = storage;
  n.name = std::move(name);
  const NodeId id = push(std::move(n));
  params_.push_back(id);
  return id;
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  const Node& x = at(a);
  const Node& y = at(b);
  if (x.value.n_cols != y.value.n_rows) shape_error("matmul", x, y);
  Node n;
  n.op = Op::matmul;
  n.a = a;
  n.b = b;
  n.name = "matmul(" + x.name + "," + y.name + ")";
  n.value = Tensor(x.value.n_rows, y.value.n_cols);
  for (std::size_t i = 0; i < x.value.n_rows; ++i) {
    for (std::size_t k = 0; k < x.value.n_cols; ++k) {
      const double xv = x.value.at(i, k);
      if (xv == 0.0) continue;
      for (std::size_t j = 0; j < y.value.n_cols; ++j) {
        n.value.at(i, j) += xv * y.value.at(k, j);
      }
    }
  }
  return push(std::move(n));
}

Tape::NodeId Tape::matmul_nt(NodeId a, NodeId b) {
  const Node& x = at(a);
  const Node& y = at(b);
  if (x.value.n_cols != y.value.n_cols) shape_error("matmul_nt", x, y);
  Node n;
  n.op = Op::matmul_nt;
  n.a = a;
  n.b = b;
  n.name = "matmul_nt(" + x.name + "," + y.name + ")";
  n.value = Tensor(x.value.n_rows, y.value.n_rows);
  for (std::size_t i = 0; i < x.value.n_rows; ++i) {
    for (std::size_t j = 0; j < y.value.n_rows; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < x.value.n_cols; ++k) {
        acc += x.value.at(i, k) * y.value.at(j, k);
      }
      n.value.at(i, j) = acc;
    }
  }
  return push(std::move(n));
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const Node& x = at(a);
  const Node& y = at(b);
  if (!x.value.same_shape(y.value)) shape_error("add", x, y);
  Node n;
  n.op = Op::add;
  n.a = a;
  n.b = b;
  n.name = "add";
  n.value = x.value;
  for (std::size_t i = 0; i < n.value.data.size(); ++i) {
    n.value.data[i] += y.value.data[i];
  }
  return push(std::move(n));
}

Tape::NodeId Tape::add_bias(NodeId m, NodeId bias) {
  const Node& x = at(m);
  const Node& y = at(bias);
  if (y.value.n_rows != 1 || y.value.n_cols != x.value.n_cols) {
    shape_error("add_bias", x, y);
  }
  Node n;
  n.op = Op::add_bias;
  n.a = m;
  n.b = bias;
  n.name = "add_bias";
  n.value = x.value;
  for (std::size_t r = 0; r < n.value.n_rows; ++r) {
    for (std::size_t c = 0; c < n.value.n_cols; ++c) {
      n.value.at(r, c) += y.value.at(0, c);
    }
  }
  return push(std::move(n));
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
  const Node& x = at(a);
  const Node& y = at(b);
  if (!x.value.same_shape(y.value)) shape_error("mul", x, y);
  Node n;
  n.op = Op::mul;
  n.a = a;
  n.b = b;
  n.name = "mul";
  n.value = x.value;
  for (std::size_t i = 0; i < n.value.data.size(); ++i) {
    n.value.data[i] *= y.value.data[i];
  }
  return push(std::move(n));
}

Tape::NodeId Tape::scale(NodeId a, double factor) {
  const Node& x = at(a);
  Node n;
  n.op = Op::scale;
  n.a = a;
  n.factor = factor;
  n.name = "scale";
  n.value = x.value;
  for (double& v : n.value.data) v *= factor;
  return push(std::move(n));
}

Tape::NodeId Tape::tanh_op(NodeId a) {
  Node n;
  n.op = Op::tanh_;
  n.a = a;
  n.name = "tanh";
  n.value = at(a).value;
  for (double& v : n.value.data) v = std::tanh(v);
  return push(std::move(n));
}

Tape::NodeId Tape::sigmoid(NodeId a) {
  Node n;
  n.op = Op::sigmoid;
  n.a = a;
  n.name = "sigmoid";
  n.value = at(a).value;
  for (double& v : n.value.data) v = 1.0 / (1.0 + std::exp(-v));
  return push(std::move(n));
}

Tape::NodeId Tape::relu(NodeId a) {
  Node n;
  n.op = Op::relu;
  n.a = a;
  n.name = "relu";
  n.value = at(a).value;
  for (double& v : n.value.data) v = v > 0.0 ? v : 0.0;
  return push(std::move(n));
}

Tape::NodeId Tape::rows(NodeId table, std::vector<int> ids) {
  const Node& t = at(table);
  Node n;
  n.op = Op::rows;
  n.a = table;
  n.name = "rows(" + t.name + ")";
  n.value = Tensor(ids.size(), t.value.n_cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int id = ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= t.value.n_rows) {
      throw Error("rows: id " + std::to_string(id) + " out of range for " +
                  t.value.shape_str());
    }
    for (std::size_t c = 0; c < t.value.n_cols; ++c) {
      n.value.at(i, c) = t.value.at(static_cast<std::size_t>(id), c);
    }
  }
  n.ids = std::move(ids);
  return push(std::move(n));
}

Tape::NodeId Tape::concat_cols(NodeId a, NodeId b) {
  const Node& x = at(a);
  const Node& y = at(b);
  if (x.value.n_rows != y.value.n_rows) shape_error("concat_cols", x, y);
  Node n;
  n.op = Op::concat_cols;
  n.a = a;
  n.b = b;
  n.name = "concat_cols";
  n.value = Tensor(x.value.n_rows, x.value.n_cols + y.value.n_cols);
  for (std::size_t r = 0; r < n.value.n_rows; ++r) {
    for (std::size_t c = 0; c < x.value.n_cols; ++c) {
      n.value.at(r, c) = x.value.at(r, c);
    }
    for (std::size_t c = 0; c < y.value.n_cols; ++c) {
      n.value.at(r, x.value.n_cols + c) = y.value.at(r, c);
    }
  }
  return push(std::move(n));
}

Tape::NodeId Tape::slice_cols(NodeId a, std::size_t lo, std::size_t hi) {
  const Node& x = at(a);
  if (lo >= hi || hi > x.value.n_cols) {
    throw Error("slice_cols: bad range [" + std::to_string(lo) + "," +
                std::to_string(hi) + ") for " + x.value.shape_str());
  }
  Node n;
  n.op = Op::slice_cols;
  n.a = a;
  n.lo = lo;
  n.hi = hi;
  n.name = "slice_cols";
  n.value = Tensor(x.value.n_rows, hi - lo);
  for (std::size_t r = 0; r < n.value.n_rows; ++r) {
    for (std::size_t c = lo; c < hi; ++c) {
      n.value.at(r, c - lo) = x.value.at(r, c);
    }
  }
  return push(std::move(n));
}

Tape::NodeId Tape::softmax_xent(NodeId logits, std::vector<int> targets) {
  const Node& x = at(logits);
  if (targets.size() != x.value.n_rows) {
    throw Error("softmax_xent: " + std::to_string(targets.size()) +
                " targets for " + x.value.shape_str() + " logits");
  }
  Node n;
  n.op = Op::softmax_xent;
  n.a = logits;
  n.name = "softmax_xent";
  n.probs = softmax_rows(x.value);
  double total = 0.0;
  for (std::size_t r = 0; r < x.value.n_rows; ++r) {
    const int t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= x.value.n_cols) {
      throw Error("softmax_xent: target " + std::to_string(t) +
                  " out of range");
    }
    double m = -HUGE_VAL;
    for (std::size_t c = 0; c < x.value.n_cols; ++c) {
      m = std::max(m, x.value.at(r, c));
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < x.value.n_cols; ++c) {
      sum += std::exp(x.value.at(r, c) - m);
    }
    total += m + std::log(sum) - x.value.at(r, static_cast<std::size_t>(t));
  }
  n.value = Tensor(1, 1);
  n.value.at(0, 0) = total / static_cast<double>(x.value.n_rows);
  n.ids = std::move(targets);
  return push(std::move(n));
}

const Tensor& Tape::value(NodeId id) const { return at(id).value; }

double Tape::scalar(NodeId id) const {
  const Tensor& v = at(id).value;
  if (v.numel() != 1) {
    throw Error("scalar() on non-scalar node " + v.shape_str());
  }
  return v.data[0];
}

Tensor& Tape::grad_buf(NodeId id) {
  Node& n = nodes_[id];
  if (!n.grad_live) {
    n.grad = Tensor(n.value.n_rows, n.value.n_cols);
    n.grad_live = true;
  }
  return n.grad;
}

const Tensor& Tape::grad(NodeId id) const {
  const Node& n = at(id);
  if (!n.grad_live) {
    static thread_local Tensor zero;
    zero = Tensor(n.value.n_rows, n.value.n_cols);
    return zero;
  }
  return n.grad;
}

void Tape::backward(NodeId output, double seed) {
  const Node& out = at(output);
  if (out.value.numel() != 1) {
    throw Error("backward: output must be scalar, got " +
                out.value.shape_str());
  }
  grad_buf(output).data[0] = seed;

  for (NodeId id = output; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.grad_live) continue;
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::input:
      case Op::param:
        break;
      case Op::matmul: {
        const Tensor& A = nodes_[n.a].value;
        const Tensor& B = nodes_[n.b].value;
        Tensor& ga = grad_buf(n.a);
        Tensor& gb = grad_buf(n.b);
        // dA += g * B^T ; dB += A^T * g
        for (std::size_t i = 0; i < A.n_rows; ++i) {
          for (std::size_t j = 0; j < B.n_cols; ++j) {
            const double gv = g.at(i, j);
            if (gv == 0.0) continue;
            for (std::size_t k = 0; k < A.n_cols; ++k) {
              ga.at(i, k) += gv * B.at(k, j);
              gb.at(k, j) += A.at(i, k) * gv;
            }
          }
        }
        break;
      }
      case Op::matmul_nt: {
        const Tensor& A = nodes_[n.a].value;
        const Tensor& B = nodes_[n.b].value;
        Tensor& ga = grad_buf(n.a);
        Tensor& gb = grad_buf(n.b);
        // C = A B^T: dA += g * B ; dB += g^T * A
        for (std::size_t i = 0; i < A.n_rows; ++i) {
          for (std::size_t j = 0; j < B.n_rows; ++j) {
            const double gv = g.at(i, j);
            if (gv == 0.0) continue;
            for (std::size_t k = 0; k < A.n_cols; ++k) {
              ga.at(i, k) += gv * B.at(j, k);
              gb.at(j, k) += gv * A.at(i, k);
            }
          }
        }
        break;
      }
      case Op::add: {
        Tensor& ga = grad_buf(n.a);
        Tensor& gb = grad_buf(n.b);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          ga.data[i] += g.data[i];
          gb.data[i] += g.data[i];
        }
        break;
      }
      case Op::add_bias: {
        Tensor& ga = grad_buf(n.a);
        Tensor& gb = grad_buf(n.b);
        for (std::size_t r = 0; r < g.n_rows; ++r) {
          for (std::size_t c = 0; c < g.n_cols; ++c) {
            ga.at(r, c) += g.at(r, c);
            gb.at(0, c) += g.at(r, c);
          }
        }
        break;
      }
      case Op::mul: {
        const Tensor& A = nodes_[n.a].value;
        const Tensor& B = nodes_[n.b].value;
        Tensor& ga = grad_buf(n.a);
        Tensor& gb = grad_buf(n.b);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          ga.data[i] += g.data[i] * B.data[i];
          gb.data[i] += g.data[i] * A.data[i];
        }
        break;
      }
      case Op::scale: {
        Tensor& ga = grad_buf(n.a);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          ga.data[i] += g.data[i] * n.factor;
        }
        break;
      }
      case Op::tanh_: {
        Tensor& ga = grad_buf(n.a);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          ga.data[i] += g.data[i] * (1.0 - n.value.data[i] * n.value.data[i]);
        }
        break;
      }
      case Op::sigmoid: {
        Tensor& ga = grad_buf(n.a);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          const double s = n.value.data[i];
          ga.data[i] += g.data[i] * s * (1.0 - s);
        }
        break;
      }
      case Op::relu: {
        const Tensor& A = nodes_[n.a].value;
        Tensor& ga = grad_buf(n.a);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          ga.data[i] += A.data[i] > 0.0 ? g.data[i] : 0.0;
        }
        break;
      }
      case Op::rows: {
        Tensor& ga = grad_buf(n.a);
        for (std::size_t i = 0; i < n.ids.size(); ++i) {
          const auto row = static_cast<std::size_t>(n.ids[i]);
          for (std::size_t c = 0; c < g.n_cols; ++c) {
            ga.at(row, c) += g.at(i, c);
          }
        }
        break;
      }
      case Op::concat_cols: {
        Tensor& ga = grad_buf(n.a);
        Tensor& gb = grad_buf(n.b);
        for (std::size_t r = 0; r < g.n_rows; ++r) {
          for (std::size_t c = 0; c < ga.n_cols; ++c) {
            ga.at(r, c) += g.at(r, c);
          }
          for (std::size_t c = 0; c < gb.n_cols; ++c) {
            gb.at(r, c) += g.at(r, ga.n_cols + c);
          }
        }
        break;
      }
      case Op::slice_cols: {
        Tensor& ga = grad_buf(n.a);
        for (std::size_t r = 0; r < g.n_rows; ++r) {
          for (std::size_t c = 0; c < g.n_cols; ++c) {
            ga.at(r, n.lo + c) += g.at(r, c);
          }
        }
        break;
      }
      case Op::softmax_xent: {
        const double gv = g.data[0] / static_cast<double>(n.probs.n_rows);
        Tensor& ga = grad_buf(n.a);
        for (std::size_t r = 0; r < n.probs.n_rows; ++r) {
          for (std::size_t c = 0; c < n.probs.n_cols; ++c) {
            double d = n.probs.at(r, c);
            if (static_cast<std::size_t>(n.ids[r]) == c) d -= 1.0;
            ga.at(r, c) += gv * d;
          }
        }
        break;
      }
    }
  }
}

std::vector<std::pair<Tensor*, const Tensor*>> Tape::param_grads() const {
  std::vector<std::pair<Tensor*, const Tensor*>> out;
  out.reserve(params_.size());
  for (NodeId id : params_) {
    out.emplace_back(nodes_[id].storage, &grad(id));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optimizers

void OptimizerState::step(
    const std::vector<std::pair<Tensor*, const Tensor*>>& grads) {
  double scale_factor = 1.0;
  if (config_.gradient_clip_norm.has_value()) {
    std::vector<const Tensor*> gs;
    gs.reserve(grads.size());
    for (const auto& [p, g] : grads) gs.push_back(g);
    const double norm = global_norm(gs);
    if (norm > *config_.gradient_clip_norm && norm > 0.0) {
      scale_factor = *config_.gradient_clip_norm / norm;
    }
  }

  ++t_;
  for (const auto& [p, g] : grads) {
    if (!p->same_shape(*g)) {
      throw Error("optimizer: gradient shape " + g->shape_str() +
                  " does not match parameter " + p->shape_str());
    }
    Slot& slot = slots_[p];
    if (slot.m.numel() != p->numel()) {
      slot.m = Tensor(p->n_rows, p->n_cols);
      if (config_.algorithm == OptAlgo::adam) {
        slot.v = Tensor(p->n_rows, p->n_cols);
      }
    }
    switch (config_.algorithm) {
      case OptAlgo::sgd_momentum:
        for (std::size_t i = 0; i < p->data.size(); ++i) {
          const double gv = g->data[i] * scale_factor;
          slot.m.data[i] = config_.momentum * slot.m.data[i] + gv;
          p->data[i] -= config_.learning_rate * slot.m.data[i];
        }
        break;
      case OptAlgo::adam: {
        const double bc1 = 1.0 - std::pow(config_.beta1, double(t_));
        const double bc2 = 1.0 - std::pow(config_.beta2, double(t_));
        for (std::size_t i = 0; i < p->data.size(); ++i) {
          const double gv = g->data[i] * scale_factor;
          slot.m.data[i] = config_.beta1 * slot.m.data[i] +
                           (1.0 - config_.beta1) * gv;
          slot.v.data[i] = config_.beta2 * slot.v.data[i] +
                           (1.0 - config_.beta2) * gv * gv;
          const double mhat = slot.m.data[i] / bc1;
          const double vhat = slot.v.data[i] / bc2;
          p->data[i] -= config_.learning_rate * mhat /
                        (std::sqrt(vhat) + config_.epsilon);
        }
        break;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Finite differences

double finite_difference_check(std::span<Tensor* const> params,
                               const std::function<double(Tape&)>& loss_fn,
                               double epsilon, std::uint64_t seed,
                               int samples_per_param) {
  if (epsilon < 1e-7 || epsilon > 1e-3) {
    throw Error("finite_difference_check: epsilon out of [1e-7, 1e-3]");
  }
  // analytic gradients
  Tape tape;
  const double base = [&] {
    Tape t2;
    return loss_fn(t2);
  }();
  (void)base;
  std::unordered_map<Tensor*, Tensor> analytic;
  {
    Tape t;
    loss_fn(t);
    // loss node is the last node created
    t.backward(static_cast<Tape::NodeId>(t.size() - 1));
    for (const auto& [p, g] : t.param_grads()) {
      auto it = analytic.find(p);
      if (it == analytic.end()) {
        analytic.emplace(p, *g);
      } else {
        for (std::size_t i = 0; i < g->data.size(); ++i) {
          it->second.data[i] += g->data[i];
        }
      }
    }
  }

  Rng rng(seed);
  double max_rel = 0.0;
  for (Tensor* p : params) {
    auto it = analytic.find(p);
    if (it == analytic.end()) {
      throw Error("finite_difference_check: parameter never registered");
    }
    const std::size_t n = p->numel();
    std::vector<std::size_t> coords(n);
    for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    // sample without replacement
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const std::size_t j = i + rng.uniform_int(n - i);
      std::swap(coords[i], coords[j]);
    }
    const std::size_t take =
        std::min<std::size_t>(n, static_cast<std::size_t>(samples_per_param));
    for (std::size_t s = 0; s < take; ++s) {
      const std::size_t c = coords[s];
      const double keep = p->data[c];
      p->data[c] = keep + epsilon;
      double f_plus;
      {
        Tape t;
        f_plus = loss_fn(t);
      }
      p->data[c] = keep - epsilon;
      double f_minus;
      {
        Tape t;
        f_minus = loss_fn(t);
      }
      p->data[c] = keep;
      const double numeric = (f_plus - f_minus) / (2.0 * epsilon);
      const double a = it->second.data[c];
      const double rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace subtext
