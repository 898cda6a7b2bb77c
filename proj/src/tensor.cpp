#include "subtext/tensor.hpp"

#include <algorithm>

namespace subtext {

void xavier_fill(Tensor& t, Rng& rng) {
  const double limit =
      std::sqrt(6.0 / static_cast<double>(t.n_rows + t.n_cols));
  for (double& v : t.data) v = rng.uniform(-limit, limit);
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor out(logits.n_rows, logits.n_cols);
  for (std::size_t r = 0; r < logits.n_rows; ++r) {
    double m = -HUGE_VAL;
    for (std::size_t c = 0; c < logits.n_cols; ++c) {
      m = std::max(m, logits.at(r, c));
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.n_cols; ++c) {
      const double e = std::exp(logits.at(r, c) - m);
      out.at(r, c) = e;
      sum += e;
    }
    for (std::size_t c = 0; c < logits.n_cols; ++c) out.at(r, c) /= sum;
  }
  return out;
}

Tensor log_softmax_rows(const Tensor& logits) {
  Tensor out(logits.n_rows, logits.n_cols);
  for (std::size_t r = 0; r < logits.n_rows; ++r) {
    double m = -HUGE_VAL;
    for (std::size_t c = 0; c < logits.n_cols; ++c) {
      m = std::max(m, logits.at(r, c));
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.n_cols; ++c) {
      sum += std::exp(logits.at(r, c) - m);
    }
    const double lse = m + std::log(sum);
    for (std::size_t c = 0; c < logits.n_cols; ++c) {
      out.at(r, c) = logits.at(r, c) - lse;
    }
  }
  return out;
}

double global_norm(const std::vector<const Tensor*>& grads) {
  double sq = 0.0;
  for (const Tensor* g : grads) {
    for (double v : g->data) sq += v * v;
  }
  return std::sqrt(sq);
}

}  // namespace subtext
