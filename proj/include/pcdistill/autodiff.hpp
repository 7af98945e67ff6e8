#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pcdistill/tensor.hpp"

namespace pcdistill {

// Reverse-mode tape. Nodes are appended in construction order, which is a
// topological order by construction; backward() walks it in reverse and
// accumulates gradients additively. A tape is single-use: build, backward,
// read gradients, discard.
class Tape {
 public:
  using Id = std::size_t;

  Id leaf(Tensor value, bool requires_grad = false) {
    return push("leaf", std::move(value), requires_grad, {});
  }

  Id constant(Tensor value) { return leaf(std::move(value), false); }

  Id scalar_constant(double v) { return constant(Tensor::scalar(v)); }

  const Tensor& value(Id id) const { return nodes_[id].value; }

  const Tensor& grad(Id id) const {
    if (!nodes_[id].requires_grad) throw std::logic_error("tape: node has no gradient");
    return nodes_[id].grad;
  }

  bool requires_grad(Id id) const { return nodes_[id].requires_grad; }

  std::size_t size() const { return nodes_.size(); }

  // ---- forward ops ----

  Id matmul(Id a, Id b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (ta.shape.size() != 2 || tb.shape.size() != 2 || ta.shape[1] != tb.shape[0])
      throw std::invalid_argument("matmul: incompatible shapes");
    const std::size_t m = ta.shape[0], k = ta.shape[1], n = tb.shape[1];
    Tensor out = Tensor::zeros({m, n});
    detail::dgemm(false, false, m, n, k, 1.0, ta.values.data(), k, tb.values.data(), n, 0.0,
                  out.values.data(), n);
    Id id = push("matmul", std::move(out), needs(a) || needs(b), {a, b});
    if (nodes_[id].requires_grad) {
      nodes_[id].backprop = [this, id, a, b, m, k, n]() {
        const double* g = nodes_[id].grad.values.data();
        if (needs(a))  // dA += dC * B^T
          detail::dgemm(false, true, m, k, n, 1.0, g, n, val(b).values.data(), n, 1.0,
                        nodes_[a].grad.values.data(), k);
        if (needs(b))  // dB += A^T * dC
          detail::dgemm(true, false, k, n, m, 1.0, val(a).values.data(), k, g, n, 1.0,
                        nodes_[b].grad.values.data(), n);
      };
    }
    return id;
  }

  Id add(Id a, Id b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (!ta.same_shape(tb)) throw std::invalid_argument("add: shape mismatch");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.numel(); ++i) out.values[i] += tb.values[i];
    Id id = push("add", std::move(out), needs(a) || needs(b), {a, b});
    if (nodes_[id].requires_grad) {
      nodes_[id].backprop = [this, id, a, b]() {
        const auto& g = nodes_[id].grad.values;
        if (needs(a)) axpy(g, nodes_[a].grad.values, 1.0);
        if (needs(b)) axpy(g, nodes_[b].grad.values, 1.0);
      };
    }
    return id;
  }

  Id subtract(Id a, Id b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (!ta.same_shape(tb)) throw std::invalid_argument("subtract: shape mismatch");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.numel(); ++i) out.values[i] -= tb.values[i];
    Id id = push("subtract", std::move(out), needs(a) || needs(b), {a, b});
    if (nodes_[id].requires_grad) {
      nodes_[id].backprop = [this, id, a, b]() {
        const auto& g = nodes_[id].grad.values;
        if (needs(a)) axpy(g, nodes_[a].grad.values, 1.0);
        if (needs(b)) axpy(g, nodes_[b].grad.values, -1.0);
      };
    }
    return id;
  }

  Id multiply(Id a, Id b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (!ta.same_shape(tb)) throw std::invalid_argument("multiply: shape mismatch");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.numel(); ++i) out.values[i] *= tb.values[i];
    Id id = push("multiply", std::move(out), needs(a) || needs(b), {a, b});
    if (nodes_[id].requires_grad) {
      nodes_[id].backprop = [this, id, a, b]() {
        const auto& g = nodes_[id].grad.values;
        if (needs(a)) {
          auto& ga = nodes_[a].grad.values;
          const auto& vb = val(b).values;
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
        }
        if (needs(b)) {
          auto& gb = nodes_[b].grad.values;
          const auto& va = val(a).values;
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
        }
      };
    }
    return id;
  }

  Id multiply_scalar(Id a, double s) {
    Tensor out = val(a);
    for (double& v : out.values) v *= s;
    Id id = push("multiply_scalar", std::move(out), needs(a), {a});
    if (nodes_[id].requires_grad) {
      nodes_[id].backprop = [this, id, a, s]() { axpy(nodes_[id].grad.values, nodes_[a].grad.values, s); };
    }
    return id;
  }

  // (m x n) + bias(n), broadcast over rows. Kept as its own op instead of
  // general broadcasting so the backward rule stays a plain column sum.
  Id add_row_bias(Id a, Id bias) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(bias);
    if (ta.shape.size() != 2 || tb.numel() != ta.shape[1])
      throw std::invalid_argument("add_row_bias: bias width mismatch");
    const std::size_t m = ta.shape[0], n = ta.shape[1];
    Tensor out = ta;
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < n; ++c) out.values[r * n + c] += tb.values[c];
    Id id = push("add_row_bias", std::move(out), needs(a) || needs(bias), {a, bias});
    if (nodes_[id].requires_grad) {
      nodes_[id].backprop = [this, id, a, bias, m, n]() {
        const auto& g = nodes_[id].grad.values;
        if (needs(a)) axpy(g, nodes_[a].grad.values, 1.0);
        if (needs(bias)) {
          auto& gb = nodes_[bias].grad.values;
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < n; ++c) gb[c] += g[r * n + c];
        }
      };
    }
    return id;
  }

  Id concat_lastdim(Id a, Id b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (ta.shape.size() != 2 || tb.shape.size() != 2 || ta.shape[0] != tb.shape[0])
      throw std::invalid_argument("concat_lastdim: row count mismatch");
    const std::size_t m = ta.shape[0], p = ta.shape[1], q = tb.shape[1];
    Tensor out = Tensor::zeros({m, p + q});
    for (std::size_t r = 0; r < m; ++r) {
      std::copy_n(&ta.values[r * p], p, &out.values[r * (p + q)]);
      std::copy_n(&tb.values[r * q], q, &out.values[r * (p + q) + p]);
    }
    Id id = push("concat_lastdim", std::move(out), needs(a) || needs(b), {a, b});
    if (nodes_[id].requires_grad) {
      nodes_[id].backprop = [this, id, a, b, m, p, q]() {
        const auto& g = nodes_[id].grad.values;
        if (needs(a)) {
          auto& ga = nodes_[a].grad.values;
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < p; ++c) ga[r * p + c] += g[r * (p + q) + c];
        }
        if (needs(b)) {
          auto& gb = nodes_[b].grad.values;
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < q; ++c) gb[r * q + c] += g[r * (p + q) + p + c];
        }
      };
    }
    return id;
  }

  // Select rows by index; indices may repeat. Backward scatter-adds.
  Id gather_rows(Id a, std::vector<std::size_t> indices) {
    const Tensor& ta = val(a);
    if (ta.shape.size() != 2) throw std::invalid_argument("gather_rows: input must be 2-d");
    const std::size_t n = ta.shape[1];
    for (std::size_t idx : indices)
      if (idx >= ta.shape[0]) throw std::out_of_range("gather_rows: index out of bounds");
    Tensor out = Tensor::zeros({indices.size(), n});
    for (std::size_t r = 0; r < indices.size(); ++r)
      std::copy_n(&ta.values[indices[r] * n], n, &out.values[r * n]);
    Id id = push("gather_rows", std::move(out), needs(a), {a});
    if (nodes_[id].requires_grad) {
      nodes_[id].backprop = [this, id, a, n, idx = std::move(indices)]() {
        const auto& g = nodes_[id].grad.values;
        auto& ga = nodes_[a].grad.values;
        for (std::size_t r = 0; r < idx.size(); ++r)
          for (std::size_t c = 0; c < n; ++c) ga[idx[r] * n + c] += g[r * n + c];
      };
    }
    return id;
  }

  // Row i of the output is the mean of rows indices[i*k .. i*k+k-1] of the
  // input. Indices are data (a fixed neighborhood graph), not differentiated.
  Id neighbor_mean(Id a, std::vector<std::size_t> indices, std::size_t k) {
    const Tensor& ta = val(a);
    if (ta.shape.size() != 2 || k == 0 || indices.size() % k != 0)
      throw std::invalid_argument("neighbor_mean: bad index table");
    const std::size_t m = indices.size() / k, n = ta.shape[1];
    for (std::size_t idx : indices)
      if (idx >= ta.shape[0]) throw std::out_of_range("neighbor_mean: index out of bounds");
    Tensor out = Tensor::zeros({m, n});
    const double inv_k = 1.0 / static_cast<double>(k);
    for (std::size_t r = 0; r < m; ++r) {
      double* dst = &out.values[r * n];
      for (std::size_t j = 0; j < k; ++j) {
        const double* src = &ta.values[indices[r * k + j] * n];
        for (std::size_t c = 0; c < n; ++c) dst[c] += src[c];
      }
      for (std::size_t c = 0; c < n; ++c) dst[c] *= inv_k;
    }
    Id id = push("neighbor_mean", std::move(out), needs(a), {a});
    if (nodes_[id].requires_grad) {
      nodes_[id].backprop = [this, id, a, m, n, k, inv_k, idx = std::move(indices)]() {
        const auto& g = nodes_[id].grad.values;
        auto& ga = nodes_[a].grad.values;
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t j = 0; j < k; ++j) {
            double* dst = &ga[idx[r * k + j] * n];
            const double* src = &g[r * n];
            for (std::size_t c = 0; c < n; ++c) dst[c] += src[c] * inv_k;
          }
      };
    }
    return id;
  }

  // Columns [c0, c1) of a 2-d tensor.
  Id slice_cols(Id a, std::size_t c0, std::size_t c1) {
    const Tensor& ta = val(a);
    if (ta.shape.size() != 2 || c1 > ta.shape[1] || c0 >= c1)
      throw std::invalid_argument("slice_cols: bad column range");
    const std::size_t m = ta.shape[0], n = ta.shape[1], w = c1 - c0;
    Tensor out = Tensor::zeros({m, w});
    for (std::size_t r = 0; r < m; ++r)
      std::copy_n(&ta.values[r * n + c0], w, &out.values[r * w]);
    Id id = push("slice_cols", std::move(out), needs(a), {a});
    if (nodes_[id].requires_grad) {
      nodes_[id].backprop = [this, id, a, m, n, w, c0]() {
        const auto& g = nodes_[id].grad.values;
        auto& ga = nodes_[a].grad.values;
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t c = 0; c < w; ++c) ga[r * n + c0 + c] += g[r * w + c];
      };
    }
    return id;
  }

  Id relu(Id a) {
    Tensor out = val(a);
    for (double& v : out.values) v = v > 0.0 ? v : 0.0;
    Id id = push("relu", std::move(out), needs(a), {a});
    if (nodes_[id].requires_grad) {
      nodes_[id].backprop = [this, id, a]() {
        const auto& g = nodes_[id].grad.values;
        const auto& x = val(a).values;
        auto& ga = nodes_[a].grad.values;
        for (std::size_t i = 0; i < g.size(); ++i)
          if (x[i] > 0.0) ga[i] += g[i];
      };
    }
    return id;
  }

  // Rows scaled to unit length: y = x / sqrt(|x|^2 + eps). The epsilon keeps
  // zero rows finite and the backward rule differentiates the epsilon form
  // exactly.
  static constexpr double kNormEpsilon = 1e-12;

  Id l2_normalize_rows(Id a) {
    const Tensor& ta = val(a);
    if (ta.shape.size() != 2) throw std::invalid_argument("l2_normalize_rows: input must be 2-d");
    const std::size_t m = ta.shape[0], n = ta.shape[1];
    Tensor out = Tensor::zeros({m, n});
    std::vector<double> inv_norm(m);
    for (std::size_t r = 0; r < m; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < n; ++c) s += ta.values[r * n + c] * ta.values[r * n + c];
      inv_norm[r] = 1.0 / std::sqrt(s + kNormEpsilon);
      for (std::size_t c = 0; c < n; ++c) out.values[r * n + c] = ta.values[r * n + c] * inv_norm[r];
    }
    Id id = push("l2_normalize_rows", std::move(out), needs(a), {a});
    if (nodes_[id].requires_grad) {
      nodes_[id].backprop = [this, id, a, m, n, inv = std::move(inv_norm)]() {
        // dx = (dy - y * <dy, y>) / sqrt(|x|^2 + eps), with y = x * inv.
        const auto& g = nodes_[id].grad.values;
        const auto& y = nodes_[id].value.values;
        auto& ga = nodes_[a].grad.values;
        for (std::size_t r = 0; r < m; ++r) {
          double dot = 0.0;
          for (std::size_t c = 0; c < n; ++c) dot += g[r * n + c] * y[r * n + c];
          for (std::size_t c = 0; c < n; ++c)
            ga[r * n + c] += (g[r * n + c] - y[r * n + c] * dot) * inv[r];
        }
      };
    }
    return id;
  }

  Id sum(Id a) {
    double s = 0.0;
    for (double v : val(a).values) s += v;
    Id id = push("sum", Tensor::scalar(s), needs(a), {a});
    if (nodes_[id].requires_grad) {
      nodes_[id].backprop = [this, id, a]() {
        const double g = nodes_[id].grad.values[0];
        for (double& v : nodes_[a].grad.values) v += g;
      };
    }
    return id;
  }

  Id mean(Id a) {
    const std::size_t n = val(a).numel();
    if (n == 0) throw std::invalid_argument("mean: empty tensor");
    double s = 0.0;
    for (double v : val(a).values) s += v;
    Id id = push("mean", Tensor::scalar(s / static_cast<double>(n)), needs(a), {a});
    if (nodes_[id].requires_grad) {
      nodes_[id].backprop = [this, id, a, n]() {
        const double g = nodes_[id].grad.values[0] / static_cast<double>(n);
        for (double& v : nodes_[a].grad.values) v += g;
      };
    }
    return id;
  }

  // Mean over all elements of (a - b)^2.
  Id mse(Id a, Id b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (!ta.same_shape(tb)) throw std::invalid_argument("mse: shape mismatch");
    const std::size_t n = ta.numel();
    if (n == 0) throw std::invalid_argument("mse: empty tensor");
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = ta.values[i] - tb.values[i];
      s += d * d;
    }
    Id id = push("mse", Tensor::scalar(s / static_cast<double>(n)), needs(a) || needs(b), {a, b});
    if (nodes_[id].requires_grad) {
      nodes_[id].backprop = [this, id, a, b, n]() {
        const double g = nodes_[id].grad.values[0] * 2.0 / static_cast<double>(n);
        const auto& va = val(a).values;
        const auto& vb = val(b).values;
        if (needs(a)) {
          auto& ga = nodes_[a].grad.values;
          for (std::size_t i = 0; i < n; ++i) ga[i] += g * (va[i] - vb[i]);
        }
        if (needs(b)) {
          auto& gb = nodes_[b].grad.values;
          for (std::size_t i = 0; i < n; ++i) gb[i] -= g * (va[i] - vb[i]);
        }
      };
    }
    return id;
  }

  // Mean of max(z,0) - z*t + log(1 + exp(-|z|)) over all elements; the
  // log-sum-exp arrangement is stable for large |z|.
  Id bce_with_logits(Id logits, Id targets) {
    const Tensor& tz = val(logits);
    const Tensor& tt = val(targets);
    if (!tz.same_shape(tt)) throw std::invalid_argument("bce_with_logits: shape mismatch");
    const std::size_t n = tz.numel();
    if (n == 0) throw std::invalid_argument("bce_with_logits: empty tensor");
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = tz.values[i], t = tt.values[i];
      s += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
    }
    Id id = push("bce_with_logits", Tensor::scalar(s / static_cast<double>(n)),
                 needs(logits) || needs(targets), {logits, targets});
    if (nodes_[id].requires_grad) {
      nodes_[id].backprop = [this, id, logits, targets, n]() {
        const double g = nodes_[id].grad.values[0] / static_cast<double>(n);
        const auto& vz = val(logits).values;
        const auto& vt = val(targets).values;
        if (needs(logits)) {
          auto& gz = nodes_[logits].grad.values;
          for (std::size_t i = 0; i < n; ++i) gz[i] += g * (sigmoid(vz[i]) - vt[i]);
        }
        if (needs(targets)) {
          auto& gt = nodes_[targets].grad.values;
          for (std::size_t i = 0; i < n; ++i) gt[i] -= g * vz[i];
        }
      };
    }
    return id;
  }

  // Mean cross-entropy of row-wise softmax against integer class labels.
  Id softmax_cross_entropy(Id logits, const std::vector<int>& labels) {
    const Tensor& tz = val(logits);
    if (tz.shape.size() != 2 || tz.shape[0] != labels.size())
      throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
    const std::size_t m = tz.shape[0], c = tz.shape[1];
    for (int l : labels)
      if (l < 0 || static_cast<std::size_t>(l) >= c)
        throw std::out_of_range("softmax_cross_entropy: label out of range");
    std::vector<double> softmax(m * c);
    double loss = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      const double* z = &tz.values[r * c];
      const double zmax = *std::max_element(z, z + c);
      double denom = 0.0;
      for (std::size_t j = 0; j < c; ++j) denom += std::exp(z[j] - zmax);
      const double log_denom = std::log(denom);
      for (std::size_t j = 0; j < c; ++j) softmax[r * c + j] = std::exp(z[j] - zmax) / denom;
      loss += log_denom - (z[static_cast<std::size_t>(labels[r])] - zmax);
    }
    Id id = push("softmax_cross_entropy", Tensor::scalar(loss / static_cast<double>(m)),
                 needs(logits), {logits});
    if (nodes_[id].requires_grad) {
      nodes_[id].backprop = [this, id, logits, m, c, labels, sm = std::move(softmax)]() {
        const double g = nodes_[id].grad.values[0] / static_cast<double>(m);
        auto& gz = nodes_[logits].grad.values;
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t j = 0; j < c; ++j) {
            double d = sm[r * c + j];
            if (j == static_cast<std::size_t>(labels[r])) d -= 1.0;
            gz[r * c + j] += g * d;
          }
      };
    }
    return id;
  }

  // Mean over rows of the (non-squared) row L2 norm. A tiny epsilon keeps the
  // derivative finite on near-zero rows.
  Id mean_row_l2(Id a) {
    const Tensor& ta = val(a);
    if (ta.shape.size() != 2) throw std::invalid_argument("mean_row_l2: input must be 2-d");
    const std::size_t m = ta.shape[0], n = ta.shape[1];
    constexpr double eps = 1e-24;
    std::vector<double> norms(m);
    double s = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      double q = 0.0;
      for (std::size_t c = 0; c < n; ++c) q += ta.values[r * n + c] * ta.values[r * n + c];
      norms[r] = std::sqrt(q + eps);
      s += norms[r];
    }
    Id id = push("mean_row_l2", Tensor::scalar(s / static_cast<double>(m)), needs(a), {a});
    if (nodes_[id].requires_grad) {
      nodes_[id].backprop = [this, id, a, m, n, nr = std::move(norms)]() {
        const double g = nodes_[id].grad.values[0] / static_cast<double>(m);
        const auto& x = val(a).values;
        auto& ga = nodes_[a].grad.values;
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t c = 0; c < n; ++c) ga[r * n + c] += g * x[r * n + c] / nr[r];
      };
    }
    return id;
  }

  // ---- backward ----

  void backward(Id loss) {
    if (consumed_) throw std::logic_error("tape: backward already ran on this graph");
    if (nodes_.empty()) throw std::logic_error("tape: empty graph");
    if (val(loss).numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
    if (!nodes_[loss].requires_grad)
      throw std::invalid_argument("backward: loss does not depend on any trainable leaf");
    consumed_ = true;
    nodes_[loss].grad.values[0] = 1.0;
    for (std::size_t i = loss + 1; i-- > 0;) {
      if (nodes_[i].requires_grad && nodes_[i].backprop) nodes_[i].backprop();
    }
    for (std::size_t i = 0; i <= loss; ++i) {
      if (nodes_[i].requires_grad && !nodes_[i].grad.all_finite())
        throw std::runtime_error(std::string("tape: non-finite gradient after op '") +
                                 nodes_[i].op + "'");
    }
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    const char* op = "";
    std::function<void()> backprop;
  };

  std::vector<Node> nodes_;
  bool consumed_ = false;

  const Tensor& val(Id id) const { return nodes_[id].value; }
  bool needs(Id id) const { return nodes_[id].requires_grad; }

  static double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  }

  static void axpy(const std::vector<double>& x, std::vector<double>& y, double a) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
  }

  Id push(const char* op, Tensor value, bool requires_grad, std::initializer_list<Id> inputs) {
    for (Id in : inputs)
      if (in >= nodes_.size()) throw std::out_of_range("tape: input id out of range");
    if (!value.all_finite())
      throw std::runtime_error(std::string("tape: non-finite value produced by op '") + op + "'");
    Node n;
    n.grad = requires_grad ? Tensor::zeros(value.shape) : Tensor{};
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.op = op;
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }
};

// Named trainable tensor owned by a model; gradients accumulate across tapes
// until the optimizer consumes them.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), grad(Tensor::zeros(v.shape)) {
    value = std::move(v);
  }
};

// Binds Parameters onto one tape (each at most once) and copies leaf
// gradients back after backward().
class ParamBinder {
 public:
  ParamBinder(Tape& tape, bool trainable) : tape_(tape), trainable_(trainable) {}

  Tape::Id bind(Parameter& p) {
    for (const auto& [param, id] : bound_)
      if (param == &p) return id;
    Tape::Id id = tape_.leaf(p.value, trainable_);
    bound_.emplace_back(&p, id);
    return id;
  }

  // Accumulate tape gradients into Parameter::grad. Call after backward().
  void harvest(double scale = 1.0) {
    if (!trainable_) return;
    for (auto& [param, id] : bound_) {
      const Tensor& g = tape_.grad(id);
      for (std::size_t i = 0; i < g.numel(); ++i) param->grad.values[i] += scale * g.values[i];
    }
  }

  bool trainable() const { return trainable_; }

 private:
  Tape& tape_;
  bool trainable_;
  std::vector<std::pair<Parameter*, Tape::Id>> bound_;
};

}  // namespace pcdistill
