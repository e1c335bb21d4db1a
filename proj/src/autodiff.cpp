#include "kedit/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "kedit/error.hpp"

namespace kedit::ad {

const Tensor& Var::value() const { return graph->value(id); }
const Tensor& Var::grad() const { return graph->grad(id); }

Var Graph::constant(Tensor value) { return push(std::move(value), {}, nullptr); }

Var Graph::leaf(Tensor value) {
  Var v = push(std::move(value), {}, nullptr);
  nodes_[v.id].requires_grad = true;
  return v;
}

Var Graph::push(Tensor value, std::vector<std::size_t> parents, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  for (std::size_t p : parents) node.requires_grad = node.requires_grad || nodes_[p].requires_grad;
  node.parents = std::move(parents);
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Tensor& Graph::grad_mut(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Graph::backward(Var output) {
  if (nodes_[output.id].value.size() != 1) {
    throw Error(ErrorCode::kInvalidArgument, "backward needs a scalar output");
  }
  for (auto& n : nodes_) {
    if (n.requires_grad) n.grad = Tensor(n.value.shape());
  }
  if (!nodes_[output.id].requires_grad) return;
  nodes_[output.id].grad[0] = 1.0;
  for (std::size_t i = output.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.requires_grad && n.backward) n.backward(*this, i);
  }
}

namespace {

bool needs(Graph& g, Var v) { return g.requires_grad(v.id); }

void check_same_graph(Var a, Var b) {
  if (a.graph != b.graph) throw Error(ErrorCode::kInvalidArgument, "vars from different graphs");
}

using ConstRowMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// out[m,n] += a[m,k] · b[n,k]ᵀ
void gemm_nt(const double* a, const double* b, double* out, std::size_t m, std::size_t k, std::size_t n) {
  RowMap(out, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)).noalias() +=
      ConstRowMap(a, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) *
      ConstRowMap(b, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)).transpose();
}

// out[k,n] += a[m,k]ᵀ · b[m,n]
void gemm_tn(const double* a, const double* b, double* out, std::size_t m, std::size_t k, std::size_t n) {
  RowMap(out, static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n)).noalias() +=
      ConstRowMap(a, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)).transpose() *
      ConstRowMap(b, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
}

// out[m,n] += a[m,k] · b[k,n]
void gemm_nn(const double* a, const double* b, double* out, std::size_t m, std::size_t k, std::size_t n) {
  RowMap(out, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)).noalias() +=
      ConstRowMap(a, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) *
      ConstRowMap(b, static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
}

}  // namespace

Var matmul(Var a, Var b) {
  check_same_graph(a, b);
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) throw Error(ErrorCode::kDimensionMismatch, "matmul inner dimensions differ");
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out({m, n});
  gemm_nn(av.data().data(), bv.data().data(), out.data().data(), m, k, n);
  return g.push(std::move(out), {a.id, b.id}, [a, b, m, k, n](Graph& g, std::size_t self) {
    const Tensor& dout = g.grad(self);
    if (needs(g, a)) gemm_nt(dout.data().data(), g.value(b.id).data().data(), g.grad_mut(a.id).data().data(), m, n, k);
    if (needs(g, b)) gemm_tn(g.value(a.id).data().data(), dout.data().data(), g.grad_mut(b.id).data().data(), m, k, n);
  });
}

Var add(Var a, Var b) {
  check_same_graph(a, b);
  if (!a.value().same_shape(b.value())) throw Error(ErrorCode::kDimensionMismatch, "add shape mismatch");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return a.graph->push(std::move(out), {a.id, b.id}, [a, b](Graph& g, std::size_t self) {
    const Tensor& dout = g.grad(self);
    for (Var v : {a, b}) {
      if (!needs(g, v)) continue;
      Tensor& d = g.grad_mut(v.id);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dout[i];
    }
  });
}

Var add_row_broadcast(Var a, Var row) {
  check_same_graph(a, row);
  const Tensor& av = a.value();
  const std::size_t n = av.cols();
  if (row.value().size() != n) throw Error(ErrorCode::kDimensionMismatch, "broadcast row length mismatch");
  Tensor out = av;
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < n; ++c) out.at(r, c) += row.value()[c];
  }
  return a.graph->push(std::move(out), {a.id, row.id}, [a, row, n](Graph& g, std::size_t self) {
    const Tensor& dout = g.grad(self);
    if (needs(g, a)) {
      Tensor& d = g.grad_mut(a.id);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dout[i];
    }
    if (needs(g, row)) {
      Tensor& d = g.grad_mut(row.id);
      for (std::size_t r = 0; r < dout.rows(); ++r) {
        for (std::size_t c = 0; c < n; ++c) d[c] += dout.at(r, c);
      }
    }
  });
}

Var mul(Var a, Var b) {
  check_same_graph(a, b);
  if (!a.value().same_shape(b.value())) throw Error(ErrorCode::kDimensionMismatch, "mul shape mismatch");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.graph->push(std::move(out), {a.id, b.id}, [a, b](Graph& g, std::size_t self) {
    const Tensor& dout = g.grad(self);
    if (needs(g, a)) {
      Tensor& d = g.grad_mut(a.id);
      const Tensor& bv = g.value(b.id);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dout[i] * bv[i];
    }
    if (needs(g, b)) {
      Tensor& d = g.grad_mut(b.id);
      const Tensor& av = g.value(a.id);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dout[i] * av[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= s;
  return a.graph->push(std::move(out), {a.id}, [a, s](Graph& g, std::size_t self) {
    const Tensor& dout = g.grad(self);
    Tensor& d = g.grad_mut(a.id);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s * dout[i];
  });
}

Var activation(Var a, ActivationKind kind) {
  Tensor out = a.value();
  for (double& v : out.data()) v = activation_fn(kind, v);
  return a.graph->push(std::move(out), {a.id}, [a, kind](Graph& g, std::size_t self) {
    const Tensor& dout = g.grad(self);
    const Tensor& x = g.value(a.id);
    Tensor& d = g.grad_mut(a.id);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += dout[i] * activation_grad(kind, x[i]);
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  check_same_graph(x, gain);
  check_same_graph(x, bias);
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), n = xv.cols();
  if (gain.value().size() != n || bias.value().size() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "layer_norm parameter length mismatch");
  }
  Tensor out({rows, n});
  Tensor xhat({rows, n});
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < n; ++c) mean += xv.at(r, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (xv.at(r, c) - mean) * (xv.at(r, c) - mean);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      xhat.at(r, c) = (xv.at(r, c) - mean) * inv_std[r];
      out.at(r, c) = xhat.at(r, c) * gain.value()[c] + bias.value()[c];
    }
  }
  return x.graph->push(
      std::move(out), {x.id, gain.id, bias.id},
      [x, gain, bias, rows, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& g, std::size_t self) {
        const Tensor& dout = g.grad(self);
        const Tensor& gv = g.value(gain.id);
        if (needs(g, gain)) {
          Tensor& d = g.grad_mut(gain.id);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < n; ++c) d[c] += dout.at(r, c) * xhat.at(r, c);
        }
        if (needs(g, bias)) {
          Tensor& d = g.grad_mut(bias.id);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < n; ++c) d[c] += dout.at(r, c);
        }
        if (needs(g, x)) {
          Tensor& d = g.grad_mut(x.id);
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t r = 0; r < rows; ++r) {
            double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
              const double dxhat = dout.at(r, c) * gv[c];
              mean_dxhat += dxhat;
              mean_dxhat_xhat += dxhat * xhat.at(r, c);
            }
            mean_dxhat *= inv_n;
            mean_dxhat_xhat *= inv_n;
            for (std::size_t c = 0; c < n; ++c) {
              const double dxhat = dout.at(r, c) * gv[c];
              d.at(r, c) += inv_std[r] * (dxhat - mean_dxhat - xhat.at(r, c) * mean_dxhat_xhat);
            }
          }
        }
      });
}

Var embedding(Var table, std::span<const int> ids) {
  const Tensor& tv = table.value();
  const std::size_t n = tv.cols();
  Tensor out({ids.size(), n});
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] < 0 || static_cast<std::size_t>(ids[t]) >= tv.rows()) {
      throw Error(ErrorCode::kInvalidArgument, "embedding id out of range");
    }
    std::copy_n(tv.row(static_cast<std::size_t>(ids[t])).begin(), n, out.row(t).begin());
  }
  std::vector<int> ids_copy(ids.begin(), ids.end());
  return table.graph->push(std::move(out), {table.id}, [table, n, ids_copy = std::move(ids_copy)](Graph& g, std::size_t self) {
    const Tensor& dout = g.grad(self);
    Tensor& d = g.grad_mut(table.id);
    for (std::size_t t = 0; t < ids_copy.size(); ++t) {
      const std::size_t r = static_cast<std::size_t>(ids_copy[t]);
      for (std::size_t c = 0; c < n; ++c) d.at(r, c) += dout.at(t, c);
    }
  });
}

Var add_at_row(Var x, std::size_t row, Var vec) {
  check_same_graph(x, vec);
  const Tensor& xv = x.value();
  const std::size_t n = xv.cols();
  if (row >= xv.rows()) throw Error(ErrorCode::kPositionOutOfRange, "row " + std::to_string(row));
  if (vec.value().size() != n) throw Error(ErrorCode::kDimensionMismatch, "add_at_row length mismatch");
  Tensor out = xv;
  for (std::size_t c = 0; c < n; ++c) out.at(row, c) += vec.value()[c];
  return x.graph->push(std::move(out), {x.id, vec.id}, [x, vec, row, n](Graph& g, std::size_t self) {
    const Tensor& dout = g.grad(self);
    if (needs(g, x)) {
      Tensor& d = g.grad_mut(x.id);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dout[i];
    }
    if (needs(g, vec)) {
      Tensor& d = g.grad_mut(vec.id);
      for (std::size_t c = 0; c < n; ++c) d[c] += dout.at(row, c);
    }
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.graph->push(Tensor::vector({s}), {a.id}, [a](Graph& g, std::size_t self) {
    const double dout = g.grad(self)[0];
    Tensor& d = g.grad_mut(a.id);
    for (double& v : d.data()) v += dout;
  });
}

Var causal_attention(Var q, Var k, Var v, std::size_t n_heads, std::vector<Tensor>* probs) {
  check_same_graph(q, k);
  check_same_graph(q, v);
  const Tensor& qv = q.value();
  const std::size_t t_len = qv.rows(), d = qv.cols();
  if (n_heads == 0 || d % n_heads != 0) throw Error(ErrorCode::kInvalidArgument, "heads must divide width");
  if (!k.value().same_shape(qv) || !v.value().same_shape(qv)) {
    throw Error(ErrorCode::kDimensionMismatch, "q/k/v shape mismatch");
  }
  const std::size_t hd = d / n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();

  std::vector<Tensor> p(n_heads, Tensor({t_len, t_len}));
  Tensor out({t_len, d});
  for (std::size_t h = 0; h < n_heads; ++h) {
    const std::size_t off = h * hd;
    Tensor& ph = p[h];
    for (std::size_t i = 0; i < t_len; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j <= i; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < hd; ++c) s += qv.at(i, off + c) * kv.at(j, off + c);
        s *= inv_sqrt;
        ph.at(i, j) = s;
        mx = std::max(mx, s);
      }
      double z = 0.0;
      for (std::size_t j = 0; j <= i; ++j) {
        ph.at(i, j) = std::exp(ph.at(i, j) - mx);
        z += ph.at(i, j);
      }
      for (std::size_t j = 0; j <= i; ++j) ph.at(i, j) /= z;
      // Entries j > i stay exactly zero.
      for (std::size_t j = 0; j <= i; ++j) {
        const double w = ph.at(i, j);
        for (std::size_t c = 0; c < hd; ++c) out.at(i, off + c) += w * vv.at(j, off + c);
      }
    }
  }
  if (probs != nullptr) *probs = p;

  return q.graph->push(
      std::move(out), {q.id, k.id, v.id},
      [q, k, v, n_heads, hd, t_len, inv_sqrt, p = std::move(p)](Graph& g, std::size_t self) {
        const Tensor& dout = g.grad(self);
        const Tensor& qv = g.value(q.id);
        const Tensor& kv = g.value(k.id);
        const Tensor& vv = g.value(v.id);
        const bool gq = needs(g, q), gk = needs(g, k), gv = needs(g, v);
        Tensor* dq = gq ? &g.grad_mut(q.id) : nullptr;
        Tensor* dk = gk ? &g.grad_mut(k.id) : nullptr;
        Tensor* dv = gv ? &g.grad_mut(v.id) : nullptr;
        std::vector<double> dp(t_len);
        for (std::size_t h = 0; h < n_heads; ++h) {
          const std::size_t off = h * hd;
          const Tensor& ph = p[h];
          for (std::size_t i = 0; i < t_len; ++i) {
            double row_dot = 0.0;
            for (std::size_t j = 0; j <= i; ++j) {
              double s = 0.0;
              for (std::size_t c = 0; c < hd; ++c) s += dout.at(i, off + c) * vv.at(j, off + c);
              dp[j] = s;
              row_dot += s * ph.at(i, j);
              if (dv != nullptr) {
                const double w = ph.at(i, j);
                for (std::size_t c = 0; c < hd; ++c) dv->at(j, off + c) += w * dout.at(i, off + c);
              }
            }
            for (std::size_t j = 0; j <= i; ++j) {
              const double ds = ph.at(i, j) * (dp[j] - row_dot) * inv_sqrt;
              if (ds == 0.0) continue;
              if (dq != nullptr)
                for (std::size_t c = 0; c < hd; ++c) dq->at(i, off + c) += ds * kv.at(j, off + c);
              if (dk != nullptr)
                for (std::size_t c = 0; c < hd; ++c) dk->at(j, off + c) += ds * qv.at(i, off + c);
            }
          }
        }
      });
}

Tensor log_softmax_rows(const Tensor& logits) {
  Tensor out = logits;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = out.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double x : row) z += std::exp(x - mx);
    const double lse = mx + std::log(z);
    for (double& x : row) x -= lse;
  }
  return out;
}

Var cross_entropy_sum(Var logits, std::span<const int> targets) {
  const Tensor& lv = logits.value();
  if (targets.size() != lv.rows()) throw Error(ErrorCode::kDimensionMismatch, "one target per row required");
  const Tensor logp = log_softmax_rows(lv);
  double loss = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (targets[t] < 0) continue;
    if (static_cast<std::size_t>(targets[t]) >= lv.cols()) throw Error(ErrorCode::kInvalidArgument, "target out of range");
    loss -= logp.at(t, static_cast<std::size_t>(targets[t]));
  }
  std::vector<int> tgt(targets.begin(), targets.end());
  return logits.graph->push(Tensor::vector({loss}), {logits.id},
                            [logits, logp, tgt = std::move(tgt)](Graph& g, std::size_t self) {
                              const double dout = g.grad(self)[0];
                              Tensor& d = g.grad_mut(logits.id);
                              for (std::size_t t = 0; t < tgt.size(); ++t) {
                                if (tgt[t] < 0) continue;
                                for (std::size_t c = 0; c < logp.cols(); ++c) {
                                  d.at(t, c) += dout * std::exp(logp.at(t, c));
                                }
                                d.at(t, static_cast<std::size_t>(tgt[t])) -= dout;
                              }
                            });
}

}  // namespace kedit::ad
