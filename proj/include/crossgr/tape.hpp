#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "crossgr/matrix.hpp"
#include "crossgr/rng.hpp"

namespace crossgr {

// ---------------------------------------------------------------------------
// Parameters and the Adam update
// ---------------------------------------------------------------------------

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;     // same shape as value, accumulated by backward passes
  Matrix adam_m;   // first moment
  Matrix adam_v;   // second moment
};

struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // coupled L2: lambda * theta is added to the gradient
};

// Named parameter tensors plus their gradient and Adam moment slots. Insertion
// order is the canonical order for initialization, checkpoints and updates.
class ParamStore {
 public:
  Param& add(const std::string& name, Matrix init) {
    if (index_.count(name))
      throw std::invalid_argument("ParamStore: duplicate parameter " + name);
    index_[name] = params_.size();
    params_.push_back(Param{name, std::move(init), Matrix(), Matrix(), Matrix()});
    Param& p = params_.back();
    p.grad = zeros_like(p.value);
    p.adam_m = zeros_like(p.value);
    p.adam_v = zeros_like(p.value);
    return p;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Param& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end())
      throw std::invalid_argument("ParamStore: no parameter named " + name);
    return params_[it->second];
  }
  const Param& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
      throw std::invalid_argument("ParamStore: no parameter named " + name);
    return params_[it->second];
  }

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grads() {
    for (Param& p : params_) p.grad.fill(0.0);
  }

  long long step_count() const { return step_; }
  void set_step_count(long long s) { step_ = s; }

  // Bias-corrected Adam over every parameter; clears gradients afterwards.
  void adam_step(const AdamConfig& cfg) {
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
    for (Param& p : params_) {
      const std::size_t n = p.value.values.size();
      for (std::size_t i = 0; i < n; ++i) {
        const double g = p.grad.values[i] + cfg.weight_decay * p.value.values[i];
        const double m = cfg.beta1 * p.adam_m.values[i] + (1.0 - cfg.beta1) * g;
        const double v = cfg.beta2 * p.adam_v.values[i] + (1.0 - cfg.beta2) * g * g;
        p.adam_m.values[i] = m;
        p.adam_v.values[i] = v;
        p.value.values[i] -=
            cfg.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
        p.grad.values[i] = 0.0;
      }
    }
  }

 private:
  std::deque<Param> params_;  // deque: references stay valid as params are added
  std::map<std::string, std::size_t> index_;
  long long step_ = 0;
};

// ---------------------------------------------------------------------------
// Recording tape for reverse-mode differentiation
// ---------------------------------------------------------------------------

struct Var {
  int id = -1;
};

// Records primitive applications in order; backward() replays the chain rule
// in exact reverse. Intermediates live on the tape, parameters accumulate
// into their ParamStore gradient slots.
class Tape {
 public:
  Var create(Matrix value) {
    debug_check_finite(value, "tape node");
    nodes_.push_back(Node{std::move(value), Matrix()});
    Node& n = nodes_.back();
    n.grad = zeros_like(n.value);
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  Matrix& grad(Var v) { return nodes_[v.id].grad; }

  void record(std::function<void(Tape&)> op) { ops_.push_back(std::move(op)); }

  std::size_t size() const { return nodes_.size(); }

  // root must be scalar (1x1); seeds it with 1 and walks the records backwards.
  void backward(Var root) {
    const Matrix& r = value(root);
    check_shape(r.rows == 1 && r.cols == 1, "backward root must be 1x1");
    grad(root).values[0] = 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)(*this);
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
  };
  std::deque<Node> nodes_;
  std::vector<std::function<void(Tape&)>> ops_;
};

// ---------------------------------------------------------------------------
// Scalar helpers
// ---------------------------------------------------------------------------

// Numerically stable logistic function, clamped into the open interval (0, 1)
// so downstream probabilities never collapse to an exact 0 or 1.
inline double stable_sigmoid(double x) {
  double p;
  if (x >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    p = e / (1.0 + e);
  }
  const double lo = std::numeric_limits<double>::denorm_min();
  const double hi = std::nextafter(1.0, 0.0);
  return std::min(std::max(p, lo), hi);
}

// log(1 + exp(-|z|)) is finite for all z; this is the log-sum-exp form of the
// per-sample binary cross-entropy.
inline double bce_term(double logit, double label) {
  return std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::fabs(logit)));
}

// ---------------------------------------------------------------------------
// Primitives. Each forward returns a new tape node and records a closure that
// pushes output gradients back to its inputs.
// ---------------------------------------------------------------------------

// Y = X * W + bias (bias broadcast over rows). bias is stored 1 x k.
inline Var affine(Tape& t, Var x, Param& w, Param& b) {
  const Matrix& xv = t.value(x);
  check_shape(xv.cols == w.value.rows, "affine: X.cols vs W.rows");
  check_shape(b.value.rows == 1 && b.value.cols == w.value.cols,
              "affine: bias must be 1 x W.cols");
  Matrix out(xv.rows, w.value.cols);
  for (int r = 0; r < xv.rows; ++r) {
    for (int c = 0; c < w.value.cols; ++c) {
      double acc = b.value.at(0, c);
      for (int k = 0; k < xv.cols; ++k) acc += xv.at(r, k) * w.value.at(k, c);
      out.at(r, c) = acc;
    }
  }
  Var y = t.create(std::move(out));
  Param* wp = &w;
  Param* bp = &b;
  t.record([x, y, wp, bp](Tape& tp) {
    const Matrix& g = tp.grad(y);
    const Matrix& xv2 = tp.value(x);
    Matrix& gx = tp.grad(x);
    for (int r = 0; r < xv2.rows; ++r) {
      for (int c = 0; c < g.cols; ++c) {
        const double gv = g.at(r, c);
        if (gv == 0.0) continue;
        bp->grad.at(0, c) += gv;
        for (int k = 0; k < xv2.cols; ++k) {
          gx.at(r, k) += gv * wp->value.at(k, c);
          wp->grad.at(k, c) += gv * xv2.at(r, k);
        }
      }
    }
  });
  return y;
}

// Y = X * W, no bias (the GMF output head uses this form).
inline Var linear(Tape& t, Var x, Param& w) {
  const Matrix& xv = t.value(x);
  check_shape(xv.cols == w.value.rows, "linear: X.cols vs W.rows");
  Matrix out(xv.rows, w.value.cols);
  for (int r = 0; r < xv.rows; ++r)
    for (int c = 0; c < w.value.cols; ++c) {
      double acc = 0.0;
      for (int k = 0; k < xv.cols; ++k) acc += xv.at(r, k) * w.value.at(k, c);
      out.at(r, c) = acc;
    }
  Var y = t.create(std::move(out));
  Param* wp = &w;
  t.record([x, y, wp](Tape& tp) {
    const Matrix& g = tp.grad(y);
    const Matrix& xv2 = tp.value(x);
    Matrix& gx = tp.grad(x);
    for (int r = 0; r < xv2.rows; ++r)
      for (int c = 0; c < g.cols; ++c) {
        const double gv = g.at(r, c);
        if (gv == 0.0) continue;
        for (int k = 0; k < xv2.cols; ++k) {
          gx.at(r, k) += gv * wp->value.at(k, c);
          wp->grad.at(k, c) += gv * xv2.at(r, k);
        }
      }
  });
  return y;
}

inline Var relu(Tape& t, Var x) {
  Matrix out = t.value(x);
  for (double& v : out.values) v = v > 0.0 ? v : 0.0;
  Var y = t.create(std::move(out));
  t.record([x, y](Tape& tp) {
    const Matrix& g = tp.grad(y);
    const Matrix& xv = tp.value(x);
    Matrix& gx = tp.grad(x);
    for (std::size_t i = 0; i < g.values.size(); ++i)
      if (xv.values[i] > 0.0) gx.values[i] += g.values[i];
  });
  return y;
}

inline Var sigmoid(Tape& t, Var x) {
  Matrix out = t.value(x);
  for (double& v : out.values) v = stable_sigmoid(v);
  Var y = t.create(std::move(out));
  t.record([x, y](Tape& tp) {
    const Matrix& g = tp.grad(y);
    const Matrix& yv = tp.value(y);
    Matrix& gx = tp.grad(x);
    for (std::size_t i = 0; i < g.values.size(); ++i) {
      const double s = yv.values[i];
      gx.values[i] += g.values[i] * s * (1.0 - s);
    }
  });
  return y;
}

// Select rows of a parameter table. Backward scatter-adds, so repeated ids
// accumulate.
inline Var embedding_rows(Tape& t, Param& table, std::vector<int> ids) {
  const Matrix& tv = table.value;
  Matrix out(static_cast<int>(ids.size()), tv.cols);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= tv.rows)
      throw std::invalid_argument("embedding_rows: id out of range");
    const double* src = tv.row(ids[r]);
    std::copy(src, src + tv.cols, out.row(static_cast<int>(r)));
  }
  Var y = t.create(std::move(out));
  Param* tp_ = &table;
  t.record([y, tp_, ids = std::move(ids)](Tape& tp) {
    const Matrix& g = tp.grad(y);
    for (std::size_t r = 0; r < ids.size(); ++r)
      for (int c = 0; c < g.cols; ++c)
        tp_->grad.at(ids[r], c) += g.at(static_cast<int>(r), c);
  });
  return y;
}

// Same selection but over an intermediate tape value.
inline Var gather_rows(Tape& t, Var h, std::vector<int> ids) {
  const Matrix& hv = t.value(h);
  Matrix out(static_cast<int>(ids.size()), hv.cols);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= hv.rows)
      throw std::invalid_argument("gather_rows: id out of range");
    const double* src = hv.row(ids[r]);
    std::copy(src, src + hv.cols, out.row(static_cast<int>(r)));
  }
  Var y = t.create(std::move(out));
  t.record([h, y, ids = std::move(ids)](Tape& tp) {
    const Matrix& g = tp.grad(y);
    Matrix& gh = tp.grad(h);
    for (std::size_t r = 0; r < ids.size(); ++r)
      for (int c = 0; c < g.cols; ++c)
        gh.at(ids[r], c) += g.at(static_cast<int>(r), c);
  });
  return y;
}

// Vertical stack of two parameter tables: the initial node feature matrix is
// [user embeddings; item embeddings] in one index space.
inline Var stack_params(Tape& t, Param& top, Param& bottom) {
  check_shape(top.value.cols == bottom.value.cols, "stack_params: column widths");
  Matrix out(top.value.rows + bottom.value.rows, top.value.cols);
  std::copy(top.value.values.begin(), top.value.values.end(), out.values.begin());
  std::copy(bottom.value.values.begin(), bottom.value.values.end(),
            out.values.begin() + top.value.values.size());
  Var y = t.create(std::move(out));
  Param* tpp = &top;
  Param* bpp = &bottom;
  t.record([y, tpp, bpp](Tape& tp) {
    const Matrix& g = tp.grad(y);
    const std::size_t split = tpp->grad.values.size();
    for (std::size_t i = 0; i < split; ++i) tpp->grad.values[i] += g.values[i];
    for (std::size_t i = 0; i < bpp->grad.values.size(); ++i)
      bpp->grad.values[i] += g.values[split + i];
  });
  return y;
}

inline Var concat_cols(Tape& t, Var a, Var b) {
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  check_shape(av.rows == bv.rows, "concat_cols: row counts");
  Matrix out(av.rows, av.cols + bv.cols);
  for (int r = 0; r < av.rows; ++r) {
    std::copy(av.row(r), av.row(r) + av.cols, out.row(r));
    std::copy(bv.row(r), bv.row(r) + bv.cols, out.row(r) + av.cols);
  }
  Var y = t.create(std::move(out));
  const int acols = av.cols;
  t.record([a, b, y, acols](Tape& tp) {
    const Matrix& g = tp.grad(y);
    Matrix& ga = tp.grad(a);
    Matrix& gb = tp.grad(b);
    for (int r = 0; r < g.rows; ++r) {
      for (int c = 0; c < acols; ++c) ga.at(r, c) += g.at(r, c);
      for (int c = acols; c < g.cols; ++c) gb.at(r, c - acols) += g.at(r, c);
    }
  });
  return y;
}

inline Var mul_elem(Tape& t, Var a, Var b) {
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  check_shape(av.same_shape(bv), "mul_elem: shapes");
  Matrix out = av;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] *= bv.values[i];
  Var y = t.create(std::move(out));
  t.record([a, b, y](Tape& tp) {
    const Matrix& g = tp.grad(y);
    const Matrix& av2 = tp.value(a);
    const Matrix& bv2 = tp.value(b);
    Matrix& ga = tp.grad(a);
    Matrix& gb = tp.grad(b);
    for (std::size_t i = 0; i < g.values.size(); ++i) {
      ga.values[i] += g.values[i] * bv2.values[i];
      gb.values[i] += g.values[i] * av2.values[i];
    }
  });
  return y;
}

// ---------------------------------------------------------------------------
// Graph aggregation
// ---------------------------------------------------------------------------

struct AdjEdge {
  int to = 0;
  double weight = 1.0;
};

// Per-node neighbor lists over a unified node index space (users first, then
// items, when built from an interaction graph).
using NodeAdjacency = std::vector<std::vector<AdjEdge>>;

// out[v] = sum over neighbors u of weight(v,u) * H[u]. The adjacency must
// outlive the tape; backward routes gradients along the transposed edges with
// the same weights.
//
// The per-node accumulation order is canonicalized by (weight, row content)
// rather than by neighbor id, so relabeling nodes cannot change the result in
// the last floating-point bit; permutation equivariance of the encoder holds
// exactly, not just approximately.
inline Var neighbor_sum(Tape& t, Var h, const NodeAdjacency& adj) {
  const Matrix& hv = t.value(h);
  check_shape(static_cast<int>(adj.size()) == hv.rows,
              "neighbor_sum: adjacency size vs H rows");
  Matrix out(hv.rows, hv.cols);
  std::vector<int> order;
  for (int v = 0; v < hv.rows; ++v) {
    const auto& edges = adj[v];
    if (edges.empty()) continue;
    order.resize(edges.size());
    for (std::size_t k = 0; k < edges.size(); ++k) order[k] = static_cast<int>(k);
    std::sort(order.begin(), order.end(), [&](int i, int j) {
      if (edges[i].weight != edges[j].weight) return edges[i].weight < edges[j].weight;
      const double* ri = hv.row(edges[i].to);
      const double* rj = hv.row(edges[j].to);
      return std::lexicographical_compare(ri, ri + hv.cols, rj, rj + hv.cols);
    });
    double* dst = out.row(v);
    for (int k : order) {
      const double w = edges[k].weight;
      const double* src = hv.row(edges[k].to);
      for (int c = 0; c < hv.cols; ++c) dst[c] += w * src[c];
    }
  }
  Var y = t.create(std::move(out));
  const NodeAdjacency* ap = &adj;
  t.record([h, y, ap](Tape& tp) {
    const Matrix& g = tp.grad(y);
    Matrix& gh = tp.grad(h);
    for (int v = 0; v < g.rows; ++v) {
      const double* gv = g.row(v);
      for (const AdjEdge& e : (*ap)[v]) {
        double* dst = gh.row(e.to);
        for (int c = 0; c < g.cols; ++c) dst[c] += e.weight * gv[c];
      }
    }
  });
  return y;
}

// out = (1 + eps) * H + S, with eps a learnable 1x1 parameter.
inline Var gin_combine(Tape& t, Var h, Var neighbor, Param& eps) {
  const Matrix& hv = t.value(h);
  const Matrix& sv = t.value(neighbor);
  check_shape(hv.same_shape(sv), "gin_combine: shapes");
  check_shape(eps.value.rows == 1 && eps.value.cols == 1, "gin_combine: eps is 1x1");
  const double scale = 1.0 + eps.value.values[0];
  Matrix out = hv;
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = scale * out.values[i] + sv.values[i];
  Var y = t.create(std::move(out));
  Param* ep = &eps;
  t.record([h, neighbor, y, ep](Tape& tp) {
    const Matrix& g = tp.grad(y);
    const Matrix& hv2 = tp.value(h);
    Matrix& gh = tp.grad(h);
    Matrix& gs = tp.grad(neighbor);
    const double scale = 1.0 + ep->value.values[0];
    double eps_grad = 0.0;
    for (std::size_t i = 0; i < g.values.size(); ++i) {
      gh.values[i] += scale * g.values[i];
      gs.values[i] += g.values[i];
      eps_grad += g.values[i] * hv2.values[i];
    }
    ep->grad.values[0] += eps_grad;
  });
  return y;
}

// Mean binary cross-entropy over logits; labels must be exactly 0 or 1.
inline Var bce_mean(Tape& t, Var logits, const std::vector<double>& labels) {
  const Matrix& zv = t.value(logits);
  check_shape(zv.cols == 1, "bce_mean: logits must be n x 1");
  if (zv.rows < 1) throw std::invalid_argument("bce_mean: empty batch");
  if (static_cast<int>(labels.size()) != zv.rows)
    throw std::invalid_argument("bce_mean: labels length");
  for (double y : labels)
    if (y != 0.0 && y != 1.0)
      throw std::invalid_argument("bce_mean: labels must be binary");
  double total = 0.0;
  for (int r = 0; r < zv.rows; ++r) total += bce_term(zv.values[r], labels[r]);
  Matrix out(1, 1);
  out.values[0] = total / zv.rows;
  Var y = t.create(std::move(out));
  t.record([logits, y, labels](Tape& tp) {
    const double g = tp.grad(y).values[0];
    const Matrix& zv2 = tp.value(logits);
    Matrix& gz = tp.grad(logits);
    const double inv_n = 1.0 / zv2.rows;
    for (int r = 0; r < zv2.rows; ++r)
      gz.values[r] += g * (stable_sigmoid(zv2.values[r]) - labels[r]) * inv_n;
  });
  return y;
}

// Inverted dropout; identity when p == 0 (the default regime).
inline Var dropout(Tape& t, Var x, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must be in [0, 1)");
  if (p == 0.0) return x;
  const Matrix& xv = t.value(x);
  std::vector<double> mask(xv.values.size());
  const double keep_scale = 1.0 / (1.0 - p);
  for (double& m : mask) m = rng.uniform() < p ? 0.0 : keep_scale;
  Matrix out = xv;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] *= mask[i];
  Var y = t.create(std::move(out));
  t.record([x, y, mask = std::move(mask)](Tape& tp) {
    const Matrix& g = tp.grad(y);
    Matrix& gx = tp.grad(x);
    for (std::size_t i = 0; i < g.values.size(); ++i)
      gx.values[i] += g.values[i] * mask[i];
  });
  return y;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checker
// ---------------------------------------------------------------------------

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // "param[index]" of the largest discrepancy
  int checks = 0;
  double tolerance = 1e-4;
  bool passed = true;
};

// Central finite differences against the tape gradients for every element of
// every parameter in the store. build must construct the full forward pass on
// the given tape and return a scalar Var.
template <typename BuildFn>
GradCheckResult grad_check(BuildFn&& build, ParamStore& store, double step = 1e-5,
                           double tolerance = 1e-4) {
  GradCheckResult result;
  result.tolerance = tolerance;

  auto eval = [&]() {
    Tape t;
    Var out = build(t);
    const Matrix& v = t.value(out);
    check_shape(v.rows == 1 && v.cols == 1, "grad_check: function must be scalar");
    return v.values[0];
  };

  store.zero_grads();
  {
    Tape t;
    Var out = build(t);
    t.backward(out);
  }
  std::vector<Matrix> analytic;
  for (const Param& p : store) analytic.push_back(p.grad);

  std::size_t pi = 0;
  for (Param& p : store) {
    for (std::size_t i = 0; i < p.value.values.size(); ++i) {
      const double orig = p.value.values[i];
      p.value.values[i] = orig + step;
      const double f_plus = eval();
      p.value.values[i] = orig - step;
      const double f_minus = eval();
      p.value.values[i] = orig;

      const double fd = (f_plus - f_minus) / (2.0 * step);
      const double an = analytic[pi].values[i];
      const double denom = std::max({1e-2, std::fabs(fd), std::fabs(an)});
      const double rel = std::fabs(fd - an) / denom;
      ++result.checks;
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst = p.name + "[" + std::to_string(i) + "]";
      }
    }
    ++pi;
  }
  store.zero_grads();
  result.passed = result.max_rel_err < tolerance;
  return result;
}

}  // namespace crossgr
