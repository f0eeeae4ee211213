#pragma once

// Reverse-mode automatic differentiation over dense 2-D double tensors.
// Values are computed eagerly as ops are recorded on a Tape; backward()
// replays the tape in reverse. Scope is exactly what the parser model needs:
// no broadcasting beyond row/column vectors, no views, no GPU.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "udep/errors.hpp"
#include "udep/rng.hpp"

namespace udep::ad {

struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;  // row-major
  bool requires_grad = false;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}
  Tensor(int r, int c, std::vector<double> data) : rows(r), cols(c), v(std::move(data)) {
    if (v.size() != static_cast<std::size_t>(r) * c)
      throw ShapeError("tensor data length does not match shape " + shape_str());
  }

  static Tensor zeros(int r, int c) { return Tensor(r, c); }
  static Tensor full(int r, int c, double x) {
    Tensor t(r, c);
    for (auto& e : t.v) e = x;
    return t;
  }
  static Tensor scalar(double x) { return Tensor(1, 1, {x}); }

  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
  long numel() const { return static_cast<long>(rows) * cols; }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_str() const {
    return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
  }
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  // Leaf with gradient tracking controlled by t.requires_grad.
  Var leaf(Tensor t) { return push(Op::kLeaf, {}, std::move(t)); }

  Var constant(Tensor t) {
    t.requires_grad = false;
    return push(Op::kLeaf, {}, std::move(t));
  }

  const Tensor& val(Var x) const { return nodes_[check(x)].val; }
  const Tensor& grad(Var x) const {
    const Node& n = nodes_[check(x)];
    if (n.grad.numel() == 0) throw ContractError("gradient not computed; call backward() first");
    return n.grad;
  }

  // ---- ops ----

  Var matmul(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.cols != B.rows) throw ShapeError("matmul: " + A.shape_str() + " x " + B.shape_str());
    Tensor out(A.rows, B.cols);
    for (int i = 0; i < A.rows; ++i) {
      const double* arow = &A.v[static_cast<std::size_t>(i) * A.cols];
      double* orow = &out.v[static_cast<std::size_t>(i) * out.cols];
      for (int k = 0; k < A.cols; ++k) {
        double aik = arow[k];
        if (aik == 0.0) continue;
        const double* brow = &B.v[static_cast<std::size_t>(k) * B.cols];
        for (int j = 0; j < B.cols; ++j) orow[j] += aik * brow[j];
      }
    }
    return push(Op::kMatmul, {a, b}, std::move(out));
  }

  Var transpose(Var a) {
    const Tensor& A = val(a);
    Tensor out(A.cols, A.rows);
    for (int i = 0; i < A.rows; ++i)
      for (int j = 0; j < A.cols; ++j) out.at(j, i) = A.at(i, j);
    return push(Op::kTranspose, {a}, std::move(out));
  }

  // Same shape, or b broadcast from one row (1xk) or one column (mx1).
  Var add(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    Tensor out = A;
    out.requires_grad = false;
    if (B.rows == A.rows && B.cols == A.cols) {
      for (long i = 0; i < A.numel(); ++i) out.v[i] += B.v[i];
    } else if (B.rows == 1 && B.cols == A.cols) {
      for (int i = 0; i < A.rows; ++i)
        for (int j = 0; j < A.cols; ++j) out.at(i, j) += B.at(0, j);
    } else if (B.cols == 1 && B.rows == A.rows) {
      for (int i = 0; i < A.rows; ++i)
        for (int j = 0; j < A.cols; ++j) out.at(i, j) += B.at(i, 0);
    } else {
      throw ShapeError("add: " + A.shape_str() + " + " + B.shape_str());
    }
    return push(Op::kAdd, {a, b}, std::move(out));
  }

  // Elementwise product; b may broadcast from one row (1xk).
  Var mul(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    Tensor out = A;
    out.requires_grad = false;
    if (B.rows == A.rows && B.cols == A.cols) {
      for (long i = 0; i < A.numel(); ++i) out.v[i] *= B.v[i];
    } else if (B.rows == 1 && B.cols == A.cols) {
      for (int i = 0; i < A.rows; ++i)
        for (int j = 0; j < A.cols; ++j) out.at(i, j) *= B.at(0, j);
    } else {
      throw ShapeError("mul: " + A.shape_str() + " * " + B.shape_str());
    }
    return push(Op::kMul, {a, b}, std::move(out));
  }

  Var scale(Var a, double c) {
    Tensor out = val(a);
    out.requires_grad = false;
    for (auto& e : out.v) e *= c;
    Var r = push(Op::kScale, {a}, std::move(out));
    nodes_[r.id].x = c;
    return r;
  }

  Var sum(Var a) {
    const Tensor& A = val(a);
    double s = 0;
    for (double e : A.v) s += e;
    return push(Op::kSum, {a}, Tensor::scalar(s));
  }

  // Vertical stack: (p x k) over (q x k) -> (p+q) x k.
  Var concat_rows(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.cols != B.cols)
      throw ShapeError("concat_rows: " + A.shape_str() + " over " + B.shape_str());
    Tensor out(A.rows + B.rows, A.cols);
    std::copy(A.v.begin(), A.v.end(), out.v.begin());
    std::copy(B.v.begin(), B.v.end(), out.v.begin() + A.v.size());
    return push(Op::kConcatRows, {a, b}, std::move(out));
  }

  // Horizontal stack: (m x p) beside (m x q) -> m x (p+q).
  Var concat_cols(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rows != B.rows)
      throw ShapeError("concat_cols: " + A.shape_str() + " beside " + B.shape_str());
    Tensor out(A.rows, A.cols + B.cols);
    for (int i = 0; i < A.rows; ++i) {
      for (int j = 0; j < A.cols; ++j) out.at(i, j) = A.at(i, j);
      for (int j = 0; j < B.cols; ++j) out.at(i, A.cols + j) = B.at(i, j);
    }
    return push(Op::kConcatCols, {a, b}, std::move(out));
  }

  Var relu(Var a) {
    Tensor out = val(a);
    out.requires_grad = false;
    for (auto& e : out.v) e = e > 0 ? e : 0.0;
    return push(Op::kRelu, {a}, std::move(out));
  }

  Var softmax_rows(Var a) {
    Tensor out = val(a);
    out.requires_grad = false;
    for (int i = 0; i < out.rows; ++i) softmax_row_inplace(&out.v[static_cast<std::size_t>(i) * out.cols], out.cols);
    return push(Op::kSoftmaxRows, {a}, std::move(out));
  }

  Var log_softmax_rows(Var a) {
    const Tensor& A = val(a);
    Tensor out = A;
    out.requires_grad = false;
    for (int i = 0; i < out.rows; ++i) {
      double* row = &out.v[static_cast<std::size_t>(i) * out.cols];
      double lse = log_sum_exp(row, out.cols);
      for (int j = 0; j < out.cols; ++j) row[j] -= lse;
    }
    return push(Op::kLogSoftmaxRows, {a}, std::move(out));
  }

  // Per-row standardization with population variance. No affine part; apply
  // gain/bias with mul/add on parameter row vectors.
  Var layer_norm_rows(Var a) {
    const Tensor& A = val(a);
    if (A.cols < 1) throw ShapeError("layer_norm_rows: " + A.shape_str());
    Tensor out(A.rows, A.cols);
    for (int i = 0; i < A.rows; ++i) {
      double mean = 0, var = 0;
      for (int j = 0; j < A.cols; ++j) mean += A.at(i, j);
      mean /= A.cols;
      for (int j = 0; j < A.cols; ++j) {
        double d = A.at(i, j) - mean;
        var += d * d;
      }
      var /= A.cols;
      double inv = 1.0 / std::sqrt(var + kLayerNormEps);
      for (int j = 0; j < A.cols; ++j) out.at(i, j) = (A.at(i, j) - mean) * inv;
    }
    return push(Op::kLayerNorm, {a}, std::move(out));
  }

  // Inverted dropout with an explicit seed; p = 0 is the identity.
  Var dropout(Var a, double p, std::uint64_t seed) {
    if (p < 0.0 || p >= 1.0) throw ContractError("dropout: p must be in [0,1)");
    const Tensor& A = val(a);
    Tensor out = A;
    out.requires_grad = false;
    std::vector<double> mask(A.numel(), 1.0);
    if (p > 0.0) {
      Rng rng(seed);
      double keep_scale = 1.0 / (1.0 - p);
      for (long i = 0; i < A.numel(); ++i) {
        mask[i] = rng.next_double() < p ? 0.0 : keep_scale;
        out.v[i] *= mask[i];
      }
    }
    Var r = push(Op::kDropout, {a}, std::move(out));
    nodes_[r.id].mask = std::move(mask);
    return r;
  }

  Var gather_rows(Var a, std::vector<int> ids) {
    const Tensor& A = val(a);
    for (int id : ids)
      if (id < 0 || id >= A.rows)
        throw ShapeError("gather_rows: index " + std::to_string(id) + " out of " +
                         std::to_string(A.rows) + " rows");
    Tensor out(static_cast<int>(ids.size()), A.cols);
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (int j = 0; j < A.cols; ++j) out.at(static_cast<int>(i), j) = A.at(ids[i], j);
    Var r = push(Op::kGatherRows, {a}, std::move(out));
    nodes_[r.id].ids = std::move(ids);
    return r;
  }

  // Mean over rows of -log softmax(row)[target]. Returns a 1x1 tensor.
  Var cross_entropy(Var logits, std::vector<int> targets) {
    const Tensor& A = val(logits);
    if (static_cast<int>(targets.size()) != A.rows)
      throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                       A.shape_str());
    for (int t : targets)
      if (t < 0 || t >= A.cols) throw ContractError("cross_entropy: target out of range");
    double total = 0;
    for (int i = 0; i < A.rows; ++i) {
      const double* row = &A.v[static_cast<std::size_t>(i) * A.cols];
      total += log_sum_exp(row, A.cols) - row[targets[i]];
    }
    Var r = push(Op::kCrossEntropy, {logits}, Tensor::scalar(total / A.rows));
    nodes_[r.id].ids = std::move(targets);
    return r;
  }

  // B[i][j] = q_i . table[clamp(j - i, -clip, clip) + clip]
  // (the query-key relative-position term of self-attention).
  Var rel_attn_bias(Var q, Var table, int clip) {
    const Tensor& Q = val(q);
    const Tensor& T = val(table);
    if (T.rows != 2 * clip + 1 || T.cols != Q.cols)
      throw ShapeError("rel_attn_bias: table " + T.shape_str() + " for queries " + Q.shape_str() +
                       " clip " + std::to_string(clip));
    int m = Q.rows;
    Tensor out(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        const double* trow = &T.v[static_cast<std::size_t>(rel_index(j - i, clip)) * T.cols];
        const double* qrow = &Q.v[static_cast<std::size_t>(i) * Q.cols];
        double s = 0;
        for (int t = 0; t < Q.cols; ++t) s += qrow[t] * trow[t];
        out.at(i, j) = s;
      }
    Var r = push(Op::kRelAttnBias, {q, table}, std::move(out));
    nodes_[r.id].clip = clip;
    return r;
  }

  // C[i] = sum_j P[i][j] * table[clamp(j - i, -clip, clip) + clip]
  // (the value-side relative-position term).
  Var rel_attn_values(Var probs, Var table, int clip) {
    const Tensor& P = val(probs);
    const Tensor& T = val(table);
    if (P.rows != P.cols) throw ShapeError("rel_attn_values: probs must be square, got " + P.shape_str());
    if (T.rows != 2 * clip + 1)
      throw ShapeError("rel_attn_values: table " + T.shape_str() + " for clip " + std::to_string(clip));
    int m = P.rows;
    Tensor out(m, T.cols);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double p = P.at(i, j);
        if (p == 0.0) continue;
        const double* trow = &T.v[static_cast<std::size_t>(rel_index(j - i, clip)) * T.cols];
        double* orow = &out.v[static_cast<std::size_t>(i) * out.cols];
        for (int t = 0; t < T.cols; ++t) orow[t] += p * trow[t];
      }
    Var r = push(Op::kRelAttnValues, {probs, table}, std::move(out));
    nodes_[r.id].clip = clip;
    return r;
  }

  // Biaffine label scores. For dependent j and label l:
  //   N[l][j] = hs_j U_l d_j + wh_l . hs_j + wd_l . d_j + b_l
  // hs, d: n x e. u: (L*e) x e, row block l*e..(l+1)*e is U_l. wh, wd: L x e. b: 1 x L.
  Var label_biaffine(Var hs, Var d, Var u, Var wh, Var wd, Var b) {
    const Tensor& Hs = val(hs);
    const Tensor& D = val(d);
    const Tensor& U = val(u);
    const Tensor& Wh = val(wh);
    const Tensor& Wd = val(wd);
    const Tensor& B = val(b);
    int n = Hs.rows, e = Hs.cols;
    int L = Wh.rows;
    if (D.rows != n || D.cols != e || U.rows != L * e || U.cols != e || Wh.cols != e ||
        Wd.rows != L || Wd.cols != e || B.rows != 1 || B.cols != L)
      throw ShapeError("label_biaffine: inconsistent shapes hs" + Hs.shape_str() + " d" +
                       D.shape_str() + " u" + U.shape_str() + " wh" + Wh.shape_str() + " wd" +
                       Wd.shape_str() + " b" + B.shape_str());
    Tensor out(L, n);
    std::vector<double> ud(e);
    for (int l = 0; l < L; ++l) {
      for (int j = 0; j < n; ++j) {
        const double* hrow = &Hs.v[static_cast<std::size_t>(j) * e];
        const double* drow = &D.v[static_cast<std::size_t>(j) * e];
        double s = B.at(0, l);
        for (int t = 0; t < e; ++t) {
          s += Wh.at(l, t) * hrow[t] + Wd.at(l, t) * drow[t];
        }
        for (int sidx = 0; sidx < e; ++sidx) {
          double hv = hrow[sidx];
          if (hv == 0.0) continue;
          const double* urow = &U.v[(static_cast<std::size_t>(l) * e + sidx) * e];
          double acc = 0;
          for (int t = 0; t < e; ++t) acc += urow[t] * drow[t];
          s += hv * acc;
        }
        out.at(l, j) = s;
      }
    }
    return push(Op::kLabelBiaffine, {hs, d, u, wh, wd, b}, std::move(out));
  }

  // Reverse pass from a scalar loss. Gradients of every node (leaves included)
  // sum over all uses; untouched leaves end up with zero gradients.
  void backward(Var loss) {
    Node& ln = nodes_[check(loss)];
    if (ln.val.rows != 1 || ln.val.cols != 1)
      throw ContractError("backward: loss must be a scalar, got " + ln.val.shape_str());
    for (Node& n : nodes_) n.grad = Tensor::zeros(n.val.rows, n.val.cols);
    ln.grad.v[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) backward_node(i);
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  static constexpr double kLayerNormEps = 1e-8;

  enum class Op {
    kLeaf,
    kMatmul,
    kTranspose,
    kAdd,
    kMul,
    kScale,
    kSum,
    kConcatRows,
    kConcatCols,
    kRelu,
    kSoftmaxRows,
    kLogSoftmaxRows,
    kLayerNorm,
    kDropout,
    kGatherRows,
    kCrossEntropy,
    kRelAttnBias,
    kRelAttnValues,
    kLabelBiaffine,
  };

  struct Node {
    Op op;
    std::vector<int> in;
    Tensor val;
    Tensor grad;
    double x = 0;               // scale factor
    int clip = 0;               // relative-position clip
    std::vector<int> ids;       // gather indices / cross-entropy targets
    std::vector<double> mask;   // dropout multipliers
  };

  std::vector<Node> nodes_;

  int check(Var x) const {
    if (!x.valid() || x.id >= static_cast<int>(nodes_.size()))
      throw ContractError("invalid tape variable");
    return x.id;
  }

  Var push(Op op, std::vector<Var> inputs, Tensor val) {
    Node n;
    n.op = op;
    for (Var v : inputs) n.in.push_back(check(v));
    n.val = std::move(val);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  static int rel_index(int delta, int clip) {
    if (delta < -clip) delta = -clip;
    if (delta > clip) delta = clip;
    return delta + clip;
  }

  static double log_sum_exp(const double* row, int n) {
    double mx = row[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double s = 0;
    for (int j = 0; j < n; ++j) s += std::exp(row[j] - mx);
    return mx + std::log(s);
  }

  static void softmax_row_inplace(double* row, int n) {
    double mx = row[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double s = 0;
    for (int j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - mx);
      s += row[j];
    }
    for (int j = 0; j < n; ++j) row[j] /= s;
  }

  void backward_node(int idx) {
    Node& n = nodes_[idx];
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatmul: {
        Node& a = nodes_[n.in[0]];
        Node& b = nodes_[n.in[1]];
        // dA += g . B^T ; dB += A^T . g
        for (int i = 0; i < a.val.rows; ++i)
          for (int k = 0; k < a.val.cols; ++k) {
            double s = 0;
            for (int j = 0; j < b.val.cols; ++j) s += g.at(i, j) * b.val.at(k, j);
            a.grad.at(i, k) += s;
          }
        for (int k = 0; k < b.val.rows; ++k)
          for (int j = 0; j < b.val.cols; ++j) {
            double s = 0;
            for (int i = 0; i < a.val.rows; ++i) s += a.val.at(i, k) * g.at(i, j);
            b.grad.at(k, j) += s;
          }
        break;
      }
      case Op::kTranspose: {
        Node& a = nodes_[n.in[0]];
        for (int i = 0; i < a.val.rows; ++i)
          for (int j = 0; j < a.val.cols; ++j) a.grad.at(i, j) += g.at(j, i);
        break;
      }
      case Op::kAdd: {
        Node& a = nodes_[n.in[0]];
        Node& b = nodes_[n.in[1]];
        for (long i = 0; i < g.numel(); ++i) a.grad.v[i] += g.v[i];
        if (b.val.same_shape(n.val)) {
          for (long i = 0; i < g.numel(); ++i) b.grad.v[i] += g.v[i];
        } else if (b.val.rows == 1) {
          for (int i = 0; i < g.rows; ++i)
            for (int j = 0; j < g.cols; ++j) b.grad.at(0, j) += g.at(i, j);
        } else {
          for (int i = 0; i < g.rows; ++i)
            for (int j = 0; j < g.cols; ++j) b.grad.at(i, 0) += g.at(i, j);
        }
        break;
      }
      case Op::kMul: {
        Node& a = nodes_[n.in[0]];
        Node& b = nodes_[n.in[1]];
        if (b.val.same_shape(n.val)) {
          for (long i = 0; i < g.numel(); ++i) {
            a.grad.v[i] += g.v[i] * b.val.v[i];
            b.grad.v[i] += g.v[i] * a.val.v[i];
          }
        } else {
          for (int i = 0; i < g.rows; ++i)
            for (int j = 0; j < g.cols; ++j) {
              a.grad.at(i, j) += g.at(i, j) * b.val.at(0, j);
              b.grad.at(0, j) += g.at(i, j) * a.val.at(i, j);
            }
        }
        break;
      }
      case Op::kScale: {
        Node& a = nodes_[n.in[0]];
        for (long i = 0; i < g.numel(); ++i) a.grad.v[i] += g.v[i] * n.x;
        break;
      }
      case Op::kSum: {
        Node& a = nodes_[n.in[0]];
        for (long i = 0; i < a.val.numel(); ++i) a.grad.v[i] += g.v[0];
        break;
      }
      case Op::kConcatRows: {
        Node& a = nodes_[n.in[0]];
        Node& b = nodes_[n.in[1]];
        std::size_t na = a.val.v.size();
        for (std::size_t i = 0; i < na; ++i) a.grad.v[i] += g.v[i];
        for (std::size_t i = 0; i < b.val.v.size(); ++i) b.grad.v[i] += g.v[na + i];
        break;
      }
      case Op::kConcatCols: {
        Node& a = nodes_[n.in[0]];
        Node& b = nodes_[n.in[1]];
        for (int i = 0; i < g.rows; ++i) {
          for (int j = 0; j < a.val.cols; ++j) a.grad.at(i, j) += g.at(i, j);
          for (int j = 0; j < b.val.cols; ++j) b.grad.at(i, j) += g.at(i, a.val.cols + j);
        }
        break;
      }
      case Op::kRelu: {
        Node& a = nodes_[n.in[0]];
        for (long i = 0; i < g.numel(); ++i)
          if (a.val.v[i] > 0) a.grad.v[i] += g.v[i];
        break;
      }
      case Op::kSoftmaxRows: {
        Node& a = nodes_[n.in[0]];
        for (int i = 0; i < g.rows; ++i) {
          double dot = 0;
          for (int j = 0; j < g.cols; ++j) dot += g.at(i, j) * n.val.at(i, j);
          for (int j = 0; j < g.cols; ++j)
            a.grad.at(i, j) += n.val.at(i, j) * (g.at(i, j) - dot);
        }
        break;
      }
      case Op::kLogSoftmaxRows: {
        Node& a = nodes_[n.in[0]];
        for (int i = 0; i < g.rows; ++i) {
          double gsum = 0;
          for (int j = 0; j < g.cols; ++j) gsum += g.at(i, j);
          for (int j = 0; j < g.cols; ++j)
            a.grad.at(i, j) += g.at(i, j) - std::exp(n.val.at(i, j)) * gsum;
        }
        break;
      }
      case Op::kLayerNorm: {
        Node& a = nodes_[n.in[0]];
        int k = a.val.cols;
        for (int i = 0; i < g.rows; ++i) {
          double mean = 0, var = 0;
          for (int j = 0; j < k; ++j) mean += a.val.at(i, j);
          mean /= k;
          for (int j = 0; j < k; ++j) {
            double d = a.val.at(i, j) - mean;
            var += d * d;
          }
          var /= k;
          double inv = 1.0 / std::sqrt(var + kLayerNormEps);
          double gmean = 0, gymean = 0;
          for (int j = 0; j < k; ++j) {
            gmean += g.at(i, j);
            gymean += g.at(i, j) * n.val.at(i, j);
          }
          gmean /= k;
          gymean /= k;
          for (int j = 0; j < k; ++j)
            a.grad.at(i, j) += inv * (g.at(i, j) - gmean - n.val.at(i, j) * gymean);
        }
        break;
      }
      case Op::kDropout: {
        Node& a = nodes_[n.in[0]];
        for (long i = 0; i < g.numel(); ++i) a.grad.v[i] += g.v[i] * n.mask[i];
        break;
      }
      case Op::kGatherRows: {
        Node& a = nodes_[n.in[0]];
        for (std::size_t i = 0; i < n.ids.size(); ++i)
          for (int j = 0; j < g.cols; ++j)
            a.grad.at(n.ids[i], j) += g.at(static_cast<int>(i), j);
        break;
      }
      case Op::kCrossEntropy: {
        Node& a = nodes_[n.in[0]];
        double gscale = g.v[0] / a.val.rows;
        for (int i = 0; i < a.val.rows; ++i) {
          const double* row = &a.val.v[static_cast<std::size_t>(i) * a.val.cols];
          double lse = log_sum_exp(row, a.val.cols);
          for (int j = 0; j < a.val.cols; ++j) {
            double p = std::exp(row[j] - lse);
            a.grad.at(i, j) += gscale * (p - (j == n.ids[i] ? 1.0 : 0.0));
          }
        }
        break;
      }
      case Op::kRelAttnBias: {
        Node& q = nodes_[n.in[0]];
        Node& t = nodes_[n.in[1]];
        int m = n.val.rows;
        int e = q.val.cols;
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j) {
            double gij = g.at(i, j);
            if (gij == 0.0) continue;
            int r = rel_index(j - i, n.clip);
            for (int s = 0; s < e; ++s) {
              q.grad.at(i, s) += gij * t.val.at(r, s);
              t.grad.at(r, s) += gij * q.val.at(i, s);
            }
          }
        break;
      }
      case Op::kRelAttnValues: {
        Node& p = nodes_[n.in[0]];
        Node& t = nodes_[n.in[1]];
        int m = p.val.rows;
        int e = t.val.cols;
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j) {
            int r = rel_index(j - i, n.clip);
            double s = 0;
            for (int c = 0; c < e; ++c) {
              s += g.at(i, c) * t.val.at(r, c);
              t.grad.at(r, c) += g.at(i, c) * p.val.at(i, j);
            }
            p.grad.at(i, j) += s;
          }
        break;
      }
      case Op::kLabelBiaffine: {
        Node& hs = nodes_[n.in[0]];
        Node& d = nodes_[n.in[1]];
        Node& u = nodes_[n.in[2]];
        Node& wh = nodes_[n.in[3]];
        Node& wd = nodes_[n.in[4]];
        Node& b = nodes_[n.in[5]];
        int nn = hs.val.rows, e = hs.val.cols, L = wh.val.rows;
        for (int l = 0; l < L; ++l) {
          for (int j = 0; j < nn; ++j) {
            double glj = g.at(l, j);
            if (glj == 0.0) continue;
            const double* hrow = &hs.val.v[static_cast<std::size_t>(j) * e];
            const double* drow = &d.val.v[static_cast<std::size_t>(j) * e];
            b.grad.at(0, l) += glj;
            for (int s = 0; s < e; ++s) {
              wh.grad.at(l, s) += glj * hrow[s];
              wd.grad.at(l, s) += glj * drow[s];
            }
            for (int s = 0; s < e; ++s) {
              const double* urow = &u.val.v[(static_cast<std::size_t>(l) * e + s) * e];
              double* ugrow = &u.grad.v[(static_cast<std::size_t>(l) * e + s) * e];
              double udot = 0;
              for (int t = 0; t < e; ++t) {
                udot += urow[t] * drow[t];
                ugrow[t] += glj * hrow[s] * drow[t];
                d.grad.at(j, t) += glj * hrow[s] * urow[t];
              }
              hs.grad.at(j, s) += glj * udot;
            }
            for (int t = 0; t < e; ++t) {
              hs.grad.at(j, t) += glj * wh.val.at(l, t);
              d.grad.at(j, t) += glj * wd.val.at(l, t);
            }
          }
        }
        break;
      }
    }
  }
};

}  // namespace udep::ad
