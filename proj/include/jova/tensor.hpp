#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "jova/common.hpp"
#include "jova/io.hpp"

namespace jova {

/// Dense row-major tensor. Everything in the engine is rank-2; scalars are
/// 1x1 and vectors 1xN.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int r, int c)
      : shape{r, c}, data(static_cast<std::size_t>(r) * c, T(0)) {}

  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  std::size_t size() const { return data.size(); }

  T& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
  T at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * cols() + c];
  }

  bool same_shape(const Tensor& o) const {
    return rows() == o.rows() && cols() == o.cols();
  }

  bool finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  static Tensor scalar(T v) {
    Tensor t(1, 1);
    t.data[0] = v;
    return t;
  }
};

namespace detail {

// C += A * B
template <typename T>
void mm_nn(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
  const int m = a.rows(), k = a.cols(), n = b.cols();
  for (int i = 0; i < m; ++i) {
    const T* arow = a.data.data() + static_cast<std::size_t>(i) * k;
    T* crow = c.data.data() + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b.data.data() + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C += A * B^T
template <typename T>
void mm_nt(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
  const int m = a.rows(), k = a.cols(), n = b.rows();
  for (int i = 0; i < m; ++i) {
    const T* arow = a.data.data() + static_cast<std::size_t>(i) * k;
    T* crow = c.data.data() + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* brow = b.data.data() + static_cast<std::size_t>(j) * k;
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C += A^T * B
template <typename T>
void mm_tn(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
  const int k = a.rows(), m = a.cols(), n = b.cols();
  for (int p = 0; p < k; ++p) {
    const T* arow = a.data.data() + static_cast<std::size_t>(p) * m;
    const T* brow = b.data.data() + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T(0)) continue;
      T* crow = c.data.data() + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace detail

/// Reverse-mode tape. Node order is construction order, which is already
/// topological; backward walks it once in reverse.
template <typename T>
class Tape {
 public:
  using Id = int;

  Id constant(Tensor<T> t) { return push(std::move(t), false); }

  Id leaf(Tensor<T> t) { return push(std::move(t), true); }

  const Tensor<T>& value(Id id) const { return nodes_[id].value; }
  Tensor<T>& grad(Id id) { return nodes_[id].grad; }
  bool needs_grad(Id id) const { return nodes_[id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  Id matmul(Id a, Id b) {
    const Tensor<T>&A = val(a), &B = val(b);
    if (A.cols() != B.rows())
      fail(ErrorCode::ShapeMismatch,
           "matmul: " + shape_str(A) + " x " + shape_str(B));
    Tensor<T> out(A.rows(), B.cols());
    detail::mm_nn(A, B, out);
    return push(std::move(out), tracked(a, b), [a, b](Tape& t, Id self) {
      const Tensor<T>& g = t.nodes_[self].grad;
      if (t.needs_grad(a)) detail::mm_nt(g, t.val(b), t.nodes_[a].grad);
      if (t.needs_grad(b)) detail::mm_tn(t.val(a), g, t.nodes_[b].grad);
    });
  }

  /// C = A * B^T  (used for attention scores; avoids a transpose op)
  Id matmul_nt(Id a, Id b) {
    const Tensor<T>&A = val(a), &B = val(b);
    if (A.cols() != B.cols())
      fail(ErrorCode::ShapeMismatch,
           "matmul_nt: " + shape_str(A) + " x " + shape_str(B) + "^T");
    Tensor<T> out(A.rows(), B.rows());
    detail::mm_nt(A, B, out);
    return push(std::move(out), tracked(a, b), [a, b](Tape& t, Id self) {
      const Tensor<T>& g = t.nodes_[self].grad;
      if (t.needs_grad(a)) detail::mm_nn(g, t.val(b), t.nodes_[a].grad);
      if (t.needs_grad(b)) detail::mm_tn(g, t.val(a), t.nodes_[b].grad);
    });
  }

  /// Same-shape addition, or row broadcast when b is 1 x cols.
  Id add(Id a, Id b) {
    const Tensor<T>&A = val(a), &B = val(b);
    const bool bcast = B.rows() == 1 && A.rows() != 1 && B.cols() == A.cols();
    if (!bcast && !A.same_shape(B))
      fail(ErrorCode::ShapeMismatch,
           "add: " + shape_str(A) + " + " + shape_str(B));
    Tensor<T> out = A;
    for (int i = 0; i < A.rows(); ++i)
      for (int j = 0; j < A.cols(); ++j)
        out.at(i, j) += bcast ? B.at(0, j) : B.at(i, j);
    return push(std::move(out), tracked(a, b), [a, b, bcast](Tape& t, Id self) {
      const Tensor<T>& g = t.nodes_[self].grad;
      if (t.needs_grad(a)) {
        Tensor<T>& ga = t.nodes_[a].grad;
        for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
      }
      if (t.needs_grad(b)) {
        Tensor<T>& gb = t.nodes_[b].grad;
        if (bcast) {
          for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j) gb.at(0, j) += g.at(i, j);
        } else {
          for (std::size_t i = 0; i < g.data.size(); ++i)
            gb.data[i] += g.data[i];
        }
      }
    });
  }

  Id sub(Id a, Id b) {
    const Tensor<T>&A = val(a), &B = val(b);
    if (!A.same_shape(B))
      fail(ErrorCode::ShapeMismatch,
           "sub: " + shape_str(A) + " - " + shape_str(B));
    Tensor<T> out = A;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= B.data[i];
    return push(std::move(out), tracked(a, b), [a, b](Tape& t, Id self) {
      const Tensor<T>& g = t.nodes_[self].grad;
      if (t.needs_grad(a)) {
        Tensor<T>& ga = t.nodes_[a].grad;
        for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
      }
      if (t.needs_grad(b)) {
        Tensor<T>& gb = t.nodes_[b].grad;
        for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] -= g.data[i];
      }
    });
  }

  /// Elementwise product, or row broadcast when b is 1 x cols.
  Id mul(Id a, Id b) {
    const Tensor<T>&A = val(a), &B = val(b);
    const bool bcast = B.rows() == 1 && A.rows() != 1 && B.cols() == A.cols();
    if (!bcast && !A.same_shape(B))
      fail(ErrorCode::ShapeMismatch,
           "mul: " + shape_str(A) + " * " + shape_str(B));
    Tensor<T> out = A;
    for (int i = 0; i < A.rows(); ++i)
      for (int j = 0; j < A.cols(); ++j)
        out.at(i, j) *= bcast ? B.at(0, j) : B.at(i, j);
    return push(std::move(out), tracked(a, b), [a, b, bcast](Tape& t, Id self) {
      const Tensor<T>& g = t.nodes_[self].grad;
      const Tensor<T>&A = t.val(a), &B = t.val(b);
      if (t.needs_grad(a)) {
        Tensor<T>& ga = t.nodes_[a].grad;
        for (int i = 0; i < g.rows(); ++i)
          for (int j = 0; j < g.cols(); ++j)
            ga.at(i, j) += g.at(i, j) * (bcast ? B.at(0, j) : B.at(i, j));
      }
      if (t.needs_grad(b)) {
        Tensor<T>& gb = t.nodes_[b].grad;
        if (bcast) {
          for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j)
              gb.at(0, j) += g.at(i, j) * A.at(i, j);
        } else {
          for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j)
              gb.at(i, j) += g.at(i, j) * A.at(i, j);
        }
      }
    });
  }

  Id scale(Id a, T c) {
    Tensor<T> out = val(a);
    for (T& v : out.data) v *= c;
    return push(std::move(out), needs_grad(a), [a, c](Tape& t, Id self) {
      if (!t.needs_grad(a)) return;
      const Tensor<T>& g = t.nodes_[self].grad;
      Tensor<T>& ga = t.nodes_[a].grad;
      for (std::size_t i = 0; i < g.data.size(); ++i)
        ga.data[i] += c * g.data[i];
    });
  }

  Id relu(Id a) {
    Tensor<T> out = val(a);
    for (T& v : out.data) v = v > T(0) ? v : T(0);
    return push(std::move(out), needs_grad(a), [a](Tape& t, Id self) {
      if (!t.needs_grad(a)) return;
      const Tensor<T>& g = t.nodes_[self].grad;
      const Tensor<T>& x = t.val(a);
      Tensor<T>& ga = t.nodes_[a].grad;
      for (std::size_t i = 0; i < g.data.size(); ++i)
        if (x.data[i] > T(0)) ga.data[i] += g.data[i];
    });
  }

  Id sigmoid(Id a) {
    Tensor<T> out = val(a);
    for (T& v : out.data) v = T(1) / (T(1) + std::exp(-v));
    return push(std::move(out), needs_grad(a), [a](Tape& t, Id self) {
      if (!t.needs_grad(a)) return;
      const Tensor<T>& g = t.nodes_[self].grad;
      const Tensor<T>& s = t.nodes_[self].value;
      Tensor<T>& ga = t.nodes_[a].grad;
      for (std::size_t i = 0; i < g.data.size(); ++i)
        ga.data[i] += g.data[i] * s.data[i] * (T(1) - s.data[i]);
    });
  }

  Id tanh_op(Id a) {
    Tensor<T> out = val(a);
    for (T& v : out.data) v = std::tanh(v);
    return push(std::move(out), needs_grad(a), [a](Tape& t, Id self) {
      if (!t.needs_grad(a)) return;
      const Tensor<T>& g = t.nodes_[self].grad;
      const Tensor<T>& y = t.nodes_[self].value;
      Tensor<T>& ga = t.nodes_[a].grad;
      for (std::size_t i = 0; i < g.data.size(); ++i)
        ga.data[i] += g.data[i] * (T(1) - y.data[i] * y.data[i]);
    });
  }

  /// Row-wise softmax over unmasked key columns; masked columns get exactly
  /// zero weight (and propagate zero gradient). Max-subtraction for
  /// stability.
  Id masked_softmax(Id a, const std::vector<std::uint8_t>& key_mask) {
    const Tensor<T>& A = val(a);
    if (static_cast<int>(key_mask.size()) != A.cols())
      fail(ErrorCode::ShapeMismatch, "masked_softmax: mask length " +
                                         std::to_string(key_mask.size()) +
                                         " vs cols " + std::to_string(A.cols()));
    Tensor<T> out(A.rows(), A.cols());
    for (int i = 0; i < A.rows(); ++i) {
      T mx = -std::numeric_limits<T>::infinity();
      for (int j = 0; j < A.cols(); ++j)
        if (key_mask[j] && A.at(i, j) > mx) mx = A.at(i, j);
      if (!std::isfinite(static_cast<double>(mx))) continue;  // all masked
      T sum = T(0);
      for (int j = 0; j < A.cols(); ++j) {
        if (!key_mask[j]) continue;
        T e = std::exp(A.at(i, j) - mx);
        out.at(i, j) = e;
        sum += e;
      }
      for (int j = 0; j < A.cols(); ++j)
        if (key_mask[j]) out.at(i, j) /= sum;
    }
    return push(std::move(out), needs_grad(a),
                [a, key_mask](Tape& t, Id self) {
                  if (!t.needs_grad(a)) return;
                  const Tensor<T>& g = t.nodes_[self].grad;
                  const Tensor<T>& s = t.nodes_[self].value;
                  Tensor<T>& ga = t.nodes_[a].grad;
                  for (int i = 0; i < g.rows(); ++i) {
                    T dot = T(0);
                    for (int j = 0; j < g.cols(); ++j)
                      if (key_mask[j]) dot += g.at(i, j) * s.at(i, j);
                    for (int j = 0; j < g.cols(); ++j)
                      if (key_mask[j])
                        ga.at(i, j) += s.at(i, j) * (g.at(i, j) - dot);
                  }
                });
  }

  /// Per-row normalization over the last axis: (x - mean) / sqrt(var + eps).
  /// No affine; scale/shift are separate parameters in the model.
  Id layer_norm(Id a, T eps) {
    const Tensor<T>& A = val(a);
    const int n = A.cols();
    Tensor<T> out(A.rows(), n);
    std::vector<T> inv_sigma(A.rows());
    for (int i = 0; i < A.rows(); ++i) {
      T mean = T(0);
      for (int j = 0; j < n; ++j) mean += A.at(i, j);
      mean /= static_cast<T>(n);
      T var = T(0);
      for (int j = 0; j < n; ++j) {
        T d = A.at(i, j) - mean;
        var += d * d;
      }
      var /= static_cast<T>(n);
      T is = T(1) / std::sqrt(var + eps);
      inv_sigma[i] = is;
      for (int j = 0; j < n; ++j) out.at(i, j) = (A.at(i, j) - mean) * is;
    }
    return push(std::move(out), needs_grad(a),
                [a, inv_sigma](Tape& t, Id self) {
                  if (!t.needs_grad(a)) return;
                  const Tensor<T>& g = t.nodes_[self].grad;
                  const Tensor<T>& y = t.nodes_[self].value;
                  Tensor<T>& ga = t.nodes_[a].grad;
                  const int n = g.cols();
                  for (int i = 0; i < g.rows(); ++i) {
                    T gmean = T(0), gymean = T(0);
                    for (int j = 0; j < n; ++j) {
                      gmean += g.at(i, j);
                      gymean += g.at(i, j) * y.at(i, j);
                    }
                    gmean /= static_cast<T>(n);
                    gymean /= static_cast<T>(n);
                    for (int j = 0; j < n; ++j)
                      ga.at(i, j) += inv_sigma[i] * (g.at(i, j) - gmean -
                                                     y.at(i, j) * gymean);
                  }
                });
  }

  Id embedding_lookup(Id table, const std::vector<int>& indices) {
    const Tensor<T>& E = val(table);
    Tensor<T> out(static_cast<int>(indices.size()), E.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (indices[i] < 0 || indices[i] >= E.rows())
        fail(ErrorCode::ShapeMismatch,
             "embedding index " + std::to_string(indices[i]) + " out of range");
      for (int j = 0; j < E.cols(); ++j)
        out.at(static_cast<int>(i), j) = E.at(indices[i], j);
    }
    return push(std::move(out), needs_grad(table),
                [table, indices](Tape& t, Id self) {
                  if (!t.needs_grad(table)) return;
                  const Tensor<T>& g = t.nodes_[self].grad;
                  Tensor<T>& ge = t.nodes_[table].grad;
                  for (std::size_t i = 0; i < indices.size(); ++i)
                    for (int j = 0; j < g.cols(); ++j)
                      ge.at(indices[i], j) += g.at(static_cast<int>(i), j);
                });
  }

  Id concat_rows(const std::vector<Id>& parts) {
    if (parts.empty()) fail(ErrorCode::ShapeMismatch, "concat of nothing");
    const int c = val(parts[0]).cols();
    int r = 0;
    bool track = false;
    for (Id p : parts) {
      if (val(p).cols() != c)
        fail(ErrorCode::ShapeMismatch, "concat_rows: column mismatch");
      r += val(p).rows();
      track = track || needs_grad(p);
    }
    Tensor<T> out(r, c);
    int row = 0;
    for (Id p : parts) {
      const Tensor<T>& P = val(p);
      std::copy(P.data.begin(), P.data.end(),
                out.data.begin() + static_cast<std::size_t>(row) * c);
      row += P.rows();
    }
    return push(std::move(out), track, [parts](Tape& t, Id self) {
      const Tensor<T>& g = t.nodes_[self].grad;
      int row = 0;
      for (Id p : parts) {
        const int pr = t.val(p).rows();
        if (t.needs_grad(p)) {
          Tensor<T>& gp = t.nodes_[p].grad;
          for (std::size_t i = 0; i < gp.data.size(); ++i)
            gp.data[i] += g.data[static_cast<std::size_t>(row) * g.cols() + i];
        }
        row += pr;
      }
    });
  }

  Id concat_cols(const std::vector<Id>& parts) {
    if (parts.empty()) fail(ErrorCode::ShapeMismatch, "concat of nothing");
    const int r = val(parts[0]).rows();
    int c = 0;
    bool track = false;
    for (Id p : parts) {
      if (val(p).rows() != r)
        fail(ErrorCode::ShapeMismatch, "concat_cols: row mismatch");
      c += val(p).cols();
      track = track || needs_grad(p);
    }
    Tensor<T> out(r, c);
    int col = 0;
    for (Id p : parts) {
      const Tensor<T>& P = val(p);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < P.cols(); ++j) out.at(i, col + j) = P.at(i, j);
      col += P.cols();
    }
    return push(std::move(out), track, [parts](Tape& t, Id self) {
      const Tensor<T>& g = t.nodes_[self].grad;
      int col = 0;
      for (Id p : parts) {
        const Tensor<T>& P = t.val(p);
        if (t.needs_grad(p)) {
          Tensor<T>& gp = t.nodes_[p].grad;
          for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < P.cols(); ++j)
              gp.at(i, j) += g.at(i, col + j);
        }
        col += P.cols();
      }
    });
  }

  Id rows(Id a, int begin, int end) {
    const Tensor<T>& A = val(a);
    if (begin < 0 || end > A.rows() || begin >= end)
      fail(ErrorCode::ShapeMismatch,
           "rows: [" + std::to_string(begin) + "," + std::to_string(end) +
               ") of " + shape_str(A));
    Tensor<T> out(end - begin, A.cols());
    std::copy(A.data.begin() + static_cast<std::size_t>(begin) * A.cols(),
              A.data.begin() + static_cast<std::size_t>(end) * A.cols(),
              out.data.begin());
    return push(std::move(out), needs_grad(a), [a, begin](Tape& t, Id self) {
      if (!t.needs_grad(a)) return;
      const Tensor<T>& g = t.nodes_[self].grad;
      Tensor<T>& ga = t.nodes_[a].grad;
      const std::size_t off = static_cast<std::size_t>(begin) * g.cols();
      for (std::size_t i = 0; i < g.data.size(); ++i)
        ga.data[off + i] += g.data[i];
    });
  }

  /// Column sums: (r x c) -> (1 x c).
  Id sum_rows(Id a) {
    const Tensor<T>& A = val(a);
    Tensor<T> out(1, A.cols());
    for (int i = 0; i < A.rows(); ++i)
      for (int j = 0; j < A.cols(); ++j) out.at(0, j) += A.at(i, j);
    return push(std::move(out), needs_grad(a), [a](Tape& t, Id self) {
      if (!t.needs_grad(a)) return;
      const Tensor<T>& g = t.nodes_[self].grad;
      Tensor<T>& ga = t.nodes_[a].grad;
      for (int i = 0; i < ga.rows(); ++i)
        for (int j = 0; j < ga.cols(); ++j) ga.at(i, j) += g.at(0, j);
    });
  }

  Id reshape(Id a, int r, int c) {
    const Tensor<T>& A = val(a);
    if (static_cast<std::size_t>(r) * c != A.size())
      fail(ErrorCode::ShapeMismatch, "reshape: size mismatch");
    Tensor<T> out(r, c);
    out.data = A.data;
    return push(std::move(out), needs_grad(a), [a](Tape& t, Id self) {
      if (!t.needs_grad(a)) return;
      const Tensor<T>& g = t.nodes_[self].grad;
      Tensor<T>& ga = t.nodes_[a].grad;
      for (std::size_t i = 0; i < g.data.size(); ++i)
        ga.data[i] += g.data[i];
    });
  }

  /// Zero out rows where keep[i] == 0. Used to force padded segments back to
  /// zero after an attention block.
  Id mask_rows(Id a, const std::vector<std::uint8_t>& keep) {
    const Tensor<T>& A = val(a);
    if (static_cast<int>(keep.size()) != A.rows())
      fail(ErrorCode::ShapeMismatch, "mask_rows: mask length mismatch");
    Tensor<T> out = A;
    for (int i = 0; i < A.rows(); ++i)
      if (!keep[i])
        for (int j = 0; j < A.cols(); ++j) out.at(i, j) = T(0);
    return push(std::move(out), needs_grad(a), [a, keep](Tape& t, Id self) {
      if (!t.needs_grad(a)) return;
      const Tensor<T>& g = t.nodes_[self].grad;
      Tensor<T>& ga = t.nodes_[a].grad;
      for (int i = 0; i < g.rows(); ++i)
        if (keep[i])
          for (int j = 0; j < g.cols(); ++j) ga.at(i, j) += g.at(i, j);
    });
  }

  /// Mean squared error over all elements; throws NumericalOverflow if the
  /// result is not finite.
  Id mse_loss(Id pred, Id truth) {
    const Tensor<T>&P = val(pred), &Y = val(truth);
    if (!P.same_shape(Y))
      fail(ErrorCode::ShapeMismatch,
           "mse_loss: " + shape_str(P) + " vs " + shape_str(Y));
    T acc = T(0);
    for (std::size_t i = 0; i < P.data.size(); ++i) {
      T d = P.data[i] - Y.data[i];
      acc += d * d;
    }
    acc /= static_cast<T>(P.data.size());
    if (!std::isfinite(static_cast<double>(acc)))
      fail(ErrorCode::NumericalOverflow, "loss became non-finite");
    return push(Tensor<T>::scalar(acc), tracked(pred, truth),
                [pred, truth](Tape& t, Id self) {
                  const Tensor<T>& g = t.nodes_[self].grad;
                  const Tensor<T>&P = t.val(pred), &Y = t.val(truth);
                  const T scale =
                      g.data[0] * T(2) / static_cast<T>(P.data.size());
                  if (t.needs_grad(pred)) {
                    Tensor<T>& gp = t.nodes_[pred].grad;
                    for (std::size_t i = 0; i < P.data.size(); ++i)
                      gp.data[i] += scale * (P.data[i] - Y.data[i]);
                  }
                  if (t.needs_grad(truth)) {
                    Tensor<T>& gy = t.nodes_[truth].grad;
                    for (std::size_t i = 0; i < P.data.size(); ++i)
                      gy.data[i] -= scale * (P.data[i] - Y.data[i]);
                  }
                });
  }

  void backward(Id loss) {
    if (nodes_.empty()) fail(ErrorCode::ShapeMismatch, "backward on empty tape");
    if (val(loss).size() != 1)
      fail(ErrorCode::ShapeMismatch, "backward requires a scalar loss");
    nodes_[loss].grad.data[0] = T(1);
    for (Id id = loss; id >= 0; --id) {
      Node& n = nodes_[id];
      if (n.needs_grad && n.back) n.back(*this, id);
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool needs_grad = false;
    std::function<void(Tape&, Id)> back;
  };

  std::vector<Node> nodes_;

  const Tensor<T>& val(Id id) const { return nodes_[id].value; }

  bool tracked(Id a, Id b) const { return needs_grad(a) || needs_grad(b); }

  static std::string shape_str(const Tensor<T>& t) {
    return "(" + std::to_string(t.rows()) + "," + std::to_string(t.cols()) +
           ")";
  }

  Id push(Tensor<T> value, bool needs_grad,
          std::function<void(Tape&, Id)> back = nullptr) {
    Node n;
    n.grad = Tensor<T>(value.rows(), value.cols());
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
  }
};

template <typename T>
struct Parameter {
  Tensor<T> value;
  Tensor<T> grad;
};

/// Named parameter set; std::map keeps iteration order deterministic, and
/// creation happens in a fixed order so seeded init is reproducible.
template <typename T>
class ParameterStore {
 public:
  Tensor<T>& create(const std::string& name, int r, int c) {
    auto [it, inserted] = params_.try_emplace(name);
    if (!inserted)
      fail(ErrorCode::ConfigError, "duplicate parameter name '" + name + "'");
    it->second.value = Tensor<T>(r, c);
    it->second.grad = Tensor<T>(r, c);
    return it->second.value;
  }

  bool has(const std::string& name) const { return params_.count(name) > 0; }

  Parameter<T>& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end())
      fail(ErrorCode::ConfigError, "unknown parameter '" + name + "'");
    return it->second;
  }

  const std::map<std::string, Parameter<T>>& all() const { return params_; }
  std::map<std::string, Parameter<T>>& all() { return params_; }

  void zero_grads() {
    for (auto& [name, p] : params_)
      std::fill(p.grad.data.begin(), p.grad.data.end(), T(0));
  }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& [name, p] : params_) n += p.value.size();
    return n;
  }

 private:
  std::map<std::string, Parameter<T>> params_;
};

/// Binds store parameters to tape leaves on demand; one leaf per parameter
/// per tape, shared across all samples of a batch.
template <typename T>
class BoundParams {
 public:
  BoundParams(Tape<T>& tape, ParameterStore<T>& store)
      : tape_(tape), store_(store) {}

  typename Tape<T>::Id operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    typename Tape<T>::Id id = tape_.leaf(store_.at(name).value);
    bound_.emplace(name, id);
    return id;
  }

  /// After backward: fold tape gradients back into the store.
  void accumulate_grads() {
    for (const auto& [name, id] : bound_) {
      Tensor<T>& dst = store_.at(name).grad;
      const Tensor<T>& src = tape_.grad(id);
      for (std::size_t i = 0; i < dst.data.size(); ++i)
        dst.data[i] += src.data[i];
    }
  }

 private:
  Tape<T>& tape_;
  ParameterStore<T>& store_;
  std::map<std::string, typename Tape<T>::Id> bound_;
};

/// Standard Adam with bias correction; state keyed by parameter name.
template <typename T>
class Adam {
 public:
  Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParameterStore<T>& store) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& [name, p] : store.all()) {
      auto& [m, v] = state_[name];
      if (m.size() != p.value.size()) {
        m.assign(p.value.size(), T(0));
        v.assign(p.value.size(), T(0));
      }
      for (std::size_t i = 0; i < p.value.data.size(); ++i) {
        const T g = p.grad.data[i];
        m[i] = static_cast<T>(beta1_) * m[i] + static_cast<T>(1.0 - beta1_) * g;
        v[i] = static_cast<T>(beta2_) * v[i] +
               static_cast<T>(1.0 - beta2_) * g * g;
        const double mhat = static_cast<double>(m[i]) / bc1;
        const double vhat = static_cast<double>(v[i]) / bc2;
        p.value.data[i] -=
            static_cast<T>(lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  void reset() {
    t_ = 0;
    state_.clear();
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<std::string, std::pair<std::vector<T>, std::vector<T>>> state_;
};

/// Fan-in-scaled uniform init for affine weights, seed-controlled.
template <typename T>
void init_uniform(Tensor<T>& t, Rng& rng, double scale) {
  for (T& v : t.data) v = static_cast<T>(rng.uniform(-scale, scale));
}

template <typename T>
std::vector<NamedArray> store_to_arrays(const ParameterStore<T>& store) {
  std::vector<NamedArray> out;
  for (const auto& [name, p] : store.all()) {
    NamedArray arr;
    arr.name = name;
    arr.dtype = "f32";
    arr.shape = {p.value.rows(), p.value.cols()};
    arr.data.assign(p.value.data.begin(), p.value.data.end());
    // values pass through float32 so the on-disk form is the value
    for (double& d : arr.data) d = static_cast<double>(static_cast<float>(d));
    out.push_back(std::move(arr));
  }
  return out;
}

template <typename T>
void arrays_to_store(const std::vector<NamedArray>& arrays,
                     ParameterStore<T>& store) {
  for (const NamedArray& arr : arrays) {
    if (!store.has(arr.name))
      fail(ErrorCode::IoError,
           "checkpoint tensor '" + arr.name + "' not in model");
    Parameter<T>& p = store.at(arr.name);
    if (arr.element_count() != p.value.size())
      fail(ErrorCode::IoError,
           "checkpoint tensor '" + arr.name + "' has wrong size");
    for (std::size_t i = 0; i < arr.data.size(); ++i)
      p.value.data[i] = static_cast<T>(arr.data[i]);
  }
}

}  // namespace jova
