#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mw/common.hpp"

namespace mw::nn {

using Mat = Eigen::MatrixXd;

/// Reverse-mode autodiff tape over dense matrices. Nodes are appended in
/// construction order, which is a topological order, so backward() is a
/// single reverse sweep. With recording off, ops compute values only.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }

  int leaf(Mat value) {
    nodes_.push_back(Node{std::move(value), Mat(), nullptr});
    return static_cast<int>(nodes_.size()) - 1;
  }

  int op(Mat value, std::function<void(Tape&, int)> pull) {
    nodes_.push_back(Node{std::move(value), Mat(), std::move(pull)});
    return static_cast<int>(nodes_.size()) - 1;
  }

  const Mat& val(int id) const { return nodes_[id].value; }

  /// Gradient accumulator for a node, zero-initialized on first touch.
  Mat& grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0)
      n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  bool has_grad(int id) const { return nodes_[id].grad.size() != 0; }

  /// Gradient of a node after backward(); zero matrix if it never received
  /// any gradient.
  Mat grad_or_zero(int id) const {
    const Node& n = nodes_[id];
    if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  /// Seeds d(root)/d(root) = 1 and pulls gradients back through the tape.
  /// The root must be a 1x1 node.
  void backward(int root) {
    if (nodes_[root].value.size() != 1)
      throw InvalidInputError("backward: root must be a scalar node");
    grad(root)(0, 0) += 1.0;
    for (int i = root; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.pull && n.grad.size() != 0) n.pull(*this, i);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void(Tape&, int)> pull;
  };
  std::vector<Node> nodes_;
  bool recording_;
};

/// Lightweight handle to a tape node.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Mat& val() const { return tape->val(id); }
  Eigen::Index rows() const { return val().rows(); }
  Eigen::Index cols() const { return val().cols(); }
};

inline Var make_leaf(Tape& t, Mat v) { return Var{&t, t.leaf(std::move(v))}; }

namespace detail {
inline Var emit(Tape& t, Mat v, std::function<void(Tape&, int)> pull) {
  if (!t.recording()) return Var{&t, t.leaf(std::move(v))};
  return Var{&t, t.op(std::move(v), std::move(pull))};
}
inline void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidInputError(std::string(op) + ": shape mismatch");
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

inline Var matmul(Var a, Var b) {
  if (a.cols() != b.rows())
    throw InvalidInputError("matmul: inner dimensions differ");
  Tape& t = *a.tape;
  Mat v = a.val() * b.val();
  const int ai = a.id, bi = b.id;
  return detail::emit(t, std::move(v), [ai, bi](Tape& tt, int self) {
    const Mat g = tt.grad(self);
    tt.grad(ai).noalias() += g * tt.val(bi).transpose();
    tt.grad(bi).noalias() += tt.val(ai).transpose() * g;
  });
}

/// a * b^T without materializing a transpose node.
inline Var matmul_nt(Var a, Var b) {
  if (a.cols() != b.cols())
    throw InvalidInputError("matmul_nt: inner dimensions differ");
  Tape& t = *a.tape;
  Mat v = a.val() * b.val().transpose();
  const int ai = a.id, bi = b.id;
  return detail::emit(t, std::move(v), [ai, bi](Tape& tt, int self) {
    const Mat g = tt.grad(self);
    tt.grad(ai).noalias() += g * tt.val(bi);
    tt.grad(bi).noalias() += g.transpose() * tt.val(ai);
  });
}

inline Var add(Var a, Var b) {
  detail::check_same_shape(a, b, "add");
  Tape& t = *a.tape;
  Mat v = a.val() + b.val();
  const int ai = a.id, bi = b.id;
  return detail::emit(t, std::move(v), [ai, bi](Tape& tt, int self) {
    const Mat& g = tt.grad(self);
    tt.grad(ai) += g;
    tt.grad(bi) += g;
  });
}

inline Var sub(Var a, Var b) {
  detail::check_same_shape(a, b, "sub");
  Tape& t = *a.tape;
  Mat v = a.val() - b.val();
  const int ai = a.id, bi = b.id;
  return detail::emit(t, std::move(v), [ai, bi](Tape& tt, int self) {
    const Mat& g = tt.grad(self);
    tt.grad(ai) += g;
    tt.grad(bi) -= g;
  });
}

inline Var hadamard(Var a, Var b) {
  detail::check_same_shape(a, b, "hadamard");
  Tape& t = *a.tape;
  Mat v = a.val().cwiseProduct(b.val());
  const int ai = a.id, bi = b.id;
  return detail::emit(t, std::move(v), [ai, bi](Tape& tt, int self) {
    const Mat& g = tt.grad(self);
    tt.grad(ai) += g.cwiseProduct(tt.val(bi));
    tt.grad(bi) += g.cwiseProduct(tt.val(ai));
  });
}

/// Elementwise s*a + c with scalar constants.
inline Var affine(Var a, double s, double c) {
  Tape& t = *a.tape;
  Mat v = (a.val().array() * s + c).matrix();
  const int ai = a.id;
  return detail::emit(t, std::move(v), [ai, s](Tape& tt, int self) {
    tt.grad(ai) += s * tt.grad(self);
  });
}

/// Adds a constant matrix (no gradient flows to it). Used for positional
/// encodings and attention masks.
inline Var add_const(Var a, const Mat& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols())
    throw InvalidInputError("add_const: shape mismatch");
  Tape& t = *a.tape;
  Mat v = a.val() + c;
  const int ai = a.id;
  return detail::emit(t, std::move(v), [ai](Tape& tt, int self) {
    tt.grad(ai) += tt.grad(self);
  });
}

/// Broadcast-adds a 1 x d row vector to every row of a.
inline Var add_rowvec(Var a, Var r) {
  if (r.rows() != 1 || r.cols() != a.cols())
    throw InvalidInputError("add_rowvec: r must be 1 x cols(a)");
  Tape& t = *a.tape;
  Mat v = a.val().rowwise() + r.val().row(0);
  const int ai = a.id, ri = r.id;
  return detail::emit(t, std::move(v), [ai, ri](Tape& tt, int self) {
    const Mat& g = tt.grad(self);
    tt.grad(ai) += g;
    tt.grad(ri) += g.colwise().sum();
  });
}

/// Scales row i of a by s(i, 0).
inline Var mul_colvec(Var a, Var s) {
  if (s.cols() != 1 || s.rows() != a.rows())
    throw InvalidInputError("mul_colvec: s must be rows(a) x 1");
  Tape& t = *a.tape;
  Mat v = (a.val().array().colwise() * s.val().col(0).array()).matrix();
  const int ai = a.id, si = s.id;
  return detail::emit(t, std::move(v), [ai, si](Tape& tt, int self) {
    const Mat& g = tt.grad(self);
    tt.grad(ai) +=
        (g.array().colwise() * tt.val(si).col(0).array()).matrix();
    tt.grad(si) += g.cwiseProduct(tt.val(ai)).rowwise().sum();
  });
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

inline Var slice_rows(Var a, int i0, int n) {
  if (i0 < 0 || n < 1 || i0 + n > a.rows())
    throw InvalidInputError("slice_rows: range out of bounds");
  Tape& t = *a.tape;
  Mat v = a.val().middleRows(i0, n);
  const int ai = a.id;
  return detail::emit(t, std::move(v), [ai, i0, n](Tape& tt, int self) {
    tt.grad(ai).middleRows(i0, n) += tt.grad(self);
  });
}

inline Var slice_cols(Var a, int j0, int n) {
  if (j0 < 0 || n < 1 || j0 + n > a.cols())
    throw InvalidInputError("slice_cols: range out of bounds");
  Tape& t = *a.tape;
  Mat v = a.val().middleCols(j0, n);
  const int ai = a.id;
  return detail::emit(t, std::move(v), [ai, j0, n](Tape& tt, int self) {
    tt.grad(ai).middleCols(j0, n) += tt.grad(self);
  });
}

inline Var concat_rows(Tape& t, const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidInputError("concat_rows: no parts");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0].cols();
  for (const Var& p : parts) {
    if (p.cols() != cols)
      throw InvalidInputError("concat_rows: column mismatch");
    rows += p.rows();
  }
  Mat v(rows, cols);
  Eigen::Index r = 0;
  std::vector<std::pair<int, std::pair<int, int>>> spans;
  spans.reserve(parts.size());
  for (const Var& p : parts) {
    v.middleRows(r, p.rows()) = p.val();
    spans.push_back({p.id, {static_cast<int>(r), static_cast<int>(p.rows())}});
    r += p.rows();
  }
  return detail::emit(t, std::move(v), [spans](Tape& tt, int self) {
    const Mat& g = tt.grad(self);
    for (const auto& [id, span] : spans)
      tt.grad(id) += g.middleRows(span.first, span.second);
  });
}

inline Var concat_cols(Tape& t, const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidInputError("concat_cols: no parts");
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts[0].rows();
  for (const Var& p : parts) {
    if (p.rows() != rows) throw InvalidInputError("concat_cols: row mismatch");
    cols += p.cols();
  }
  Mat v(rows, cols);
  Eigen::Index c = 0;
  std::vector<std::pair<int, std::pair<int, int>>> spans;
  spans.reserve(parts.size());
  for (const Var& p : parts) {
    v.middleCols(c, p.cols()) = p.val();
    spans.push_back({p.id, {static_cast<int>(c), static_cast<int>(p.cols())}});
    c += p.cols();
  }
  return detail::emit(t, std::move(v), [spans](Tape& tt, int self) {
    const Mat& g = tt.grad(self);
    for (const auto& [id, span] : spans)
      tt.grad(id) += g.middleCols(span.first, span.second);
  });
}

/// Gathers rows of a table by index; backward scatter-adds. Used for
/// trainable category embeddings.
inline Var gather_rows(Var table, const std::vector<int>& idx) {
  Tape& t = *table.tape;
  Mat v(static_cast<Eigen::Index>(idx.size()), table.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= table.rows())
      throw InvalidInputError("gather_rows: index out of range");
    v.row(static_cast<Eigen::Index>(i)) = table.val().row(idx[i]);
  }
  const int ti = table.id;
  return detail::emit(t, std::move(v), [ti, idx](Tape& tt, int self) {
    const Mat& g = tt.grad(self);
    Mat& tg = tt.grad(ti);
    for (std::size_t i = 0; i < idx.size(); ++i)
      tg.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

inline Var sigmoid(Var a) {
  Tape& t = *a.tape;
  Mat v = (1.0 / (1.0 + (-a.val().array()).exp())).matrix();
  const int ai = a.id;
  return detail::emit(t, std::move(v), [ai](Tape& tt, int self) {
    const Mat& y = tt.val(self);
    tt.grad(ai) +=
        tt.grad(self).cwiseProduct((y.array() * (1.0 - y.array())).matrix());
  });
}

inline Var tanh_v(Var a) {
  Tape& t = *a.tape;
  Mat v = a.val().array().tanh().matrix();
  const int ai = a.id;
  return detail::emit(t, std::move(v), [ai](Tape& tt, int self) {
    const Mat& y = tt.val(self);
    tt.grad(ai) +=
        tt.grad(self).cwiseProduct((1.0 - y.array().square()).matrix());
  });
}

/// Exact GELU, 0.5 x (1 + erf(x / sqrt(2))). Smooth everywhere, which keeps
/// finite-difference gradient checks well-behaved.
inline Var gelu(Var a) {
  Tape& t = *a.tape;
  const Mat& x = a.val();
  Mat v(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    v(i) = 0.5 * x(i) * (1.0 + std::erf(x(i) * M_SQRT1_2));
  const int ai = a.id;
  return detail::emit(t, std::move(v), [ai](Tape& tt, int self) {
    const Mat& xx = tt.val(ai);
    const Mat& g = tt.grad(self);
    Mat d(xx.rows(), xx.cols());
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    for (Eigen::Index i = 0; i < xx.size(); ++i) {
      const double cdf = 0.5 * (1.0 + std::erf(xx(i) * M_SQRT1_2));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * xx(i) * xx(i));
      d(i) = cdf + xx(i) * pdf;
    }
    tt.grad(ai) += g.cwiseProduct(d);
  });
}

inline Var abs_v(Var a) {
  Tape& t = *a.tape;
  Mat v = a.val().cwiseAbs();
  const int ai = a.id;
  return detail::emit(t, std::move(v), [ai](Tape& tt, int self) {
    const Mat& x = tt.val(ai);
    // subgradient 0 at x == 0
    tt.grad(ai) += tt.grad(self).cwiseProduct(
        x.unaryExpr([](double e) { return e > 0 ? 1.0 : (e < 0 ? -1.0 : 0.0); }));
  });
}

inline Var log_v(Var a) {
  Tape& t = *a.tape;
  Mat v = a.val().array().log().matrix();
  const int ai = a.id;
  return detail::emit(t, std::move(v), [ai](Tape& tt, int self) {
    tt.grad(ai) += tt.grad(self).cwiseQuotient(tt.val(ai));
  });
}

/// max(a, c) elementwise; gradient passes only where a > c.
inline Var clamp_min(Var a, double c) {
  Tape& t = *a.tape;
  Mat v = a.val().cwiseMax(c);
  const int ai = a.id;
  return detail::emit(t, std::move(v), [ai, c](Tape& tt, int self) {
    const Mat& x = tt.val(ai);
    tt.grad(ai) += tt.grad(self).cwiseProduct(
        x.unaryExpr([c](double e) { return e > c ? 1.0 : 0.0; }));
  });
}

// ---------------------------------------------------------------------------
// Reductions and structured ops
// ---------------------------------------------------------------------------

inline Var sum_all(Var a) {
  Tape& t = *a.tape;
  Mat v(1, 1);
  v(0, 0) = a.val().sum();
  const int ai = a.id;
  return detail::emit(t, std::move(v), [ai](Tape& tt, int self) {
    tt.grad(ai).array() += tt.grad(self)(0, 0);
  });
}

inline Var mean_all(Var a) {
  Tape& t = *a.tape;
  Mat v(1, 1);
  v(0, 0) = a.val().mean();
  const int ai = a.id;
  const double inv_n = 1.0 / static_cast<double>(a.val().size());
  return detail::emit(t, std::move(v), [ai, inv_n](Tape& tt, int self) {
    tt.grad(ai).array() += tt.grad(self)(0, 0) * inv_n;
  });
}

/// Column means: n x d -> 1 x d. Global average pooling over positions.
inline Var mean_over_rows(Var a) {
  Tape& t = *a.tape;
  Mat v = a.val().colwise().mean();
  const int ai = a.id;
  const double inv_n = 1.0 / static_cast<double>(a.rows());
  return detail::emit(t, std::move(v), [ai, inv_n](Tape& tt, int self) {
    const Mat& g = tt.grad(self);
    tt.grad(ai).rowwise() += (g.row(0) * inv_n);
  });
}

/// Row-wise Euclidean norms: n x d -> n x 1. Rows with norm below the guard
/// get zero gradient (the norm is not differentiable at zero).
inline Var row_norms(Var a) {
  Tape& t = *a.tape;
  Mat v = a.val().rowwise().norm();
  const int ai = a.id;
  return detail::emit(t, std::move(v), [ai](Tape& tt, int self) {
    const Mat& g = tt.grad(self);
    const Mat& x = tt.val(ai);
    const Mat& n = tt.val(self);
    Mat& ag = tt.grad(ai);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      if (n(r, 0) < 1e-12) continue;
      ag.row(r) += (g(r, 0) / n(r, 0)) * x.row(r);
    }
  });
}

/// Prefix sums down each column (out_r = sum of rows 0..r).
inline Var cumsum_rows(Var a) {
  Tape& t = *a.tape;
  Mat v = a.val();
  for (Eigen::Index r = 1; r < v.rows(); ++r) v.row(r) += v.row(r - 1);
  const int ai = a.id;
  return detail::emit(t, std::move(v), [ai](Tape& tt, int self) {
    Mat g = tt.grad(self);  // suffix-sum within each column
    for (Eigen::Index r = g.rows() - 2; r >= 0; --r) g.row(r) += g.row(r + 1);
    tt.grad(ai) += g;
  });
}

/// Prefix sums across each row (out_c = sum of cols 0..c).
inline Var cumsum_cols(Var a) {
  Tape& t = *a.tape;
  Mat v = a.val();
  for (Eigen::Index c = 1; c < v.cols(); ++c) v.col(c) += v.col(c - 1);
  const int ai = a.id;
  return detail::emit(t, std::move(v), [ai](Tape& tt, int self) {
    Mat g = tt.grad(self);
    for (Eigen::Index c = g.cols() - 2; c >= 0; --c) g.col(c) += g.col(c + 1);
    tt.grad(ai) += g;
  });
}

inline Var softmax_rows(Var a) {
  Tape& t = *a.tape;
  Mat v = a.val();
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const double m = v.row(r).maxCoeff();
    v.row(r) = (v.row(r).array() - m).exp();
    v.row(r) /= v.row(r).sum();
  }
  const int ai = a.id;
  return detail::emit(t, std::move(v), [ai](Tape& tt, int self) {
    const Mat& y = tt.val(self);
    const Mat& g = tt.grad(self);
    Mat& ag = tt.grad(ai);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = g.row(r).dot(y.row(r));
      ag.row(r) +=
          (g.row(r).array() - dot).matrix().cwiseProduct(y.row(r));
    }
  });
}

/// Row-wise layer normalization with learned gain/bias (both 1 x d).
inline Var layernorm_rows(Var x, Var gain, Var bias, double eps = 1e-5) {
  if (gain.rows() != 1 || bias.rows() != 1 || gain.cols() != x.cols() ||
      bias.cols() != x.cols())
    throw InvalidInputError("layernorm_rows: gain/bias must be 1 x cols(x)");
  Tape& t = *x.tape;
  const Mat& xv = x.val();
  const Eigen::Index n = xv.rows(), d = xv.cols();
  Mat xhat(n, d);
  Eigen::VectorXd inv_sigma(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = xv.row(r).mean();
    const double var = (xv.row(r).array() - mu).square().mean();
    const double is = 1.0 / std::sqrt(var + eps);
    inv_sigma(r) = is;
    xhat.row(r) = (xv.row(r).array() - mu) * is;
  }
  Mat v = (xhat.array().rowwise() * gain.val().row(0).array()).matrix();
  v.rowwise() += bias.val().row(0);
  const int xi = x.id, gi = gain.id, bi = bias.id;
  return detail::emit(
      t, std::move(v),
      [xi, gi, bi, xhat, inv_sigma](Tape& tt, int self) {
        const Mat& g = tt.grad(self);
        const Eigen::Index n = g.rows(), d = g.cols();
        const Mat& gainv = tt.val(gi);
        Mat& xg = tt.grad(xi);
        Mat& gg = tt.grad(gi);
        Mat& bg = tt.grad(bi);
        for (Eigen::Index r = 0; r < n; ++r) {
          const Eigen::RowVectorXd gh =
              g.row(r).cwiseProduct(gainv.row(0));  // dL/dxhat
          const double m1 = gh.mean();
          const double m2 = gh.cwiseProduct(xhat.row(r)).mean();
          xg.row(r) += inv_sigma(r) *
                       (gh.array() - m1 - xhat.row(r).array() * m2).matrix();
          gg.row(0) += g.row(r).cwiseProduct(xhat.row(r));
          bg.row(0) += g.row(r);
        }
        (void)d;
      });
}

/// Step-constraint scale factors (one per row of raw displacements):
///   s_i = Sigmoid(n_i) * max_step / n_i          for n_i >= eps
///   s_i = 0                                      for n_i <  eps
/// The sigmoid is capped just below 1 so the realized step length
/// Sigmoid(n) * max_step stays strictly below max_step in floating point.
inline Var step_scale(Var norms, double max_step, double eps = 1e-8) {
  if (norms.cols() != 1)
    throw InvalidInputError("step_scale: expects an n x 1 norm column");
  if (!(max_step > 0.0)) throw InvalidInputError("step_scale: max_step <= 0");
  constexpr double kCap = 1.0 - 1e-12;
  Tape& t = *norms.tape;
  const Mat& nv = norms.val();
  Mat v(nv.rows(), 1);
  // non-finite norms flow through as NaN so training loops can detect
  // divergence at the loss
  for (Eigen::Index r = 0; r < nv.rows(); ++r) {
    const double n = nv(r, 0);
    if (n < eps) {
      v(r, 0) = 0.0;
    } else {
      const double sig = std::min(1.0 / (1.0 + std::exp(-n)), kCap);
      v(r, 0) = sig * max_step / n;
    }
  }
  const int ni = norms.id;
  return detail::emit(t, std::move(v),
                      [ni, max_step, eps](Tape& tt, int self) {
                        const Mat& g = tt.grad(self);
                        const Mat& nv = tt.val(ni);
                        Mat& ng = tt.grad(ni);
                        for (Eigen::Index r = 0; r < nv.rows(); ++r) {
                          const double n = nv(r, 0);
                          if (n < eps) continue;
                          const double sig = 1.0 / (1.0 + std::exp(-n));
                          double ds;
                          if (sig >= kCap) {
                            ds = -kCap * max_step / (n * n);
                          } else {
                            const double dsig = sig * (1.0 - sig);
                            ds = (dsig * n - sig) * max_step / (n * n);
                          }
                          ng(r, 0) += g(r, 0) * ds;
                        }
                      });
}

}  // namespace mw::nn
