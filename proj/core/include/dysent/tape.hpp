#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "dysent/csr.hpp"
#include "dysent/tensor.hpp"

namespace dysent::ad {

// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Eager reverse-mode tape. Forward values are computed at build time; each
// primitive registers an exact vector-Jacobian product. The tape is
// append-only and single-threaded; distinct tapes are independent.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves. Tracked leaves receive gradients; constants do not.
  Var leaf(Mat value);
  Var constant(Mat value);

  // Elementwise; either same shape or one operand scalar (1x1).
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);

  Var matmul(Var a, Var b);
  // Sparse constant left operand times dense tracked right operand.
  // `sp` must outlive the tape.
  Var spmm(const Csr* sp, Var b);

  Var concat_cols(Var a, Var b);
  Var concat_rows(Var a, Var b);
  Var slice_cols(Var a, int c0, int c1);
  Var slice_rows(Var a, int r0, int r1);
  Var gather_rows(Var a, std::vector<int> idx);
  Var reshape(Var a, int rows, int cols);

  Var sigmoid(Var a);
  Var tanh(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var clamp(Var a, double lo, double hi);

  Var softmax_rows(Var a);     // softmax over the last axis
  Var logsumexp_rows(Var a);   // m x 1 result
  Var sum(Var a);              // scalar
  Var mean(Var a);             // scalar
  Var sum_squares(Var a);      // scalar, sum of a_ij^2
  Var l2_norm(Var a);          // scalar
  Var dot_rows(Var a, Var b);     // m x 1, row-wise dot products
  Var cosine_rows(Var a, Var b);  // m x 1, row-wise cosine similarity
  Var suffix_sum_cols(Var a);     // y_ij = sum_{j' >= j} a_ij'
  Var reverse_cols(Var a);

  const Mat& value(Var v) const;
  bool tracked(Var v) const;
  int size() const { return static_cast<int>(nodes_.size()); }

  // Reverse pass from a tracked scalar. May be called repeatedly; each call
  // recomputes the same gradients from the immutable forward values.
  void backward(Var loss);
  const Mat& grad(Var v) const;  // zeros if nothing flowed

  void dump(std::ostream& os) const;

 private:
  struct Node {
    Mat value;
    bool tracked = false;
    const char* op = "leaf";
    int a = -1, b = -1;
    // Accumulates parent gradients given this node's gradient.
    std::function<void(Tape&, const Mat& g, int a, int b)> vjp;
  };

  Var push(Mat value, const char* op, int a, int b,
           std::function<void(Tape&, const Mat&, int, int)> vjp);
  Mat& grad_buf(int id);
  void accumulate(int id, const Mat& g);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
  std::vector<Mat> grads_;
  friend struct VjpAccess;
};

// Builds a scalar expression from tracked leaves on a fresh tape.
using BuildFn = std::function<Var(Tape&, const std::vector<Var>&)>;

// Central finite differences against the tape gradients. Returns
// max_i |g_ad_i - g_fd_i| / (|g_fd_i| + 1e-8) over all input components.
double grad_check(const BuildFn& fn, const std::vector<Mat>& inputs, double eps);

}  // namespace dysent::ad
