#include "dysent/tape.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>
#include <utility>

#include "dysent/errors.hpp"

namespace dysent::ad {

namespace {

using ERowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const ERowMat>;
using MMap = Eigen::Map<ERowMat>;

CMap emap(const Mat& m) { return CMap(m.d.data(), m.rows, m.cols); }
MMap emap(Mat& m) { return MMap(m.d.data(), m.rows, m.cols); }

void check_elementwise(const char* op, const Mat& a, const Mat& b) {
  if (!a.same_shape(b) && !a.is_scalar() && !b.is_scalar())
    throw ShapeError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows) + "x" +
                     std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                     std::to_string(b.cols) + ")");
}

// Broadcast-aware binary apply: result has the non-scalar operand's shape.
template <typename F>
Mat apply_binary(const Mat& a, const Mat& b, F f) {
  if (a.same_shape(b)) {
    Mat out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i) out.d[i] = f(a.d[i], b.d[i]);
    return out;
  }
  if (a.is_scalar()) {
    Mat out(b.rows, b.cols);
    for (std::size_t i = 0; i < b.size(); ++i) out.d[i] = f(a.d[0], b.d[i]);
    return out;
  }
  Mat out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.size(); ++i) out.d[i] = f(a.d[i], b.d[0]);
  return out;
}

double sum_all(const Mat& m) {
  double s = 0.0;
  for (double x : m.d) s += x;
  return s;
}

constexpr double kNormFloor = 1e-12;

}  // namespace

Var Tape::push(Mat value, const char* op, int a, int b,
               std::function<void(Tape&, const Mat&, int, int)> vjp) {
  Node n;
  n.value = std::move(value);
  n.op = op;
  n.a = a;
  n.b = b;
  n.tracked = (a >= 0 && nodes_[a].tracked) || (b >= 0 && nodes_[b].tracked);
  if (n.tracked) n.vjp = std::move(vjp);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
    throw ContractError("tape: invalid Var handle");
  return nodes_[v.id];
}

Var Tape::leaf(Mat value) {
  Node n;
  n.value = std::move(value);
  n.tracked = true;
  n.op = "leaf";
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Mat value) {
  Node n;
  n.value = std::move(value);
  n.tracked = false;
  n.op = "const";
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Mat& Tape::value(Var v) const { return node(v).value; }
bool Tape::tracked(Var v) const { return node(v).tracked; }

Mat& Tape::grad_buf(int id) {
  if (grads_[id].size() == 0) {
    const Mat& v = nodes_[id].value;
    grads_[id] = Mat::zeros(v.rows, v.cols);
  }
  return grads_[id];
}

void Tape::accumulate(int id, const Mat& g) {
  if (id < 0 || !nodes_[id].tracked) return;
  Mat& buf = grad_buf(id);
  for (std::size_t i = 0; i < buf.size(); ++i) buf.d[i] += g.d[i];
}

// With scalar broadcasting the gradient of the scalar operand is the sum
// over the broadcast positions.
static Mat reduce_to_shape(const Mat& g, const Mat& operand) {
  if (g.same_shape(operand)) return g;
  return Mat::scalar(sum_all(g));
}

Var Tape::add(Var a, Var b) {
  const Mat& va = value(a);
  const Mat& vb = value(b);
  check_elementwise("add", va, vb);
  return push(apply_binary(va, vb, [](double x, double y) { return x + y; }), "add", a.id, b.id,
              [](Tape& t, const Mat& g, int ia, int ib) {
                t.accumulate(ia, reduce_to_shape(g, t.nodes_[ia].value));
                t.accumulate(ib, reduce_to_shape(g, t.nodes_[ib].value));
              });
}

Var Tape::sub(Var a, Var b) {
  const Mat& va = value(a);
  const Mat& vb = value(b);
  check_elementwise("sub", va, vb);
  return push(apply_binary(va, vb, [](double x, double y) { return x - y; }), "sub", a.id, b.id,
              [](Tape& t, const Mat& g, int ia, int ib) {
                t.accumulate(ia, reduce_to_shape(g, t.nodes_[ia].value));
                Mat neg = g;
                for (auto& x : neg.d) x = -x;
                t.accumulate(ib, reduce_to_shape(neg, t.nodes_[ib].value));
              });
}

Var Tape::mul(Var a, Var b) {
  const Mat& va = value(a);
  const Mat& vb = value(b);
  check_elementwise("mul", va, vb);
  return push(apply_binary(va, vb, [](double x, double y) { return x * y; }), "mul", a.id, b.id,
              [](Tape& t, const Mat& g, int ia, int ib) {
                const Mat& x = t.nodes_[ia].value;
                const Mat& y = t.nodes_[ib].value;
                t.accumulate(ia, reduce_to_shape(apply_binary(g, y, [](double u, double v) { return u * v; }), x));
                t.accumulate(ib, reduce_to_shape(apply_binary(g, x, [](double u, double v) { return u * v; }), y));
              });
}

Var Tape::scale(Var a, double c) {
  Mat out = value(a);
  for (auto& x : out.d) x *= c;
  return push(std::move(out), "scale", a.id, -1,
              [c](Tape& t, const Mat& g, int ia, int) {
                Mat ga = g;
                for (auto& x : ga.d) x *= c;
                t.accumulate(ia, ga);
              });
}

Var Tape::matmul(Var a, Var b) {
  const Mat& va = value(a);
  const Mat& vb = value(b);
  if (va.cols != vb.rows)
    throw ShapeError("matmul: shape mismatch (" + std::to_string(va.rows) + "x" +
                     std::to_string(va.cols) + ")*(" + std::to_string(vb.rows) + "x" +
                     std::to_string(vb.cols) + ")");
  Mat out(va.rows, vb.cols);
  emap(out) = emap(va) * emap(vb);
  return push(std::move(out), "matmul", a.id, b.id,
              [](Tape& t, const Mat& g, int ia, int ib) {
                const Mat& x = t.nodes_[ia].value;
                const Mat& y = t.nodes_[ib].value;
                if (t.nodes_[ia].tracked) {
                  Mat gx(x.rows, x.cols);
                  emap(gx) = emap(g) * emap(y).transpose();
                  t.accumulate(ia, gx);
                }
                if (t.nodes_[ib].tracked) {
                  Mat gy(y.rows, y.cols);
                  emap(gy) = emap(x).transpose() * emap(g);
                  t.accumulate(ib, gy);
                }
              });
}

Var Tape::spmm(const Csr* sp, Var b) {
  const Mat& vb = value(b);
  if (sp->cols != vb.rows)
    throw ShapeError("spmm: shape mismatch (" + std::to_string(sp->rows) + "x" +
                     std::to_string(sp->cols) + ")*(" + std::to_string(vb.rows) + "x" +
                     std::to_string(vb.cols) + ")");
  Mat out(sp->rows, vb.cols);
  sp->multiply(vb.d.data(), vb.cols, out.d.data());
  return push(std::move(out), "spmm", b.id, -1,
              [sp](Tape& t, const Mat& g, int ib, int) {
                Mat gb(sp->cols, g.cols);
                sp->multiply_transpose(g.d.data(), g.cols, gb.d.data());
                t.accumulate(ib, gb);
              });
}

Var Tape::concat_cols(Var a, Var b) {
  const Mat& va = value(a);
  const Mat& vb = value(b);
  if (va.rows != vb.rows)
    throw ShapeError("concat_cols: row mismatch (" + std::to_string(va.rows) + " vs " +
                     std::to_string(vb.rows) + ")");
  Mat out(va.rows, va.cols + vb.cols);
  for (int r = 0; r < va.rows; ++r) {
    for (int c = 0; c < va.cols; ++c) out.at(r, c) = va.at(r, c);
    for (int c = 0; c < vb.cols; ++c) out.at(r, va.cols + c) = vb.at(r, c);
  }
  return push(std::move(out), "concat_cols", a.id, b.id,
              [](Tape& t, const Mat& g, int ia, int ib) {
                const Mat& x = t.nodes_[ia].value;
                const Mat& y = t.nodes_[ib].value;
                if (t.nodes_[ia].tracked) {
                  Mat gx(x.rows, x.cols);
                  for (int r = 0; r < x.rows; ++r)
                    for (int c = 0; c < x.cols; ++c) gx.at(r, c) = g.at(r, c);
                  t.accumulate(ia, gx);
                }
                if (t.nodes_[ib].tracked) {
                  Mat gy(y.rows, y.cols);
                  for (int r = 0; r < y.rows; ++r)
                    for (int c = 0; c < y.cols; ++c) gy.at(r, c) = g.at(r, x.cols + c);
                  t.accumulate(ib, gy);
                }
              });
}

Var Tape::concat_rows(Var a, Var b) {
  const Mat& va = value(a);
  const Mat& vb = value(b);
  if (va.cols != vb.cols)
    throw ShapeError("concat_rows: column mismatch (" + std::to_string(va.cols) + " vs " +
                     std::to_string(vb.cols) + ")");
  Mat out(va.rows + vb.rows, va.cols);
  std::copy(va.d.begin(), va.d.end(), out.d.begin());
  std::copy(vb.d.begin(), vb.d.end(), out.d.begin() + va.size());
  return push(std::move(out), "concat_rows", a.id, b.id,
              [](Tape& t, const Mat& g, int ia, int ib) {
                const Mat& x = t.nodes_[ia].value;
                const Mat& y = t.nodes_[ib].value;
                if (t.nodes_[ia].tracked) {
                  Mat gx(x.rows, x.cols);
                  std::copy(g.d.begin(), g.d.begin() + x.size(), gx.d.begin());
                  t.accumulate(ia, gx);
                }
                if (t.nodes_[ib].tracked) {
                  Mat gy(y.rows, y.cols);
                  std::copy(g.d.begin() + x.size(), g.d.end(), gy.d.begin());
                  t.accumulate(ib, gy);
                }
              });
}

Var Tape::reshape(Var a, int rows, int cols) {
  const Mat& va = value(a);
  if (static_cast<std::size_t>(rows) * cols != va.size())
    throw ShapeError("reshape: cannot view " + std::to_string(va.rows) + "x" +
                     std::to_string(va.cols) + " as " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  Mat out(rows, cols);
  out.d = va.d;
  return push(std::move(out), "reshape", a.id, -1,
              [](Tape& t, const Mat& g, int ia, int) {
                const Mat& x = t.nodes_[ia].value;
                Mat gx(x.rows, x.cols);
                gx.d = g.d;
                t.accumulate(ia, gx);
              });
}

Var Tape::slice_cols(Var a, int c0, int c1) {
  const Mat& va = value(a);
  if (c0 < 0 || c1 > va.cols || c0 >= c1)
    throw ShapeError("slice_cols: bad range [" + std::to_string(c0) + ", " +
                     std::to_string(c1) + ") for " + std::to_string(va.cols) + " cols");
  Mat out(va.rows, c1 - c0);
  for (int r = 0; r < va.rows; ++r)
    for (int c = c0; c < c1; ++c) out.at(r, c - c0) = va.at(r, c);
  return push(std::move(out), "slice_cols", a.id, -1,
              [c0](Tape& t, const Mat& g, int ia, int) {
                const Mat& x = t.nodes_[ia].value;
                Mat gx = Mat::zeros(x.rows, x.cols);
                for (int r = 0; r < g.rows; ++r)
                  for (int c = 0; c < g.cols; ++c) gx.at(r, c0 + c) = g.at(r, c);
                t.accumulate(ia, gx);
              });
}

Var Tape::slice_rows(Var a, int r0, int r1) {
  const Mat& va = value(a);
  if (r0 < 0 || r1 > va.rows || r0 >= r1)
    throw ShapeError("slice_rows: bad range [" + std::to_string(r0) + ", " +
                     std::to_string(r1) + ") for " + std::to_string(va.rows) + " rows");
  Mat out(r1 - r0, va.cols);
  for (int r = r0; r < r1; ++r)
    for (int c = 0; c < va.cols; ++c) out.at(r - r0, c) = va.at(r, c);
  return push(std::move(out), "slice_rows", a.id, -1,
              [r0](Tape& t, const Mat& g, int ia, int) {
                const Mat& x = t.nodes_[ia].value;
                Mat gx = Mat::zeros(x.rows, x.cols);
                for (int r = 0; r < g.rows; ++r)
                  for (int c = 0; c < g.cols; ++c) gx.at(r0 + r, c) = g.at(r, c);
                t.accumulate(ia, gx);
              });
}

Var Tape::gather_rows(Var a, std::vector<int> idx) {
  const Mat& va = value(a);
  for (int i : idx)
    if (i < 0 || i >= va.rows)
      throw ShapeError("gather_rows: index " + std::to_string(i) + " outside " +
                       std::to_string(va.rows) + " rows");
  Mat out(static_cast<int>(idx.size()), va.cols);
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (int c = 0; c < va.cols; ++c) out.at(static_cast<int>(r), c) = va.at(idx[r], c);
  auto indices = std::make_shared<std::vector<int>>(std::move(idx));
  return push(std::move(out), "gather_rows", a.id, -1,
              [indices](Tape& t, const Mat& g, int ia, int) {
                const Mat& x = t.nodes_[ia].value;
                Mat gx = Mat::zeros(x.rows, x.cols);
                for (std::size_t r = 0; r < indices->size(); ++r)
                  for (int c = 0; c < g.cols; ++c)
                    gx.at((*indices)[r], c) += g.at(static_cast<int>(r), c);
                t.accumulate(ia, gx);
              });
}

Var Tape::sigmoid(Var a) {
  Mat out = value(a);
  for (auto& x : out.d) x = 1.0 / (1.0 + std::exp(-x));
  Mat saved = out;
  return push(std::move(out), "sigmoid", a.id, -1,
              [saved](Tape& t, const Mat& g, int ia, int) {
                Mat gx(saved.rows, saved.cols);
                for (std::size_t i = 0; i < saved.size(); ++i)
                  gx.d[i] = g.d[i] * saved.d[i] * (1.0 - saved.d[i]);
                t.accumulate(ia, gx);
              });
}

Var Tape::tanh(Var a) {
  Mat out = value(a);
  for (auto& x : out.d) x = std::tanh(x);
  Mat saved = out;
  return push(std::move(out), "tanh", a.id, -1,
              [saved](Tape& t, const Mat& g, int ia, int) {
                Mat gx(saved.rows, saved.cols);
                for (std::size_t i = 0; i < saved.size(); ++i)
                  gx.d[i] = g.d[i] * (1.0 - saved.d[i] * saved.d[i]);
                t.accumulate(ia, gx);
              });
}

Var Tape::exp(Var a) {
  Mat out = value(a);
  for (auto& x : out.d) x = std::exp(x);
  Mat saved = out;
  return push(std::move(out), "exp", a.id, -1,
              [saved](Tape& t, const Mat& g, int ia, int) {
                Mat gx(saved.rows, saved.cols);
                for (std::size_t i = 0; i < saved.size(); ++i) gx.d[i] = g.d[i] * saved.d[i];
                t.accumulate(ia, gx);
              });
}

Var Tape::log(Var a) {
  const Mat& va = value(a);
  Mat out = va;
  for (auto& x : out.d) x = std::log(x);
  return push(std::move(out), "log", a.id, -1,
              [](Tape& t, const Mat& g, int ia, int) {
                const Mat& x = t.nodes_[ia].value;
                Mat gx(x.rows, x.cols);
                for (std::size_t i = 0; i < x.size(); ++i) gx.d[i] = g.d[i] / x.d[i];
                t.accumulate(ia, gx);
              });
}

Var Tape::clamp(Var a, double lo, double hi) {
  const Mat& va = value(a);
  Mat out = va;
  for (auto& x : out.d) x = std::min(std::max(x, lo), hi);
  return push(std::move(out), "clamp", a.id, -1,
              [lo, hi](Tape& t, const Mat& g, int ia, int) {
                const Mat& x = t.nodes_[ia].value;
                Mat gx(x.rows, x.cols);
                for (std::size_t i = 0; i < x.size(); ++i)
                  gx.d[i] = (x.d[i] > lo && x.d[i] < hi) ? g.d[i] : 0.0;
                t.accumulate(ia, gx);
              });
}

Var Tape::softmax_rows(Var a) {
  const Mat& va = value(a);
  Mat out(va.rows, va.cols);
  for (int r = 0; r < va.rows; ++r) {
    double m = va.at(r, 0);
    for (int c = 1; c < va.cols; ++c) m = std::max(m, va.at(r, c));
    double s = 0.0;
    for (int c = 0; c < va.cols; ++c) {
      out.at(r, c) = std::exp(va.at(r, c) - m);
      s += out.at(r, c);
    }
    for (int c = 0; c < va.cols; ++c) out.at(r, c) /= s;
  }
  Mat saved = out;
  return push(std::move(out), "softmax_rows", a.id, -1,
              [saved](Tape& t, const Mat& g, int ia, int) {
                Mat gx(saved.rows, saved.cols);
                for (int r = 0; r < saved.rows; ++r) {
                  double dot = 0.0;
                  for (int c = 0; c < saved.cols; ++c) dot += g.at(r, c) * saved.at(r, c);
                  for (int c = 0; c < saved.cols; ++c)
                    gx.at(r, c) = saved.at(r, c) * (g.at(r, c) - dot);
                }
                t.accumulate(ia, gx);
              });
}

Var Tape::logsumexp_rows(Var a) {
  const Mat& va = value(a);
  Mat out(va.rows, 1);
  for (int r = 0; r < va.rows; ++r) {
    double m = va.at(r, 0);
    for (int c = 1; c < va.cols; ++c) m = std::max(m, va.at(r, c));
    double s = 0.0;
    for (int c = 0; c < va.cols; ++c) s += std::exp(va.at(r, c) - m);
    out.at(r, 0) = m + std::log(s);
  }
  return push(std::move(out), "logsumexp_rows", a.id, -1,
              [](Tape& t, const Mat& g, int ia, int) {
                const Mat& x = t.nodes_[ia].value;
                Mat gx(x.rows, x.cols);
                for (int r = 0; r < x.rows; ++r) {
                  double m = x.at(r, 0);
                  for (int c = 1; c < x.cols; ++c) m = std::max(m, x.at(r, c));
                  double s = 0.0;
                  for (int c = 0; c < x.cols; ++c) s += std::exp(x.at(r, c) - m);
                  for (int c = 0; c < x.cols; ++c)
                    gx.at(r, c) = g.at(r, 0) * std::exp(x.at(r, c) - m) / s;
                }
                t.accumulate(ia, gx);
              });
}

Var Tape::sum(Var a) {
  return push(Mat::scalar(sum_all(value(a))), "sum", a.id, -1,
              [](Tape& t, const Mat& g, int ia, int) {
                const Mat& x = t.nodes_[ia].value;
                t.accumulate(ia, Mat::filled(x.rows, x.cols, g.d[0]));
              });
}

Var Tape::mean(Var a) {
  const Mat& va = value(a);
  const double n = static_cast<double>(va.size());
  return push(Mat::scalar(sum_all(va) / n), "mean", a.id, -1,
              [n](Tape& t, const Mat& g, int ia, int) {
                const Mat& x = t.nodes_[ia].value;
                t.accumulate(ia, Mat::filled(x.rows, x.cols, g.d[0] / n));
              });
}

Var Tape::sum_squares(Var a) {
  const Mat& va = value(a);
  double s = 0.0;
  for (double x : va.d) s += x * x;
  return push(Mat::scalar(s), "sum_squares", a.id, -1,
              [](Tape& t, const Mat& g, int ia, int) {
                const Mat& x = t.nodes_[ia].value;
                Mat gx(x.rows, x.cols);
                for (std::size_t i = 0; i < x.size(); ++i) gx.d[i] = 2.0 * x.d[i] * g.d[0];
                t.accumulate(ia, gx);
              });
}

Var Tape::l2_norm(Var a) {
  const Mat& va = value(a);
  double s = 0.0;
  for (double x : va.d) s += x * x;
  const double norm = std::sqrt(s);
  return push(Mat::scalar(norm), "l2_norm", a.id, -1,
              [norm](Tape& t, const Mat& g, int ia, int) {
                const Mat& x = t.nodes_[ia].value;
                Mat gx(x.rows, x.cols);
                const double inv = 1.0 / std::max(norm, kNormFloor);
                for (std::size_t i = 0; i < x.size(); ++i) gx.d[i] = g.d[0] * x.d[i] * inv;
                t.accumulate(ia, gx);
              });
}

Var Tape::dot_rows(Var a, Var b) {
  const Mat& va = value(a);
  const Mat& vb = value(b);
  if (!va.same_shape(vb))
    throw ShapeError("dot_rows: shape mismatch (" + std::to_string(va.rows) + "x" +
                     std::to_string(va.cols) + " vs " + std::to_string(vb.rows) + "x" +
                     std::to_string(vb.cols) + ")");
  Mat out(va.rows, 1);
  for (int r = 0; r < va.rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < va.cols; ++c) s += va.at(r, c) * vb.at(r, c);
    out.at(r, 0) = s;
  }
  return push(std::move(out), "dot_rows", a.id, b.id,
              [](Tape& t, const Mat& g, int ia, int ib) {
                const Mat& x = t.nodes_[ia].value;
                const Mat& y = t.nodes_[ib].value;
                if (t.nodes_[ia].tracked) {
                  Mat gx(x.rows, x.cols);
                  for (int r = 0; r < x.rows; ++r)
                    for (int c = 0; c < x.cols; ++c) gx.at(r, c) = g.at(r, 0) * y.at(r, c);
                  t.accumulate(ia, gx);
                }
                if (t.nodes_[ib].tracked) {
                  Mat gy(y.rows, y.cols);
                  for (int r = 0; r < y.rows; ++r)
                    for (int c = 0; c < y.cols; ++c) gy.at(r, c) = g.at(r, 0) * x.at(r, c);
                  t.accumulate(ib, gy);
                }
              });
}

Var Tape::cosine_rows(Var a, Var b) {
  const Mat& va = value(a);
  const Mat& vb = value(b);
  if (!va.same_shape(vb))
    throw ShapeError("cosine_rows: shape mismatch (" + std::to_string(va.rows) + "x" +
                     std::to_string(va.cols) + " vs " + std::to_string(vb.rows) + "x" +
                     std::to_string(vb.cols) + ")");
  Mat out(va.rows, 1);
  for (int r = 0; r < va.rows; ++r) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int c = 0; c < va.cols; ++c) {
      dot += va.at(r, c) * vb.at(r, c);
      na += va.at(r, c) * va.at(r, c);
      nb += vb.at(r, c) * vb.at(r, c);
    }
    out.at(r, 0) = dot / std::max(std::sqrt(na) * std::sqrt(nb), kNormFloor);
  }
  return push(std::move(out), "cosine_rows", a.id, b.id,
              [](Tape& t, const Mat& g, int ia, int ib) {
                const Mat& x = t.nodes_[ia].value;
                const Mat& y = t.nodes_[ib].value;
                Mat gx = Mat::zeros(x.rows, x.cols);
                Mat gy = Mat::zeros(y.rows, y.cols);
                for (int r = 0; r < x.rows; ++r) {
                  double dot = 0.0, na2 = 0.0, nb2 = 0.0;
                  for (int c = 0; c < x.cols; ++c) {
                    dot += x.at(r, c) * y.at(r, c);
                    na2 += x.at(r, c) * x.at(r, c);
                    nb2 += y.at(r, c) * y.at(r, c);
                  }
                  const double na = std::max(std::sqrt(na2), kNormFloor);
                  const double nb = std::max(std::sqrt(nb2), kNormFloor);
                  const double cosv = dot / (na * nb);
                  const double gr = g.at(r, 0);
                  for (int c = 0; c < x.cols; ++c) {
                    gx.at(r, c) = gr * (y.at(r, c) / (na * nb) - cosv * x.at(r, c) / (na * na));
                    gy.at(r, c) = gr * (x.at(r, c) / (na * nb) - cosv * y.at(r, c) / (nb * nb));
                  }
                }
                if (t.nodes_[ia].tracked) t.accumulate(ia, gx);
                if (t.nodes_[ib].tracked) t.accumulate(ib, gy);
              });
}

Var Tape::suffix_sum_cols(Var a) {
  const Mat& va = value(a);
  Mat out(va.rows, va.cols);
  for (int r = 0; r < va.rows; ++r) {
    double acc = 0.0;
    for (int c = va.cols - 1; c >= 0; --c) {
      acc += va.at(r, c);
      out.at(r, c) = acc;
    }
  }
  return push(std::move(out), "suffix_sum_cols", a.id, -1,
              [](Tape& t, const Mat& g, int ia, int) {
                // VJP of a suffix sum is the prefix sum.
                const Mat& x = t.nodes_[ia].value;
                Mat gx(x.rows, x.cols);
                for (int r = 0; r < x.rows; ++r) {
                  double acc = 0.0;
                  for (int c = 0; c < x.cols; ++c) {
                    acc += g.at(r, c);
                    gx.at(r, c) = acc;
                  }
                }
                t.accumulate(ia, gx);
              });
}

Var Tape::reverse_cols(Var a) {
  const Mat& va = value(a);
  Mat out(va.rows, va.cols);
  for (int r = 0; r < va.rows; ++r)
    for (int c = 0; c < va.cols; ++c) out.at(r, c) = va.at(r, va.cols - 1 - c);
  return push(std::move(out), "reverse_cols", a.id, -1,
              [](Tape& t, const Mat& g, int ia, int) {
                Mat gx(g.rows, g.cols);
                for (int r = 0; r < g.rows; ++r)
                  for (int c = 0; c < g.cols; ++c) gx.at(r, c) = g.at(r, g.cols - 1 - c);
                t.accumulate(ia, gx);
              });
}

void Tape::backward(Var loss) {
  const Node& n = node(loss);
  if (!n.value.is_scalar())
    throw ContractError("backward: loss must be a scalar (got " + std::to_string(n.value.rows) +
                        "x" + std::to_string(n.value.cols) + ")");
  if (!n.tracked) throw ContractError("backward: loss does not depend on any tracked leaf");

  grads_.assign(nodes_.size(), Mat());
  grad_buf(loss.id).d[0] = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    if (!nodes_[i].tracked || !nodes_[i].vjp) continue;
    if (grads_[i].size() == 0) continue;  // nothing flowed here
    nodes_[i].vjp(*this, grads_[i], nodes_[i].a, nodes_[i].b);
  }
}

const Mat& Tape::grad(Var v) const {
  static const Mat kEmpty;
  const Node& n = node(v);
  if (v.id >= static_cast<int>(grads_.size())) return kEmpty;
  if (grads_[v.id].size() == 0) {
    // Return a correctly shaped zero for tensors no gradient reached.
    const_cast<Tape*>(this)->grads_[v.id] = Mat::zeros(n.value.rows, n.value.cols);
  }
  return grads_[v.id];
}

void Tape::dump(std::ostream& os) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    os << i << ": " << n.op << " (" << n.value.rows << "x" << n.value.cols << ")";
    if (n.a >= 0) os << " <- " << n.a;
    if (n.b >= 0) os << ", " << n.b;
    if (!n.tracked) os << " [const]";
    os << "\n";
  }
}

double grad_check(const BuildFn& fn, const std::vector<Mat>& inputs, double eps) {
  if (eps <= 0.0) throw DomainError("grad_check: eps must be positive");

  auto eval = [&](const std::vector<Mat>& xs) {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(xs.size());
    for (const Mat& x : xs) leaves.push_back(tape.leaf(x));
    Var out = fn(tape, leaves);
    if (!tape.value(out).is_scalar()) throw ContractError("grad_check: fn must return a scalar");
    return tape.value(out).d[0];
  };

  // Analytic gradients once.
  Tape tape;
  std::vector<Var> leaves;
  for (const Mat& x : inputs) leaves.push_back(tape.leaf(x));
  Var out = fn(tape, leaves);
  if (!tape.value(out).is_scalar()) throw ContractError("grad_check: fn must return a scalar");
  tape.backward(out);

  double worst = 0.0;
  std::vector<Mat> xs = inputs;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const Mat& g_ad = tape.grad(leaves[k]);
    for (std::size_t i = 0; i < xs[k].size(); ++i) {
      const double orig = xs[k].d[i];
      xs[k].d[i] = orig + eps;
      const double fp = eval(xs);
      xs[k].d[i] = orig - eps;
      const double fm = eval(xs);
      xs[k].d[i] = orig;
      const double g_fd = (fp - fm) / (2.0 * eps);
      const double err = std::abs(g_ad.d[i] - g_fd) / (std::abs(g_fd) + 1e-8);
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace dysent::ad
