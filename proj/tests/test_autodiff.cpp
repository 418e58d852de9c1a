#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dysent/errors.hpp"
#include "dysent/rng.hpp"
#include "dysent/tape.hpp"

using namespace dysent;
using ad::Mat;
using ad::Tape;
using ad::Var;

namespace {

Mat random_mat(int r, int c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (auto& x : m.d) x = (uniform_real(rng) * 2.0 - 1.0) * scale;
  return m;
}

}  // namespace

TEST_CASE("forward values of the smooth primitives") {
  Tape tape;
  Var x = tape.constant(Mat::scalar(0.0));
  CHECK(tape.value(tape.sigmoid(x)).d[0] == doctest::Approx(0.5));

  Var row = tape.constant(Mat::row({1.0, 1.0, 1.0}));
  const Mat& sm = tape.value(tape.softmax_rows(row));
  for (double v : sm.d) CHECK(v == doctest::Approx(1.0 / 3.0));

  Rng rng = make_rng(1);
  Mat a = random_mat(4, 3, rng);
  Var va = tape.leaf(a);
  const Mat& cos_self = tape.value(tape.cosine_rows(va, va));
  for (double v : cos_self.d) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("backward matches hand derivatives") {
  {
    Tape tape;
    Var x = tape.leaf(Mat::scalar(3.0));
    Var y = tape.mul(x, x);
    tape.backward(y);
    CHECK(tape.grad(x).d[0] == doctest::Approx(6.0));
  }
  {
    // d/dx log(sigmoid(x)) = 1 - sigmoid(x) = 0.5 at x = 0.
    Tape tape;
    Var x = tape.leaf(Mat::scalar(0.0));
    Var y = tape.log(tape.sigmoid(x));
    tape.backward(y);
    CHECK(tape.grad(x).d[0] == doctest::Approx(0.5));
  }
}

TEST_CASE("gradient of sum(A*B) against finite differences") {
  Rng rng = make_rng(2);
  Mat a = random_mat(3, 4, rng);
  Mat b = random_mat(4, 2, rng);
  double err = ad::grad_check(
      [](Tape& t, const std::vector<Var>& xs) { return t.sum(t.matmul(xs[0], xs[1])); }, {a, b},
      1e-5);
  CHECK(err < 1e-6);

  // The analytic gradient w.r.t. A is the row-broadcast of B's column sums.
  Tape tape;
  Var va = tape.leaf(a);
  Var vb = tape.constant(b);
  tape.backward(tape.sum(tape.matmul(va, vb)));
  const Mat& ga = tape.grad(va);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) {
      double col_sum = 0.0;
      for (int j = 0; j < 2; ++j) col_sum += b.at(c, j);
      CHECK(ga.at(r, c) == doctest::Approx(col_sum));
    }
}

TEST_CASE("grad_check on a quadratic form and a constant") {
  Rng rng = make_rng(3);
  Mat x = random_mat(1, 5, rng);
  double err = ad::grad_check(
      [](Tape& t, const std::vector<Var>& xs) { return t.sum_squares(xs[0]); }, {x}, 1e-5);
  CHECK(err < 1e-6);

  double err_const = ad::grad_check(
      [](Tape& t, const std::vector<Var>& xs) {
        (void)xs;
        Var c = t.constant(Mat::scalar(2.0));
        return t.mul(t.sum(xs[0]), t.scale(c, 0.0));  // identically zero
      },
      {x}, 1e-5);
  CHECK(err_const == doctest::Approx(0.0));
}

// Every primitive, random shapes <= 8, eps = 1e-5, double precision.
TEST_CASE("grad_check over the whole primitive set") {
  Rng rng = make_rng(4);
  const double eps = 1e-5;
  const double tol = 1e-4;

  auto check1 = [&](const char* name, auto fn, Mat input) {
    double err = ad::grad_check(
        [&](Tape& t, const std::vector<Var>& xs) { return t.mean(fn(t, xs[0])); }, {input}, eps);
    INFO(std::string(name));
    CHECK(err < tol);
  };

  for (int trial = 0; trial < 3; ++trial) {
    const int r = uniform_int(rng, 1, 8), c = uniform_int(rng, 1, 8);
    Mat m = random_mat(r, c, rng);

    check1("sigmoid", [](Tape& t, Var x) { return t.sigmoid(x); }, m);
    check1("tanh", [](Tape& t, Var x) { return t.tanh(x); }, m);
    check1("exp", [](Tape& t, Var x) { return t.exp(x); }, m);
    check1("scale", [](Tape& t, Var x) { return t.scale(x, -1.7); }, m);
    // Rows of a softmax sum to 1, so weight them before reducing or the
    // reference gradient is identically zero.
    Mat sm_w = random_mat(r, c, rng);
    check1("softmax",
           [&sm_w](Tape& t, Var x) { return t.mul(t.softmax_rows(x), t.constant(sm_w)); }, m);
    check1("logsumexp", [](Tape& t, Var x) { return t.logsumexp_rows(x); }, m);
    check1("suffix_sum", [](Tape& t, Var x) { return t.suffix_sum_cols(x); }, m);
    check1("reverse", [](Tape& t, Var x) { return t.reverse_cols(x); }, m);
    check1("reshape", [r, c](Tape& t, Var x) { return t.reshape(x, c, r); }, m);
    check1("l2_norm", [](Tape& t, Var x) { return t.l2_norm(x); }, m);
    check1("sum", [](Tape& t, Var x) { return t.sum(x); }, m);

    Mat pos = random_mat(r, c, rng);
    for (auto& v : pos.d) v = std::abs(v) + 0.5;  // keep log well away from 0
    check1("log", [](Tape& t, Var x) { return t.log(x); }, pos);

    Mat m2 = random_mat(r, c, rng);
    auto check2 = [&](const char* name, auto fn, Mat a, Mat b) {
      double err = ad::grad_check(
          [&](Tape& t, const std::vector<Var>& xs) { return t.mean(fn(t, xs[0], xs[1])); },
          {a, b}, eps);
      INFO(std::string(name));
      CHECK(err < tol);
    };
    check2("add", [](Tape& t, Var a, Var b) { return t.add(a, b); }, m, m2);
    check2("sub", [](Tape& t, Var a, Var b) { return t.sub(a, b); }, m, m2);
    check2("mul", [](Tape& t, Var a, Var b) { return t.mul(a, b); }, m, m2);
    check2("dot_rows", [](Tape& t, Var a, Var b) { return t.dot_rows(a, b); }, m, m2);
    check2("cosine_rows", [](Tape& t, Var a, Var b) { return t.cosine_rows(a, b); }, m, m2);
    check2("concat_cols", [](Tape& t, Var a, Var b) { return t.concat_cols(a, b); }, m, m2);
    check2("concat_rows", [](Tape& t, Var a, Var b) { return t.concat_rows(a, b); }, m, m2);

    const int k = uniform_int(rng, 1, 8);
    Mat mm = random_mat(c, k, rng);
    check2("matmul", [](Tape& t, Var a, Var b) { return t.matmul(a, b); }, m, mm);

    // Scalar broadcasting.
    Mat s = random_mat(1, 1, rng);
    check2("mul scalar", [](Tape& t, Var a, Var b) { return t.mul(a, b); }, s, m2);
    check2("add scalar", [](Tape& t, Var a, Var b) { return t.add(a, b); }, m, s);

    if (c >= 2)
      check1("slice_cols", [c](Tape& t, Var x) { return t.slice_cols(x, 1, c); }, m);
    if (r >= 2)
      check1("slice_rows", [r](Tape& t, Var x) { return t.slice_rows(x, 0, r - 1); }, m);

    std::vector<int> idx;
    for (int i = 0; i < 6; ++i) idx.push_back(uniform_int(rng, 0, r - 1));
    check1("gather_rows", [idx](Tape& t, Var x) { return t.gather_rows(x, idx); }, m);

    check1("clamp", [](Tape& t, Var x) { return t.clamp(x, -0.4, 0.4); }, m);
  }
}

TEST_CASE("spmm forward and gradient") {
  // Constant sparse left operand, tracked dense right operand.
  Csr sp;
  sp.rows = 3;
  sp.cols = 3;
  sp.row_ptr = {0, 2, 3, 4};
  sp.col_idx = {0, 2, 1, 0};
  sp.vals = {0.5, 2.0, -1.0, 3.0};

  Rng rng = make_rng(6);
  Mat b = random_mat(3, 4, rng);
  double err = ad::grad_check(
      [&](Tape& t, const std::vector<Var>& xs) { return t.mean(t.spmm(&sp, xs[0])); }, {b}, 1e-5);
  CHECK(err < 1e-6);

  Tape tape;
  Var vb = tape.constant(b);
  const Mat& out = tape.value(tape.spmm(&sp, vb));
  CHECK(out.at(0, 0) == doctest::Approx(0.5 * b.at(0, 0) + 2.0 * b.at(2, 0)));
  CHECK(out.at(2, 1) == doctest::Approx(3.0 * b.at(0, 1)));
}

TEST_CASE("shared subexpressions accumulate along all paths") {
  // f = (x + x) * (x + x) = 4 x^2, df/dx = 8x.
  Tape tape;
  Var x = tape.leaf(Mat::scalar(1.5));
  Var z = tape.add(x, x);
  Var f = tape.mul(z, z);
  tape.backward(f);
  CHECK(tape.grad(x).d[0] == doctest::Approx(12.0));
}

TEST_CASE("backward is repeatable on an immutable tape") {
  Rng rng = make_rng(7);
  Tape tape;
  Var x = tape.leaf(random_mat(3, 3, rng));
  Var y = tape.leaf(random_mat(3, 3, rng));
  Var loss = tape.mean(tape.tanh(tape.matmul(x, y)));
  tape.backward(loss);
  Mat gx = tape.grad(x);
  tape.backward(loss);
  CHECK(tape.grad(x).d == gx.d);
}

TEST_CASE("contract and shape errors") {
  Tape tape;
  Var x = tape.leaf(Mat::zeros(2, 2));
  CHECK_THROWS_AS(tape.backward(x), ContractError);

  Var c = tape.constant(Mat::scalar(1.0));
  CHECK_THROWS_AS(tape.backward(c), ContractError);

  Var y = tape.leaf(Mat::zeros(3, 2));
  CHECK_THROWS_WITH_AS(static_cast<void>(tape.matmul(x, y)), doctest::Contains("matmul"),
                       ShapeError);
  CHECK_THROWS_WITH_AS(static_cast<void>(tape.add(x, y)), doctest::Contains("add"), ShapeError);
}

TEST_CASE("untracked constants receive no gradient") {
  Tape tape;
  Var x = tape.leaf(Mat::scalar(2.0));
  Var c = tape.constant(Mat::scalar(5.0));
  Var f = tape.mul(x, c);
  tape.backward(f);
  CHECK(tape.grad(x).d[0] == doctest::Approx(5.0));
  CHECK(tape.grad(c).d[0] == 0.0);
}
