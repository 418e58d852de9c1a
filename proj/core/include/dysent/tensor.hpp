#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace dysent::ad {

// Dense row-major matrix of doubles. Vectors are 1 x n rows or n x 1
// columns; scalars are 1 x 1.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> d;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), d(static_cast<std::size_t>(r) * c, 0.0) {}

  static Mat zeros(int r, int c) { return Mat(r, c); }
  static Mat filled(int r, int c, double v) {
    Mat m(r, c);
    for (auto& x : m.d) x = v;
    return m;
  }
  static Mat scalar(double v) {
    Mat m(1, 1);
    m.d[0] = v;
    return m;
  }
  static Mat row(std::vector<double> vals) {
    Mat m;
    m.rows = 1;
    m.cols = static_cast<int>(vals.size());
    m.d = std::move(vals);
    return m;
  }
  static Mat column(std::vector<double> vals) {
    Mat m;
    m.rows = static_cast<int>(vals.size());
    m.cols = 1;
    m.d = std::move(vals);
    return m;
  }

  double& at(int r, int c) { return d[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return d[static_cast<std::size_t>(r) * cols + c]; }

  std::size_t size() const { return d.size(); }
  bool is_scalar() const { return rows == 1 && cols == 1; }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

  double scalar_value() const {
    assert(is_scalar());
    return d[0];
  }
};

}  // namespace dysent::ad
