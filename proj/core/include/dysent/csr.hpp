#pragma once

#include <cstddef>
#include <vector>

namespace dysent {

// Row-compressed sparse matrix with double entries. Column indices are
// strictly increasing within each row.
struct Csr {
  int rows = 0;
  int cols = 0;
  std::vector<int> row_ptr;  // size rows + 1
  std::vector<int> col_idx;
  std::vector<double> vals;

  std::size_t nnz() const { return col_idx.size(); }

  double at(int r, int c) const {
    for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
      if (col_idx[k] == c) return vals[k];
    return 0.0;
  }

  // out = this * dense, where dense is row-major (cols x width).
  void multiply(const double* dense, int width, double* out) const {
    for (int r = 0; r < rows; ++r) {
      double* orow = out + static_cast<std::size_t>(r) * width;
      for (int j = 0; j < width; ++j) orow[j] = 0.0;
      for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
        const double v = vals[k];
        const double* drow = dense + static_cast<std::size_t>(col_idx[k]) * width;
        for (int j = 0; j < width; ++j) orow[j] += v * drow[j];
      }
    }
  }

  // out = this^T * dense. Valid for any CSR; callers with symmetric
  // matrices can use multiply directly.
  void multiply_transpose(const double* dense, int width, double* out) const {
    for (std::size_t i = 0; i < static_cast<std::size_t>(cols) * width; ++i) out[i] = 0.0;
    for (int r = 0; r < rows; ++r) {
      const double* drow = dense + static_cast<std::size_t>(r) * width;
      for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
        double* orow = out + static_cast<std::size_t>(col_idx[k]) * width;
        const double v = vals[k];
        for (int j = 0; j < width; ++j) orow[j] += v * drow[j];
      }
    }
  }
};

}  // namespace dysent
