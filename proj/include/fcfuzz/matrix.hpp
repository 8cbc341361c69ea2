#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace fcfuzz {

// Dense row-major matrix of doubles.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0)
      : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}

  double& operator()(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const {
    return v[static_cast<size_t>(r) * cols + c];
  }
  std::span<double> row(int r) {
    return {v.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
  }
  std::span<const double> row(int r) const {
    return {v.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
  }
  size_t size() const { return v.size(); }
};

// Numeric CSV, no header, ',' separated, '.' decimal. Rejects ragged rows and
// non-finite cells; errors carry 1-based row/column positions.
Mat read_csv_matrix(const std::filesystem::path& path);
// Shortest exact decimal form per cell.
void write_csv_matrix(const std::filesystem::path& path, const Mat& m);
// Full-precision scientific notation (connectivity matrix exports).
void write_csv_matrix_scientific(const std::filesystem::path& path, const Mat& m);

// Solve A x = b for symmetric positive definite A (in-place Cholesky).
// Throws Error when the factorization breaks down.
std::vector<double> cholesky_solve(Mat a, std::vector<double> b);

}  // namespace fcfuzz
