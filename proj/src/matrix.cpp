#include "fcfuzz/matrix.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "fcfuzz/common.hpp"

namespace fcfuzz {

Mat read_csv_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  Mat m;
  std::string line;
  std::vector<double> values;
  int row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    int col = 0;
    size_t pos = 0;
    while (pos <= line.size()) {
      size_t comma = line.find(',', pos);
      size_t end = (comma == std::string::npos) ? line.size() : comma;
      ++col;
      std::string_view token(line.data() + pos, end - pos);
      // trim spaces
      while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
      while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
      values.push_back(parse_double(
          token, path.string() + ": row " + std::to_string(row) + ", column " +
                     std::to_string(col)));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (m.cols == 0) {
      m.cols = col;
    } else if (col != m.cols) {
      throw ValidationError(path.string() + ": row " + std::to_string(row) +
                            " has " + std::to_string(col) + " columns, expected " +
                            std::to_string(m.cols));
    }
    ++m.rows;
  }
  m.v = std::move(values);
  return m;
}

void write_csv_matrix(const std::filesystem::path& path, const Mat& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  std::string line;
  for (int r = 0; r < m.rows; ++r) {
    line.clear();
    for (int c = 0; c < m.cols; ++c) {
      if (c) line += ',';
      line += format_double(m(r, c));
    }
    line += '\n';
    out << line;
  }
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

void write_csv_matrix_scientific(const std::filesystem::path& path, const Mat& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  char buf[40];
  std::string line;
  for (int r = 0; r < m.rows; ++r) {
    line.clear();
    for (int c = 0; c < m.cols; ++c) {
      if (c) line += ',';
      std::snprintf(buf, sizeof(buf), "%.17e", m(r, c));
      line += buf;
    }
    line += '\n';
    out << line;
  }
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

std::vector<double> cholesky_solve(Mat a, std::vector<double> b) {
  const int n = a.rows;
  if (a.cols != n || static_cast<int>(b.size()) != n)
    throw Error("cholesky_solve: shape mismatch");
  // A = L L^T, lower triangle stored in place.
  for (int j = 0; j < n; ++j) {
    double d = a(j, j);
    for (int k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > 0.0) || !std::isfinite(d))
      throw Error("cholesky_solve: matrix not positive definite at pivot " +
                  std::to_string(j));
    const double ljj = std::sqrt(d);
    a(j, j) = ljj;
    for (int i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / ljj;
    }
  }
  // forward: L y = b
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= a(i, k) * b[k];
    b[i] = s / a(i, i);
  }
  // backward: L^T x = y
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < n; ++k) s -= a(k, i) * b[k];
    b[i] = s / a(i, i);
  }
  return b;
}

}  // namespace fcfuzz
