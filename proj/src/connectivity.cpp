#include "fcfuzz/connectivity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fcfuzz/common.hpp"

namespace fcfuzz {

PearsonResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw ValidationError("pearson: length mismatch (" + std::to_string(x.size()) +
                          " vs " + std::to_string(y.size()) + ")");
  const size_t n = x.size();
  if (n < 2) throw ValidationError("pearson: need at least 2 samples");

  auto is_constant = [](std::span<const double> v) {
    for (size_t i = 1; i < v.size(); ++i)
      if (v[i] != v[0]) return false;
    return true;
  };
  if (is_constant(x) || is_constant(y)) return {0.0, true};

  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return {0.0, true};
  double r = sxy / std::sqrt(sxx * syy);
  r = std::clamp(r, -1.0, 1.0);
  return {r, false};
}

Mat roi_average(const Mat& voxel_series, const LabelMap& labels, int roi_count) {
  const int v = voxel_series.rows;
  const int t = voxel_series.cols;
  if (static_cast<int>(labels.labels.size()) != v)
    throw ValidationError("roi_average: label map has " +
                          std::to_string(labels.labels.size()) +
                          " entries for " + std::to_string(v) + " voxels");
  std::vector<int> counts(roi_count, 0);
  Mat out(roi_count, t, 0.0);
  for (int i = 0; i < v; ++i) {
    const int r = labels.labels[i];
    if (r == LabelMap::kBackground) continue;
    if (r < 0 || r >= roi_count)
      throw ValidationError("roi_average: voxel " + std::to_string(i) +
                            " has ROI index " + std::to_string(r) +
                            " outside [0, " + std::to_string(roi_count) + ")");
    ++counts[r];
    for (int j = 0; j < t; ++j) out(r, j) += voxel_series(i, j);
  }
  for (int r = 0; r < roi_count; ++r) {
    if (counts[r] == 0)
      throw ValidationError("roi_average: ROI " + std::to_string(r) +
                            " has no voxels");
    const double inv = 1.0 / counts[r];
    for (int j = 0; j < t; ++j) out(r, j) *= inv;
  }
  return out;
}

ConnectivityMatrix connectivity_matrix(const SubjectRecord& record) {
  const int r = record.series.rows;
  ConnectivityMatrix cm;
  cm.subject_id = record.id;
  cm.values = Mat(r, r, 0.0);

  std::vector<bool> constant(r);
  for (int i = 0; i < r; ++i) {
    auto row = record.series.row(i);
    constant[i] = std::all_of(row.begin(), row.end(),
                              [&](double v) { return v == row[0]; });
    cm.values(i, i) = constant[i] ? 0.0 : 1.0;
    if (constant[i]) ++cm.zero_variance_pairs;
  }
  for (int i = 0; i < r; ++i) {
    for (int j = i + 1; j < r; ++j) {
      auto res = pearson(record.series.row(i), record.series.row(j));
      if (res.zero_variance && !constant[i] && !constant[j])
        ++cm.zero_variance_pairs;
      cm.values(i, j) = res.r;
      cm.values(j, i) = res.r;
    }
  }
  return cm;
}

void export_heatmap(const Mat& values, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write heatmap '" + path.string() + "'");
  out << "P6\n" << values.cols << " " << values.rows << "\n255\n";
  std::vector<unsigned char> pixels;
  pixels.reserve(values.size() * 3);
  for (int r = 0; r < values.rows; ++r) {
    for (int c = 0; c < values.cols; ++c) {
      const double v = std::clamp(values(r, c), -1.0, 1.0);
      unsigned char red, green, blue;
      if (v < 0.0) {
        const auto fade = static_cast<unsigned char>(std::lround(255.0 * (1.0 + v)));
        red = fade;
        green = fade;
        blue = 255;
      } else {
        const auto fade = static_cast<unsigned char>(std::lround(255.0 * (1.0 - v)));
        red = 255;
        green = fade;
        blue = fade;
      }
      pixels.push_back(red);
      pixels.push_back(green);
      pixels.push_back(blue);
    }
  }
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace fcfuzz
