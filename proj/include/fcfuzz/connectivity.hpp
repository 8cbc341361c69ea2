#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fcfuzz/data_model.hpp"
#include "fcfuzz/matrix.hpp"

namespace fcfuzz {

// Symmetric R x R Pearson matrix for one subject. Diagonal is exactly 1 for
// rows with nonzero variance; zero-variance pairs are set to 0 and counted.
struct ConnectivityMatrix {
  std::string subject_id;
  Mat values;
  int zero_variance_pairs = 0;
};

// Voxel -> ROI assignment; kBackground marks voxels outside every ROI.
struct LabelMap {
  static constexpr int kBackground = -1;
  std::vector<int> labels;
};

struct PearsonResult {
  double r = 0.0;
  bool zero_variance = false;
};

// Sample Pearson r via the centered two-pass formula. Constant series give
// r = 0 with the zero_variance flag set.
PearsonResult pearson(std::span<const double> x, std::span<const double> y);

// Mean voxel series per ROI. Every ROI in [0, roi_count) must own >= 1 voxel.
Mat roi_average(const Mat& voxel_series, const LabelMap& labels, int roi_count);

ConnectivityMatrix connectivity_matrix(const SubjectRecord& record);

// Binary PPM (P6) heatmap, one pixel per cell: -1 -> blue, 0 -> white,
// +1 -> red, linear in between.
void export_heatmap(const Mat& values, const std::filesystem::path& path);

}  // namespace fcfuzz
