#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fcfuzz/matrix.hpp"

namespace fcfuzz {

enum class ClassLabel : int { HC = 0, SZ = 1, ADHD = 2 };
constexpr int kNumClasses = 3;

const char* to_string(ClassLabel label);
std::optional<ClassLabel> label_from_string(std::string_view s);

// One subject: R x T ROI time series plus class label. Immutable after load.
struct SubjectRecord {
  std::string id;
  ClassLabel label = ClassLabel::HC;
  Mat series;  // rows = ROIs, cols = timepoints
  // Optional demographic pass-through fields (age, sex, ...), never required.
  std::map<std::string, std::string> extras;
};

struct ManifestEntry {
  std::string id;
  ClassLabel label = ClassLabel::HC;
  std::string path;  // relative to the manifest file
  std::map<std::string, std::string> extras;
};

struct DatasetManifest {
  int roi_count = 0;
  std::optional<uint64_t> seed;
  std::vector<ManifestEntry> subjects;
};

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);

// Loads every series file and validates record invariants (shared R, T >= 3,
// finite values, unique ids). Errors name the offending subject.
std::vector<SubjectRecord> load_dataset(const std::filesystem::path& manifest_path);

// Writes <dir>/manifest.txt plus one CSV per subject under <dir>/series/.
void save_dataset(const std::filesystem::path& dir,
                  const std::vector<SubjectRecord>& subjects,
                  std::optional<uint64_t> seed = std::nullopt);

// Contiguous ROI index block [start, end) sharing one latent signal.
struct RoiBlock {
  int start = 0;
  int end = 0;
  double target_r = 0.0;
};

struct SyntheticSpec {
  std::array<int, 3> n_per_class{0, 0, 0};
  int roi_count = 118;
  int timepoints = 142;
  std::array<std::vector<RoiBlock>, 3> blocks;  // per class
  double noise_sigma = 1.0;
  uint64_t seed = 0;
};

SyntheticSpec read_synthetic_spec(const std::filesystem::path& path);
void validate_spec(const SyntheticSpec& spec);

// Seeded latent-factor generator: ROIs inside a block emit
// alpha * z_block(t) + noise with alpha^2/(alpha^2 + sigma^2) = target_r,
// so intra-block Pearson correlation converges to target_r as T grows.
// Off-block ROIs are pure noise. Deterministic per (spec, seed).
std::vector<SubjectRecord> generate_synthetic(const SyntheticSpec& spec);

}  // namespace fcfuzz
