#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fcfuzz/eval.hpp"

namespace fcfuzz {

enum class FitScope { Fold, All };

// One configuration file drives the whole pipeline. Unknown keys are errors.
struct PipelineConfig {
  std::optional<std::string> manifest_path;
  std::optional<std::string> synthetic_spec_path;
  bool heatmaps = false;
  FitScope fit_scope = FitScope::Fold;
  PipelineSpec spec;  // feature source, AE config, classifier, seed
  int cv_k = 10;
  std::string output_dir;
};

// Parses and fully validates; throws ValidationError listing every problem.
PipelineConfig parse_pipeline_config(const std::filesystem::path& path);

// All diagnostics for a config file, without executing anything.
std::vector<std::string> validate_config(const std::filesystem::path& path);

// Stage cache root: $FCFUZZ_CACHE_DIR if set, otherwise <output_dir>/cache.
std::filesystem::path cache_root(const PipelineConfig& config);

// dataset -> connectivity -> (optional global features) -> evaluation.
// Stages are content-hash keyed and reused when the hash matches; the final
// report files land in output_dir. Returns the evaluation report.
EvalReport run_pipeline(const PipelineConfig& config, std::ostream& log);

// Deterministic digest of every semantic config field.
std::string canonical_string(const PipelineConfig& config);

}  // namespace fcfuzz
