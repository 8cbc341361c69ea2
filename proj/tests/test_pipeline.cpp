#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fcfuzz/common.hpp"
#include "fcfuzz/pipeline.hpp"
#include "oracles.hpp"

using namespace fcfuzz;

namespace {

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE_MESSAGE(bool(in), "missing file: " << p.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_demo_synth_spec(const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "n_per_class = 6 6 6\n"
      << "roi_count = 12\n"
      << "timepoints = 50\n"
      << "noise_sigma = 1.0\n"
      << "seed = 404\n"
      << "block = HC 0 4 0.85\n"
      << "block = SZ 4 8 0.85\n"
      << "block = ADHD 8 12 0.85\n";
}

// Deliberately hard variant: weak, short blocks keep the accuracy strictly
// inside (0, 1) so the frozen golden value is sensitive to drift.
void write_noisy_synth_spec(const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "n_per_class = 8 8 8\n"
      << "roi_count = 10\n"
      << "timepoints = 24\n"
      << "noise_sigma = 1.0\n"
      << "seed = 405\n"
      << "block = HC 0 3 0.3\n"
      << "block = SZ 3 6 0.3\n"
      << "block = ADHD 6 9 0.3\n";
}

void write_demo_config(const std::filesystem::path& path,
                       const std::filesystem::path& synth_spec,
                       const std::filesystem::path& out_dir,
                       const std::string& classifier_block) {
  std::ofstream out(path);
  out << "[dataset]\nsynthetic = " << synth_spec.string() << "\n\n"
      << "[features]\nsource = raw_upper_triangle\n\n"
      << "[classifier]\n" << classifier_block << "\n"
      << "[eval]\nk = 3\nseed = 5\n\n"
      << "[output]\ndir = " << out_dir.string() << "\n";
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("empty config reports the required keys") {
  oracles::TempDir tmp;
  std::ofstream(tmp.path / "empty.cfg") << "";
  const auto diagnostics = validate_config(tmp.path / "empty.cfg");
  REQUIRE(!diagnostics.empty());
  bool mentions_dataset = false, mentions_output = false;
  for (const auto& d : diagnostics) {
    if (d.find("dataset") != std::string::npos) mentions_dataset = true;
    if (d.find("output") != std::string::npos) mentions_output = true;
  }
  CHECK(mentions_dataset);
  CHECK(mentions_output);
}

TEST_CASE("out-of-range and unknown keys are diagnosed without running") {
  oracles::TempDir tmp;
  std::ofstream(tmp.path / "bad.cfg")
      << "[dataset]\nmanifest = nowhere.txt\n"
      << "[eval]\nk = 0\n"
      << "[classifier]\nmethod = it2fr\nbogus_key = 1\n"
      << "[nonsense]\nx = 1\n"
      << "[output]\ndir = out\n";
  const auto diagnostics = validate_config(tmp.path / "bad.cfg");
  bool range = false, unknown_key = false, unknown_section = false;
  for (const auto& d : diagnostics) {
    if (d.find("out of range") != std::string::npos) range = true;
    if (d.find("bogus_key") != std::string::npos) unknown_key = true;
    if (d.find("[nonsense]") != std::string::npos) unknown_section = true;
  }
  CHECK(range);
  CHECK(unknown_key);
  CHECK(unknown_section);
}

TEST_CASE("valid demo config has no diagnostics") {
  oracles::TempDir tmp;
  write_demo_synth_spec(tmp.path / "synth.txt");
  write_demo_config(tmp.path / "demo.cfg", tmp.path / "synth.txt",
                    tmp.path / "out", "method = knn\nknn_k = 1\n");
  CHECK(validate_config(tmp.path / "demo.cfg").empty());
}

TEST_CASE("pipeline run produces a report and caches every stage") {
  oracles::TempDir tmp;
  write_demo_synth_spec(tmp.path / "synth.txt");
  write_demo_config(tmp.path / "demo.cfg", tmp.path / "synth.txt",
                    tmp.path / "out", "method = knn\nknn_k = 1\n");
  const PipelineConfig config = parse_pipeline_config(tmp.path / "demo.cfg");

  std::ostringstream log1;
  const EvalReport first = run_pipeline(config, log1);
  CHECK(first.mean.accuracy >= 0.0);
  CHECK(first.mean.accuracy <= 1.0);
  CHECK(std::filesystem::exists(tmp.path / "out" / "report.csv"));
  CHECK(std::filesystem::exists(tmp.path / "out" / "report.txt"));
  CHECK(std::filesystem::exists(tmp.path / "out" / "confusion_avg.csv"));
  CHECK(std::filesystem::exists(tmp.path / "out" / "confusion_avg.ppm"));
  CHECK(log1.str().find("cache hit") == std::string::npos);
  const std::string report_bytes = read_bytes(tmp.path / "out" / "report.csv");

  // second run: every stage is a cache hit and the report is byte-identical
  std::ostringstream log2;
  const EvalReport second = run_pipeline(config, log2);
  CHECK(log2.str().find("[dataset] cache hit") != std::string::npos);
  CHECK(log2.str().find("[connect] cache hit") != std::string::npos);
  CHECK(log2.str().find("[eval] cache hit") != std::string::npos);
  CHECK(read_bytes(tmp.path / "out" / "report.csv") == report_bytes);
  CHECK(second.mean.accuracy == doctest::Approx(first.mean.accuracy).epsilon(1e-12));
  CHECK(second.fold_metrics.size() == first.fold_metrics.size());
}

TEST_CASE("fresh caches reproduce byte-identical reports") {
  oracles::TempDir tmp;
  write_demo_synth_spec(tmp.path / "synth.txt");
  write_demo_config(tmp.path / "a.cfg", tmp.path / "synth.txt", tmp.path / "out_a",
                    "method = knn\nknn_k = 1\n");
  write_demo_config(tmp.path / "b.cfg", tmp.path / "synth.txt", tmp.path / "out_b",
                    "method = knn\nknn_k = 1\n");
  std::ostringstream log;
  run_pipeline(parse_pipeline_config(tmp.path / "a.cfg"), log);
  run_pipeline(parse_pipeline_config(tmp.path / "b.cfg"), log);
  CHECK(read_bytes(tmp.path / "out_a" / "report.csv") ==
        read_bytes(tmp.path / "out_b" / "report.csv"));
  CHECK(read_bytes(tmp.path / "out_a" / "confusion_avg.ppm") ==
        read_bytes(tmp.path / "out_b" / "confusion_avg.ppm"));
}

TEST_CASE("golden demo: it2fr-gwo accuracy matches the frozen value") {
  oracles::TempDir tmp;
  write_noisy_synth_spec(tmp.path / "synth.txt");
  write_demo_config(
      tmp.path / "demo.cfg", tmp.path / "synth.txt", tmp.path / "out",
      "method = it2fr\noptimizer = gwo\nrules = 2\nopt_population = 5\n"
      "opt_iterations = 10\n");
  const PipelineConfig config = parse_pipeline_config(tmp.path / "demo.cfg");
  std::ostringstream log;
  const EvalReport report = run_pipeline(config, log);

  const char* golden_env = std::getenv("FCFUZZ_GOLDEN_DIR");
  const std::filesystem::path golden_dir =
      golden_env ? std::filesystem::path(golden_env) : "tests/golden";
  const auto golden_file = golden_dir / "demo_it2fr_gwo_accuracy.txt";
  if (!std::filesystem::exists(golden_file)) {
    // first run freezes the value; committed alongside the tests
    std::filesystem::create_directories(golden_dir);
    std::ofstream(golden_file) << format_double(report.mean.accuracy) << "\n";
    MESSAGE("golden file created: " << golden_file.string());
  }
  std::ifstream in(golden_file);
  std::string line;
  REQUIRE(std::getline(in, line));
  const double frozen = parse_double(line, "golden accuracy");
  CHECK(report.mean.accuracy == doctest::Approx(frozen).epsilon(1e-12));
}

TEST_CASE("a live lock file blocks a second run") {
  oracles::TempDir tmp;
  write_demo_synth_spec(tmp.path / "synth.txt");
  write_demo_config(tmp.path / "locked.cfg", tmp.path / "synth.txt",
                    tmp.path / "out", "method = knn\n");
  std::filesystem::create_directories(tmp.path / "out");
  std::ofstream(tmp.path / "out" / ".fcfuzz.lock") << "held\n";
  const PipelineConfig config = parse_pipeline_config(tmp.path / "locked.cfg");
  std::ostringstream log;
  CHECK_THROWS_AS(run_pipeline(config, log), Error);
}

TEST_CASE("manifest and synthetic are mutually exclusive") {
  oracles::TempDir tmp;
  std::ofstream(tmp.path / "both.cfg")
      << "[dataset]\nmanifest = a\nsynthetic = b\n[output]\ndir = out\n";
  const auto diagnostics = validate_config(tmp.path / "both.cfg");
  bool found = false;
  for (const auto& d : diagnostics)
    if (d.find("mutually exclusive") != std::string::npos) found = true;
  CHECK(found);
}

TEST_CASE("canonical string distinguishes semantic changes only") {
  oracles::TempDir tmp;
  write_demo_synth_spec(tmp.path / "synth.txt");
  write_demo_config(tmp.path / "a.cfg", tmp.path / "synth.txt", tmp.path / "out",
                    "method = knn\nknn_k = 1\n");
  const PipelineConfig a = parse_pipeline_config(tmp.path / "a.cfg");
  PipelineConfig b = a;
  CHECK(canonical_string(a) == canonical_string(b));
  b.spec.seed = 999;
  CHECK(canonical_string(a) != canonical_string(b));
}

}  // TEST_SUITE
