#include <doctest.h>

#include <fstream>

#include "fcfuzz/common.hpp"
#include "fcfuzz/data_model.hpp"
#include "oracles.hpp"

using namespace fcfuzz;

TEST_SUITE("data_model") {

TEST_CASE("manifest with zero subjects loads to an empty list") {
  oracles::TempDir tmp;
  std::ofstream(tmp.path / "manifest.txt") << "roi_count = 118\n";
  CHECK(load_dataset(tmp.path / "manifest.txt").empty());
}

TEST_CASE("single subject round-trips through manifest and series file") {
  oracles::TempDir tmp;
  Mat series(118, 142);
  Rng rng(11);
  for (auto& v : series.v) v = rng.normal();
  write_csv_matrix(tmp.path / "s1.csv", series);
  std::ofstream(tmp.path / "manifest.txt")
      << "roi_count = 118\nsubject sub-001 SZ s1.csv\n";

  const auto subjects = load_dataset(tmp.path / "manifest.txt");
  REQUIRE(subjects.size() == 1);
  CHECK(subjects[0].id == "sub-001");
  CHECK(subjects[0].label == ClassLabel::SZ);
  CHECK(subjects[0].series.rows == 118);
  CHECK(subjects[0].series.cols == 142);
  CHECK(subjects[0].series.v == series.v);
}

TEST_CASE("row-count mismatch is reported with the subject id") {
  oracles::TempDir tmp;
  Mat series(117, 10, 1.0);
  write_csv_matrix(tmp.path / "bad.csv", series);
  std::ofstream(tmp.path / "manifest.txt")
      << "roi_count = 118\nsubject sub-bad HC bad.csv\n";
  try {
    load_dataset(tmp.path / "manifest.txt");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("sub-bad") != std::string::npos);
    CHECK(std::string(e.what()).find("117") != std::string::npos);
  }
}

TEST_CASE("missing series file and duplicate ids are rejected") {
  oracles::TempDir tmp;
  std::ofstream(tmp.path / "manifest.txt")
      << "roi_count = 118\nsubject sub-x HC nowhere.csv\n";
  CHECK_THROWS_AS(load_dataset(tmp.path / "manifest.txt"), ValidationError);

  std::ofstream(tmp.path / "dup.txt")
      << "roi_count = 4\nsubject a HC p.csv\nsubject a SZ q.csv\n";
  CHECK_THROWS_AS(read_manifest(tmp.path / "dup.txt"), ValidationError);
}

TEST_CASE("non-finite series values are rejected") {
  oracles::TempDir tmp;
  std::ofstream(tmp.path / "s.csv") << "1,2,3\n4,nan,6\n";
  std::ofstream(tmp.path / "manifest.txt")
      << "roi_count = 2\nsubject s HC s.csv\n";
  CHECK_THROWS_AS(load_dataset(tmp.path / "manifest.txt"), ValidationError);
}

TEST_CASE("synthetic generation with zero subjects is empty") {
  SyntheticSpec spec;
  spec.n_per_class = {0, 0, 0};
  spec.roi_count = 8;
  spec.timepoints = 16;
  CHECK(generate_synthetic(spec).empty());
}

TEST_CASE("synthetic generation is bitwise deterministic per seed") {
  SyntheticSpec spec;
  spec.n_per_class = {2, 1, 1};
  spec.roi_count = 12;
  spec.timepoints = 40;
  spec.seed = 99;
  spec.blocks[0].push_back({0, 4, 0.7});
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].series.v == b[i].series.v);
  }
}

TEST_CASE("class counts match n_per_class exactly") {
  SyntheticSpec spec;
  spec.n_per_class = {5, 3, 2};
  spec.roi_count = 6;
  spec.timepoints = 20;
  const auto subjects = generate_synthetic(spec);
  int counts[3] = {0, 0, 0};
  for (const auto& s : subjects) ++counts[static_cast<int>(s.label)];
  CHECK(counts[0] == 5);
  CHECK(counts[1] == 3);
  CHECK(counts[2] == 2);
}

TEST_CASE("block pair at target 0.9 with T=5000 lands within +-0.05") {
  SyntheticSpec spec;
  spec.n_per_class = {1, 0, 0};
  spec.roi_count = 4;
  spec.timepoints = 5000;
  spec.noise_sigma = 0.1;
  spec.seed = 5;
  spec.blocks[0].push_back({0, 2, 0.9});
  const auto subjects = generate_synthetic(spec);
  REQUIRE(subjects.size() == 1);
  const double r = oracles::pearson_direct(subjects[0].series.row(0),
                                           subjects[0].series.row(1));
  CHECK(std::fabs(r - 0.9) < 0.05);
  // off-block ROI stays near zero correlation
  const double r_off = oracles::pearson_direct(subjects[0].series.row(0),
                                               subjects[0].series.row(3));
  CHECK(std::fabs(r_off) < 0.05);
}

TEST_CASE("save/load/save reproduces byte-identical series files") {
  SyntheticSpec spec;
  spec.n_per_class = {2, 2, 2};
  spec.roi_count = 7;
  spec.timepoints = 25;
  spec.seed = 3;
  spec.blocks[1].push_back({1, 4, 0.5});
  const auto subjects = generate_synthetic(spec);

  oracles::TempDir tmp;
  save_dataset(tmp.path / "a", subjects, spec.seed);
  const auto loaded = load_dataset(tmp.path / "a" / "manifest.txt");
  save_dataset(tmp.path / "b", loaded, spec.seed);

  auto read_bytes = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  for (const auto& s : subjects) {
    const auto fa = read_bytes(tmp.path / "a" / "series" / (s.id + ".csv"));
    const auto fb = read_bytes(tmp.path / "b" / "series" / (s.id + ".csv"));
    CHECK(!fa.empty());
    CHECK(fa == fb);
  }
}

TEST_CASE("spec validation rejects bad blocks and negative targets") {
  SyntheticSpec spec;
  spec.n_per_class = {1, 1, 1};
  spec.roi_count = 10;
  spec.timepoints = 20;

  SUBCASE("overlapping blocks in one class") {
    spec.blocks[0].push_back({0, 5, 0.5});
    spec.blocks[0].push_back({4, 8, 0.5});
    CHECK_THROWS_AS(validate_spec(spec), ValidationError);
  }
  SUBCASE("out-of-range block") {
    spec.blocks[2].push_back({6, 12, 0.5});
    CHECK_THROWS_AS(validate_spec(spec), ValidationError);
  }
  SUBCASE("target outside (-1,1)") {
    spec.blocks[0].push_back({0, 2, 1.0});
    CHECK_THROWS_AS(validate_spec(spec), ValidationError);
  }
  SUBCASE("negative target passes range validation, generation rejects it") {
    spec.blocks[0].push_back({0, 2, -0.5});
    CHECK_NOTHROW(validate_spec(spec));
    CHECK_THROWS_AS(generate_synthetic(spec), ValidationError);
  }
}

TEST_CASE("synthetic spec file parses; manifest extras pass through") {
  oracles::TempDir tmp;
  std::ofstream(tmp.path / "spec.txt")
      << "# demo\nn_per_class = 2 1 1\nroi_count = 16\ntimepoints = 30\n"
      << "noise_sigma = 0.5\nseed = 7\nblock = HC 0 4 0.8\nblock = SZ 4 8 0.6\n";
  const SyntheticSpec spec = read_synthetic_spec(tmp.path / "spec.txt");
  CHECK(spec.n_per_class[0] == 2);
  CHECK(spec.roi_count == 16);
  CHECK(spec.blocks[0].size() == 1);
  CHECK(spec.blocks[1][0].target_r == doctest::Approx(0.6));

  std::ofstream(tmp.path / "m.txt")
      << "roi_count = 2\nsubject s1 HC s1.csv age=31 sex=M\n";
  const DatasetManifest manifest = read_manifest(tmp.path / "m.txt");
  CHECK(manifest.subjects[0].extras.at("age") == "31");
  CHECK(manifest.subjects[0].extras.at("sex") == "M");
}

}  // TEST_SUITE
