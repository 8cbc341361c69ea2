#include "fcfuzz/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "fcfuzz/common.hpp"

namespace fcfuzz {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::string strip_comment(std::string line) {
  size_t hash = line.find('#');
  if (hash != std::string::npos) line.erase(hash);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

const char* to_string(ClassLabel label) {
  switch (label) {
    case ClassLabel::HC: return "HC";
    case ClassLabel::SZ: return "SZ";
    case ClassLabel::ADHD: return "ADHD";
  }
  return "?";
}

std::optional<ClassLabel> label_from_string(std::string_view s) {
  if (s == "HC") return ClassLabel::HC;
  if (s == "SZ") return ClassLabel::SZ;
  if (s == "ADHD") return ClassLabel::ADHD;
  return std::nullopt;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest '" + path.string() + "'");
  DatasetManifest m;
  std::string raw;
  int lineno = 0;
  std::set<std::string> ids;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = strip_comment(raw);
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    const std::string where =
        path.string() + ":" + std::to_string(lineno);
    if (toks[0] == "roi_count") {
      if (toks.size() != 3 || toks[1] != "=")
        throw ValidationError(where + ": expected 'roi_count = N'");
      m.roi_count = static_cast<int>(parse_int(toks[2], where));
      if (m.roi_count < 2)
        throw ValidationError(where + ": roi_count must be >= 2");
    } else if (toks[0] == "seed") {
      if (toks.size() != 3 || toks[1] != "=")
        throw ValidationError(where + ": expected 'seed = N'");
      long long s = parse_int(toks[2], where);
      if (s < 0) throw ValidationError(where + ": seed must be non-negative");
      m.seed = static_cast<uint64_t>(s);
    } else if (toks[0] == "subject") {
      if (toks.size() < 4)
        throw ValidationError(where + ": expected 'subject <id> <label> <path> [k=v ...]'");
      ManifestEntry e;
      e.id = toks[1];
      auto label = label_from_string(toks[2]);
      if (!label)
        throw ValidationError(where + ": unknown label '" + toks[2] +
                              "' (expected HC, SZ or ADHD)");
      e.label = *label;
      e.path = toks[3];
      for (size_t i = 4; i < toks.size(); ++i) {
        size_t eq = toks[i].find('=');
        if (eq == std::string::npos || eq == 0)
          throw ValidationError(where + ": bad extra field '" + toks[i] +
                                "' (expected key=value)");
        e.extras[toks[i].substr(0, eq)] = toks[i].substr(eq + 1);
      }
      if (!ids.insert(e.id).second)
        throw ValidationError(where + ": duplicate subject id '" + e.id + "'");
      m.subjects.push_back(std::move(e));
    } else {
      throw ValidationError(where + ": unknown directive '" + toks[0] + "'");
    }
  }
  if (m.roi_count == 0)
    throw ValidationError(path.string() + ": missing 'roi_count = N'");
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write manifest '" + path.string() + "'");
  out << "roi_count = " << m.roi_count << "\n";
  if (m.seed) out << "seed = " << *m.seed << "\n";
  for (const auto& e : m.subjects) {
    out << "subject " << e.id << " " << to_string(e.label) << " " << e.path;
    for (const auto& [k, v] : e.extras) out << " " << k << "=" << v;
    out << "\n";
  }
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

std::vector<SubjectRecord> load_dataset(const std::filesystem::path& manifest_path) {
  DatasetManifest m = read_manifest(manifest_path);
  const auto base = manifest_path.parent_path();
  std::vector<SubjectRecord> subjects;
  subjects.reserve(m.subjects.size());
  for (const auto& e : m.subjects) {
    auto series_path = base / e.path;
    if (!std::filesystem::exists(series_path))
      throw ValidationError("subject '" + e.id + "': missing series file '" +
                            series_path.string() + "'");
    SubjectRecord rec;
    rec.id = e.id;
    rec.label = e.label;
    rec.extras = e.extras;
    rec.series = read_csv_matrix(series_path);
    if (rec.series.rows != m.roi_count)
      throw ValidationError("subject '" + e.id + "': series has " +
                            std::to_string(rec.series.rows) +
                            " rows but manifest declares roi_count = " +
                            std::to_string(m.roi_count));
    if (rec.series.cols < 3)
      throw ValidationError("subject '" + e.id + "': needs at least 3 timepoints, got " +
                            std::to_string(rec.series.cols));
    subjects.push_back(std::move(rec));
  }
  return subjects;
}

void save_dataset(const std::filesystem::path& dir,
                  const std::vector<SubjectRecord>& subjects,
                  std::optional<uint64_t> seed) {
  std::filesystem::create_directories(dir / "series");
  DatasetManifest m;
  m.seed = seed;
  m.roi_count = subjects.empty() ? 2 : subjects.front().series.rows;
  for (const auto& s : subjects) {
    ManifestEntry e;
    e.id = s.id;
    e.label = s.label;
    e.path = "series/" + s.id + ".csv";
    e.extras = s.extras;
    write_csv_matrix(dir / e.path, s.series);
    m.subjects.push_back(std::move(e));
  }
  write_manifest(dir / "manifest.txt", m);
}

SyntheticSpec read_synthetic_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open synthetic spec '" + path.string() + "'");
  SyntheticSpec spec;
  std::string raw;
  int lineno = 0;
  bool saw_n = false;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = strip_comment(raw);
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (toks[0] == "block") {
      // block = <label> <start> <end> <target_r>
      if (toks.size() != 6 || toks[1] != "=")
        throw ValidationError(where + ": expected 'block = LABEL START END TARGET'");
      auto label = label_from_string(toks[2]);
      if (!label) throw ValidationError(where + ": unknown label '" + toks[2] + "'");
      RoiBlock b;
      b.start = static_cast<int>(parse_int(toks[3], where));
      b.end = static_cast<int>(parse_int(toks[4], where));
      b.target_r = parse_double(toks[5], where);
      spec.blocks[static_cast<int>(*label)].push_back(b);
      continue;
    }
    if (toks.size() < 3 || toks[1] != "=")
      throw ValidationError(where + ": expected 'key = value'");
    if (toks[0] == "n_per_class") {
      if (toks.size() != 5)
        throw ValidationError(where + ": expected 'n_per_class = HC SZ ADHD'");
      for (int c = 0; c < 3; ++c)
        spec.n_per_class[c] = static_cast<int>(parse_int(toks[2 + c], where));
      saw_n = true;
    } else if (toks[0] == "roi_count") {
      spec.roi_count = static_cast<int>(parse_int(toks[2], where));
    } else if (toks[0] == "timepoints") {
      spec.timepoints = static_cast<int>(parse_int(toks[2], where));
    } else if (toks[0] == "noise_sigma") {
      spec.noise_sigma = parse_double(toks[2], where);
    } else if (toks[0] == "seed") {
      spec.seed = static_cast<uint64_t>(parse_int(toks[2], where));
    } else {
      throw ValidationError(where + ": unknown key '" + toks[0] + "'");
    }
  }
  if (!saw_n)
    throw ValidationError(path.string() + ": missing 'n_per_class = HC SZ ADHD'");
  validate_spec(spec);
  return spec;
}

void validate_spec(const SyntheticSpec& spec) {
  for (int c = 0; c < 3; ++c)
    if (spec.n_per_class[c] < 0)
      throw ValidationError("synthetic spec: n_per_class must be non-negative");
  if (spec.roi_count < 2)
    throw ValidationError("synthetic spec: roi_count must be >= 2");
  if (spec.timepoints < 3)
    throw ValidationError("synthetic spec: timepoints must be >= 3");
  if (!(spec.noise_sigma > 0.0))
    throw ValidationError("synthetic spec: noise_sigma must be positive");
  for (int c = 0; c < 3; ++c) {
    std::vector<bool> used(spec.roi_count, false);
    for (const auto& b : spec.blocks[c]) {
      if (b.start < 0 || b.end > spec.roi_count || b.start >= b.end)
        throw ValidationError("synthetic spec: block [" + std::to_string(b.start) +
                              ", " + std::to_string(b.end) +
                              ") out of range for roi_count " +
                              std::to_string(spec.roi_count));
      if (!(b.target_r > -1.0 && b.target_r < 1.0))
        throw ValidationError("synthetic spec: block target correlation must be in (-1, 1)");
      for (int r = b.start; r < b.end; ++r) {
        if (used[r])
          throw ValidationError("synthetic spec: class " +
                                std::string(to_string(static_cast<ClassLabel>(c))) +
                                " has overlapping blocks at ROI " + std::to_string(r));
        used[r] = true;
      }
    }
  }
}

std::vector<SubjectRecord> generate_synthetic(const SyntheticSpec& spec) {
  validate_spec(spec);
  for (int c = 0; c < 3; ++c)
    for (const auto& b : spec.blocks[c])
      if (b.target_r < 0.0)
        throw ValidationError(
            "synthetic spec: negative block targets are not representable by "
            "the latent-factor model (alpha^2 >= 0)");

  Rng rng(spec.seed);
  std::vector<SubjectRecord> subjects;
  const double sigma = spec.noise_sigma;
  for (int c = 0; c < 3; ++c) {
    const auto& blocks = spec.blocks[c];
    for (int k = 0; k < spec.n_per_class[c]; ++k) {
      SubjectRecord rec;
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%s_%03d", to_string(static_cast<ClassLabel>(c)), k);
      rec.id = buf;
      rec.label = static_cast<ClassLabel>(c);
      rec.series = Mat(spec.roi_count, spec.timepoints);
      // noise for every ROI
      for (int r = 0; r < spec.roi_count; ++r)
        for (int t = 0; t < spec.timepoints; ++t)
          rec.series(r, t) = sigma * rng.normal();
      // shared latent per block
      std::vector<double> z(spec.timepoints);
      for (const auto& b : blocks) {
        for (int t = 0; t < spec.timepoints; ++t) z[t] = rng.normal();
        const double alpha = sigma * std::sqrt(b.target_r / (1.0 - b.target_r));
        for (int r = b.start; r < b.end; ++r)
          for (int t = 0; t < spec.timepoints; ++t)
            rec.series(r, t) += alpha * z[t];
      }
      subjects.push_back(std::move(rec));
    }
  }
  return subjects;
}

}  // namespace fcfuzz
