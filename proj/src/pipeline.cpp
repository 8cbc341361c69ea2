#include "fcfuzz/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "fcfuzz/common.hpp"

namespace fcfuzz {

namespace {

struct IniFile {
  // section -> key -> (value, line)
  std::map<std::string, std::map<std::string, std::pair<std::string, int>>> data;
};

IniFile parse_ini(const std::filesystem::path& path,
                  std::vector<std::string>& diagnostics) {
  std::ifstream in(path);
  if (!in) {
    diagnostics.push_back("cannot open config '" + path.string() + "'");
    return {};
  }
  IniFile ini;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        diagnostics.push_back("line " + std::to_string(lineno) +
                              ": malformed section header");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      ini.data[section];
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      diagnostics.push_back("line " + std::to_string(lineno) +
                            ": expected 'key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) {
      diagnostics.push_back("line " + std::to_string(lineno) +
                            ": key '" + key + "' outside any section");
      continue;
    }
    if (ini.data[section].count(key)) {
      diagnostics.push_back("line " + std::to_string(lineno) +
                            ": duplicate key '" + key + "' in [" + section + "]");
      continue;
    }
    ini.data[section][key] = {value, lineno};
  }
  return ini;
}

class ConfigReader {
 public:
  ConfigReader(IniFile ini, std::vector<std::string>& diagnostics)
      : ini_(std::move(ini)), diagnostics_(diagnostics) {}

  bool has(const std::string& section, const std::string& key) {
    auto s = ini_.data.find(section);
    return s != ini_.data.end() && s->second.count(key) > 0;
  }

  std::optional<std::string> take(const std::string& section, const std::string& key) {
    auto s = ini_.data.find(section);
    if (s == ini_.data.end()) return std::nullopt;
    auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    std::string value = k->second.first;
    s->second.erase(k);
    return value;
  }

  long long take_int(const std::string& section, const std::string& key,
                     long long fallback, long long lo, long long hi) {
    auto raw = take(section, key);
    if (!raw) return fallback;
    try {
      const long long v = parse_int(*raw, "[" + section + "] " + key);
      if (v < lo || v > hi) {
        diagnostics_.push_back("[" + section + "] " + key + " = " + *raw +
                               " out of range [" + std::to_string(lo) + ", " +
                               std::to_string(hi) + "]");
        return fallback;
      }
      return v;
    } catch (const ValidationError& e) {
      diagnostics_.push_back(e.what());
      return fallback;
    }
  }

  double take_double(const std::string& section, const std::string& key,
                     double fallback, double lo, double hi) {
    auto raw = take(section, key);
    if (!raw) return fallback;
    try {
      const double v = parse_double(*raw, "[" + section + "] " + key);
      if (v < lo || v > hi) {
        diagnostics_.push_back("[" + section + "] " + key + " = " + *raw +
                               " out of range");
        return fallback;
      }
      return v;
    } catch (const ValidationError& e) {
      diagnostics_.push_back(e.what());
      return fallback;
    }
  }

  bool take_bool(const std::string& section, const std::string& key, bool fallback) {
    auto raw = take(section, key);
    if (!raw) return fallback;
    if (*raw == "true" || *raw == "1") return true;
    if (*raw == "false" || *raw == "0") return false;
    diagnostics_.push_back("[" + section + "] " + key +
                           ": expected true/false, got '" + *raw + "'");
    return fallback;
  }

  // Everything not consumed is an unknown key.
  void report_leftovers(const std::vector<std::string>& known_sections) {
    for (const auto& [section, keys] : ini_.data) {
      const bool known =
          std::find(known_sections.begin(), known_sections.end(), section) !=
          known_sections.end();
      if (!known) {
        diagnostics_.push_back("unknown section [" + section + "]");
        continue;
      }
      for (const auto& [key, value] : keys)
        diagnostics_.push_back("unknown key '" + key + "' in [" + section +
                               "] (line " + std::to_string(value.second) + ")");
    }
  }

 private:
  IniFile ini_;
  std::vector<std::string>& diagnostics_;
};

PipelineConfig parse_with_diagnostics(const std::filesystem::path& path,
                                      std::vector<std::string>& diagnostics) {
  ConfigReader reader(parse_ini(path, diagnostics), diagnostics);
  PipelineConfig config;

  config.manifest_path = reader.take("dataset", "manifest");
  config.synthetic_spec_path = reader.take("dataset", "synthetic");
  if (!config.manifest_path && !config.synthetic_spec_path)
    diagnostics.push_back("[dataset] needs either 'manifest' or 'synthetic'");
  if (config.manifest_path && config.synthetic_spec_path)
    diagnostics.push_back("[dataset] 'manifest' and 'synthetic' are mutually exclusive");

  config.heatmaps = reader.take_bool("connectivity", "heatmaps", false);

  config.spec.ae.recon_epochs = static_cast<int>(
      reader.take_int("autoencoder", "recon_epochs", 50, 0, 1000000));
  config.spec.ae.finetune_epochs = static_cast<int>(
      reader.take_int("autoencoder", "finetune_epochs", 30, 0, 1000000));
  config.spec.ae.batch_size =
      static_cast<int>(reader.take_int("autoencoder", "batch_size", 8, 1, 1 << 20));
  config.spec.ae.learning_rate =
      reader.take_double("autoencoder", "learning_rate", 1e-3, 1e-12, 1e3);
  config.spec.ae.recon_learning_rate =
      reader.take_double("autoencoder", "recon_learning_rate", 0.0, 0.0, 1e3);
  config.spec.ae.finetune_learning_rate =
      reader.take_double("autoencoder", "finetune_learning_rate", 0.0, 0.0, 1e3);
  config.spec.ae.freeze_encoder =
      reader.take_bool("autoencoder", "freeze_encoder", false);
  if (auto scope = reader.take("autoencoder", "fit_scope")) {
    if (*scope == "fold") {
      config.fit_scope = FitScope::Fold;
    } else if (*scope == "all") {
      config.fit_scope = FitScope::All;
    } else {
      diagnostics.push_back("[autoencoder] fit_scope must be 'fold' or 'all'");
    }
  }

  if (auto source = reader.take("features", "source")) {
    if (auto parsed = feature_source_from_string(*source)) {
      config.spec.feature_source = *parsed;
    } else {
      diagnostics.push_back("[features] unknown source '" + *source + "'");
    }
  }

  if (auto method = reader.take("classifier", "method")) {
    if (auto parsed = classifier_method_from_string(*method)) {
      config.spec.classifier.method = *parsed;
    } else {
      diagnostics.push_back("[classifier] unknown method '" + *method + "'");
    }
  }
  config.spec.classifier.rules =
      static_cast<int>(reader.take_int("classifier", "rules", 3, 1, 1000));
  config.spec.classifier.fou_delta =
      reader.take_double("classifier", "fou_delta", 0.2, 0.0, 0.999);
  config.spec.classifier.ridge =
      reader.take_double("classifier", "ridge", 1e-6, 0.0, 1e6);
  config.spec.classifier.knn_k =
      static_cast<int>(reader.take_int("classifier", "knn_k", 3, 1, 100000));
  config.spec.classifier.mlp_epochs =
      static_cast<int>(reader.take_int("classifier", "mlp_epochs", 60, 1, 1000000));
  config.spec.classifier.anfis_hybrid_iters = static_cast<int>(
      reader.take_int("classifier", "anfis_hybrid_iters", 20, 0, 1000000));
  if (auto optimizer = reader.take("classifier", "optimizer")) {
    if (*optimizer != "none") {
      if (auto kind = meta_kind_from_string(*optimizer)) {
        MetaheuristicSpec spec;
        spec.kind = *kind;
        config.spec.classifier.optimizer = spec;
      } else {
        diagnostics.push_back("[classifier] unknown optimizer '" + *optimizer + "'");
      }
    }
  }
  {
    const int pop =
        static_cast<int>(reader.take_int("classifier", "opt_population", 0, 0, 100000));
    const int iters =
        static_cast<int>(reader.take_int("classifier", "opt_iterations", 400, 1, 1000000));
    if (config.spec.classifier.optimizer) {
      config.spec.classifier.optimizer->population = pop;
      config.spec.classifier.optimizer->max_iter = iters;
    }
  }

  config.cv_k = static_cast<int>(reader.take_int("eval", "k", 10, 2, 100000));
  config.spec.seed = static_cast<uint64_t>(
      reader.take_int("eval", "seed", 0, 0, std::numeric_limits<long long>::max()));

  if (auto dir = reader.take("output", "dir")) {
    config.output_dir = *dir;
  } else {
    diagnostics.push_back("[output] missing required key 'dir'");
  }

  reader.report_leftovers({"dataset", "connectivity", "autoencoder", "features",
                           "classifier", "eval", "output"});
  return config;
}

}  // namespace

PipelineConfig parse_pipeline_config(const std::filesystem::path& path) {
  std::vector<std::string> diagnostics;
  PipelineConfig config = parse_with_diagnostics(path, diagnostics);
  if (!diagnostics.empty()) {
    std::string message = "config '" + path.string() + "' is invalid:";
    for (const auto& d : diagnostics) message += "\n  - " + d;
    throw ValidationError(message);
  }
  return config;
}

std::vector<std::string> validate_config(const std::filesystem::path& path) {
  std::vector<std::string> diagnostics;
  parse_with_diagnostics(path, diagnostics);
  return diagnostics;
}

std::string canonical_string(const PipelineConfig& config) {
  std::ostringstream out;
  out << "v1";
  out << "|dataset=" << (config.manifest_path ? "manifest:" + *config.manifest_path
                                              : "synthetic:" + *config.synthetic_spec_path);
  out << "|heatmaps=" << config.heatmaps;
  out << "|fit_scope=" << (config.fit_scope == FitScope::Fold ? "fold" : "all");
  out << "|source=" << to_string(config.spec.feature_source);
  const auto& ae = config.spec.ae;
  out << "|ae=" << ae.recon_epochs << ',' << ae.finetune_epochs << ','
      << ae.batch_size << ',' << format_double(ae.learning_rate) << ','
      << format_double(ae.recon_learning_rate) << ','
      << format_double(ae.finetune_learning_rate) << ',' << ae.freeze_encoder;
  const auto& clf = config.spec.classifier;
  out << "|clf=" << to_string(clf.method) << ',' << clf.rules << ','
      << format_double(clf.fou_delta) << ',' << format_double(clf.ridge) << ','
      << clf.knn_k << ',' << clf.mlp_epochs << ',' << clf.anfis_hybrid_iters;
  if (clf.optimizer) {
    out << "|opt=" << to_string(clf.optimizer->kind) << ','
        << clf.optimizer->population << ',' << clf.optimizer->max_iter;
  } else {
    out << "|opt=none";
  }
  out << "|k=" << config.cv_k << "|seed=" << config.spec.seed;
  return out.str();
}

std::filesystem::path cache_root(const PipelineConfig& config) {
  if (const char* env = std::getenv("FCFUZZ_CACHE_DIR"); env && *env)
    return std::filesystem::path(env);
  return std::filesystem::path(config.output_dir) / "cache";
}

namespace {

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A stage directory is valid when its done-marker holds the expected key.
struct StageCache {
  std::filesystem::path root;

  std::filesystem::path dir_for(const std::string& stage, const std::string& key) const {
    return root / (stage + "_" + key);
  }

  bool hit(const std::filesystem::path& dir, const std::string& key) const {
    std::ifstream marker(dir / "stage.done");
    std::string stored;
    return marker && std::getline(marker, stored) && stored == key;
  }

  void mark_done(const std::filesystem::path& dir, const std::string& key) const {
    std::ofstream marker(dir / "stage.done", std::ios::binary);
    marker << key << "\n";
    if (!marker) throw Error("cannot write stage marker in '" + dir.string() + "'");
  }
};

struct OutputLock {
  std::filesystem::path path;
  explicit OutputLock(const std::filesystem::path& dir) : path(dir / ".fcfuzz.lock") {
    std::filesystem::create_directories(dir);
    if (std::filesystem::exists(path))
      throw Error("output directory '" + dir.string() +
                  "' is locked by another run (remove " + path.string() +
                  " if that run is dead)");
    std::ofstream lock(path, std::ios::binary);
    lock << "locked\n";
    if (!lock) throw Error("cannot create lock file '" + path.string() + "'");
  }
  ~OutputLock() {
    std::error_code ec;
    std::filesystem::remove(path, ec);
  }
};

void copy_file_over(const std::filesystem::path& from, const std::filesystem::path& to) {
  std::filesystem::copy_file(from, to, std::filesystem::copy_options::overwrite_existing);
}

void write_report_artifacts(const EvalReport& report,
                            const std::filesystem::path& dir) {
  {
    std::ofstream f(dir / "report.csv", std::ios::binary);
    f << report_to_csv(report);
    if (!f) throw Error("cannot write report.csv");
  }
  {
    std::ofstream f(dir / "report.txt", std::ios::binary);
    f << report_to_table(report);
  }
  {
    std::ofstream f(dir / "confusion_avg.csv", std::ios::binary);
    f << confusion_to_csv(report.averaged);
  }
  {
    std::ofstream f(dir / "confusion_folds.csv", std::ios::binary);
    for (const auto& cm : report.fold_confusions) f << confusion_to_csv(cm) << "\n";
  }
  {
    std::ofstream f(dir / "report_meta.txt", std::ios::binary);
    f << report.n_subjects << " " << report.k << " " << report.method_name << "\n";
  }
  Mat cm(kNumClasses, kNumClasses);
  double max_count = 1.0;
  for (int a = 0; a < kNumClasses; ++a)
    for (int b = 0; b < kNumClasses; ++b)
      max_count = std::max(max_count, report.averaged.counts[a][b]);
  for (int a = 0; a < kNumClasses; ++a)
    for (int b = 0; b < kNumClasses; ++b)
      cm(a, b) = report.averaged.counts[a][b] / max_count;
  export_heatmap(cm, dir / "confusion_avg.ppm");
}

EvalReport load_report_artifacts(const std::filesystem::path& dir) {
  EvalReport report;
  {
    std::ifstream f(dir / "report_meta.txt");
    if (!(f >> report.n_subjects >> report.k >> report.method_name))
      throw Error("cached report: cannot read report_meta.txt");
  }
  {
    std::ifstream f(dir / "report.csv");
    if (!f) throw Error("cached report: cannot open report.csv");
    std::string line;
    std::getline(f, line);  // header
    while (std::getline(f, line)) {
      std::istringstream ss(line);
      std::string field;
      std::vector<std::string> fields;
      while (std::getline(ss, field, ',')) fields.push_back(field);
      if (fields.size() != 6) throw Error("cached report: malformed row");
      MetricSet m;
      m.accuracy = parse_double(fields[2], "report accuracy");
      m.precision = parse_double(fields[3], "report precision");
      m.recall = parse_double(fields[4], "report recall");
      m.f1 = parse_double(fields[5], "report f1");
      if (fields[0] == "fold") {
        report.fold_metrics.push_back(m);
      } else if (fields[0] == "mean") {
        report.mean = m;
      } else if (fields[0] == "std") {
        report.stddev = m;
      } else if (fields[0] == "pooled") {
        report.pooled = m;
      }
    }
  }
  {
    const Mat avg = read_csv_matrix(dir / "confusion_avg.csv");
    for (int a = 0; a < kNumClasses; ++a)
      for (int b = 0; b < kNumClasses; ++b)
        report.averaged.counts[a][b] = avg(a, b);
  }
  {
    std::ifstream f(dir / "confusion_folds.csv");
    if (f) {
      std::string line;
      std::vector<std::vector<double>> rows;
      auto flush = [&]() {
        if (rows.size() == kNumClasses) {
          ConfusionMatrix cm;
          for (int a = 0; a < kNumClasses; ++a)
            for (int b = 0; b < kNumClasses; ++b) cm.counts[a][b] = rows[a][b];
          report.fold_confusions.push_back(cm);
        }
        rows.clear();
      };
      while (std::getline(f, line)) {
        if (line.empty()) {
          flush();
          continue;
        }
        std::istringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ','))
          row.push_back(parse_double(cell, "cached confusion"));
        rows.push_back(std::move(row));
      }
      flush();
    }
  }
  return report;
}

}  // namespace

EvalReport run_pipeline(const PipelineConfig& config, std::ostream& log) {
  const std::filesystem::path out_dir(config.output_dir);
  OutputLock lock(out_dir);
  StageCache cache{cache_root(config)};
  std::filesystem::create_directories(cache.root);

  // Failures halt the run naming the stage and the last completed artifact.
  std::string last_good = "(none)";
  std::string current_stage = "dataset";
  auto stage_failed = [&](const std::exception& e) -> Error {
    return Error("stage '" + current_stage + "' failed: " + e.what() +
                 " (last good artifact: " + last_good + ")");
  };
  try {
  // ---- stage: dataset ----
  std::filesystem::path manifest_path;
  std::string dataset_key;
  if (config.synthetic_spec_path) {
    const std::string spec_bytes = file_bytes(*config.synthetic_spec_path);
    dataset_key = hash_hex(fnv1a64("synth-v1|" + spec_bytes));
    const auto dir = cache.dir_for("dataset", dataset_key);
    if (cache.hit(dir, dataset_key)) {
      log << "[dataset] cache hit " << dir.string() << "\n";
    } else {
      log << "[dataset] generating synthetic dataset\n";
      const SyntheticSpec spec = read_synthetic_spec(*config.synthetic_spec_path);
      const auto subjects = generate_synthetic(spec);
      std::filesystem::create_directories(dir);
      save_dataset(dir, subjects, spec.seed);
      cache.mark_done(dir, dataset_key);
    }
    manifest_path = dir / "manifest.txt";
  } else {
    manifest_path = *config.manifest_path;
    const DatasetManifest manifest = read_manifest(manifest_path);
    uint64_t h = fnv1a64("manifest-v1|" + file_bytes(manifest_path));
    const auto base = manifest_path.parent_path();
    for (const auto& entry : manifest.subjects)
      h = fnv1a64(file_bytes(base / entry.path), h);
    dataset_key = hash_hex(h);
    log << "[dataset] using manifest " << manifest_path.string() << "\n";
  }

  const auto subjects = load_dataset(manifest_path);
  if (subjects.empty()) throw ValidationError("pipeline: dataset is empty");
  last_good = manifest_path.string();
  current_stage = "connect";

  // ---- stage: connectivity ----
  const std::string connect_key =
      hash_hex(fnv1a64("connect-v1|" + dataset_key + "|" +
                       (config.heatmaps ? "hm1" : "hm0")));
  const auto connect_dir = cache.dir_for("connect", connect_key);
  if (cache.hit(connect_dir, connect_key)) {
    log << "[connect] cache hit " << connect_dir.string() << "\n";
  } else {
    log << "[connect] computing " << subjects.size() << " connectivity matrices\n";
    std::filesystem::create_directories(connect_dir);
    std::ofstream index(connect_dir / "index.txt", std::ios::binary);
    for (const auto& s : subjects) {
      const ConnectivityMatrix cm = connectivity_matrix(s);
      write_csv_matrix_scientific(connect_dir / (s.id + ".csv"), cm.values);
      if (config.heatmaps) export_heatmap(cm.values, connect_dir / (s.id + ".ppm"));
      index << s.id << " " << to_string(s.label) << "\n";
      if (cm.zero_variance_pairs > 0)
        log << "[connect] warning: subject " << s.id << " has "
            << cm.zero_variance_pairs << " zero-variance pairs\n";
    }
    if (!index) throw Error("cannot write connectivity index");
    cache.mark_done(connect_dir, connect_key);
  }
  last_good = connect_dir.string();
  current_stage = "features";

  // ---- optional stage: global feature fit (fit_scope = all) ----
  std::optional<Mat> global_features;
  if (config.fit_scope == FitScope::All &&
      config.spec.feature_source == FeatureSource::CnnAe) {
    const std::string feat_key = hash_hex(
        fnv1a64("features-v1|" + dataset_key + "|" + canonical_string(config)));
    const auto feat_dir = cache.dir_for("features", feat_key);
    const auto feat_file = feat_dir / "features.csv";
    if (cache.hit(feat_dir, feat_key)) {
      log << "[features] cache hit " << feat_dir.string() << "\n";
      global_features = read_csv_matrix(feat_file);
    } else {
      log << "[features] training autoencoder on all subjects (fit_scope = all)\n";
      std::vector<ConnectivityMatrix> matrices;
      std::vector<ClassLabel> labels;
      for (const auto& s : subjects) {
        matrices.push_back(connectivity_matrix(s));
        labels.push_back(s.label);
      }
      auto extractor = make_feature_extractor(config.spec);
      Rng rng = Rng(config.spec.seed).child(0xa11);
      extractor->fit(matrices, labels, rng);
      Mat features;
      for (size_t i = 0; i < matrices.size(); ++i) {
        const auto f = extractor->transform(matrices[i]);
        if (features.rows == 0)
          features = Mat(static_cast<int>(matrices.size()), static_cast<int>(f.size()));
        std::copy(f.begin(), f.end(), features.row(static_cast<int>(i)).begin());
      }
      std::filesystem::create_directories(feat_dir);
      write_csv_matrix(feat_file, features);
      cache.mark_done(feat_dir, feat_key);
      global_features = std::move(features);
    }
    last_good = feat_dir.string();
  }
  current_stage = "evaluate";

  // ---- stage: evaluation ----
  const std::string eval_key = hash_hex(
      fnv1a64("eval-v1|" + dataset_key + "|" + canonical_string(config)));
  const auto eval_dir = cache.dir_for("eval", eval_key);
  std::vector<ClassLabel> labels;
  for (const auto& s : subjects) labels.push_back(s.label);
  const FoldPlan plan = make_folds(labels, config.cv_k, config.spec.seed);
  for (const auto& w : plan.warnings) log << "[eval] warning: " << w << "\n";

  EvalReport report;
  if (cache.hit(eval_dir, eval_key)) {
    log << "[eval] cache hit " << eval_dir.string() << "\n";
    report = load_report_artifacts(eval_dir);
  } else {
    log << "[eval] running " << config.cv_k << "-fold cross-validation\n";
    if (global_features) {
      report = cross_validate_features(*global_features, labels, config.spec, plan);
    } else {
      report = cross_validate(subjects, config.spec, plan);
    }
    std::filesystem::create_directories(eval_dir);
    write_report_artifacts(report, eval_dir);
    cache.mark_done(eval_dir, eval_key);
  }

  for (const char* name :
       {"report.csv", "report.txt", "confusion_avg.csv", "confusion_avg.ppm"})
    copy_file_over(eval_dir / name, out_dir / name);
  log << "[done] report written to " << (out_dir / "report.csv").string() << "\n";
  return report;
  } catch (const ValidationError&) {
    throw;  // bad inputs keep their exit-code-1 classification
  } catch (const std::exception& e) {
    throw stage_failed(e);
  }
}

}  // namespace fcfuzz
