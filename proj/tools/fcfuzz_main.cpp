// fcfuzz: functional-connectivity fuzzy-classification pipeline CLI.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fcfuzz/anfis.hpp"
#include "fcfuzz/baselines.hpp"
#include "fcfuzz/cnn_ae.hpp"
#include "fcfuzz/common.hpp"
#include "fcfuzz/connectivity.hpp"
#include "fcfuzz/data_model.hpp"
#include "fcfuzz/eval.hpp"
#include "fcfuzz/it2fr.hpp"
#include "fcfuzz/pipeline.hpp"
#include "fcfuzz/stats.hpp"

namespace {

using namespace fcfuzz;

std::vector<ConnectivityMatrix> matrices_from_manifest(
    const std::string& manifest, std::vector<ClassLabel>* labels = nullptr,
    std::vector<std::string>* ids = nullptr) {
  const auto subjects = load_dataset(manifest);
  std::vector<ConnectivityMatrix> matrices;
  matrices.reserve(subjects.size());
  for (const auto& s : subjects) {
    matrices.push_back(connectivity_matrix(s));
    if (labels) labels->push_back(s.label);
    if (ids) ids->push_back(s.id);
  }
  return matrices;
}

struct FeatureTable {
  std::vector<std::string> ids;
  std::vector<ClassLabel> labels;
  Mat features;
};

// CSV rows: subject_id,label,v0,v1,...
FeatureTable read_feature_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open features '" + path + "'");
  FeatureTable table;
  std::vector<double> values;
  std::string line;
  int cols = -1, row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    std::istringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 3)
      throw ValidationError(path + ": row " + std::to_string(row) +
                            " needs subject_id,label,values...");
    table.ids.push_back(cells[0]);
    const auto label = label_from_string(cells[1]);
    if (!label)
      throw ValidationError(path + ": row " + std::to_string(row) +
                            ": unknown label '" + cells[1] + "'");
    table.labels.push_back(*label);
    if (cols < 0) cols = static_cast<int>(cells.size()) - 2;
    if (static_cast<int>(cells.size()) - 2 != cols)
      throw ValidationError(path + ": row " + std::to_string(row) +
                            " has inconsistent column count");
    for (size_t i = 2; i < cells.size(); ++i)
      values.push_back(parse_double(cells[i], path + " row " + std::to_string(row)));
  }
  table.features = Mat(static_cast<int>(table.ids.size()), cols < 0 ? 0 : cols);
  table.features.v = std::move(values);
  return table;
}

void write_feature_table(const std::string& path, const std::vector<std::string>& ids,
                         const std::vector<ClassLabel>& labels, const Mat& features) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write features '" + path + "'");
  for (int i = 0; i < features.rows; ++i) {
    out << ids[i] << ',' << to_string(labels[i]);
    for (int j = 0; j < features.cols; ++j)
      out << ',' << format_double(features(i, j));
    out << '\n';
  }
}

TrainConfig make_train_config(double lr, int epochs, int batch, uint64_t seed) {
  TrainConfig config;
  config.learning_rate = lr;
  config.epochs = epochs;
  config.batch_size = batch;
  config.seed = seed;
  return config;
}

std::optional<MetaheuristicSpec> optimizer_from_flags(const std::string& name,
                                                      int pop, int iters,
                                                      uint64_t seed) {
  if (name == "none") return std::nullopt;
  const auto kind = meta_kind_from_string(name);
  if (!kind) throw ValidationError("unknown optimizer '" + name + "'");
  MetaheuristicSpec spec;
  spec.kind = *kind;
  spec.population = pop;
  spec.max_iter = iters;
  spec.seed = seed;
  return spec;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"ROI time series -> Pearson connectivity -> CNN-AE features -> "
               "fuzzy/classical classification with GA/PSO/GWO training"};
  app.require_subcommand(1);

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_spec, synth_out;
  synth->add_option("--spec", synth_spec, "synthetic spec file")->required();
  synth->add_option("--out", synth_out, "output dataset directory")->required();
  synth->callback([&]() {
    const SyntheticSpec spec = read_synthetic_spec(synth_spec);
    const auto subjects = generate_synthetic(spec);
    save_dataset(synth_out, subjects, spec.seed);
    std::cout << "wrote " << subjects.size() << " subjects to " << synth_out << "\n";
  });

  // ---- connect ----
  auto* connect = app.add_subcommand("connect", "compute connectivity matrices");
  std::string connect_manifest, connect_out;
  bool connect_heatmaps = false;
  connect->add_option("--manifest", connect_manifest, "dataset manifest")->required();
  connect->add_option("--out", connect_out, "output directory")->required();
  connect->add_flag("--heatmaps", connect_heatmaps, "also write PPM heatmaps");
  connect->callback([&]() {
    const auto subjects = load_dataset(connect_manifest);
    std::filesystem::create_directories(connect_out);
    std::ofstream index(std::filesystem::path(connect_out) / "index.txt",
                        std::ios::binary);
    for (const auto& s : subjects) {
      const ConnectivityMatrix cm = connectivity_matrix(s);
      write_csv_matrix_scientific(std::filesystem::path(connect_out) / (s.id + ".csv"), cm.values);
      if (connect_heatmaps)
        export_heatmap(cm.values, std::filesystem::path(connect_out) / (s.id + ".ppm"));
      index << s.id << " " << to_string(s.label) << "\n";
      if (cm.zero_variance_pairs > 0)
        std::cerr << "warning: subject " << s.id << " has "
                  << cm.zero_variance_pairs << " zero-variance pairs\n";
    }
    std::cout << "wrote " << subjects.size() << " matrices to " << connect_out << "\n";
  });

  // ---- stats ----
  auto* stats = app.add_subcommand("stats", "statistical screens");
  stats->require_subcommand(1);

  auto* anova_cmd = stats->add_subcommand("anova", "one-way ANOVA");
  std::string anova_in, anova_manifest, anova_field;
  anova_cmd->add_option("--in", anova_in, "CSV of rows 'group,value'");
  anova_cmd->add_option("--manifest", anova_manifest, "group a demographic field by label");
  anova_cmd->add_option("--field", anova_field, "manifest extra field name");
  anova_cmd->callback([&]() {
    std::vector<std::vector<double>> groups;
    if (!anova_in.empty()) {
      std::ifstream in(anova_in);
      if (!in) throw ValidationError("cannot open '" + anova_in + "'");
      std::map<std::string, std::vector<double>> by_group;
      std::string line;
      int row = 0;
      while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row;
        const size_t comma = line.find(',');
        if (comma == std::string::npos)
          throw ValidationError(anova_in + ": row " + std::to_string(row) +
                                ": expected 'group,value'");
        by_group[line.substr(0, comma)].push_back(
            parse_double(line.substr(comma + 1), anova_in));
      }
      for (auto& [_, v] : by_group) groups.push_back(std::move(v));
    } else if (!anova_manifest.empty() && !anova_field.empty()) {
      const DatasetManifest manifest = read_manifest(anova_manifest);
      std::array<std::vector<double>, kNumClasses> by_class;
      for (const auto& e : manifest.subjects) {
        auto it = e.extras.find(anova_field);
        if (it == e.extras.end())
          throw ValidationError("subject '" + e.id + "' has no field '" +
                                anova_field + "'");
        by_class[static_cast<int>(e.label)].push_back(
            parse_double(it->second, anova_field));
      }
      for (auto& v : by_class) groups.push_back(std::move(v));
    } else {
      throw ValidationError("stats anova needs --in or --manifest/--field");
    }
    const AnovaResult res = one_way_anova(groups);
    std::cout << "f_stat,df_between,df_within,p_value\n"
              << format_double(res.f_stat) << ',' << res.df_between << ','
              << res.df_within << ',' << format_double(res.p_value) << "\n";
  });

  auto* chisq_cmd = stats->add_subcommand("chisq", "chi-square test of independence");
  std::string chisq_in, chisq_manifest, chisq_field;
  chisq_cmd->add_option("--in", chisq_in, "CSV contingency table of counts");
  chisq_cmd->add_option("--manifest", chisq_manifest, "build label x field table");
  chisq_cmd->add_option("--field", chisq_field, "manifest extra field name");
  chisq_cmd->callback([&]() {
    Mat table;
    if (!chisq_in.empty()) {
      table = read_csv_matrix(chisq_in);
    } else if (!chisq_manifest.empty() && !chisq_field.empty()) {
      const DatasetManifest manifest = read_manifest(chisq_manifest);
      std::map<std::string, int> value_columns;
      for (const auto& e : manifest.subjects) {
        auto it = e.extras.find(chisq_field);
        if (it == e.extras.end())
          throw ValidationError("subject '" + e.id + "' has no field '" +
                                chisq_field + "'");
        value_columns.emplace(it->second, 0);
      }
      int next = 0;
      for (auto& [_, col] : value_columns) col = next++;
      table = Mat(kNumClasses, next);
      for (const auto& e : manifest.subjects)
        table(static_cast<int>(e.label),
              value_columns[e.extras.at(chisq_field)]) += 1.0;
    } else {
      throw ValidationError("stats chisq needs --in or --manifest/--field");
    }
    const ChiSquareResult res = chi_square_independence(table);
    std::cout << "statistic,df,p_value\n"
              << format_double(res.statistic) << ',' << res.df << ','
              << format_double(res.p_value) << "\n";
  });

  auto* screen_cmd = stats->add_subcommand("screen", "per-edge ANOVA screen");
  std::string screen_manifest, screen_out, screen_names;
  double screen_alpha = 0.0005;
  screen_cmd->add_option("--manifest", screen_manifest, "dataset manifest")->required();
  screen_cmd->add_option("--alpha", screen_alpha, "uncorrected threshold (default 0.0005)");
  screen_cmd->add_option("--out", screen_out, "output CSV (default stdout)");
  screen_cmd->add_option("--names", screen_names, "optional ROI name file, one per line");
  screen_cmd->callback([&]() {
    std::vector<ClassLabel> labels;
    const auto matrices = matrices_from_manifest(screen_manifest, &labels);
    const auto edges = edge_screen(matrices, labels, screen_alpha);
    std::vector<std::string> names;
    if (!screen_names.empty()) {
      std::ifstream in(screen_names);
      if (!in) throw ValidationError("cannot open '" + screen_names + "'");
      std::string line;
      while (std::getline(in, line)) names.push_back(line);
    }
    std::ostringstream out;
    out << "edge_i,edge_j,f_stat,p_value";
    if (!names.empty()) out << ",name_i,name_j";
    out << "\n";
    for (const auto& e : edges) {
      out << e.i << ',' << e.j << ',' << format_double(e.f_stat) << ','
          << format_double(e.p_value);
      if (!names.empty()) {
        const auto name_of = [&](int i) {
          return i < static_cast<int>(names.size()) ? names[i] : std::to_string(i);
        };
        out << ',' << name_of(e.i) << ',' << name_of(e.j);
      }
      out << "\n";
    }
    if (screen_out.empty()) {
      std::cout << out.str();
    } else {
      std::ofstream f(screen_out, std::ios::binary);
      f << out.str();
      if (!f) throw Error("cannot write '" + screen_out + "'");
      std::cout << edges.size() << " edges below alpha, written to " << screen_out << "\n";
    }
  });

  // ---- train-ae ----
  auto* train_ae = app.add_subcommand("train-ae", "train the reconstruction autoencoder");
  std::string ae_manifest, ae_out;
  int ae_epochs = 50, ae_batch = 8;
  double ae_lr = 1e-3;
  uint64_t ae_seed = 0;
  train_ae->add_option("--manifest", ae_manifest, "dataset manifest")->required();
  train_ae->add_option("--out", ae_out, "checkpoint path")->required();
  train_ae->add_option("--epochs", ae_epochs, "reconstruction epochs (default 50)");
  train_ae->add_option("--batch", ae_batch, "batch size (default 8)");
  train_ae->add_option("--lr", ae_lr, "learning rate (default 1e-3)");
  train_ae->add_option("--seed", ae_seed, "seed (default 0)");
  train_ae->callback([&]() {
    const auto matrices = matrices_from_manifest(ae_manifest);
    Network ae = build_autoencoder(matrices.front().values.rows);
    Rng rng(ae_seed);
    ae.init_params(rng);
    const auto history = train_reconstruction(
        ae, matrices, make_train_config(ae_lr, ae_epochs, ae_batch, ae_seed + 1));
    ae.save(ae_out);
    std::ofstream loss_csv(ae_out + ".loss.csv", std::ios::binary);
    loss_csv << "epoch,loss\n";
    for (size_t e = 0; e < history.loss.size(); ++e)
      loss_csv << e << ',' << format_double(history.loss[e]) << '\n';
    std::cout << "final reconstruction loss "
              << (history.loss.empty() ? 0.0 : history.loss.back()) << ", saved "
              << ae_out << "\n";
  });

  // ---- finetune ----
  auto* finetune = app.add_subcommand("finetune", "fine-tune encoder + softmax head");
  std::string ft_manifest, ft_ae, ft_out;
  int ft_epochs = 30, ft_batch = 8;
  double ft_lr = 1e-3;
  uint64_t ft_seed = 0;
  bool ft_freeze = false;
  finetune->add_option("--manifest", ft_manifest, "dataset manifest")->required();
  finetune->add_option("--ae", ft_ae, "autoencoder checkpoint")->required();
  finetune->add_option("--out", ft_out, "classifier checkpoint path")->required();
  finetune->add_option("--epochs", ft_epochs, "fine-tune epochs (default 30)");
  finetune->add_option("--batch", ft_batch, "batch size (default 8)");
  finetune->add_option("--lr", ft_lr, "learning rate (default 1e-3)");
  finetune->add_option("--seed", ft_seed, "seed (default 0)");
  finetune->add_flag("--freeze-encoder", ft_freeze, "train only the dense head");
  finetune->callback([&]() {
    std::vector<ClassLabel> labels;
    const auto matrices = matrices_from_manifest(ft_manifest, &labels);
    const Network ae = Network::load(ft_ae);
    auto [net, history] = finetune_classifier(
        ae, matrices, labels, make_train_config(ft_lr, ft_epochs, ft_batch, ft_seed),
        ft_freeze);
    net.save(ft_out);
    std::ofstream curve(ft_out + ".accuracy.csv", std::ios::binary);
    curve << "epoch,loss,accuracy\n";
    for (size_t e = 0; e < history.loss.size(); ++e)
      curve << e << ',' << format_double(history.loss[e]) << ','
            << format_double(history.accuracy[e]) << '\n';
    std::cout << "final training accuracy "
              << (history.accuracy.empty() ? 0.0 : history.accuracy.back())
              << ", saved " << ft_out << "\n";
  });

  // ---- extract ----
  auto* extract = app.add_subcommand("extract", "extract bottleneck features");
  std::string ex_manifest, ex_model, ex_out;
  extract->add_option("--manifest", ex_manifest, "dataset manifest")->required();
  extract->add_option("--model", ex_model, "fine-tuned (or AE) checkpoint")->required();
  extract->add_option("--out", ex_out, "features CSV path")->required();
  extract->callback([&]() {
    std::vector<ClassLabel> labels;
    std::vector<std::string> ids;
    const auto matrices = matrices_from_manifest(ex_manifest, &labels, &ids);
    const Network net = Network::load(ex_model);
    const Mat features = extract_features(net, matrices);
    write_feature_table(ex_out, ids, labels, features);
    std::cout << "wrote " << features.rows << " x " << features.cols
              << " features to " << ex_out << "\n";
  });

  // ---- fit-classifier ----
  auto* fit = app.add_subcommand("fit-classifier", "fit a classifier on features");
  std::string fit_features, fit_method = "it2fr", fit_optimizer = "none", fit_out;
  std::string fit_history;
  int fit_rules = 3, fit_knn_k = 3, fit_pop = 0, fit_iters = 400, fit_mlp_epochs = 60;
  double fit_fou = 0.2, fit_ridge = 1e-6;
  uint64_t fit_seed = 0;
  bool fit_no_bias = false;
  fit->add_option("--features", fit_features, "features CSV from extract")->required();
  fit->add_option("--method", fit_method, "it2fr|anfis|knn|mlp (default it2fr)");
  fit->add_option("--optimizer", fit_optimizer, "none|ga|pso|gwo (default none)");
  fit->add_option("--out", fit_out, "model output path")->required();
  fit->add_option("--rules", fit_rules, "fuzzy rules / clusters (default 3)");
  fit->add_option("--fou-delta", fit_fou, "IT2 sigma spread (default 0.2)");
  fit->add_option("--ridge", fit_ridge, "least-squares ridge (default 1e-6)");
  fit->add_option("--knn-k", fit_knn_k, "KNN neighbours (default 3)");
  fit->add_option("--mlp-epochs", fit_mlp_epochs, "MLP epochs (default 60)");
  fit->add_option("--pop", fit_pop, "optimizer population (0 = default)");
  fit->add_option("--iters", fit_iters, "optimizer iterations (default 400)");
  fit->add_option("--seed", fit_seed, "seed (default 0)");
  fit->add_option("--history", fit_history, "write optimizer score-history CSVs here");
  fit->add_flag("--no-bias", fit_no_bias, "drop the IT2FR intercept term");
  fit->callback([&]() {
    const FeatureTable table = read_feature_table(fit_features);
    Rng rng(fit_seed);
    const auto optimizer = optimizer_from_flags(fit_optimizer, fit_pop, fit_iters, fit_seed);
    if (fit_method == "it2fr") {
      It2frOptions options;
      options.rules = fit_rules;
      options.fou_delta = fit_fou;
      options.ridge = fit_ridge;
      options.use_bias = !fit_no_bias;
      options.optimizer = optimizer;
      std::array<OptResult, kNumClasses> runs;
      const auto model = fit_classifier(table.features, table.labels, options, rng,
                                        optimizer ? &runs : nullptr);
      save_it2fr(model, fit_out);
      if (optimizer && !fit_history.empty()) {
        std::filesystem::create_directories(fit_history);
        for (int c = 0; c < kNumClasses; ++c) {
          std::ofstream f(std::filesystem::path(fit_history) /
                              ("score_history_class" + std::to_string(c) + ".csv"),
                          std::ios::binary);
          f << "iteration,best_score\n";
          for (size_t t = 0; t < runs[c].history.size(); ++t)
            f << t << ',' << format_double(runs[c].history[t]) << '\n';
        }
      }
      int correct = 0;
      for (int i = 0; i < table.features.rows; ++i)
        if (classify(model, table.features.row(i)).label == table.labels[i]) ++correct;
      std::cout << "training accuracy "
                << static_cast<double>(correct) / table.features.rows << ", saved "
                << fit_out << "\n";
    } else if (fit_method == "anfis") {
      AnfisOptions options;
      options.rules = fit_rules;
      options.ridge = fit_ridge;
      if (optimizer) {
        options.mode = AnfisTrainMode::Metaheuristic;
        options.optimizer = optimizer;
      }
      const auto model = anfis_fit_classifier(table.features, table.labels, options, rng);
      save_anfis(model, fit_out);
      int correct = 0;
      for (int i = 0; i < table.features.rows; ++i)
        if (anfis_classify(model, table.features.row(i)).label == table.labels[i])
          ++correct;
      std::cout << "training accuracy "
                << static_cast<double>(correct) / table.features.rows << ", saved "
                << fit_out << "\n";
    } else if (fit_method == "knn") {
      const KnnModel model = knn_fit(table.features, table.labels, fit_knn_k);
      write_feature_table(fit_out, table.ids, table.labels, table.features);
      std::cout << "stored " << model.points.rows << " neighbours (k = " << model.k
                << ") in " << fit_out << "\n";
    } else if (fit_method == "mlp") {
      MlpOptions options;
      options.train.epochs = fit_mlp_epochs;
      options.train.seed = fit_seed;
      const MlpModel model = mlp_fit(table.features, table.labels, options);
      model.net.save(fit_out);
      std::cout << "saved MLP checkpoint " << fit_out << "\n";
    } else {
      throw ValidationError("unknown method '" + fit_method + "'");
    }
  });

  // ---- evaluate ----
  auto* evaluate = app.add_subcommand("evaluate", "k-fold cross-validated evaluation");
  std::string ev_manifest, ev_method = "it2fr", ev_optimizer = "none";
  std::string ev_source = "cnn_ae", ev_out;
  int ev_k = 10, ev_rules = 3, ev_knn_k = 3, ev_pop = 0, ev_iters = 400;
  int ev_recon_epochs = 50, ev_finetune_epochs = 30, ev_batch = 8;
  double ev_fou = 0.2, ev_lr = 1e-3;
  uint64_t ev_seed = 0;
  bool ev_micro = false;
  evaluate->add_option("--manifest", ev_manifest, "dataset manifest")->required();
  evaluate->add_option("--method", ev_method, "it2fr|anfis|knn|mlp|constant");
  evaluate->add_option("--optimizer", ev_optimizer, "none|ga|pso|gwo");
  evaluate->add_option("--source", ev_source, "cnn_ae|raw_upper_triangle");
  evaluate->add_option("--k", ev_k, "folds (default 10)");
  evaluate->add_option("--seed", ev_seed, "seed (default 0)");
  evaluate->add_option("--out", ev_out, "output directory")->required();
  evaluate->add_option("--rules", ev_rules, "fuzzy rules (default 3)");
  evaluate->add_option("--fou-delta", ev_fou, "IT2 sigma spread (default 0.2)");
  evaluate->add_option("--knn-k", ev_knn_k, "KNN neighbours (default 3)");
  evaluate->add_option("--pop", ev_pop, "optimizer population (0 = default)");
  evaluate->add_option("--iters", ev_iters, "optimizer iterations (default 400)");
  evaluate->add_option("--recon-epochs", ev_recon_epochs, "AE epochs (default 50)");
  evaluate->add_option("--finetune-epochs", ev_finetune_epochs, "fine-tune epochs (default 30)");
  evaluate->add_option("--batch", ev_batch, "batch size (default 8)");
  evaluate->add_option("--lr", ev_lr, "learning rate (default 1e-3)");
  evaluate->add_flag("--micro", ev_micro, "micro-averaged metrics in report.txt note");
  evaluate->callback([&]() {
    const auto subjects = load_dataset(ev_manifest);
    std::vector<ClassLabel> labels;
    for (const auto& s : subjects) labels.push_back(s.label);
    PipelineSpec spec;
    const auto source = feature_source_from_string(ev_source);
    if (!source) throw ValidationError("unknown source '" + ev_source + "'");
    spec.feature_source = *source;
    spec.ae.recon_epochs = ev_recon_epochs;
    spec.ae.finetune_epochs = ev_finetune_epochs;
    spec.ae.batch_size = ev_batch;
    spec.ae.learning_rate = ev_lr;
    const auto method = classifier_method_from_string(ev_method);
    if (!method) throw ValidationError("unknown method '" + ev_method + "'");
    spec.classifier.method = *method;
    spec.classifier.rules = ev_rules;
    spec.classifier.fou_delta = ev_fou;
    spec.classifier.knn_k = ev_knn_k;
    spec.classifier.optimizer =
        optimizer_from_flags(ev_optimizer, ev_pop, ev_iters, ev_seed);
    spec.seed = ev_seed;
    const FoldPlan plan = make_folds(labels, ev_k, ev_seed);
    for (const auto& w : plan.warnings) std::cerr << "warning: " << w << "\n";
    const EvalReport report = cross_validate(subjects, spec, plan);
    std::filesystem::create_directories(ev_out);
    const auto out = std::filesystem::path(ev_out);
    {
      std::ofstream f(out / "report.csv", std::ios::binary);
      f << report_to_csv(report);
    }
    {
      std::ofstream f(out / "report.txt", std::ios::binary);
      f << report_to_table(report);
      if (ev_micro) {
        ConfusionMatrix pooled;
        for (const auto& cm : report.fold_confusions)
          for (int a = 0; a < kNumClasses; ++a)
            for (int b = 0; b < kNumClasses; ++b) pooled.counts[a][b] += cm.counts[a][b];
        const MetricSet micro = multiclass_metrics(pooled, Averaging::Micro);
        f << "\nmicro: acc " << format_double(micro.accuracy) << ", prec "
          << format_double(micro.precision) << ", rec " << format_double(micro.recall)
          << ", f1 " << format_double(micro.f1) << "\n";
      }
    }
    {
      std::ofstream f(out / "confusion_avg.csv", std::ios::binary);
      f << confusion_to_csv(report.averaged);
    }
    std::cout << report_to_table(report);
  });

  // ---- run ----
  auto* run = app.add_subcommand("run", "run the full pipeline from a config file");
  std::string run_config;
  run->add_option("--config", run_config, "pipeline config file")->required();
  run->callback([&]() {
    const PipelineConfig config = parse_pipeline_config(run_config);
    run_pipeline(config, std::cout);
  });

  // ---- validate ----
  auto* validate = app.add_subcommand("validate", "validate a config file");
  std::string validate_config_path;
  validate->add_option("--config", validate_config_path, "pipeline config file")
      ->required();
  validate->callback([&]() {
    const auto diagnostics = fcfuzz::validate_config(validate_config_path);
    if (diagnostics.empty()) {
      std::cout << "config OK\n";
      return;
    }
    for (const auto& d : diagnostics) std::cout << d << "\n";
    throw ValidationError(std::to_string(diagnostics.size()) + " config problem(s)");
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints usage; 0 for --help/--version
    return code == 0 ? 0 : 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const fcfuzz::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
