#include <doctest.h>

#include <set>

#include "fcfuzz/common.hpp"
#include "fcfuzz/eval.hpp"
#include "oracles.hpp"

using namespace fcfuzz;

namespace {

std::vector<ClassLabel> three_class_60_58_45_labels() {
  std::vector<ClassLabel> labels;
  for (int i = 0; i < 60; ++i) labels.push_back(ClassLabel::HC);
  for (int i = 0; i < 58; ++i) labels.push_back(ClassLabel::SZ);
  for (int i = 0; i < 45; ++i) labels.push_back(ClassLabel::ADHD);
  return labels;
}

std::vector<SubjectRecord> separable_subjects(int per_class, int roi_count,
                                              uint64_t seed) {
  SyntheticSpec spec;
  spec.n_per_class = {per_class, per_class, per_class};
  spec.roi_count = roi_count;
  spec.timepoints = 60;
  spec.seed = seed;
  const int third = roi_count / 3;
  spec.blocks[0].push_back({0, third, 0.85});
  spec.blocks[1].push_back({third, 2 * third, 0.85});
  spec.blocks[2].push_back({2 * third, roi_count, 0.85});
  return generate_synthetic(spec);
}

ConfusionMatrix confusion_from_pairs(const std::vector<std::pair<int, int>>& pairs) {
  ConfusionMatrix cm;
  for (const auto& [truth, pred] : pairs) cm.counts[truth][pred] += 1.0;
  return cm;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("folds for 60/58/45 at k=10: sizes in {16,17}, disjoint cover") {
  const auto labels = three_class_60_58_45_labels();
  const FoldPlan plan = make_folds(labels, 10, 42);
  REQUIRE(plan.folds.size() == 10);
  std::set<int> seen;
  int total = 0;
  for (const auto& fold : plan.folds) {
    const int size = static_cast<int>(fold.size());
    CHECK(size >= 16);
    CHECK(size <= 17);
    total += size;
    for (int idx : fold) CHECK(seen.insert(idx).second);
  }
  CHECK(total == 163);
  CHECK(seen.size() == 163);

  // per-class counts across folds differ by at most one
  for (int c = 0; c < kNumClasses; ++c) {
    int lo = 1 << 30, hi = 0;
    for (const auto& fold : plan.folds) {
      int count = 0;
      for (int idx : fold)
        if (labels[idx] == static_cast<ClassLabel>(c)) ++count;
      lo = std::min(lo, count);
      hi = std::max(hi, count);
    }
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("N = k gives singleton folds") {
  std::vector<ClassLabel> labels(10, ClassLabel::HC);
  for (int i = 0; i < 4; ++i) labels[i] = ClassLabel::SZ;
  const FoldPlan plan = make_folds(labels, 10, 1);
  for (const auto& fold : plan.folds) CHECK(fold.size() == 1);
  CHECK(!plan.warnings.empty());  // classes smaller than k warn
}

TEST_CASE("fold plans are deterministic per seed") {
  const auto labels = three_class_60_58_45_labels();
  const FoldPlan a = make_folds(labels, 10, 9);
  const FoldPlan b = make_folds(labels, 10, 9);
  CHECK(a.folds == b.folds);
  const FoldPlan c = make_folds(labels, 10, 10);
  CHECK(a.folds != c.folds);
}

TEST_CASE("make_folds rejects N < k") {
  std::vector<ClassLabel> labels(5, ClassLabel::HC);
  CHECK_THROWS_AS(make_folds(labels, 10, 0), ValidationError);
}

TEST_CASE("binary metrics: perfect split and the 3/1/2/4 hand case") {
  const MetricSet perfect = binary_metrics(5, 0, 0, 5);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);

  const MetricSet m = binary_metrics(3, 1, 2, 4);
  CHECK(m.accuracy == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(m.precision == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(m.recall == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(m.f1 == doctest::Approx(6.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("binary metrics: zero-denominator cases flag and return 0") {
  const MetricSet m = binary_metrics(0, 0, 5, 5);
  CHECK(m.recall == 0.0);
  CHECK(m.precision == 0.0);
  CHECK(m.f1 == 0.0);
  CHECK(m.degenerate);
  CHECK_THROWS_AS(binary_metrics(0, 0, 0, 0), ValidationError);
}

TEST_CASE("multiclass metrics: diagonal, uniform, and tally oracle") {
  ConfusionMatrix diag;
  for (int c = 0; c < 3; ++c) diag.counts[c][c] = 7;
  const MetricSet md = multiclass_metrics(diag);
  CHECK(md.accuracy == 1.0);
  CHECK(md.f1 == 1.0);

  ConfusionMatrix uniform;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) uniform.counts[a][b] = 2;
  CHECK(multiclass_metrics(uniform).accuracy == doctest::Approx(1.0 / 3).epsilon(1e-12));

  ConfusionMatrix example;
  example.counts = {{{5, 1, 0}, {1, 4, 1}, {0, 2, 3}}};
  const MetricSet me = multiclass_metrics(example);
  // brute-force per-class tally from reconstructed pairs
  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int n = 0; n < example.counts[a][b]; ++n) pairs.push_back({a, b});
  double prec = 0, rec = 0, f1 = 0;
  int correct = 0;
  for (const auto& [truth, pred] : pairs)
    if (truth == pred) ++correct;
  for (int c = 0; c < 3; ++c) {
    const auto t = oracles::tally_class(pairs, c);
    prec += t.tp + t.fp > 0 ? t.tp / (t.tp + t.fp) : 0.0;
    rec += t.tp + t.fn > 0 ? t.tp / (t.tp + t.fn) : 0.0;
    f1 += 2 * t.tp + t.fp + t.fn > 0 ? 2 * t.tp / (2 * t.tp + t.fp + t.fn) : 0.0;
  }
  CHECK(me.accuracy ==
        doctest::Approx(static_cast<double>(correct) / pairs.size()).epsilon(1e-12));
  CHECK(me.precision == doctest::Approx(prec / 3).epsilon(1e-12));
  CHECK(me.recall == doctest::Approx(rec / 3).epsilon(1e-12));
  CHECK(me.f1 == doctest::Approx(f1 / 3).epsilon(1e-12));
}

TEST_CASE("multiclass metrics match the tally oracle on random confusions") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::pair<int, int>> pairs;
    ConfusionMatrix cm;
    bool any_diag = false;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        const int n = rng.uniform_int(6);
        cm.counts[a][b] = n;
        if (a == b && n > 0) any_diag = true;
        for (int k = 0; k < n; ++k) pairs.push_back({a, b});
      }
    if (pairs.empty() || !any_diag) continue;
    const MetricSet m = multiclass_metrics(cm);
    double prec = 0, rec = 0;
    int correct = 0;
    for (const auto& [truth, pred] : pairs)
      if (truth == pred) ++correct;
    for (int c = 0; c < 3; ++c) {
      const auto t = oracles::tally_class(pairs, c);
      prec += t.tp + t.fp > 0 ? t.tp / (t.tp + t.fp) : 0.0;
      rec += t.tp + t.fn > 0 ? t.tp / (t.tp + t.fn) : 0.0;
    }
    CHECK(m.accuracy ==
          doctest::Approx(static_cast<double>(correct) / pairs.size()).epsilon(1e-12));
    CHECK(m.precision == doctest::Approx(prec / 3).epsilon(1e-12));
    CHECK(m.recall == doctest::Approx(rec / 3).epsilon(1e-12));
  }
}

TEST_CASE("constant classifier scores chance level on balanced data") {
  const auto subjects = separable_subjects(10, 9, 7);
  std::vector<ClassLabel> labels;
  for (const auto& s : subjects) labels.push_back(s.label);
  PipelineSpec spec;
  spec.feature_source = FeatureSource::RawUpperTriangle;
  spec.classifier.method = ClassifierMethod::Constant;
  spec.seed = 7;
  const FoldPlan plan = make_folds(labels, 5, 7);
  const EvalReport report = cross_validate(subjects, spec, plan);
  CHECK(report.mean.accuracy == doctest::Approx(1.0 / 3).epsilon(0.02));
}

TEST_CASE("separable synthetic data with 1-NN scores nearly perfectly") {
  const auto subjects = separable_subjects(8, 12, 8);
  std::vector<ClassLabel> labels;
  for (const auto& s : subjects) labels.push_back(s.label);
  PipelineSpec spec;
  spec.feature_source = FeatureSource::RawUpperTriangle;
  spec.classifier.method = ClassifierMethod::Knn;
  spec.classifier.knn_k = 1;
  spec.seed = 8;
  const FoldPlan plan = make_folds(labels, 4, 8);
  const EvalReport report = cross_validate(subjects, spec, plan);
  CHECK(report.mean.accuracy >= 0.95);
}

TEST_CASE("reports are byte-identical for one spec and seed") {
  const auto subjects = separable_subjects(5, 9, 9);
  std::vector<ClassLabel> labels;
  for (const auto& s : subjects) labels.push_back(s.label);
  PipelineSpec spec;
  spec.feature_source = FeatureSource::RawUpperTriangle;
  spec.classifier.method = ClassifierMethod::Knn;
  spec.seed = 9;
  const FoldPlan plan = make_folds(labels, 3, 9);
  const EvalReport a = cross_validate(subjects, spec, plan);
  const EvalReport b = cross_validate(subjects, spec, plan);
  CHECK(report_to_csv(a) == report_to_csv(b));
  CHECK(confusion_to_csv(a.averaged) == confusion_to_csv(b.averaged));
}

TEST_CASE("extractor fit never sees held-out subjects") {
  const auto subjects = separable_subjects(4, 9, 10);
  std::vector<ClassLabel> labels;
  for (const auto& s : subjects) labels.push_back(s.label);
  const FoldPlan plan = make_folds(labels, 3, 10);

  struct Probe final : FeatureExtractor {
    std::vector<std::string>* seen;
    explicit Probe(std::vector<std::string>* s) : seen(s) {}
    void fit(std::span<const ConnectivityMatrix> train,
             std::span<const ClassLabel>, Rng&) override {
      for (const auto& m : train) seen->push_back(m.subject_id);
    }
    std::vector<double> transform(const ConnectivityMatrix& m) const override {
      return {m.values(0, 1), m.values(0, 2)};
    }
  };

  std::vector<std::string> seen;
  PipelineSpec spec;
  spec.classifier.method = ClassifierMethod::Knn;
  spec.seed = 10;
  int fold = 0;
  // run with a probe; after the run, intersect what fit saw with each fold
  cross_validate(subjects, spec, plan, [&]() {
    return std::make_unique<Probe>(&seen);
  });
  // fits happen per fold in order; each fold's test ids must be absent from
  // the ids seen during that fold's fit
  const size_t per_fit = subjects.size() - plan.folds[0].size();
  REQUIRE(seen.size() >= per_fit);
  size_t cursor = 0;
  for (fold = 0; fold < plan.k; ++fold) {
    const size_t train_size = subjects.size() - plan.folds[fold].size();
    std::set<std::string> fit_ids(seen.begin() + cursor,
                                  seen.begin() + cursor + train_size);
    cursor += train_size;
    for (int idx : plan.folds[fold])
      CHECK(fit_ids.count(subjects[idx].id) == 0);
  }
  CHECK(cursor == seen.size());
}

TEST_CASE("label-shuffled data stays in the chance band over 5 seeds") {
  const auto base = separable_subjects(6, 9, 11);
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    auto subjects = base;
    Rng rng(seed);
    for (size_t i = subjects.size(); i > 1; --i) {
      const int j = rng.uniform_int(static_cast<int>(i));
      std::swap(subjects[i - 1].label, subjects[j].label);
    }
    std::vector<ClassLabel> labels;
    for (const auto& s : subjects) labels.push_back(s.label);
    PipelineSpec spec;
    spec.feature_source = FeatureSource::RawUpperTriangle;
    spec.classifier.method = ClassifierMethod::Knn;
    spec.classifier.knn_k = 3;
    spec.seed = seed;
    const FoldPlan plan = make_folds(labels, 3, seed);
    const EvalReport report = cross_validate(subjects, spec, plan);
    CHECK(report.mean.accuracy >= 0.15);
    CHECK(report.mean.accuracy <= 0.50);
  }
}

TEST_CASE("averaged confusion times k sums to N") {
  const auto subjects = separable_subjects(5, 9, 12);
  std::vector<ClassLabel> labels;
  for (const auto& s : subjects) labels.push_back(s.label);
  PipelineSpec spec;
  spec.feature_source = FeatureSource::RawUpperTriangle;
  spec.classifier.method = ClassifierMethod::Knn;
  spec.seed = 12;
  const FoldPlan plan = make_folds(labels, 5, 12);
  const EvalReport report = cross_validate(subjects, spec, plan);
  CHECK(report.averaged.total() * plan.k ==
        doctest::Approx(static_cast<double>(subjects.size())).epsilon(1e-9));
  // and the accuracy agrees with a direct pooled count
  double correct = 0, total = 0;
  for (const auto& cm : report.fold_confusions) {
    correct += cm.trace();
    total += cm.total();
  }
  CHECK(report.pooled.accuracy == doctest::Approx(correct / total).epsilon(1e-12));
}

TEST_CASE("metrics stay in [0,1] everywhere in a report") {
  const auto subjects = separable_subjects(4, 9, 13);
  std::vector<ClassLabel> labels;
  for (const auto& s : subjects) labels.push_back(s.label);
  PipelineSpec spec;
  spec.feature_source = FeatureSource::RawUpperTriangle;
  spec.classifier.method = ClassifierMethod::Mlp;
  spec.classifier.mlp_epochs = 5;
  spec.seed = 13;
  const FoldPlan plan = make_folds(labels, 3, 13);
  const EvalReport report = cross_validate(subjects, spec, plan);
  auto in_unit = [](const MetricSet& m) {
    return m.accuracy >= 0 && m.accuracy <= 1 && m.precision >= 0 &&
           m.precision <= 1 && m.recall >= 0 && m.recall <= 1 && m.f1 >= 0 &&
           m.f1 <= 1;
  };
  CHECK(in_unit(report.mean));
  CHECK(in_unit(report.pooled));
  for (const auto& m : report.fold_metrics) CHECK(in_unit(m));
}

TEST_CASE("a fold whose training split lost a class is an error") {
  // 2 per class, k = 2 -> each fold holds one of each class; fine.
  // Force failure: 3 classes with one singleton class and k = 2 puts the
  // singleton wholly into one fold, removing it from that fold's training.
  std::vector<SubjectRecord> subjects = separable_subjects(2, 9, 14);
  // drop one ADHD subject -> ADHD count 1
  subjects.erase(std::remove_if(subjects.begin(), subjects.end(),
                                [](const SubjectRecord& s) {
                                  return s.id == "ADHD_001";
                                }),
                 subjects.end());
  std::vector<ClassLabel> labels;
  for (const auto& s : subjects) labels.push_back(s.label);
  const FoldPlan plan = make_folds(labels, 2, 14);
  PipelineSpec spec;
  spec.feature_source = FeatureSource::RawUpperTriangle;
  spec.classifier.method = ClassifierMethod::Knn;
  CHECK_THROWS_AS(cross_validate(subjects, spec, plan), Error);
}

}  // TEST_SUITE
