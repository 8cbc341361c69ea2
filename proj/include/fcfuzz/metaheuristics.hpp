#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "fcfuzz/common.hpp"

namespace fcfuzz {

struct Bounds {
  std::vector<double> lo, hi;
};

struct ObjectiveSpec {
  std::function<double(std::span<const double>)> evaluate;
  int dimension = 0;
  Bounds bounds;
  // When present, replaces one member of the initial population, so the
  // search never ends worse than this point.
  std::optional<std::vector<double>> init_point;
};

enum class MetaKind { GA, PSO, GWO };

const char* to_string(MetaKind kind);
std::optional<MetaKind> meta_kind_from_string(std::string_view s);

// Defaults mirror the reference hyper-parameter table: PSO c1=c2=2, w=0.2,
// pop 60; GA tournament(2), mutation 0.05, crossover 0.8, elite 5; GWO 5
// search agents; 400 iterations everywhere.
struct MetaheuristicSpec {
  MetaKind kind = MetaKind::GWO;
  int population = 0;  // 0 -> per-kind default
  int max_iter = 400;
  uint64_t seed = 0;
  double pso_c1 = 2.0;
  double pso_c2 = 2.0;
  double pso_w = 0.2;
  double ga_mutation_rate = 0.05;
  double ga_crossover_fraction = 0.8;
  int ga_elite = 5;
};

int default_population(MetaKind kind);

struct ScoredPoint {
  std::vector<double> x;
  double score = 0.0;
};

// Pack state: wolves plus the three leaders; `a` decays linearly 2 -> 0.
struct GwoState {
  std::vector<ScoredPoint> wolves;
  ScoredPoint alpha, beta, delta;
  double a = 2.0;
  int iteration = 0;
  int max_iter = 0;
};

GwoState gwo_init(const ObjectiveSpec& objective, const MetaheuristicSpec& spec,
                  Rng& rng);
// One iteration: advance t, set a = 2(1 - t/tMax), move every wolf to the
// mean of the three leader-guided points (clipped), re-evaluate, update
// leaders.
void gwo_step(GwoState& state, const ObjectiveSpec& objective, Rng& rng);

struct OptResult {
  std::vector<double> best;
  double best_score = 0.0;
  std::vector<double> history;  // best-so-far per iteration
};

OptResult gwo_minimize(const ObjectiveSpec& objective, const MetaheuristicSpec& spec);
OptResult pso_minimize(const ObjectiveSpec& objective, const MetaheuristicSpec& spec);
OptResult ga_minimize(const ObjectiveSpec& objective, const MetaheuristicSpec& spec);
OptResult minimize(const ObjectiveSpec& objective, const MetaheuristicSpec& spec);

double rmse(std::span<const double> targets, std::span<const double> outputs);

// Benchmark functions.
double sphere(std::span<const double> x);
double rastrigin(std::span<const double> x);
double rosenbrock(std::span<const double> x);

}  // namespace fcfuzz
