#include "fcfuzz/metaheuristics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fcfuzz {

const char* to_string(MetaKind kind) {
  switch (kind) {
    case MetaKind::GA: return "ga";
    case MetaKind::PSO: return "pso";
    case MetaKind::GWO: return "gwo";
  }
  return "?";
}

std::optional<MetaKind> meta_kind_from_string(std::string_view s) {
  if (s == "ga") return MetaKind::GA;
  if (s == "pso") return MetaKind::PSO;
  if (s == "gwo") return MetaKind::GWO;
  return std::nullopt;
}

int default_population(MetaKind kind) {
  switch (kind) {
    case MetaKind::GWO: return 5;
    case MetaKind::PSO: return 60;
    case MetaKind::GA: return 60;
  }
  return 0;
}

namespace {

void check_objective(const ObjectiveSpec& objective) {
  if (objective.dimension < 1)
    throw ValidationError("optimizer: dimension must be >= 1");
  if (static_cast<int>(objective.bounds.lo.size()) != objective.dimension ||
      static_cast<int>(objective.bounds.hi.size()) != objective.dimension)
    throw ValidationError("optimizer: bounds size mismatch");
  for (int j = 0; j < objective.dimension; ++j)
    if (!(objective.bounds.lo[j] < objective.bounds.hi[j]))
      throw ValidationError("optimizer: lo must be < hi at coordinate " +
                            std::to_string(j));
  if (objective.init_point &&
      static_cast<int>(objective.init_point->size()) != objective.dimension)
    throw ValidationError("optimizer: init_point dimension mismatch");
}

std::vector<double> random_point(const ObjectiveSpec& objective, Rng& rng) {
  std::vector<double> x(objective.dimension);
  for (int j = 0; j < objective.dimension; ++j)
    x[j] = rng.uniform(objective.bounds.lo[j], objective.bounds.hi[j]);
  return x;
}

double clamped(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

}  // namespace

GwoState gwo_init(const ObjectiveSpec& objective, const MetaheuristicSpec& spec,
                  Rng& rng) {
  check_objective(objective);
  const int pop = spec.population > 0 ? spec.population
                                      : default_population(MetaKind::GWO);
  if (pop < 3) throw ValidationError("gwo: needs at least 3 search agents");
  GwoState state;
  state.max_iter = spec.max_iter;
  state.wolves.resize(pop);
  for (int i = 0; i < pop; ++i) {
    state.wolves[i].x = (i == 0 && objective.init_point)
                            ? *objective.init_point
                            : random_point(objective, rng);
    state.wolves[i].score = objective.evaluate(state.wolves[i].x);
  }
  std::vector<int> order(pop);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return state.wolves[a].score < state.wolves[b].score;
  });
  state.alpha = state.wolves[order[0]];
  state.beta = state.wolves[order[1]];
  state.delta = state.wolves[order[2]];
  return state;
}

void gwo_step(GwoState& state, const ObjectiveSpec& objective, Rng& rng) {
  state.iteration += 1;
  const double t = state.iteration;
  state.a = 2.0 * (1.0 - t / state.max_iter);
  const double a = state.a;
  const ScoredPoint* leaders[3] = {&state.alpha, &state.beta, &state.delta};

  for (auto& wolf : state.wolves) {
    for (int j = 0; j < objective.dimension; ++j) {
      double sum = 0.0;
      for (const ScoredPoint* leader : leaders) {
        const double r1 = rng.uniform();
        const double r2 = rng.uniform();
        const double coeff_a = a * (2.0 * r1 - 1.0);
        const double coeff_c = 2.0 * r2;
        const double dist = std::fabs(coeff_c * leader->x[j] - wolf.x[j]);
        sum += leader->x[j] - coeff_a * dist;
      }
      wolf.x[j] = clamped(sum / 3.0, objective.bounds.lo[j], objective.bounds.hi[j]);
    }
    wolf.score = objective.evaluate(wolf.x);
  }
  for (const auto& wolf : state.wolves) {
    if (wolf.score < state.alpha.score) {
      state.delta = state.beta;
      state.beta = state.alpha;
      state.alpha = wolf;
    } else if (wolf.score < state.beta.score) {
      state.delta = state.beta;
      state.beta = wolf;
    } else if (wolf.score < state.delta.score) {
      state.delta = wolf;
    }
  }
}

OptResult gwo_minimize(const ObjectiveSpec& objective, const MetaheuristicSpec& spec) {
  Rng rng(spec.seed);
  GwoState state = gwo_init(objective, spec, rng);
  OptResult res;
  res.history.reserve(spec.max_iter);
  for (int t = 0; t < spec.max_iter; ++t) {
    gwo_step(state, objective, rng);
    res.history.push_back(state.alpha.score);
  }
  res.best = state.alpha.x;
  res.best_score = state.alpha.score;
  return res;
}

OptResult pso_minimize(const ObjectiveSpec& objective, const MetaheuristicSpec& spec) {
  check_objective(objective);
  Rng rng(spec.seed);
  const int pop = spec.population > 0 ? spec.population
                                      : default_population(MetaKind::PSO);
  if (pop < 1) throw ValidationError("pso: population must be >= 1");
  const int dim = objective.dimension;

  std::vector<std::vector<double>> x(pop), velocity(pop), pbest(pop);
  std::vector<double> pbest_score(pop);
  ScoredPoint gbest;
  gbest.score = std::numeric_limits<double>::infinity();
  for (int i = 0; i < pop; ++i) {
    x[i] = (i == 0 && objective.init_point) ? *objective.init_point
                                            : random_point(objective, rng);
    velocity[i].assign(dim, 0.0);
    pbest[i] = x[i];
    pbest_score[i] = objective.evaluate(x[i]);
    if (pbest_score[i] < gbest.score) gbest = {x[i], pbest_score[i]};
  }

  OptResult res;
  res.history.reserve(spec.max_iter);
  for (int t = 0; t < spec.max_iter; ++t) {
    for (int i = 0; i < pop; ++i) {
      for (int j = 0; j < dim; ++j) {
        const double r1 = rng.uniform();
        const double r2 = rng.uniform();
        velocity[i][j] = spec.pso_w * velocity[i][j] +
                         spec.pso_c1 * r1 * (pbest[i][j] - x[i][j]) +
                         spec.pso_c2 * r2 * (gbest.x[j] - x[i][j]);
        x[i][j] = clamped(x[i][j] + velocity[i][j], objective.bounds.lo[j],
                          objective.bounds.hi[j]);
      }
      const double score = objective.evaluate(x[i]);
      if (score < pbest_score[i]) {
        pbest_score[i] = score;
        pbest[i] = x[i];
      }
      if (score < gbest.score) gbest = {x[i], score};
    }
    res.history.push_back(gbest.score);
  }
  res.best = gbest.x;
  res.best_score = gbest.score;
  return res;
}

OptResult ga_minimize(const ObjectiveSpec& objective, const MetaheuristicSpec& spec) {
  check_objective(objective);
  Rng rng(spec.seed);
  const int pop = spec.population > 0 ? spec.population : default_population(MetaKind::GA);
  if (pop < spec.ga_elite)
    throw ValidationError("ga: population smaller than elite count");
  const int dim = objective.dimension;

  std::vector<ScoredPoint> current(pop);
  for (int i = 0; i < pop; ++i) {
    current[i].x = (i == 0 && objective.init_point) ? *objective.init_point
                                                    : random_point(objective, rng);
    current[i].score = objective.evaluate(current[i].x);
  }

  auto tournament = [&]() -> const ScoredPoint& {
    const int a = rng.uniform_int(pop);
    const int b = rng.uniform_int(pop);
    return current[a].score <= current[b].score ? current[a] : current[b];
  };

  std::vector<int> order(pop);
  OptResult res;
  res.history.reserve(spec.max_iter);
  ScoredPoint best;
  best.score = std::numeric_limits<double>::infinity();

  for (int gen = 0; gen < spec.max_iter; ++gen) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (current[a].score != current[b].score)
        return current[a].score < current[b].score;
      return a < b;
    });
    if (current[order[0]].score < best.score) best = current[order[0]];

    // mutation scale annealed geometrically from 10% to 0.01% of the range
    const double frac = spec.max_iter > 1 ? static_cast<double>(gen) / (spec.max_iter - 1) : 1.0;
    const double mut_scale = 0.1 * std::pow(1e-3, frac);

    std::vector<ScoredPoint> next;
    next.reserve(pop);
    for (int e = 0; e < spec.ga_elite; ++e) next.push_back(current[order[e]]);
    while (static_cast<int>(next.size()) < pop) {
      const ScoredPoint& p1 = tournament();
      const ScoredPoint& p2 = tournament();
      ScoredPoint child;
      child.x.resize(dim);
      const bool crossover = rng.uniform() < spec.ga_crossover_fraction;
      for (int j = 0; j < dim; ++j) {
        if (crossover) {
          const double u = rng.uniform();
          child.x[j] = u * p1.x[j] + (1.0 - u) * p2.x[j];
        } else {
          child.x[j] = p1.x[j];
        }
        if (rng.uniform() < spec.ga_mutation_rate) {
          const double range = objective.bounds.hi[j] - objective.bounds.lo[j];
          child.x[j] += rng.normal() * mut_scale * range;
        }
        child.x[j] = clamped(child.x[j], objective.bounds.lo[j], objective.bounds.hi[j]);
      }
      child.score = objective.evaluate(child.x);
      next.push_back(std::move(child));
    }
    current = std::move(next);
    for (const auto& ind : current)
      if (ind.score < best.score) best = ind;
    res.history.push_back(best.score);
  }
  res.best = best.x;
  res.best_score = best.score;
  return res;
}

OptResult minimize(const ObjectiveSpec& objective, const MetaheuristicSpec& spec) {
  switch (spec.kind) {
    case MetaKind::GA: return ga_minimize(objective, spec);
    case MetaKind::PSO: return pso_minimize(objective, spec);
    case MetaKind::GWO: return gwo_minimize(objective, spec);
  }
  throw Error("minimize: unknown optimizer kind");
}

double rmse(std::span<const double> targets, std::span<const double> outputs) {
  if (targets.size() != outputs.size())
    throw ValidationError("rmse: length mismatch");
  if (targets.empty()) throw ValidationError("rmse: empty input");
  double sum = 0.0;
  for (size_t i = 0; i < targets.size(); ++i) {
    const double e = targets[i] - outputs[i];
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(targets.size()));
}

double sphere(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

double rastrigin(std::span<const double> x) {
  double s = 10.0 * static_cast<double>(x.size());
  for (double v : x) s += v * v - 10.0 * std::cos(2.0 * M_PI * v);
  return s;
}

double rosenbrock(std::span<const double> x) {
  double s = 0.0;
  for (size_t i = 0; i + 1 < x.size(); ++i) {
    const double a = x[i + 1] - x[i] * x[i];
    const double b = 1.0 - x[i];
    s += 100.0 * a * a + b * b;
  }
  return s;
}

}  // namespace fcfuzz
