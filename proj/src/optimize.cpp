#include "risim/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>

#include "risim/parallel.hpp"

namespace risim {

namespace {

double wrap_phase(double x) {
  double y = std::fmod(x, 2.0 * kPi);
  if (y < 0.0) y += 2.0 * kPi;
  return y;
}

Eigen::VectorXd random_genes(int count, Rng& rng) {
  Eigen::VectorXd g(count);
  for (int i = 0; i < count; ++i) g[i] = rng.uniform(0.0, 2.0 * kPi);
  return g;
}

// Index of the fitter of `size` uniformly drawn candidates.
int tournament_pick(const std::vector<double>& fitness, int size, Rng& rng) {
  int best = static_cast<int>(rng.integer(fitness.size()));
  for (int s = 1; s < size; ++s) {
    int challenger = static_cast<int>(rng.integer(fitness.size()));
    if (fitness[challenger] > fitness[best]) best = challenger;
  }
  return best;
}

PhaseFitness context_fitness(const SceneConfig& scene, const ChannelState& state,
                             const SpConfig& sp) {
  auto ctx = std::make_shared<RateContext>(make_rate_context(scene, state, sp));
  return [ctx](const PhaseProfile& p) { return weighted_sum_rate(*ctx, p); };
}

}  // namespace

void GaParams::validate() const {
  if (population <= 0) throw std::invalid_argument("GaParams: population must be positive");
  if (elites < 0 || crossover < 0 || mutation < 0 || elites + crossover + mutation > population)
    throw std::invalid_argument("GaParams: elite + crossover + mutation exceeds population");
  if (mutation_prob < 0.0 || mutation_prob > 1.0)
    throw std::invalid_argument("GaParams: mutation probability out of range");
  if (tournament < 1 || generations < 1)
    throw std::invalid_argument("GaParams: tournament and generations must be >= 1");
}

void SaParams::validate() const {
  if (cooling <= 0.0 || cooling >= 1.0)
    throw std::invalid_argument("SaParams: cooling rate must be in (0, 1)");
  if (initial_temperature < 0.0)
    throw std::invalid_argument("SaParams: temperature must be nonnegative");
  if (iterations < 1) throw std::invalid_argument("SaParams: iterations must be >= 1");
}

OptimizationResult ga_optimize(const PhaseFitness& fitness, int m_x, int m_z,
                               const GaParams& params) {
  params.validate();
  const int genes = m_x * m_z;
  const int pop = params.population;

  std::vector<Eigen::VectorXd> population(pop);
  for (int i = 0; i < pop; ++i) {
    Rng rng(derive_seed(params.seed, 0, static_cast<std::uint64_t>(i)));
    population[i] = random_genes(genes, rng);
  }

  std::vector<double> scores(pop);
  auto evaluate = [&] {
    parallel_for(pop, [&](std::int64_t i) {
      scores[i] = fitness(PhaseProfile::from_phases(population[i], m_x, m_z));
    });
  };

  OptimizationResult result;
  double best_seen = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_genes = population[0];
  int stagnant = 0;

  for (int gen = 0; gen < params.generations; ++gen) {
    evaluate();
    std::vector<int> order(pop);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores[a] > scores[b]; });

    if (scores[order[0]] > best_seen + 1e-12) {
      best_seen = scores[order[0]];
      best_genes = population[order[0]];
      stagnant = 0;
    } else {
      ++stagnant;
    }
    result.trace.push_back(best_seen);
    if (stagnant >= params.stagnation) break;
    if (gen + 1 == params.generations) break;

    std::vector<Eigen::VectorXd> next;
    next.reserve(pop);
    for (int e = 0; e < params.elites; ++e) next.push_back(population[order[e]]);

    std::vector<double> ranked_scores = scores;  // for tournaments
    for (int c = 0; c < params.crossover; ++c) {
      Rng rng(derive_seed(params.seed, 1, static_cast<std::uint64_t>(gen),
                          static_cast<std::uint64_t>(c)));
      int a = tournament_pick(ranked_scores, params.tournament, rng);
      int b = tournament_pick(ranked_scores, params.tournament, rng);
      Eigen::VectorXd child(genes);
      for (int g = 0; g < genes; ++g)
        child[g] = rng.uniform() < 0.5 ? population[a][g] : population[b][g];
      next.push_back(std::move(child));
    }
    for (int m = 0; m < params.mutation; ++m) {
      Rng rng(derive_seed(params.seed, 2, static_cast<std::uint64_t>(gen),
                          static_cast<std::uint64_t>(m)));
      Eigen::VectorXd child = population[tournament_pick(ranked_scores, params.tournament, rng)];
      for (int g = 0; g < genes; ++g)
        if (rng.uniform() < params.mutation_prob)
          child[g] = wrap_phase(child[g] + params.mutation_sigma * rng.gaussian());
      next.push_back(std::move(child));
    }
    // Fresh immigrants fill whatever the three groups left open.
    for (int r = static_cast<int>(next.size()); r < pop; ++r) {
      Rng rng(derive_seed(params.seed, 3, static_cast<std::uint64_t>(gen),
                          static_cast<std::uint64_t>(r)));
      next.push_back(random_genes(genes, rng));
    }
    population = std::move(next);
  }

  result.best = PhaseProfile::from_phases(best_genes, m_x, m_z);
  result.fitness = best_seen;
  return result;
}

OptimizationResult ga_optimize(const SceneConfig& scene, const ChannelState& state,
                               const SpConfig& sp, const GaParams& params) {
  return ga_optimize(context_fitness(scene, state, sp), scene.ris_m_x, scene.ris_m_z, params);
}

OptimizationResult sa_optimize(const PhaseFitness& fitness, int m_x, int m_z,
                               const SaParams& params) {
  params.validate();
  const int genes = m_x * m_z;
  Rng rng(derive_seed(params.seed, 0xa11ea1));

  Eigen::VectorXd current = random_genes(genes, rng);
  double current_fitness = fitness(PhaseProfile::from_phases(current, m_x, m_z));
  OptimizationResult result;
  Eigen::VectorXd best = current;
  double best_fitness = current_fitness;
  double temperature = params.initial_temperature;

  for (int it = 0; it < params.iterations; ++it) {
    int gene = static_cast<int>(rng.integer(genes));
    double saved = current[gene];
    current[gene] = wrap_phase(saved + params.step * rng.gaussian());
    double proposal_fitness = fitness(PhaseProfile::from_phases(current, m_x, m_z));
    double delta = proposal_fitness - current_fitness;

    bool accept = delta >= 0.0;
    if (!accept && temperature > 0.0) accept = rng.uniform() < std::exp(delta / temperature);
    if (accept) {
      current_fitness = proposal_fitness;
      if (delta < 0.0) ++result.accepted_worse;
      if (current_fitness > best_fitness) {
        best_fitness = current_fitness;
        best = current;
      }
    } else {
      current[gene] = saved;
    }
    temperature *= params.cooling;
    result.trace.push_back(best_fitness);
  }

  result.best = PhaseProfile::from_phases(best, m_x, m_z);
  result.fitness = best_fitness;
  return result;
}

OptimizationResult sa_optimize(const SceneConfig& scene, const ChannelState& state,
                               const SpConfig& sp, const SaParams& params) {
  return sa_optimize(context_fitness(scene, state, sp), scene.ris_m_x, scene.ris_m_z, params);
}

RandomBaselineResult random_baseline(const PhaseFitness& fitness, int m_x, int m_z,
                                     int samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("random_baseline: need at least one sample");
  Eigen::VectorXd scores(samples);
  std::vector<Eigen::VectorXd> genes(samples);
  parallel_for(samples, [&](std::int64_t i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    genes[i] = random_genes(m_x * m_z, rng);
    scores[i] = fitness(PhaseProfile::from_phases(genes[i], m_x, m_z));
  });

  RandomBaselineResult out;
  Eigen::Index best_idx;
  out.max = scores.maxCoeff(&best_idx);
  out.best = PhaseProfile::from_phases(genes[best_idx], m_x, m_z);
  out.mean = scores.mean();
  if (samples > 1) {
    double var = (scores.array() - out.mean).square().sum() / (samples - 1.0);
    out.stderr_mean = std::sqrt(var / samples);
  }
  return out;
}

RandomBaselineResult random_baseline(const SceneConfig& scene, const ChannelState& state,
                                     const SpConfig& sp, int samples, std::uint64_t seed) {
  return random_baseline(context_fitness(scene, state, sp), scene.ris_m_x, scene.ris_m_z,
                         samples, seed);
}

}  // namespace risim
