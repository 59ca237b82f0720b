#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "risim/sp_link.hpp"

namespace risim {

struct GaParams {
  int population = 200;
  int elites = 10;
  int crossover = 160;
  int mutation = 20;
  double mutation_prob = 0.1;
  double mutation_sigma = kPi / 8.0;  // wrapped Gaussian step per mutated gene
  int tournament = 2;
  int generations = 100;
  int stagnation = 20;  // stop after this many generations without improvement
  std::uint64_t seed = 1;

  void validate() const;
};

struct SaParams {
  double initial_temperature = 1000.0;
  double cooling = 0.99;
  double step = kPi / 8.0;  // proposal step (rad), one gene per iteration
  int iterations = 10000;
  std::uint64_t seed = 1;

  void validate() const;
};

struct OptimizationResult {
  PhaseProfile best;
  double fitness = 0.0;
  std::vector<double> trace;  // best fitness seen per generation/iteration
  int accepted_worse = 0;     // SA only
};

using PhaseFitness = std::function<double(const PhaseProfile&)>;

// Elitist genetic search over per-element phases in [0, 2 pi). Children are
// uniform crossover of tournament winners or per-gene wrapped-Gaussian
// mutants; leftover slots are fresh random immigrants.
OptimizationResult ga_optimize(const PhaseFitness& fitness, int m_x, int m_z,
                               const GaParams& params);
OptimizationResult ga_optimize(const SceneConfig& scene, const ChannelState& state,
                               const SpConfig& sp, const GaParams& params);

// Single-state Metropolis search with geometric cooling; returns the best
// profile ever visited. Worse moves are accepted with exp(delta / T).
OptimizationResult sa_optimize(const PhaseFitness& fitness, int m_x, int m_z,
                               const SaParams& params);
OptimizationResult sa_optimize(const SceneConfig& scene, const ChannelState& state,
                               const SpConfig& sp, const SaParams& params);

struct RandomBaselineResult {
  double mean = 0.0;
  double max = 0.0;
  double stderr_mean = 0.0;
  PhaseProfile best;
};
RandomBaselineResult random_baseline(const PhaseFitness& fitness, int m_x, int m_z,
                                     int samples, std::uint64_t seed);
RandomBaselineResult random_baseline(const SceneConfig& scene, const ChannelState& state,
                                     const SpConfig& sp, int samples, std::uint64_t seed);

}  // namespace risim
