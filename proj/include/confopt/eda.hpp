#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "confopt/probability_model.hpp"
#include "confopt/problem_spec.hpp"
#include "confopt/repair.hpp"

namespace confopt::eda {

enum class Algorithm { BmdaGs, BmdaOriginal, Ga };

const char* to_string(Algorithm algo);
std::optional<Algorithm> algorithm_from_string(const std::string& name);

struct AlgoConfig {
    Algorithm algorithm = Algorithm::BmdaGs;
    int population_size = 100;
    double truncation_rate = 0.2;
    double confidence_level = 0.99;
    int gibbs_sweep_multiplier = 1000;
    double ga_crossover_rate = 0.9;
    double ga_mutation_rate = 0.1;
    double ga_tournament_truncation = 0.6;
    int iteration_budget = 30;
    std::optional<int> stagnation_window;
    std::optional<double> target_fitness;  // early exit once reached
    bool elitism = true;
    bool cache_fitness = true;
    int jobs = 1;
    std::uint64_t seed = 0;
    RepairOptions repair;

    void validate() const;  // throws std::invalid_argument
};

struct Population {
    std::vector<Solution> solutions;
    std::vector<double> fitnesses;  // aligned; empty until evaluated
    int generation = 0;

    int size() const { return static_cast<int>(solutions.size()); }
};

/// Pure fitness callback; must be safe to invoke concurrently.
using Evaluator = std::function<double(const ProblemSpec&, const Solution&)>;

/// Uniform random solutions, each passed through repair. Deterministic in
/// (spec, size, seed).
Population initialize_population(const ProblemSpec& spec, int size, std::uint64_t seed,
                                 const RepairOptions& repair_options = {});

/// The ceil(rate * |P|) lowest-fitness solutions (minimization); ties keep
/// the earlier index.
Population select_truncation(const Population& pop, double rate);

/// One Gibbs-sampled solution: random initialization, then
/// sweep_multiplier * |x| single-site conditional updates, then repair.
Solution gibbs_sample(const ProbabilityModel& model, const ProblemSpec& spec, std::uint64_t seed,
                      int sweep_multiplier = 1000, const RepairOptions& repair_options = {});

/// Original-style ancestral sampling: maximal-chi-square spanning forest over
/// the significant pairs, roots from marginals, children from conditionals in
/// topological order; repaired before returning.
Solution bmda_ancestral_sample(const ProbabilityModel& model, const DependencyStats& stats,
                               const ProblemSpec& spec, std::uint64_t seed,
                               const RepairOptions& repair_options = {});

/// One GA generation: binary tournament inside the top tournament-truncation
/// fraction, one-point crossover, per-gene uniform mutation, repair.
Population ga_step(const ProblemSpec& spec, const Population& pop, const AlgoConfig& cfg,
                   std::uint64_t seed);

struct IterationRecord {
    int iteration = 0;
    double best_fitness = 0.0;  // best-so-far (non-increasing)
    double mean_fitness = 0.0;  // mean of the current population
    long long evaluations_used = 0;
    double wall_ms = 0.0;
};

struct RunHistory {
    std::vector<IterationRecord> records;
    Solution best_solution;
    double best_fitness = 0.0;
    DependencyStats final_stats;  // carries the cumulative chi-square matrix
    std::vector<ProbabilityModel> model_snapshots;   // one per completed iteration
    std::vector<DependencyStats> stats_snapshots;    // aligned with model_snapshots
    AlgoConfig config;
    std::uint64_t spec_hash = 0;
    bool aborted = false;
    std::string abort_reason;

    long long total_evaluations() const {
        return records.empty() ? 0 : records.back().evaluations_used;
    }
};

/// Full optimization loop: evaluate, select, estimate, sample, repair;
/// repeats until the iteration budget, the stagnation window, or the target
/// fitness is hit. Evaluator failures abort the run with a partial history.
RunHistory run(const ProblemSpec& spec, const AlgoConfig& cfg, const Evaluator& evaluator);

std::uint64_t hash_spec(const ProblemSpec& spec);

}  // namespace confopt::eda
