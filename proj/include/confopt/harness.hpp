#pragma once

#include <string>
#include <vector>

#include "confopt/eda.hpp"
#include "confopt/fitness.hpp"

namespace confopt::harness {

/// history.csv: iteration,best_fitness,mean_fitness,evals,wall_ms
void write_history_csv(const eda::RunHistory& history, const std::string& path);

/// best_solution.json: values (VariableIndex order), fitness, feasibility.
void write_best_solution(const ProblemSpec& spec, const eda::RunHistory& history,
                         const std::string& path);

/// deps.json (per-pair cumulative chi-square data) and deps.dot (edges
/// filtered to ever-significant pairs, i < j, weighted by cumulative value).
void export_dependency_data(const eda::RunHistory& history, const std::string& json_path,
                            const std::string& dot_path);

/// pmodel_iter<k>.json per completed iteration: per variable the argmax code
/// and its probability (ties to the lowest code).
void export_probability_evolution(const eda::RunHistory& history, const std::string& directory);

/// Runs one optimization and writes every artifact into out_dir.
eda::RunHistory run_single(const ProblemSpec& spec, const eda::AlgoConfig& cfg,
                           const std::string& out_dir);

struct CompareCurve {
    std::string algorithm;
    std::vector<double> mean_best;  // indexed by iteration 0..budget
    std::vector<double> std_best;
    std::vector<double> mean_evals;
};

struct CompareReport {
    std::vector<CompareCurve> curves;
    int runs = 0;
    int iterations = 0;
    long long total_evaluations = 0;
};

/// Runs every config `runs` times with seeds base_seed + run index and
/// aggregates best-fitness curves. All configs must share the population
/// size and iteration budget. `parallel_runs` > 1 executes whole runs
/// concurrently (forcing single-threaded evaluation inside each).
CompareReport run_compare(const ProblemSpec& spec, std::vector<eda::AlgoConfig> configs,
                          int runs, std::uint64_t base_seed, int parallel_runs = 1);

/// compare.csv: algorithm,iteration,mean_best,std_best,mean_evals
void write_compare_csv(const CompareReport& report, const std::string& path);

std::vector<int> read_solution_file(const std::string& path);
void write_solution_file(const std::vector<int>& values, const std::string& path);

/// Formats a double so identical values always print identically (shortest
/// round-trip representation).
std::string format_double(double v);

}  // namespace confopt::harness
