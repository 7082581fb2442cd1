#pragma once

#include <map>
#include <utility>
#include <vector>

#include "confopt/problem_spec.hpp"

namespace confopt::eda {

struct ChiSquareResult {
    double chi2 = 0.0;
    int dof = 0;
    bool significant = false;
};

/// 99%-level chi-square significance threshold for the given degrees of
/// freedom. dof 1..4 use the exact reference values {6.63, 9.21, 11.34,
/// 13.28}; larger dof extend the table with standard 99% quantiles.
double chi_square_threshold(int dof);

/// Threshold at an arbitrary confidence level (Wilson-Hilferty approximation
/// except at 0.99, which uses the table above).
double chi_square_threshold(int dof, double confidence);

/// Pairwise dependency test over a selected sample: empirical-frequency
/// chi-square statistic, degrees of freedom adjusted by never-observed
/// values, and the significance verdict. Symmetric in (i, j) bit for bit.
ChiSquareResult chi_square(const std::vector<Solution>& sample, const ProblemSpec& spec, int i,
                           int j, double confidence = 0.99);

/// Dependency statistics for one generation, plus running sums maintained
/// across generations by the optimizer loop.
struct DependencyStats {
    int n_vars = 0;
    std::vector<double> chi2;        // n*n, symmetric, zero diagonal
    std::vector<int> dof;            // n*n
    std::vector<char> significant;   // n*n
    std::vector<double> cumulative_chi2;
    std::vector<char> ever_significant;
    /// Empirical joint tables for significant pairs (i < j), row-major over
    /// (value_i, value_j); feeds conditional rows along dependency-forest edges.
    std::map<std::pair<int, int>, std::vector<double>> pair_joint;

    double chi2_at(int i, int j) const { return chi2[idx(i, j)]; }
    int dof_at(int i, int j) const { return dof[idx(i, j)]; }
    bool significant_at(int i, int j) const { return significant[idx(i, j)] != 0; }
    double cumulative_at(int i, int j) const { return cumulative_chi2[idx(i, j)]; }
    bool ever_significant_at(int i, int j) const { return ever_significant[idx(i, j)] != 0; }

    /// Folds the previous generations' running sums into this snapshot.
    void accumulate_from(const DependencyStats& prev);

    std::size_t idx(int i, int j) const {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(n_vars) +
               static_cast<std::size_t>(j);
    }
};

/// Per-variable model: marginal table, at most one dependency neighbor, and
/// the conditional table rows indexed by the neighbor's value. Rows for
/// never-observed conditioning values hold a copy of the marginal.
struct VariableModel {
    std::vector<double> marginal;
    int neighbor = -1;
    std::vector<std::vector<double>> conditional;
};

struct ProbabilityModel {
    std::vector<VariableModel> vars;

    nlohmann::json to_json() const;
};

nlohmann::json stats_to_json(const DependencyStats& stats);

/// Estimates the bivariate model from a selected sample: all pairwise
/// chi-square tests, neighbor choice by highest significant chi-square
/// (ties to the lower index), marginals and conditionals by frequency.
std::pair<ProbabilityModel, DependencyStats> estimate_model(const std::vector<Solution>& sample,
                                                            const ProblemSpec& spec,
                                                            double confidence = 0.99);

}  // namespace confopt::eda
