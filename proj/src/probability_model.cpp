#include "confopt/probability_model.hpp"

#include <algorithm>
#include <cmath>

namespace confopt::eda {

namespace {

// 99% chi-square quantiles; indices 1..4 are the reference table values,
// the rest come from the standard table.
constexpr double kThresholds99[] = {
    0.0,   6.63,  9.21,  11.34, 13.28, 15.09, 16.81, 18.48, 20.09, 21.67, 23.21,
    24.73, 26.22, 27.69, 29.14, 30.58, 32.00, 33.41, 34.81, 36.19, 37.57, 38.93,
    40.29, 41.64, 42.98, 44.31, 45.64, 46.96, 48.28, 49.59, 50.89,
};
constexpr int kTableMax = 30;

/// Inverse standard-normal CDF (Acklam's rational approximation).
double normal_quantile(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    if (p < p_low) {
        double q = std::sqrt(-2 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    if (p <= 1 - p_low) {
        double q = p - 0.5, r = q * q;
        return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
               (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    }
    double q = std::sqrt(-2 * std::log(1 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
}

double wilson_hilferty(int dof, double confidence) {
    double k = dof;
    double z = normal_quantile(confidence);
    double t = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
    return k * t * t * t;
}

}  // namespace

double chi_square_threshold(int dof) {
    if (dof <= 0) return std::numeric_limits<double>::infinity();
    if (dof <= kTableMax) return kThresholds99[dof];
    return wilson_hilferty(dof, 0.99);
}

double chi_square_threshold(int dof, double confidence) {
    if (dof <= 0) return std::numeric_limits<double>::infinity();
    if (confidence == 0.99) return chi_square_threshold(dof);
    return wilson_hilferty(dof, confidence);
}

ChiSquareResult chi_square(const std::vector<Solution>& sample, const ProblemSpec& spec, int i,
                           int j, double confidence) {
    if (i > j) return chi_square(sample, spec, j, i, confidence);  // exact symmetry
    const int di = spec.variables().at(i).domain_size;
    const int dj = spec.variables().at(j).domain_size;
    const double n = static_cast<double>(sample.size());

    std::vector<double> joint(static_cast<std::size_t>(di) * dj, 0.0);
    std::vector<double> count_i(static_cast<std::size_t>(di), 0.0);
    std::vector<double> count_j(static_cast<std::size_t>(dj), 0.0);
    for (const Solution& s : sample) {
        int a = s.values[static_cast<std::size_t>(i)];
        int b = s.values[static_cast<std::size_t>(j)];
        joint[static_cast<std::size_t>(a) * dj + b] += 1.0;
        count_i[static_cast<std::size_t>(a)] += 1.0;
        count_j[static_cast<std::size_t>(b)] += 1.0;
    }

    ChiSquareResult result;
    for (int a = 0; a < di; ++a) {
        for (int b = 0; b < dj; ++b) {
            double expected = count_i[static_cast<std::size_t>(a)] *
                              count_j[static_cast<std::size_t>(b)] / n;
            if (expected == 0.0) continue;  // p_i * p_j = 0 contributes nothing
            double observed = joint[static_cast<std::size_t>(a) * dj + b];
            double diff = observed - expected;
            result.chi2 += diff * diff / expected;
        }
    }

    int missing_i = 0, missing_j = 0;
    for (int a = 0; a < di; ++a) missing_i += count_i[static_cast<std::size_t>(a)] == 0.0 ? 1 : 0;
    for (int b = 0; b < dj; ++b) missing_j += count_j[static_cast<std::size_t>(b)] == 0.0 ? 1 : 0;
    result.dof = (di - 1) * (dj - 1) - missing_i - missing_j;
    result.significant =
        result.dof >= 1 && result.chi2 >= chi_square_threshold(result.dof, confidence);
    return result;
}

void DependencyStats::accumulate_from(const DependencyStats& prev) {
    for (std::size_t k = 0; k < cumulative_chi2.size(); ++k) {
        cumulative_chi2[k] += prev.cumulative_chi2[k];
        ever_significant[k] = ever_significant[k] || prev.ever_significant[k];
    }
}

nlohmann::json ProbabilityModel::to_json() const {
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t i = 0; i < vars.size(); ++i) {
        nlohmann::json entry;
        entry["var"] = i;
        entry["marginal"] = vars[i].marginal;
        if (vars[i].neighbor >= 0) {
            entry["neighbor"] = vars[i].neighbor;
            entry["conditional"] = vars[i].conditional;
        }
        out.push_back(entry);
    }
    return out;
}

nlohmann::json stats_to_json(const DependencyStats& stats) {
    nlohmann::json pairs = nlohmann::json::array();
    for (int i = 0; i < stats.n_vars; ++i) {
        for (int j = i + 1; j < stats.n_vars; ++j) {
            pairs.push_back({{"i", i},
                             {"j", j},
                             {"chi2", stats.chi2_at(i, j)},
                             {"cumulative_chi2", stats.cumulative_at(i, j)},
                             {"significant", stats.significant_at(i, j)},
                             {"ever_significant", stats.ever_significant_at(i, j)}});
        }
    }
    return {{"n_vars", stats.n_vars}, {"pairs", pairs}};
}

std::pair<ProbabilityModel, DependencyStats> estimate_model(const std::vector<Solution>& sample,
                                                            const ProblemSpec& spec,
                                                            double confidence) {
    const int n = spec.variables().size();
    DependencyStats stats;
    stats.n_vars = n;
    stats.chi2.assign(static_cast<std::size_t>(n) * n, 0.0);
    stats.dof.assign(static_cast<std::size_t>(n) * n, 0);
    stats.significant.assign(static_cast<std::size_t>(n) * n, 0);
    stats.cumulative_chi2.assign(static_cast<std::size_t>(n) * n, 0.0);
    stats.ever_significant.assign(static_cast<std::size_t>(n) * n, 0);

    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            ChiSquareResult r = chi_square(sample, spec, i, j, confidence);
            stats.chi2[stats.idx(i, j)] = stats.chi2[stats.idx(j, i)] = r.chi2;
            stats.dof[stats.idx(i, j)] = stats.dof[stats.idx(j, i)] = r.dof;
            char sig = r.significant ? 1 : 0;
            stats.significant[stats.idx(i, j)] = stats.significant[stats.idx(j, i)] = sig;
            stats.cumulative_chi2[stats.idx(i, j)] = stats.cumulative_chi2[stats.idx(j, i)] = r.chi2;
            stats.ever_significant[stats.idx(i, j)] = stats.ever_significant[stats.idx(j, i)] = sig;
        }
    }

    const double n_samples = static_cast<double>(sample.size());
    ProbabilityModel model;
    model.vars.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        VariableModel& vm = model.vars[static_cast<std::size_t>(i)];
        const int di = spec.variables().at(i).domain_size;
        vm.marginal.assign(static_cast<std::size_t>(di), 0.0);
        for (const Solution& s : sample) {
            vm.marginal[static_cast<std::size_t>(s.values[static_cast<std::size_t>(i)])] += 1.0;
        }
        for (double& p : vm.marginal) p /= n_samples;

        // the most dependent significant partner becomes the neighbor
        int best = -1;
        double best_chi2 = 0.0;
        for (int j = 0; j < n; ++j) {
            if (j == i || !stats.significant_at(i, j)) continue;
            if (best < 0 || stats.chi2_at(i, j) > best_chi2) {
                best = j;
                best_chi2 = stats.chi2_at(i, j);
            }
        }
        vm.neighbor = best;
        if (best >= 0) {
            const int dn = spec.variables().at(best).domain_size;
            vm.conditional.assign(static_cast<std::size_t>(dn), {});
            std::vector<double> row_total(static_cast<std::size_t>(dn), 0.0);
            std::vector<std::vector<double>> counts(
                static_cast<std::size_t>(dn), std::vector<double>(static_cast<std::size_t>(di), 0.0));
            for (const Solution& s : sample) {
                int v = s.values[static_cast<std::size_t>(best)];
                int a = s.values[static_cast<std::size_t>(i)];
                counts[static_cast<std::size_t>(v)][static_cast<std::size_t>(a)] += 1.0;
                row_total[static_cast<std::size_t>(v)] += 1.0;
            }
            for (int v = 0; v < dn; ++v) {
                if (row_total[static_cast<std::size_t>(v)] > 0.0) {
                    auto& row = counts[static_cast<std::size_t>(v)];
                    for (double& p : row) p /= row_total[static_cast<std::size_t>(v)];
                    vm.conditional[static_cast<std::size_t>(v)] = row;
                } else {
                    // never-observed conditioning value: fall back to the marginal
                    vm.conditional[static_cast<std::size_t>(v)] = vm.marginal;
                }
            }
        }
    }

    // joint tables for significant pairs (ancestral sampling support)
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (!stats.significant_at(i, j)) continue;
            const int di = spec.variables().at(i).domain_size;
            const int dj = spec.variables().at(j).domain_size;
            std::vector<double> joint(static_cast<std::size_t>(di) * dj, 0.0);
            for (const Solution& s : sample) {
                int a = s.values[static_cast<std::size_t>(i)];
                int b = s.values[static_cast<std::size_t>(j)];
                joint[static_cast<std::size_t>(a) * dj + b] += 1.0 / n_samples;
            }
            stats.pair_joint[{i, j}] = std::move(joint);
        }
    }
    return {std::move(model), std::move(stats)};
}

}  // namespace confopt::eda
