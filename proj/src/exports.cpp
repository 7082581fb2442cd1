#include <cstdio>
#include <filesystem>
#include <fstream>

#include "confopt/harness.hpp"

namespace confopt::harness {

std::string format_double(double v) {
    char buffer[40];
    // shortest representation that round-trips
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buffer, sizeof(buffer), "%.*g", precision, v);
        if (std::strtod(buffer, nullptr) == v) break;
    }
    return buffer;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

}  // namespace

void write_history_csv(const eda::RunHistory& history, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "iteration,best_fitness,mean_fitness,evals,wall_ms\n";
    for (const eda::IterationRecord& r : history.records) {
        out << r.iteration << ',' << format_double(r.best_fitness) << ','
            << format_double(r.mean_fitness) << ',' << r.evaluations_used << ','
            << format_double(r.wall_ms) << '\n';
    }
}

void write_best_solution(const ProblemSpec& spec, const eda::RunHistory& history,
                         const std::string& path) {
    nlohmann::json out;
    out["values"] = history.best_solution.values;
    out["fitness"] = history.best_fitness;
    out["feasible"] = is_feasible(spec, history.best_solution).empty();
    out["spec_hash"] = history.spec_hash;
    std::ofstream file = open_out(path);
    file << out.dump(2) << '\n';
}

void export_dependency_data(const eda::RunHistory& history, const std::string& json_path,
                            const std::string& dot_path) {
    const eda::DependencyStats& stats = history.final_stats;
    {
        std::ofstream out = open_out(json_path);
        out << eda::stats_to_json(stats).dump(2) << '\n';
    }
    std::ofstream dot = open_out(dot_path);
    dot << "graph dependencies {\n";
    for (int i = 0; i < stats.n_vars; ++i) {
        for (int j = i + 1; j < stats.n_vars; ++j) {
            if (!stats.ever_significant_at(i, j)) continue;
            dot << "  \"x" << i << "\" -- \"x" << j << "\" [weight="
                << format_double(stats.cumulative_at(i, j)) << ", label=\""
                << format_double(stats.cumulative_at(i, j)) << "\"];\n";
        }
    }
    dot << "}\n";
}

void export_probability_evolution(const eda::RunHistory& history, const std::string& directory) {
    for (std::size_t k = 0; k < history.model_snapshots.size(); ++k) {
        const eda::ProbabilityModel& model = history.model_snapshots[k];
        nlohmann::json entries = nlohmann::json::array();
        for (std::size_t v = 0; v < model.vars.size(); ++v) {
            const std::vector<double>& marginal = model.vars[v].marginal;
            int argmax = 0;
            for (std::size_t code = 1; code < marginal.size(); ++code) {
                if (marginal[code] > marginal[static_cast<std::size_t>(argmax)]) {
                    argmax = static_cast<int>(code);
                }
            }
            entries.push_back({{"var", v},
                               {"type", argmax},
                               {"p", marginal[static_cast<std::size_t>(argmax)]}});
        }
        std::filesystem::path file =
            std::filesystem::path(directory) / ("pmodel_iter" + std::to_string(k + 1) + ".json");
        std::ofstream out = open_out(file.string());
        out << entries.dump(2) << '\n';
    }
}

std::vector<int> read_solution_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open solution file: " + path);
    nlohmann::json raw;
    in >> raw;
    if (!raw.is_array()) throw std::runtime_error("solution file must hold a JSON array");
    return raw.get<std::vector<int>>();
}

void write_solution_file(const std::vector<int>& values, const std::string& path) {
    std::ofstream out = open_out(path);
    out << nlohmann::json(values).dump() << '\n';
}

}  // namespace confopt::harness
