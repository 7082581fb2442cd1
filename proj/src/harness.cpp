#include "confopt/harness.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

namespace confopt::harness {

eda::RunHistory run_single(const ProblemSpec& spec, const eda::AlgoConfig& cfg,
                           const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    eda::Evaluator evaluator = fitness::make_evaluator(spec);
    eda::RunHistory history = eda::run(spec, cfg, evaluator);
    std::filesystem::path dir(out_dir);
    write_history_csv(history, (dir / "history.csv").string());
    write_best_solution(spec, history, (dir / "best_solution.json").string());
    export_dependency_data(history, (dir / "deps.json").string(), (dir / "deps.dot").string());
    export_probability_evolution(history, dir.string());
    return history;
}

CompareReport run_compare(const ProblemSpec& spec, std::vector<eda::AlgoConfig> configs,
                          int runs, std::uint64_t base_seed, int parallel_runs) {
    if (configs.empty()) throw std::invalid_argument("compare needs at least one algorithm");
    if (runs < 1) throw std::invalid_argument("compare needs at least one run per algorithm");
    for (const eda::AlgoConfig& cfg : configs) {
        if (cfg.population_size != configs.front().population_size ||
            cfg.iteration_budget != configs.front().iteration_budget) {
            throw std::invalid_argument(
                "compared algorithms must share the population size and iteration budget");
        }
    }

    eda::Evaluator evaluator = fitness::make_evaluator(spec);
    const int budget = configs.front().iteration_budget;

    struct Job {
        std::size_t config_index;
        int run_index;
    };
    std::vector<Job> jobs;
    for (std::size_t c = 0; c < configs.size(); ++c) {
        for (int r = 0; r < runs; ++r) jobs.push_back({c, r});
    }
    std::vector<eda::RunHistory> results(jobs.size());
    auto execute = [&](std::size_t job_index) {
        const Job& job = jobs[job_index];
        eda::AlgoConfig cfg = configs[job.config_index];
        cfg.seed = base_seed + static_cast<std::uint64_t>(job.run_index);
        if (parallel_runs > 1) cfg.jobs = 1;
        results[job_index] = eda::run(spec, cfg, evaluator);
    };
    if (parallel_runs <= 1) {
        for (std::size_t j = 0; j < jobs.size(); ++j) execute(j);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            while (true) {
                std::size_t j = next.fetch_add(1);
                if (j >= jobs.size()) return;
                execute(j);
            }
        };
        std::vector<std::thread> pool;
        int workers = std::min<int>(parallel_runs, static_cast<int>(jobs.size()));
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    CompareReport report;
    report.runs = runs;
    report.iterations = budget;
    for (std::size_t c = 0; c < configs.size(); ++c) {
        CompareCurve curve;
        curve.algorithm = eda::to_string(configs[c].algorithm);
        curve.mean_best.assign(static_cast<std::size_t>(budget) + 1, 0.0);
        curve.std_best.assign(static_cast<std::size_t>(budget) + 1, 0.0);
        curve.mean_evals.assign(static_cast<std::size_t>(budget) + 1, 0.0);
        for (int iteration = 0; iteration <= budget; ++iteration) {
            std::vector<double> bests, evals;
            for (int r = 0; r < runs; ++r) {
                const eda::RunHistory& h = results[c * static_cast<std::size_t>(runs) +
                                                   static_cast<std::size_t>(r)];
                // early-stopped runs extend their final best-so-far value
                std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(iteration),
                                                        h.records.size() - 1);
                bests.push_back(h.records[idx].best_fitness);
                evals.push_back(static_cast<double>(h.records[idx].evaluations_used));
            }
            double mean = 0.0;
            for (double b : bests) mean += b;
            mean /= static_cast<double>(runs);
            double variance = 0.0;
            for (double b : bests) variance += (b - mean) * (b - mean);
            variance /= static_cast<double>(runs);
            double mean_evals = 0.0;
            for (double e : evals) mean_evals += e;
            mean_evals /= static_cast<double>(runs);
            curve.mean_best[static_cast<std::size_t>(iteration)] = mean;
            curve.std_best[static_cast<std::size_t>(iteration)] = std::sqrt(variance);
            curve.mean_evals[static_cast<std::size_t>(iteration)] = mean_evals;
        }
        report.curves.push_back(std::move(curve));
    }
    for (const eda::RunHistory& h : results) report.total_evaluations += h.total_evaluations();
    return report;
}

void write_compare_csv(const CompareReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "algorithm,iteration,mean_best,std_best,mean_evals\n";
    for (const CompareCurve& curve : report.curves) {
        for (std::size_t i = 0; i < curve.mean_best.size(); ++i) {
            out << curve.algorithm << ',' << i << ',' << format_double(curve.mean_best[i]) << ','
                << format_double(curve.std_best[i]) << ',' << format_double(curve.mean_evals[i])
                << '\n';
        }
    }
}

}  // namespace confopt::harness
