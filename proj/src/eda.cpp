#include "confopt/eda.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include "confopt/rng.hpp"

namespace confopt::eda {

const char* to_string(Algorithm algo) {
    switch (algo) {
        case Algorithm::BmdaGs: return "bmda-gs";
        case Algorithm::BmdaOriginal: return "bmda";
        case Algorithm::Ga: return "ga";
    }
    return "?";
}

std::optional<Algorithm> algorithm_from_string(const std::string& name) {
    if (name == "bmda-gs") return Algorithm::BmdaGs;
    if (name == "bmda") return Algorithm::BmdaOriginal;
    if (name == "ga") return Algorithm::Ga;
    return std::nullopt;
}

void AlgoConfig::validate() const {
    auto in_unit = [](double r) { return r > 0.0 && r <= 1.0; };
    if (population_size < 2) throw std::invalid_argument("population_size must be >= 2");
    if (!in_unit(truncation_rate)) throw std::invalid_argument("truncation_rate must be in (0, 1]");
    if (!in_unit(ga_tournament_truncation)) {
        throw std::invalid_argument("ga_tournament_truncation must be in (0, 1]");
    }
    if (ga_crossover_rate < 0.0 || ga_crossover_rate > 1.0 || ga_mutation_rate < 0.0 ||
        ga_mutation_rate > 1.0) {
        throw std::invalid_argument("GA rates must be in [0, 1]");
    }
    if (confidence_level <= 0.0 || confidence_level >= 1.0) {
        throw std::invalid_argument("confidence_level must be in (0, 1)");
    }
    if (gibbs_sweep_multiplier < 1) throw std::invalid_argument("gibbs_sweep_multiplier must be >= 1");
    if (iteration_budget < 0) throw std::invalid_argument("iteration_budget must be >= 0");
    if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
}

namespace {

struct EvalContext {
    std::map<std::vector<int>, double> cache;
    long long evaluations = 0;
};

/// Evaluates a population; duplicates and previously seen solutions are
/// served from the cache when enabled. Only the evaluator itself runs on the
/// worker pool; results merge by index, so ordering never affects state.
void evaluate_population(const ProblemSpec& spec, Population& pop, const Evaluator& evaluator,
                         EvalContext& ctx, bool use_cache, int jobs) {
    pop.fitnesses.assign(pop.solutions.size(), 0.0);
    std::vector<int> task_of(pop.solutions.size(), -1);
    std::vector<const Solution*> tasks;
    std::map<std::vector<int>, int> pending;  // values -> task id (cache mode)
    for (std::size_t i = 0; i < pop.solutions.size(); ++i) {
        const Solution& s = pop.solutions[i];
        if (use_cache) {
            if (auto hit = ctx.cache.find(s.values); hit != ctx.cache.end()) {
                pop.fitnesses[i] = hit->second;
                continue;
            }
            if (auto seen = pending.find(s.values); seen != pending.end()) {
                task_of[i] = seen->second;
                continue;
            }
            pending.emplace(s.values, static_cast<int>(tasks.size()));
        }
        task_of[i] = static_cast<int>(tasks.size());
        tasks.push_back(&s);
    }

    std::vector<double> results(tasks.size(), 0.0);
    if (!tasks.empty()) {
        const int workers = std::min<int>(jobs, static_cast<int>(tasks.size()));
        if (workers <= 1) {
            for (std::size_t t = 0; t < tasks.size(); ++t) results[t] = evaluator(spec, *tasks[t]);
        } else {
            std::atomic<std::size_t> next{0};
            std::mutex error_mutex;
            std::string error;
            auto worker = [&] {
                while (true) {
                    std::size_t t = next.fetch_add(1);
                    if (t >= tasks.size()) return;
                    try {
                        results[t] = evaluator(spec, *tasks[t]);
                    } catch (const std::exception& e) {
                        std::lock_guard<std::mutex> lock(error_mutex);
                        if (error.empty()) error = e.what();
                        return;
                    }
                }
            };
            std::vector<std::thread> threads;
            threads.reserve(static_cast<std::size_t>(workers));
            for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
            for (auto& th : threads) th.join();
            if (!error.empty()) throw std::runtime_error(error);
        }
    }

    ctx.evaluations += static_cast<long long>(tasks.size());
    for (std::size_t i = 0; i < pop.solutions.size(); ++i) {
        if (task_of[i] >= 0) pop.fitnesses[i] = results[static_cast<std::size_t>(task_of[i])];
    }
    if (use_cache) {
        for (std::size_t t = 0; t < tasks.size(); ++t) ctx.cache[tasks[t]->values] = results[t];
    }
}

int sample_row(Rng& rng, const std::vector<double>& row) {
    return static_cast<int>(rng.next_categorical(row));
}

}  // namespace

Population initialize_population(const ProblemSpec& spec, int size, std::uint64_t seed,
                                 const RepairOptions& repair_options) {
    if (size < 2) throw std::invalid_argument("population size must be >= 2");
    Population pop;
    pop.generation = 0;
    Rng rng(seed);
    for (int i = 0; i < size; ++i) {
        Solution raw = random_solution(spec, rng);
        pop.solutions.push_back(repair(spec, raw, rng.next_u64(), repair_options).repaired);
    }
    return pop;
}

Population select_truncation(const Population& pop, double rate) {
    if (rate <= 0.0 || rate > 1.0) throw std::invalid_argument("truncation rate must be in (0, 1]");
    if (pop.fitnesses.size() != pop.solutions.size()) {
        throw std::invalid_argument("population must be evaluated before selection");
    }
    const int keep = static_cast<int>(std::ceil(rate * pop.size()));
    std::vector<int> order(static_cast<std::size_t>(pop.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return pop.fitnesses[static_cast<std::size_t>(a)] < pop.fitnesses[static_cast<std::size_t>(b)];
    });
    Population selected;
    selected.generation = pop.generation;
    for (int k = 0; k < keep; ++k) {
        int i = order[static_cast<std::size_t>(k)];
        selected.solutions.push_back(pop.solutions[static_cast<std::size_t>(i)]);
        selected.fitnesses.push_back(pop.fitnesses[static_cast<std::size_t>(i)]);
    }
    return selected;
}

Solution gibbs_sample(const ProbabilityModel& model, const ProblemSpec& spec, std::uint64_t seed,
                      int sweep_multiplier, const RepairOptions& repair_options) {
    const int n = spec.variables().size();
    Rng rng(seed);
    Solution s = random_solution(spec, rng);
    const long long updates = static_cast<long long>(sweep_multiplier) * n;
    for (long long u = 0; u < updates; ++u) {
        int i = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
        const VariableModel& vm = model.vars[static_cast<std::size_t>(i)];
        const std::vector<double>* row = &vm.marginal;
        if (vm.neighbor >= 0) {
            row = &vm.conditional[static_cast<std::size_t>(
                s.values[static_cast<std::size_t>(vm.neighbor)])];
        }
        s.values[static_cast<std::size_t>(i)] = sample_row(rng, *row);
    }
    return repair(spec, s, rng.next_u64(), repair_options).repaired;
}

namespace {

struct ForestEdge {
    int parent;
    int child;
};

/// Maximal-chi-square spanning forest over the significant pairs, rooted at
/// each tree's lowest variable index; edges come out in sampling order.
std::vector<ForestEdge> dependency_forest(const DependencyStats& stats, std::vector<int>& roots) {
    const int n = stats.n_vars;
    struct Pair {
        double chi2;
        int i, j;
    };
    std::vector<Pair> pairs;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (stats.significant_at(i, j)) pairs.push_back({stats.chi2_at(i, j), i, j});
        }
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.chi2 != b.chi2) return a.chi2 > b.chi2;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });

    std::vector<int> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        return parent[static_cast<std::size_t>(x)] == x
                   ? x
                   : parent[static_cast<std::size_t>(x)] = find(parent[static_cast<std::size_t>(x)]);
    };
    std::vector<std::vector<int>> adjacency(static_cast<std::size_t>(n));
    for (const Pair& p : pairs) {
        if (find(p.i) == find(p.j)) continue;
        parent[static_cast<std::size_t>(find(p.i))] = find(p.j);
        adjacency[static_cast<std::size_t>(p.i)].push_back(p.j);
        adjacency[static_cast<std::size_t>(p.j)].push_back(p.i);
    }

    // lowest index of each tree acts as the root
    std::map<int, int> tree_root;
    for (int v = 0; v < n; ++v) {
        int r = find(v);
        if (!tree_root.count(r)) tree_root[r] = v;
    }
    roots.clear();
    for (auto& [_, low] : tree_root) roots.push_back(low);

    std::vector<ForestEdge> edges;
    std::vector<bool> visited(static_cast<std::size_t>(n), false);
    for (int root : roots) {
        std::vector<int> frontier{root};
        visited[static_cast<std::size_t>(root)] = true;
        while (!frontier.empty()) {
            int v = frontier.front();
            frontier.erase(frontier.begin());
            for (int w : adjacency[static_cast<std::size_t>(v)]) {
                if (visited[static_cast<std::size_t>(w)]) continue;
                visited[static_cast<std::size_t>(w)] = true;
                edges.push_back({v, w});
                frontier.push_back(w);
            }
        }
    }
    return edges;
}

/// p(child | parent = value) from the model when the edge matches the
/// child's neighbor, otherwise derived from the pair's joint table.
std::vector<double> edge_conditional(const ProbabilityModel& model, const DependencyStats& stats,
                                     const ProblemSpec& spec, int parent, int child,
                                     int parent_value) {
    const VariableModel& cm = model.vars[static_cast<std::size_t>(child)];
    if (cm.neighbor == parent) {
        return cm.conditional[static_cast<std::size_t>(parent_value)];
    }
    int i = std::min(parent, child), j = std::max(parent, child);
    auto it = stats.pair_joint.find({i, j});
    if (it == stats.pair_joint.end()) return cm.marginal;
    const int dj = spec.variables().at(j).domain_size;
    const int dc = spec.variables().at(child).domain_size;
    std::vector<double> row(static_cast<std::size_t>(dc), 0.0);
    double total = 0.0;
    for (int a = 0; a < dc; ++a) {
        double p = (child == j) ? it->second[static_cast<std::size_t>(parent_value) * dj + a]
                                : it->second[static_cast<std::size_t>(a) * dj + parent_value];
        row[static_cast<std::size_t>(a)] = p;
        total += p;
    }
    if (total <= 0.0) return cm.marginal;
    for (double& p : row) p /= total;
    return row;
}

}  // namespace

Solution bmda_ancestral_sample(const ProbabilityModel& model, const DependencyStats& stats,
                               const ProblemSpec& spec, std::uint64_t seed,
                               const RepairOptions& repair_options) {
    Rng rng(seed);
    Solution s;
    s.values.assign(static_cast<std::size_t>(spec.variables().size()), 0);
    std::vector<int> roots;
    std::vector<ForestEdge> edges = dependency_forest(stats, roots);
    for (int root : roots) {
        s.values[static_cast<std::size_t>(root)] =
            sample_row(rng, model.vars[static_cast<std::size_t>(root)].marginal);
    }
    for (const ForestEdge& e : edges) {  // parents precede children
        int pv = s.values[static_cast<std::size_t>(e.parent)];
        std::vector<double> row = edge_conditional(model, stats, spec, e.parent, e.child, pv);
        s.values[static_cast<std::size_t>(e.child)] = sample_row(rng, row);
    }
    return repair(spec, s, rng.next_u64(), repair_options).repaired;
}

Population ga_step(const ProblemSpec& spec, const Population& pop, const AlgoConfig& cfg,
                   std::uint64_t seed) {
    if (pop.fitnesses.size() != pop.solutions.size()) {
        throw std::invalid_argument("population must be evaluated before ga_step");
    }
    Rng rng(seed);
    const int n = pop.size();
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return pop.fitnesses[static_cast<std::size_t>(a)] < pop.fitnesses[static_cast<std::size_t>(b)];
    });
    const int pool_size = std::max(1, static_cast<int>(std::ceil(cfg.ga_tournament_truncation * n)));
    auto tournament = [&]() -> const Solution& {
        int a = order[rng.next_below(static_cast<std::uint64_t>(pool_size))];
        int b = order[rng.next_below(static_cast<std::uint64_t>(pool_size))];
        double fa = pop.fitnesses[static_cast<std::size_t>(a)];
        double fb = pop.fitnesses[static_cast<std::size_t>(b)];
        int winner = (fb < fa || (fa == fb && b < a)) ? b : a;
        return pop.solutions[static_cast<std::size_t>(winner)];
    };

    const int genes = spec.variables().size();
    Population next;
    next.generation = pop.generation + 1;
    while (static_cast<int>(next.solutions.size()) < n) {
        Solution child1 = tournament();
        Solution child2 = tournament();
        if (genes >= 2 && rng.next_double() < cfg.ga_crossover_rate) {
            int cut = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(genes - 1)));
            for (int g = cut; g < genes; ++g) {
                std::swap(child1.values[static_cast<std::size_t>(g)],
                          child2.values[static_cast<std::size_t>(g)]);
            }
        }
        for (Solution* child : {&child1, &child2}) {
            for (int g = 0; g < genes; ++g) {
                if (rng.next_double() < cfg.ga_mutation_rate) {
                    child->values[static_cast<std::size_t>(g)] =
                        rng.next_int(0, spec.variables().at(g).domain_size - 1);
                }
            }
            *child = repair(spec, *child, rng.next_u64(), cfg.repair).repaired;
            if (static_cast<int>(next.solutions.size()) < n) {
                next.solutions.push_back(std::move(*child));
            }
        }
    }
    return next;
}

std::uint64_t hash_spec(const ProblemSpec& spec) {
    std::string dump = spec_to_json(spec).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : dump) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

RunHistory run(const ProblemSpec& spec, const AlgoConfig& cfg, const Evaluator& evaluator) {
    cfg.validate();
    RunHistory history;
    history.config = cfg;
    history.spec_hash = hash_spec(spec);
    history.best_fitness = std::numeric_limits<double>::infinity();

    EvalContext ctx;
    const auto start = std::chrono::steady_clock::now();
    auto elapsed_ms = [&] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    };
    auto update_best = [&](const Population& pop) {
        for (int i = 0; i < pop.size(); ++i) {
            if (pop.fitnesses[static_cast<std::size_t>(i)] < history.best_fitness) {
                history.best_fitness = pop.fitnesses[static_cast<std::size_t>(i)];
                history.best_solution = pop.solutions[static_cast<std::size_t>(i)];
            }
        }
    };
    auto record = [&](int iteration, const Population& pop) {
        double mean = 0.0;
        for (double f : pop.fitnesses) mean += f;
        mean /= static_cast<double>(pop.size());
        history.records.push_back({iteration, history.best_fitness, mean, ctx.evaluations,
                                   elapsed_ms()});
    };

    Population pop;
    try {
        pop = initialize_population(spec, cfg.population_size, cfg.seed, cfg.repair);
        evaluate_population(spec, pop, evaluator, ctx, cfg.cache_fitness, cfg.jobs);
    } catch (const std::exception& e) {
        history.aborted = true;
        history.abort_reason = e.what();
        return history;
    }
    update_best(pop);
    record(0, pop);

    int stagnant = 0;
    for (int iteration = 1; iteration <= cfg.iteration_budget; ++iteration) {
        if (cfg.target_fitness && history.best_fitness <= *cfg.target_fitness) break;
        if (cfg.stagnation_window && stagnant >= *cfg.stagnation_window) break;

        Population next;
        next.generation = iteration;
        try {
            if (cfg.algorithm == Algorithm::Ga) {
                next = ga_step(spec, pop, cfg, Rng::derive(cfg.seed, static_cast<std::uint64_t>(iteration)));
            } else {
                Population selected = select_truncation(pop, cfg.truncation_rate);
                auto [model, stats] = estimate_model(selected.solutions, spec, cfg.confidence_level);
                if (!history.stats_snapshots.empty()) {
                    stats.accumulate_from(history.stats_snapshots.back());
                }
                for (int k = 0; k < cfg.population_size; ++k) {
                    std::uint64_t sample_seed =
                        Rng::derive(cfg.seed, static_cast<std::uint64_t>(iteration),
                                    static_cast<std::uint64_t>(k));
                    next.solutions.push_back(
                        cfg.algorithm == Algorithm::BmdaGs
                            ? gibbs_sample(model, spec, sample_seed, cfg.gibbs_sweep_multiplier,
                                           cfg.repair)
                            : bmda_ancestral_sample(model, stats, spec, sample_seed, cfg.repair));
                }
                history.model_snapshots.push_back(std::move(model));
                history.stats_snapshots.push_back(std::move(stats));
            }
            if (cfg.elitism) {
                next.solutions[0] = history.best_solution;  // one elite slot
            }
            evaluate_population(spec, next, evaluator, ctx, cfg.cache_fitness, cfg.jobs);
        } catch (const std::exception& e) {
            history.aborted = true;
            history.abort_reason = e.what();
            break;
        }
        double previous_best = history.best_fitness;
        pop = std::move(next);
        update_best(pop);
        record(iteration, pop);
        stagnant = history.best_fitness < previous_best ? 0 : stagnant + 1;
    }

    if (!history.stats_snapshots.empty()) history.final_stats = history.stats_snapshots.back();
    return history;
}

}  // namespace confopt::eda
