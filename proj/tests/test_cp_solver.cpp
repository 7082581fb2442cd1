#include <doctest.h>

#include <vector>

#include "confopt/cp_solver.hpp"
#include "confopt/rng.hpp"

using namespace confopt;
using namespace confopt::cp;

namespace {

/// Test-local naive evaluator, independent of the solver's satisfied() path.
bool naive_holds(const Constraint& c, const std::vector<int>& a) {
    switch (c.kind) {
        case ConstraintKind::FixValue:
            return a[static_cast<std::size_t>(c.fix_var)] == c.fix_value;
        case ConstraintKind::SumGreaterThan: {
            if (c.guard_var >= 0 && a[static_cast<std::size_t>(c.guard_var)] == 0) return true;
            long long sum = 0;
            for (int v : c.sum_vars) {
                int value = a[static_cast<std::size_t>(v)];
                sum += c.count_nonzero ? (value != 0 ? 1 : 0) : value;
            }
            return sum > c.bound;
        }
        case ConstraintKind::ConditionalEquivalence: {
            bool any = false;
            for (const auto& clause : c.clauses) {
                bool all = true;
                for (const Literal& lit : clause) {
                    all = all && domain_contains(lit.set, a[static_cast<std::size_t>(lit.var)]);
                }
                if (all) any = true;
            }
            bool t = domain_contains(c.target_set, a[static_cast<std::size_t>(c.target_var)]);
            return c.mode == EquivalenceMode::Iff ? t == any : (!any || t);
        }
        case ConstraintKind::CountEquivalence: {
            int hits = 0;
            for (int v : c.ce_component_vars) {
                if (a[static_cast<std::size_t>(v)] == c.ce_component_type) ++hits;
            }
            return (a[static_cast<std::size_t>(c.ce_joint_var)] == c.ce_joint_type) == (hits > 0);
        }
        case ConstraintKind::PathMatrixConnectivity:
            return true;  // not exercised by the random-problem generator
    }
    return true;
}

bool naive_all_hold(const Problem& p, const std::vector<int>& a) {
    for (const Constraint& c : p.constraints()) {
        if (!naive_holds(c, a)) return false;
    }
    return true;
}

/// Brute-force enumeration over initial domains.
long long brute_force_count(const Problem& p, std::vector<int>* first_solution = nullptr) {
    std::vector<std::vector<int>> domains;
    for (int v = 0; v < p.var_count(); ++v) {
        std::vector<int> values;
        DomainMask m = p.initial_domain(v);
        for (int code = 0; code <= kMaxDomainValue; ++code) {
            if (domain_contains(m, code)) values.push_back(code);
        }
        domains.push_back(values);
    }
    std::vector<std::size_t> cursor(domains.size(), 0);
    long long count = 0;
    while (true) {
        std::vector<int> a(domains.size());
        for (std::size_t i = 0; i < domains.size(); ++i) a[i] = domains[i][cursor[i]];
        if (naive_all_hold(p, a)) {
            ++count;
            if (first_solution && count == 1) *first_solution = a;
        }
        std::size_t pos = 0;
        for (; pos < domains.size(); ++pos) {
            if (++cursor[pos] < domains[pos].size()) break;
            cursor[pos] = 0;
        }
        if (pos == domains.size()) break;
    }
    return count;
}

}  // namespace

TEST_CASE("variable registration") {
    Problem p;
    CHECK(p.add_variable({0, 1, 2}) == 0);
    CHECK(p.add_variable({0, 1}) == 1);
    CHECK_THROWS_AS(p.add_variable(std::vector<int>{}), CpError);
}

TEST_CASE("fix value applies at registration") {
    Problem p;
    int z1 = p.add_variable({0, 1, 2});
    p.add_constraint(fix_value(z1, 0));
    CHECK(p.initial_domain(z1) == mask_of(0));
}

TEST_CASE("constraint validation") {
    Problem p;
    int v = p.add_variable({0, 1});
    CHECK_THROWS_AS(p.add_constraint(conditional_equivalence(v, mask_of(1), {})), CpError);
    CHECK_THROWS_AS(p.add_constraint(sum_greater_than({v, 99}, 0)), CpError);  // unknown handle
    CHECK_THROWS_AS(p.add_constraint(sum_greater_than({}, 0)), CpError);
}

TEST_CASE("min and max value search hand traces") {
    SUBCASE("min value assigns 0 and propagation forces the partner to 1") {
        Problem p;
        int a = p.add_variable({0, 1});
        int b = p.add_variable({0, 1});
        p.add_constraint(sum_greater_than({a, b}, 0));
        SearchStrategy strategy;  // min value, declaration order
        SolveResult r = p.solve(strategy);
        REQUIRE(r.status == SolveStatus::Sat);
        CHECK(r.assignment == std::vector<int>{0, 1});
    }
    SUBCASE("max value keeps both at 1") {
        Problem p;
        int a = p.add_variable({0, 1});
        int b = p.add_variable({0, 1});
        p.add_constraint(sum_greater_than({a, b}, 0));
        SearchStrategy strategy;
        strategy.value_order = ValueOrder::AssignMaxValue;
        SolveResult r = p.solve(strategy);
        REQUIRE(r.status == SolveStatus::Sat);
        CHECK(r.assignment == std::vector<int>{1, 1});
    }
    SUBCASE("unsatisfiable single variable") {
        Problem p;
        int a = p.add_variable({0});
        p.add_constraint(sum_greater_than({a}, 0));
        SearchStrategy strategy;
        CHECK(p.solve(strategy).status == SolveStatus::Unsat);
    }
}

TEST_CASE("count_solutions basics") {
    Problem p;
    int a = p.add_variable({0, 1});
    int b = p.add_variable({0, 1});
    CHECK(p.count_solutions() == 4);
    p.add_constraint(sum_greater_than({a, b}, 0));
    CHECK(p.count_solutions() == 3);  // excludes (0, 0)
    CHECK(p.count_solutions(2) == 2);
}

TEST_CASE("registered sum constraint holds in every solution") {
    Problem p;
    int z1 = p.add_variable({0, 1, 2});
    int z2 = p.add_variable({0, 1, 2});
    p.add_constraint(sum_greater_than({z1, z2}, 1));
    SearchStrategy strategy;
    strategy.value_order = ValueOrder::AssignRandomValue;
    strategy.rng_seed = 99;
    SolveResult r = p.solve(strategy);
    REQUIRE(r.status == SolveStatus::Sat);
    CHECK(r.assignment[0] + r.assignment[1] > 1);
    CHECK(p.count_solutions() == brute_force_count(p));
}

TEST_CASE("random strategies require a seed") {
    Problem p;
    p.add_variable({0, 1});
    SearchStrategy strategy;
    strategy.value_order = ValueOrder::AssignRandomValue;
    CHECK_THROWS_AS(p.solve(strategy), CpError);
}

TEST_CASE("node budget") {
    Problem p;
    for (int i = 0; i < 4; ++i) p.add_variable({0, 1});
    SearchStrategy strategy;
    SolveResult r = p.solve(strategy, 0);
    CHECK(r.status == SolveStatus::BudgetExhausted);
    SolveResult full = p.solve(strategy);
    CHECK(full.status == SolveStatus::Sat);
}

TEST_CASE("guarded sums ignore inactive guards") {
    Problem p;
    int guard = p.add_variable({0, 1});
    int a = p.add_variable({0});
    p.add_constraint(sum_greater_than({a}, 0, false, guard));
    // the sum cannot exceed 0, so the guard must collapse to 0
    SearchStrategy strategy;
    strategy.value_order = ValueOrder::AssignMaxValue;
    SolveResult r = p.solve(strategy);
    REQUIRE(r.status == SolveStatus::Sat);
    CHECK(r.assignment[0] == 0);
}

TEST_CASE("randomized problems: soundness, completeness, counting") {
    // property suite against the in-test brute-force evaluator
    Rng rng(424242);
    for (int trial = 0; trial < 300; ++trial) {
        Problem p;
        int n = 3 + static_cast<int>(rng.next_below(3));
        std::vector<int> vars;
        for (int v = 0; v < n; ++v) {
            int domain = 2 + static_cast<int>(rng.next_below(2));
            std::vector<int> values;
            for (int code = 0; code < domain; ++code) values.push_back(code);
            vars.push_back(p.add_variable(values));
        }
        int n_constraints = 1 + static_cast<int>(rng.next_below(3));
        for (int c = 0; c < n_constraints; ++c) {
            switch (rng.next_below(3)) {
                case 0: {
                    std::vector<int> scope;
                    for (int v : vars) {
                        if (rng.next_below(2)) scope.push_back(v);
                    }
                    if (scope.empty()) scope.push_back(vars[0]);
                    bool count = rng.next_below(2) != 0;
                    long long bound = static_cast<long long>(rng.next_below(3));
                    int guard = rng.next_below(2) ? vars[rng.next_below(vars.size())] : -1;
                    p.add_constraint(sum_greater_than(scope, bound, count, guard));
                    break;
                }
                case 1: {
                    int target = vars[rng.next_below(vars.size())];
                    std::vector<std::vector<Literal>> clauses;
                    int n_clauses = 1 + static_cast<int>(rng.next_below(2));
                    for (int k = 0; k < n_clauses; ++k) {
                        std::vector<Literal> clause;
                        int len = 1 + static_cast<int>(rng.next_below(2));
                        for (int l = 0; l < len; ++l) {
                            int v = vars[rng.next_below(vars.size())];
                            DomainMask set = mask_of(static_cast<int>(rng.next_below(2)));
                            clause.push_back({v, set});
                        }
                        clauses.push_back(clause);
                    }
                    auto mode = rng.next_below(2) ? EquivalenceMode::Iff : EquivalenceMode::ImpliesOnly;
                    p.add_constraint(conditional_equivalence(target, mask_of(1), clauses, mode));
                    break;
                }
                default: {
                    int joint = vars[rng.next_below(vars.size())];
                    std::vector<int> comps;
                    for (int v : vars) {
                        if (v != joint && rng.next_below(2)) comps.push_back(v);
                    }
                    if (comps.empty()) comps.push_back(vars[(joint + 1) % n]);
                    p.add_constraint(count_equivalence(joint, 1, comps, 1));
                    break;
                }
            }
        }

        long long expected = brute_force_count(p);
        CHECK(p.count_solutions() == expected);

        SearchStrategy strategy;
        strategy.value_order = static_cast<ValueOrder>(rng.next_below(3));
        strategy.variable_order = static_cast<VariableOrder>(rng.next_below(2));
        strategy.rng_seed = rng.next_u64();
        SolveResult r = p.solve(strategy);
        if (expected > 0) {
            REQUIRE(r.status == SolveStatus::Sat);
            CHECK(naive_all_hold(p, r.assignment));
        } else {
            CHECK(r.status == SolveStatus::Unsat);
        }

        // identical strategy and seed reproduce the assignment bit for bit
        SolveResult again = p.solve(strategy);
        CHECK(again.status == r.status);
        CHECK(again.assignment == r.assignment);
        CHECK(again.nodes_explored == r.nodes_explored);
    }
}
