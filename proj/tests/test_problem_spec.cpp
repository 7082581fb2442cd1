#include <doctest.h>

#include <numeric>
#include <set>

#include "confopt/problem_spec.hpp"
#include "confopt/rng.hpp"
#include "test_helpers.hpp"

using namespace confopt;
using namespace confopt::testing;

namespace {

Solution zero_solution(const ProblemSpec& spec) {
    Solution s;
    s.values.assign(static_cast<std::size_t>(spec.variables().size()), 0);
    return s;
}

void set_joint(const ProblemSpec& spec, Solution& s, int joint_1based, int code) {
    s.values[static_cast<std::size_t>(spec.variables().flat_of_joint(joint_1based - 1))] = code;
}

void set_comp(const ProblemSpec& spec, Solution& s, int i_1based, int j_1based, int code) {
    auto flat = spec.variables().flat_of_pair(i_1based - 1, j_1based - 1);
    REQUIRE(flat.has_value());
    s.values[static_cast<std::size_t>(*flat)] = code;
}

bool has_violation(const std::vector<Violation>& vs, ViolationKind kind) {
    for (const auto& v : vs) {
        if (v.kind == kind) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("variable index counts") {
    SUBCASE("suspension layout gives 8 joints + 21 components") {
        ProblemSpec spec = suspension_spec();
        CHECK(spec.variables().size() == 29);
        CHECK(spec.variables().joint_count() == 8);
        CHECK(spec.variables().component_count() == 21);
    }
    SUBCASE("single pair") {
        nlohmann::json raw = {{"n_joints", 2}, {"joint_types", 1}, {"component_types", 1}};
        ProblemSpec spec = build_spec(raw);
        CHECK(spec.variables().size() == 3);
    }
    SUBCASE("one envo holding every joint excludes all pairs") {
        ProblemSpec spec = free_spec(3);
        CHECK(spec.variables().size() == 3);
        CHECK(spec.variables().component_count() == 0);
    }
}

TEST_CASE("variable index ordering and exclusions") {
    ProblemSpec spec = suspension_spec();
    const VariableIndex& index = spec.variables();
    // joints first, ascending
    for (int j = 0; j < 8; ++j) {
        CHECK(index.at(j).kind == VarKind::Joint);
        CHECK(index.at(j).joint == j);
    }
    // components in lexicographic pair order
    int prev_i = -1, prev_j = -1;
    for (int f = 8; f < index.size(); ++f) {
        const Variable& v = index.at(f);
        CHECK(v.kind == VarKind::Component);
        CHECK(v.pair_i < v.pair_j);
        bool ordered = v.pair_i > prev_i || (v.pair_i == prev_i && v.pair_j > prev_j);
        CHECK(ordered);
        prev_i = v.pair_i;
        prev_j = v.pair_j;
    }
    // same-envo pairs are not variables
    CHECK_FALSE(spec.variables().flat_of_pair(0, 1).has_value());  // chassis-chassis
    CHECK_FALSE(spec.variables().flat_of_pair(4, 5).has_value());  // wheel-wheel
    CHECK(spec.variables().flat_of_pair(0, 4).has_value());        // chassis-wheel
    // joint domains are 0..V, component domains 0..W
    CHECK(index.at(0).domain_size == 3);
    CHECK(index.at(8).domain_size == 3);
}

TEST_CASE("build_spec rejects malformed input") {
    CHECK_THROWS_AS(build_spec({{"n_joints", 0}, {"joint_types", 1}, {"component_types", 1}}),
                    SpecError);
    CHECK_THROWS_AS(build_spec({{"n_joints", 3},
                                {"joint_types", 1},
                                {"component_types", 1},
                                {"envos", {{"a", {1, 2}}, {"b", {2, 3}}}}}),
                    SpecError);  // overlapping envos
    CHECK_THROWS_AS(build_spec({{"n_joints", 3},
                                {"joint_types", 2},
                                {"component_types", 2},
                                {"type_rules", {{3, 1}}}}),
                    SpecError);  // joint code out of range
    CHECK_THROWS_AS(build_spec({{"n_joints", 3},
                                {"joint_types", 2},
                                {"component_types", 2},
                                {"envos", {{"a", {4}}}}}),
                    SpecError);  // envo member out of range
}

TEST_CASE("feasibility oracle clause by clause") {
    // N=3, joints 1-2 in one envo, joint 3 free
    nlohmann::json raw = {{"n_joints", 3},
                          {"joint_types", 2},
                          {"component_types", 2},
                          {"envos", {{"base", {1, 2}}}}};
    ProblemSpec spec = build_spec(raw);

    SUBCASE("triangle through the free joint is feasible") {
        Solution s = zero_solution(spec);
        set_joint(spec, s, 1, 1);
        set_joint(spec, s, 2, 1);
        set_joint(spec, s, 3, 1);
        set_comp(spec, s, 1, 3, 1);
        set_comp(spec, s, 2, 3, 1);
        CHECK(is_feasible(spec, s).empty());
    }
    SUBCASE("free joint with a single component is under-connected") {
        Solution s = zero_solution(spec);
        set_joint(spec, s, 1, 1);
        set_joint(spec, s, 3, 1);
        set_comp(spec, s, 1, 3, 1);
        auto violations = is_feasible(spec, s);
        CHECK(has_violation(violations, ViolationKind::UnderConnectedJoint));
    }
    SUBCASE("component on an absent joint") {
        Solution s = zero_solution(spec);
        set_joint(spec, s, 1, 1);
        set_comp(spec, s, 1, 3, 1);  // joint 3 has code 0
        auto violations = is_feasible(spec, s);
        CHECK(has_violation(violations, ViolationKind::InactiveJointWithComponents));
    }
    SUBCASE("empty assembly with a single envo is feasible") {
        CHECK(is_feasible(spec, zero_solution(spec)).empty());
    }
}

TEST_CASE("two envos with no components are disconnected") {
    ProblemSpec spec = two_anchor_spec(2);
    Solution s = zero_solution(spec);
    auto violations = is_feasible(spec, s);
    CHECK(violations.size() == 1);
    CHECK(violations.front().kind == ViolationKind::Disconnected);

    set_joint(spec, s, 1, 1);
    set_joint(spec, s, 2, 1);
    set_comp(spec, s, 1, 2, 1);
    CHECK(is_feasible(spec, s).empty());
}

TEST_CASE("type rules bind joint and component types both ways") {
    ProblemSpec spec = suspension_spec();  // rule: spherical (2) <-> shock (2)
    Solution s = zero_solution(spec);
    set_joint(spec, s, 1, 1);
    set_joint(spec, s, 5, 1);
    set_comp(spec, s, 1, 5, 1);  // beam between chassis and wheel
    REQUIRE(is_feasible(spec, s).empty());

    SUBCASE("shock forces spherical") {
        set_comp(spec, s, 1, 5, 2);
        auto violations = is_feasible(spec, s);
        CHECK(has_violation(violations, ViolationKind::TypeRuleBroken));
        set_joint(spec, s, 1, 2);
        set_joint(spec, s, 5, 2);
        CHECK(is_feasible(spec, s).empty());
    }
    SUBCASE("spherical without a shock breaks the rule") {
        set_joint(spec, s, 1, 2);
        auto violations = is_feasible(spec, s);
        CHECK(has_violation(violations, ViolationKind::TypeRuleBroken));
    }
}

TEST_CASE("active_component_count") {
    ProblemSpec spec = suspension_spec();
    Solution s = zero_solution(spec);
    CHECK(active_component_count(spec, s) == 0);

    set_comp(spec, s, 1, 7, 1);
    set_comp(spec, s, 5, 7, 1);
    set_comp(spec, s, 1, 5, 1);
    CHECK(active_component_count(spec, s) == 3);

    set_comp(spec, s, 2, 8, 2);  // counting is type-agnostic
    CHECK(active_component_count(spec, s) == 4);
}

TEST_CASE("connectivity oracle agrees with an independent union-find check") {
    // property: 1000 random assemblies, BFS verdict == union-find verdict
    Rng rng(20240817);
    for (int trial = 0; trial < 1000; ++trial) {
        int n = 2 + static_cast<int>(rng.next_below(6));
        nlohmann::json envos = nlohmann::json::object();
        int n_envos = static_cast<int>(rng.next_below(3));
        std::vector<int> assignment(static_cast<std::size_t>(n), -1);
        for (int j = 0; j < n && n_envos > 0; ++j) {
            int pick = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_envos + 1)));
            if (pick < n_envos) assignment[static_cast<std::size_t>(j)] = pick;
        }
        for (int e = 0; e < n_envos; ++e) {
            std::vector<int> members;
            for (int j = 0; j < n; ++j) {
                if (assignment[static_cast<std::size_t>(j)] == e) members.push_back(j + 1);
            }
            if (!members.empty()) envos["e" + std::to_string(e)] = members;
        }
        nlohmann::json raw = {{"n_joints", n}, {"joint_types", 2}, {"component_types", 2}};
        if (!envos.empty()) raw["envos"] = envos;
        ProblemSpec spec = build_spec(raw);
        Solution s = random_solution(spec, rng);

        // independent union-find over the same vertex model
        int n_groups = static_cast<int>(spec.envos.size());
        std::vector<int> vertex(static_cast<std::size_t>(n));
        int total = n_groups;
        for (int j = 0; j < n; ++j) {
            vertex[static_cast<std::size_t>(j)] = spec.in_envo(j) ? spec.envo_of(j) : total++;
        }
        std::vector<int> parent(static_cast<std::size_t>(total));
        std::iota(parent.begin(), parent.end(), 0);
        std::function<int(int)> find = [&](int x) {
            return parent[static_cast<std::size_t>(x)] == x
                       ? x
                       : parent[static_cast<std::size_t>(x)] = find(parent[static_cast<std::size_t>(x)]);
        };
        for (const Variable& v : spec.variables().all()) {
            if (v.kind != VarKind::Component) continue;
            if (s.values[static_cast<std::size_t>(v.flat_index)] == 0) continue;
            parent[static_cast<std::size_t>(find(vertex[static_cast<std::size_t>(v.pair_i)]))] =
                find(vertex[static_cast<std::size_t>(v.pair_j)]);
        }
        std::set<int> roots;
        for (int e = 0; e < n_groups; ++e) roots.insert(find(e));
        for (int j = 0; j < n; ++j) {
            if (s.joint(spec, j) != 0) roots.insert(find(vertex[static_cast<std::size_t>(j)]));
        }
        bool expected = roots.size() <= 1;
        CHECK(connectivity_ok(spec, s) == expected);
    }
}

TEST_CASE("oracle determinism") {
    ProblemSpec spec = suspension_spec();
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        Solution s = random_solution(spec, rng);
        auto first = is_feasible(spec, s);
        auto second = is_feasible(spec, s);
        CHECK(first.size() == second.size());
        CHECK(first.empty() == second.empty());
    }
}
