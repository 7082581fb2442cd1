#include <doctest.h>

#include <set>

#include "confopt/repair.hpp"
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

std::set<int> nonzero_components(const ProblemSpec& spec, const Solution& s) {
    std::set<int> out;
    for (const Variable& v : spec.variables().all()) {
        if (v.kind == VarKind::Component && s.values[static_cast<std::size_t>(v.flat_index)] != 0) {
            out.insert(v.flat_index);
        }
    }
    return out;
}

}  // namespace

TEST_CASE("assembly model over the suspension spec") {
    ProblemSpec spec = suspension_spec();
    AssemblyModel model = build_assembly_model(spec);
    CHECK(model.problem.var_count() == 29);
    int count_equivs = 0;
    for (const auto& c : model.problem.constraints()) {
        if (c.kind == cp::ConstraintKind::CountEquivalence) ++count_equivs;
    }
    CHECK(count_equivs == 8);  // the one type rule, posted per joint
}

TEST_CASE("assembly model without type rules posts no count equivalences") {
    ProblemSpec spec = two_anchor_spec(4);
    AssemblyModel model = build_assembly_model(spec);
    for (const auto& c : model.problem.constraints()) {
        CHECK(c.kind != cp::ConstraintKind::CountEquivalence);
    }
}

TEST_CASE("lone pair cannot support an active joint") {
    // N=2, no envos: the only feasible assignment is the empty assembly
    nlohmann::json raw = {{"n_joints", 2}, {"joint_types", 2}, {"component_types", 2}};
    ProblemSpec spec = build_spec(raw);
    AssemblyModel model = build_assembly_model(spec);
    long long cp_count = model.problem.count_solutions();
    CHECK(cp_count == 1);
    CHECK(cp_count == count_feasible_by_enumeration(spec));
}

TEST_CASE("cp model solution set equals the oracle's on small assemblies") {
    SUBCASE("two anchors, two free joints") {
        ProblemSpec spec = two_anchor_spec(4);
        AssemblyModel model = build_assembly_model(spec);
        CHECK(model.problem.count_solutions() == count_feasible_by_enumeration(spec));
    }
    SUBCASE("one envo of two plus one free joint, with a type rule") {
        nlohmann::json raw = {{"n_joints", 3},
                              {"joint_types", 2},
                              {"component_types", 2},
                              {"envos", {{"base", {1, 2}}}},
                              {"type_rules", {{2, 2}}}};
        ProblemSpec spec = build_spec(raw);
        AssemblyModel model = build_assembly_model(spec);
        CHECK(model.problem.count_solutions() == count_feasible_by_enumeration(spec));
    }
}

TEST_CASE("repair removes a dangling component and keeps the rest") {
    ProblemSpec spec = suspension_spec();
    Solution s = zero_solution(spec);
    // triangle chassis(1) - wheel(5) - free joint 7
    set_joint(spec, s, 1, 1);
    set_joint(spec, s, 5, 1);
    set_joint(spec, s, 7, 1);
    set_comp(spec, s, 1, 5, 1);
    set_comp(spec, s, 1, 7, 1);
    set_comp(spec, s, 5, 7, 1);
    // dangling extra component leaves joint 8 under-connected
    set_joint(spec, s, 2, 1);
    set_joint(spec, s, 8, 1);
    set_comp(spec, s, 2, 8, 1);
    REQUIRE_FALSE(is_feasible(spec, s).empty());

    RepairOutcome outcome = repair(spec, s, 1);
    CHECK(outcome.stage_used == RepairStage::RemoveComponents);
    CHECK(is_feasible(spec, outcome.repaired).empty());
    auto flat_28 = spec.variables().flat_of_pair(1, 7);
    CHECK(outcome.repaired.values[static_cast<std::size_t>(*flat_28)] == 0);
    // triangle retained
    std::set<int> kept = nonzero_components(spec, outcome.repaired);
    CHECK(kept == std::set<int>{*spec.variables().flat_of_pair(0, 4),
                                *spec.variables().flat_of_pair(0, 6),
                                *spec.variables().flat_of_pair(4, 6)});
    // the dangling joint is deactivated
    CHECK(outcome.repaired.joint(spec, 7) == 0);
}

TEST_CASE("repair bridges two disconnected clusters by adding components") {
    ProblemSpec spec = suspension_spec();
    Solution s = zero_solution(spec);
    // cluster A: chassis joints 1,2 with free joint 7
    set_joint(spec, s, 1, 1);
    set_joint(spec, s, 2, 1);
    set_joint(spec, s, 7, 1);
    set_comp(spec, s, 1, 7, 1);
    set_comp(spec, s, 2, 7, 1);
    // cluster B: wheel joints 5,6 with free joint 8
    set_joint(spec, s, 5, 1);
    set_joint(spec, s, 6, 1);
    set_joint(spec, s, 8, 1);
    set_comp(spec, s, 5, 8, 1);
    set_comp(spec, s, 6, 8, 1);
    REQUIRE_FALSE(is_feasible(spec, s).empty());

    RepairOutcome outcome = repair(spec, s, 3);
    CHECK(outcome.stage_used == RepairStage::AddComponents);
    CHECK(is_feasible(spec, outcome.repaired).empty());
    // every placed component keeps its exact code
    for (int flat : nonzero_components(spec, s)) {
        CHECK(outcome.repaired.values[static_cast<std::size_t>(flat)] ==
              s.values[static_cast<std::size_t>(flat)]);
    }
    CHECK(nonzero_components(spec, outcome.repaired).size() > nonzero_components(spec, s).size());
}

TEST_CASE("repair leaves a feasible solution unchanged") {
    ProblemSpec spec = suspension_spec();
    Solution s = zero_solution(spec);
    set_joint(spec, s, 1, 1);
    set_joint(spec, s, 5, 1);
    set_comp(spec, s, 1, 5, 1);
    REQUIRE(is_feasible(spec, s).empty());

    RepairOutcome outcome = repair(spec, s, 17);
    CHECK(outcome.stage_used == RepairStage::RemoveComponents);
    CHECK(outcome.repaired == s);
    CHECK(outcome.joints_retyped.empty());
}

TEST_CASE("repair properties on random solutions") {
    ProblemSpec spec = suspension_spec();
    Rng rng(90125);
    for (int trial = 0; trial < 120; ++trial) {
        Solution s = random_solution(spec, rng);
        std::uint64_t seed = rng.next_u64();
        RepairOutcome outcome = repair(spec, s, seed);

        CHECK(is_feasible(spec, outcome.repaired).empty());

        std::set<int> before = nonzero_components(spec, s);
        std::set<int> after = nonzero_components(spec, outcome.repaired);
        if (outcome.stage_used == RepairStage::RemoveComponents) {
            for (int flat : after) {
                CHECK(before.count(flat) == 1);
                CHECK(outcome.repaired.values[static_cast<std::size_t>(flat)] ==
                      s.values[static_cast<std::size_t>(flat)]);
            }
        } else {
            for (int flat : before) {
                CHECK(outcome.repaired.values[static_cast<std::size_t>(flat)] ==
                      s.values[static_cast<std::size_t>(flat)]);
            }
        }

        // determinism and idempotence
        RepairOutcome again = repair(spec, s, seed);
        CHECK(again.repaired == outcome.repaired);
        CHECK(again.stage_used == outcome.stage_used);
        CHECK(again.cp_nodes_explored == outcome.cp_nodes_explored);
        RepairOutcome twice = repair(spec, outcome.repaired, seed);
        CHECK(twice.repaired == outcome.repaired);
    }
}

TEST_CASE("encoding agreement on small specs") {
    SUBCASE("N=4 two anchors, 500 random assignments") {
        ProblemSpec spec = two_anchor_spec(4);
        EncodingAgreementReport report = verify_encodings_agree(spec, 500, 5150);
        CHECK(report.trials == 500);
        CHECK(report.all_agree());
    }
    SUBCASE("all-zero components with two envos: all three verdicts disconnected") {
        ProblemSpec spec = two_anchor_spec(4);
        Solution s = zero_solution(spec);
        CHECK_FALSE(connectivity_ok(spec, s));
        CHECK_FALSE(global_constraint_connected(spec, s));
        CHECK_FALSE(path_matrix_connected(spec, s));
    }
    SUBCASE("clique of beams: all three verdicts connected") {
        ProblemSpec spec = two_anchor_spec(4);
        Solution s = zero_solution(spec);
        for (int j = 1; j <= 4; ++j) set_joint(spec, s, j, 1);
        for (int i = 1; i <= 4; ++i) {
            for (int j = i + 1; j <= 4; ++j) set_comp(spec, s, i, j, 1);
        }
        CHECK(connectivity_ok(spec, s));
        CHECK(global_constraint_connected(spec, s));
        CHECK(path_matrix_connected(spec, s));
    }
    SUBCASE("N > 6 is rejected") {
        ProblemSpec spec = suspension_spec();
        CHECK_THROWS_AS(verify_encodings_agree(spec, 1, 0), SpecError);
    }
}
