#pragma once

#include <functional>
#include <vector>

#include "confopt/problem_spec.hpp"

namespace confopt::testing {

/// The suspension problem structure (no fitness block needed for most tests).
inline ProblemSpec suspension_spec() {
    nlohmann::json raw = {
        {"n_joints", 8},
        {"joint_types", 2},
        {"component_types", 2},
        {"envos", {{"chassis", {1, 2, 3, 4}}, {"wheel", {5, 6}}}},
        {"type_rules", {{2, 2}}},
    };
    return build_spec(raw);
}

/// N joints, two singleton envos on joints 1 and 2, the rest free.
inline ProblemSpec two_anchor_spec(int n_joints, int joint_types = 2, int component_types = 2) {
    nlohmann::json raw = {
        {"n_joints", n_joints},
        {"joint_types", joint_types},
        {"component_types", component_types},
        {"envos", {{"left", {1}}, {"right", {2}}}},
    };
    return build_spec(raw);
}

/// Unconstrained spec: every joint in one envo, so all assignments are
/// feasible and only the N joint variables remain.
inline ProblemSpec free_spec(int n_vars, int joint_types = 1) {
    std::vector<int> members;
    for (int i = 1; i <= n_vars; ++i) members.push_back(i);
    nlohmann::json raw = {
        {"n_joints", n_vars},
        {"joint_types", joint_types},
        {"component_types", 1},
        {"envos", {{"all", members}}},
    };
    return build_spec(raw);
}

/// Enumerates every assignment of the spec's variables.
inline void for_each_assignment(const ProblemSpec& spec, const std::function<void(const Solution&)>& fn) {
    Solution s;
    s.values.assign(static_cast<std::size_t>(spec.variables().size()), 0);
    while (true) {
        fn(s);
        int pos = 0;
        for (; pos < spec.variables().size(); ++pos) {
            int limit = spec.variables().at(pos).domain_size - 1;
            if (s.values[static_cast<std::size_t>(pos)] < limit) {
                ++s.values[static_cast<std::size_t>(pos)];
                break;
            }
            s.values[static_cast<std::size_t>(pos)] = 0;
        }
        if (pos == spec.variables().size()) return;
    }
}

/// Brute-force count of oracle-feasible assignments.
inline long long count_feasible_by_enumeration(const ProblemSpec& spec) {
    long long count = 0;
    for_each_assignment(spec, [&](const Solution& s) {
        if (is_feasible(spec, s).empty()) ++count;
    });
    return count;
}

}  // namespace confopt::testing
