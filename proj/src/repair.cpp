#include "confopt/repair.hpp"

#include <algorithm>
#include <map>

#include "confopt/rng.hpp"

namespace confopt {

namespace {

cp::DomainMask nonzero_mask(int domain_size) { return cp::range_mask(1, domain_size - 1); }

cp::DomainMask full_mask(int domain_size) { return cp::range_mask(0, domain_size - 1); }

}  // namespace

Solution AssemblyModel::to_solution(const ProblemSpec& spec, const std::vector<int>& assignment) const {
    Solution s;
    s.values.resize(static_cast<std::size_t>(spec.variables().size()));
    for (int j = 0; j < spec.n_joints; ++j) {
        s.values[static_cast<std::size_t>(j)] =
            assignment[static_cast<std::size_t>(joint_vars[static_cast<std::size_t>(j)])];
    }
    for (std::size_t k = 0; k < comp_vars.size(); ++k) {
        s.values[static_cast<std::size_t>(spec.n_joints) + k] = assignment[static_cast<std::size_t>(comp_vars[k])];
    }
    return s;
}

std::vector<int> AssemblyModel::to_assignment(const ProblemSpec& spec, const Solution& s) const {
    std::vector<int> a(static_cast<std::size_t>(problem.var_count()), 0);
    for (int j = 0; j < spec.n_joints; ++j) {
        a[static_cast<std::size_t>(joint_vars[static_cast<std::size_t>(j)])] = s.joint(spec, j);
    }
    for (std::size_t k = 0; k < comp_vars.size(); ++k) {
        a[static_cast<std::size_t>(comp_vars[k])] =
            s.values[static_cast<std::size_t>(spec.n_joints) + k];
    }
    return a;
}

AssemblyModel build_assembly_model(const ProblemSpec& spec, const RepairOptions& options,
                                   const std::vector<cp::DomainMask>* comp_domains,
                                   const std::vector<cp::DomainMask>* joint_domains) {
    const VariableIndex& index = spec.variables();
    AssemblyModel model;

    // incidence of component variables (VariableIndex order) per joint
    std::vector<std::vector<int>> incident_slots(static_cast<std::size_t>(spec.n_joints));
    for (const Variable& v : index.all()) {
        if (v.kind != VarKind::Component) continue;
        int slot = v.flat_index - spec.n_joints;
        incident_slots[static_cast<std::size_t>(v.pair_i)].push_back(slot);
        incident_slots[static_cast<std::size_t>(v.pair_j)].push_back(slot);
    }

    // component variables are declared first so the search settles the
    // structure before joint codes
    model.comp_vars.reserve(static_cast<std::size_t>(index.component_count()));
    for (int k = 0; k < index.component_count(); ++k) {
        cp::DomainMask d = comp_domains ? (*comp_domains)[static_cast<std::size_t>(k)]
                                        : full_mask(spec.n_component_types + 1);
        model.comp_vars.push_back(model.problem.add_variable_mask(d));
    }
    model.joint_vars.reserve(static_cast<std::size_t>(spec.n_joints));
    for (int j = 0; j < spec.n_joints; ++j) {
        cp::DomainMask d = joint_domains ? (*joint_domains)[static_cast<std::size_t>(j)]
                                         : full_mask(spec.n_joint_types + 1);
        if (incident_slots[static_cast<std::size_t>(j)].empty()) {
            // a rule's component type can never appear here, so its joint type
            // is excluded outright
            for (const TypeRule& rule : spec.type_rules) d &= ~cp::mask_of(rule.joint_type);
        }
        model.joint_vars.push_back(model.problem.add_variable_mask(d));
    }

    cp::ConnectivityParams conn;
    conn.n_joints = spec.n_joints;
    conn.n_envos = static_cast<int>(spec.envos.size());
    conn.joint_vars = model.joint_vars;
    conn.envo_of.resize(static_cast<std::size_t>(spec.n_joints));
    for (int j = 0; j < spec.n_joints; ++j) conn.envo_of[static_cast<std::size_t>(j)] = spec.envo_of(j);
    for (const Variable& v : index.all()) {
        if (v.kind != VarKind::Component) continue;
        int handle = model.comp_vars[static_cast<std::size_t>(v.flat_index - spec.n_joints)];
        conn.components.push_back({handle, v.pair_i, v.pair_j});
    }
    model.problem.add_constraint(cp::path_connectivity(conn));

    const cp::DomainMask joint_active = nonzero_mask(spec.n_joint_types + 1);
    const cp::DomainMask comp_active = nonzero_mask(spec.n_component_types + 1);
    for (int j = 0; j < spec.n_joints; ++j) {
        std::vector<int> inc;
        for (int slot : incident_slots[static_cast<std::size_t>(j)]) {
            inc.push_back(model.comp_vars[static_cast<std::size_t>(slot)]);
        }
        int joint_var = model.joint_vars[static_cast<std::size_t>(j)];
        if (!spec.in_envo(j)) {
            if (inc.empty()) {
                model.problem.add_constraint(cp::fix_value(joint_var, 0));
                continue;
            }
            // an active free joint carries at least two components
            model.problem.add_constraint(
                cp::sum_greater_than(inc, 1, !options.eq22_literal_sum, joint_var));
            // and is active exactly when some component touches it
            std::vector<std::vector<cp::Literal>> clauses;
            for (int h : inc) clauses.push_back({cp::Literal{h, comp_active}});
            model.problem.add_constraint(cp::conditional_equivalence(
                joint_var, joint_active, std::move(clauses), cp::EquivalenceMode::Iff));
        } else if (!inc.empty()) {
            // a component on an envo joint requires the joint to be present
            std::vector<std::vector<cp::Literal>> clauses;
            for (int h : inc) clauses.push_back({cp::Literal{h, comp_active}});
            model.problem.add_constraint(cp::conditional_equivalence(
                joint_var, joint_active, std::move(clauses), cp::EquivalenceMode::ImpliesOnly));
        }
        for (const TypeRule& rule : spec.type_rules) {
            if (inc.empty()) continue;  // handled by the domain restriction above
            model.problem.add_constraint(
                cp::count_equivalence(joint_var, rule.joint_type, inc, rule.component_type));
        }
    }
    return model;
}

namespace {

struct StageResult {
    bool sat = false;
    std::vector<int> comp_values;  // VariableIndex component order
    long long nodes = 0;
};

StageResult run_stage(const ProblemSpec& spec, const RepairOptions& options,
                      const std::vector<cp::DomainMask>& comp_domains, cp::ValueOrder value_order) {
    AssemblyModel model = build_assembly_model(spec, options, &comp_domains);
    cp::SearchStrategy strategy;
    strategy.value_order = value_order;
    cp::SolveResult result = model.problem.solve(strategy);
    StageResult out;
    out.nodes = result.nodes_explored;
    if (result.status != cp::SolveStatus::Sat) return out;
    out.sat = true;
    out.comp_values.reserve(model.comp_vars.size());
    for (int handle : model.comp_vars) {
        out.comp_values.push_back(result.assignment[static_cast<std::size_t>(handle)]);
    }
    return out;
}

/// Deterministic joint retyping once component values are final: honor the
/// type rules, keep the incoming code when it is still consistent, default
/// otherwise.
std::vector<int> retype_joints(const ProblemSpec& spec, const Solution& original,
                               const std::vector<int>& comp_values, const RepairOptions& options) {
    const VariableIndex& index = spec.variables();
    std::vector<int> joints(static_cast<std::size_t>(spec.n_joints), 0);
    for (int j = 0; j < spec.n_joints; ++j) {
        bool has_component = false;
        std::vector<int> required;
        std::vector<int> forbidden;
        for (const TypeRule& rule : spec.type_rules) {
            bool match = false;
            for (const Variable& v : index.all()) {
                if (v.kind != VarKind::Component) continue;
                if (v.pair_i != j && v.pair_j != j) continue;
                if (comp_values[static_cast<std::size_t>(v.flat_index - spec.n_joints)] ==
                    rule.component_type) {
                    match = true;
                    break;
                }
            }
            (match ? required : forbidden).push_back(rule.joint_type);
        }
        for (const Variable& v : index.all()) {
            if (v.kind != VarKind::Component) continue;
            if (v.pair_i != j && v.pair_j != j) continue;
            if (comp_values[static_cast<std::size_t>(v.flat_index - spec.n_joints)] != 0) {
                has_component = true;
                break;
            }
        }
        auto is_forbidden = [&](int code) {
            return std::find(forbidden.begin(), forbidden.end(), code) != forbidden.end();
        };
        int current = original.joint(spec, j);
        if (!required.empty()) {
            joints[static_cast<std::size_t>(j)] = required.front();
        } else if (has_component) {
            if (current != 0 && !is_forbidden(current)) {
                joints[static_cast<std::size_t>(j)] = current;
            } else if (!is_forbidden(options.default_joint_code)) {
                joints[static_cast<std::size_t>(j)] = options.default_joint_code;
            } else {
                int code = 0;
                for (int cand = 1; cand <= spec.n_joint_types; ++cand) {
                    if (!is_forbidden(cand)) {
                        code = cand;
                        break;
                    }
                }
                if (code == 0) throw RepairError("no admissible joint code under the type rules");
                joints[static_cast<std::size_t>(j)] = code;
            }
        } else if (!spec.in_envo(j)) {
            joints[static_cast<std::size_t>(j)] = 0;
        } else {
            joints[static_cast<std::size_t>(j)] = is_forbidden(current) ? 0 : current;
        }
    }
    return joints;
}

}  // namespace

RepairOutcome repair(const ProblemSpec& spec, const Solution& s, std::uint64_t seed,
                     const RepairOptions& options) {
    const VariableIndex& index = spec.variables();
    if (static_cast<int>(s.values.size()) != index.size()) {
        throw RepairError("solution length does not match the spec");
    }
    const int n_comps = index.component_count();
    RepairOutcome outcome;

    // stage 1: remove — zero components stay zero, others may drop to zero
    std::vector<cp::DomainMask> remove_domains(static_cast<std::size_t>(n_comps));
    for (int k = 0; k < n_comps; ++k) {
        int value = s.values[static_cast<std::size_t>(spec.n_joints + k)];
        remove_domains[static_cast<std::size_t>(k)] =
            (value == 0) ? cp::mask_of(0) : (cp::mask_of(0) | cp::mask_of(value));
    }
    StageResult stage = run_stage(spec, options, remove_domains, cp::ValueOrder::AssignMaxValue);
    outcome.cp_nodes_explored += stage.nodes;
    if (stage.sat) {
        outcome.stage_used = RepairStage::RemoveComponents;
    } else {
        // stage 2: add — keep every placed component, offer one random code
        // per empty slot
        Rng rng(Rng::derive(seed, 0x7265706169722032ULL));
        std::vector<cp::DomainMask> add_domains(static_cast<std::size_t>(n_comps));
        for (int k = 0; k < n_comps; ++k) {
            int value = s.values[static_cast<std::size_t>(spec.n_joints + k)];
            if (value != 0) {
                add_domains[static_cast<std::size_t>(k)] = cp::mask_of(value);
            } else {
                int code = rng.next_int(1, spec.n_component_types);
                add_domains[static_cast<std::size_t>(k)] = cp::mask_of(0) | cp::mask_of(code);
            }
        }
        stage = run_stage(spec, options, add_domains, cp::ValueOrder::AssignMinValue);
        outcome.cp_nodes_explored += stage.nodes;
        if (!stage.sat) {
            throw RepairError("RepairFailed: both repair stages are unsatisfiable for this spec");
        }
        outcome.stage_used = RepairStage::AddComponents;
    }

    // stage 3: joints
    std::vector<int> joints = retype_joints(spec, s, stage.comp_values, options);
    outcome.repaired.values.resize(static_cast<std::size_t>(index.size()));
    for (int j = 0; j < spec.n_joints; ++j) {
        outcome.repaired.values[static_cast<std::size_t>(j)] = joints[static_cast<std::size_t>(j)];
        if (joints[static_cast<std::size_t>(j)] != s.joint(spec, j)) {
            outcome.joints_retyped.push_back(index.flat_of_joint(j));
        }
    }
    for (int k = 0; k < n_comps; ++k) {
        outcome.repaired.values[static_cast<std::size_t>(spec.n_joints + k)] =
            stage.comp_values[static_cast<std::size_t>(k)];
    }

    if (!is_feasible(spec, outcome.repaired).empty()) {
        throw RepairError("internal error: repaired solution fails the feasibility oracle");
    }
    return outcome;
}

// ---------------------------------------------------------------------------
// Literal path-matrix encoding (cross-validation only)
// ---------------------------------------------------------------------------

bool global_constraint_connected(const ProblemSpec& spec, const Solution& s) {
    cp::Problem problem;
    const VariableIndex& index = spec.variables();
    // variables in flat order so s.values doubles as the assignment
    for (const Variable& v : index.all()) {
        problem.add_variable_mask(full_mask(v.domain_size));
    }
    cp::ConnectivityParams conn;
    conn.n_joints = spec.n_joints;
    conn.n_envos = static_cast<int>(spec.envos.size());
    conn.envo_of.resize(static_cast<std::size_t>(spec.n_joints));
    for (int j = 0; j < spec.n_joints; ++j) {
        conn.envo_of[static_cast<std::size_t>(j)] = spec.envo_of(j);
        conn.joint_vars.push_back(index.flat_of_joint(j));
    }
    for (const Variable& v : index.all()) {
        if (v.kind == VarKind::Component) conn.components.push_back({v.flat_index, v.pair_i, v.pair_j});
    }
    problem.add_constraint(cp::path_connectivity(conn));
    return problem.check(s.values);
}

bool path_matrix_connected(const ProblemSpec& spec, const Solution& s) {
    const int n = spec.n_joints;
    if (n == 1) return true;
    const int max_k = n - 1;
    cp::Problem problem;
    const VariableIndex& index = spec.variables();

    // component variables fixed to the assignment under test
    std::vector<int> comp_handle;  // VariableIndex component order
    for (const Variable& v : index.all()) {
        if (v.kind != VarKind::Component) continue;
        comp_handle.push_back(
            problem.add_variable_mask(cp::mask_of(s.values[static_cast<std::size_t>(v.flat_index)])));
    }

    // path variables a(i,j,k) for i < j, k = 1..n-1
    std::map<std::tuple<int, int, int>, int> path_var;
    auto a_of = [&](int i, int j, int k) {
        if (i > j) std::swap(i, j);
        return path_var.at({i, j, k});
    };
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            for (int k = 1; k <= max_k; ++k) {
                path_var[{i, j, k}] = problem.add_variable_mask(cp::range_mask(0, 1));
            }
        }
    }

    const cp::DomainMask comp_active = nonzero_mask(spec.n_component_types + 1);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            // direct paths: a component on the pair, or envo co-membership
            if (spec.same_envo(i, j)) {
                problem.add_constraint(cp::fix_value(a_of(i, j, 1), 1));
            } else {
                auto flat = index.flat_of_pair(i, j);
                int handle = comp_handle[static_cast<std::size_t>(*flat - spec.n_joints)];
                problem.add_constraint(cp::conditional_equivalence(
                    a_of(i, j, 1), cp::mask_of(1), {{cp::Literal{handle, comp_active}}},
                    cp::EquivalenceMode::Iff));
            }
            // composition: a k-path exists iff some neighbor of i has a (k-1)-path to j
            for (int k = 2; k <= max_k; ++k) {
                std::vector<std::vector<cp::Literal>> clauses;
                for (int l = 0; l < n; ++l) {
                    if (l == i || l == j) continue;
                    clauses.push_back({cp::Literal{a_of(i, l, 1), cp::mask_of(1)},
                                       cp::Literal{a_of(l, j, k - 1), cp::mask_of(1)}});
                }
                if (clauses.empty()) {
                    problem.add_constraint(cp::fix_value(a_of(i, j, k), 0));
                } else {
                    problem.add_constraint(cp::conditional_equivalence(
                        a_of(i, j, k), cp::mask_of(1), std::move(clauses), cp::EquivalenceMode::Iff));
                }
            }
        }
    }

    // some path must exist between every pair of joints present in the assembly
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            bool i_required = spec.in_envo(i) || s.joint(spec, i) != 0;
            bool j_required = spec.in_envo(j) || s.joint(spec, j) != 0;
            if (!i_required || !j_required) continue;
            std::vector<int> lengths;
            for (int k = 1; k <= max_k; ++k) lengths.push_back(a_of(i, j, k));
            problem.add_constraint(cp::sum_greater_than(std::move(lengths), 0));
        }
    }

    cp::SearchStrategy strategy;
    return problem.solve(strategy).status == cp::SolveStatus::Sat;
}

EncodingAgreementReport verify_encodings_agree(const ProblemSpec& spec, int trials,
                                               std::uint64_t seed) {
    if (spec.n_joints > 6) {
        throw SpecError("verify_encodings_agree requires N <= 6");
    }
    EncodingAgreementReport report;
    report.trials = trials;
    Rng rng(seed);
    for (int t = 0; t < trials; ++t) {
        Solution s = random_solution(spec, rng);
        bool oracle = connectivity_ok(spec, s);
        bool global = global_constraint_connected(spec, s);
        bool literal = path_matrix_connected(spec, s);
        if (oracle != global || oracle != literal) {
            report.disagreements.push_back({std::move(s), oracle, global, literal});
        }
    }
    return report;
}

}  // namespace confopt
