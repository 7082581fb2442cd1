#pragma once

#include <cstdint>
#include <vector>

#include "confopt/cp_solver.hpp"
#include "confopt/problem_spec.hpp"

namespace confopt {

class RepairError : public std::runtime_error {
public:
    explicit RepairError(const std::string& what) : std::runtime_error(what) {}
};

struct RepairOptions {
    /// Degree rule for free joints: count non-zero incident components
    /// (default) or take the literal sum of component codes.
    bool eq22_literal_sum = false;
    /// Joint code given to an active joint no type rule decides.
    int default_joint_code = 1;
};

/// The assembly constraint model over a spec: one CP variable per design
/// variable, with connectivity, degree, type-rule, and joint-activity
/// constraints. Solutions of `problem` are exactly the assignments the
/// feasibility oracle accepts (in default degree mode).
struct AssemblyModel {
    cp::Problem problem;
    std::vector<int> joint_vars;  // handle per joint index
    std::vector<int> comp_vars;   // handle per component variable, VariableIndex order

    Solution to_solution(const ProblemSpec& spec, const std::vector<int>& assignment) const;
    std::vector<int> to_assignment(const ProblemSpec& spec, const Solution& s) const;
};

/// Builds the full assembly model. Optional domain overrides (VariableIndex
/// component order / joint index order) restrict variables for repair stages.
AssemblyModel build_assembly_model(const ProblemSpec& spec, const RepairOptions& options = {},
                                   const std::vector<cp::DomainMask>* comp_domains = nullptr,
                                   const std::vector<cp::DomainMask>* joint_domains = nullptr);

enum class RepairStage { None, RemoveComponents, AddComponents };

struct RepairOutcome {
    Solution repaired;
    RepairStage stage_used = RepairStage::None;
    std::vector<int> joints_retyped;  // flat variable indices whose code changed
    long long cp_nodes_explored = 0;
};

/// Three-stage repair: try removing components (max-value search over
/// {0, current} domains), else add components ({0, random code} domains with
/// min-value search), then retype joints. The result always satisfies the
/// feasibility oracle; throws RepairError only when both CP stages are Unsat.
RepairOutcome repair(const ProblemSpec& spec, const Solution& s, std::uint64_t seed,
                     const RepairOptions& options = {});

/// Connectivity verdict via the literal path-matrix encoding: 0/1 path
/// variables per (pair, length), membership ties at length 1, biconditional
/// composition rules, and a some-path requirement per required joint pair.
bool path_matrix_connected(const ProblemSpec& spec, const Solution& s);

/// Connectivity verdict via the global constraint on a fixed assignment.
bool global_constraint_connected(const ProblemSpec& spec, const Solution& s);

struct EncodingDisagreement {
    Solution assignment;
    bool oracle_verdict;
    bool global_verdict;
    bool literal_verdict;
};

struct EncodingAgreementReport {
    int trials = 0;
    std::vector<EncodingDisagreement> disagreements;
    bool all_agree() const { return disagreements.empty(); }
};

/// Cross-validates the global connectivity constraint, the literal matrix
/// encoding, and the graph-search oracle on random assignments. Requires
/// N <= 6 (the literal encoding is cubic in N).
EncodingAgreementReport verify_encodings_agree(const ProblemSpec& spec, int trials,
                                               std::uint64_t seed);

}  // namespace confopt
