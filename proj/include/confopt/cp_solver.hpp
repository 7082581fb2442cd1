#pragma once

#include <bit>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace confopt::cp {

class CpError : public std::runtime_error {
public:
    explicit CpError(const std::string& what) : std::runtime_error(what) {}
};

/// Domains are sets of small non-negative codes, stored as bitmasks.
using DomainMask = std::uint64_t;
constexpr int kMaxDomainValue = 63;

inline DomainMask mask_of(int value) { return DomainMask{1} << value; }
inline bool domain_contains(DomainMask d, int value) { return (d >> value) & 1; }
inline int domain_size(DomainMask d) { return std::popcount(d); }
inline int domain_min(DomainMask d) { return std::countr_zero(d); }
inline int domain_max(DomainMask d) { return kMaxDomainValue - std::countl_zero(d); }

/// Mask for the contiguous range [lo, hi].
inline DomainMask range_mask(int lo, int hi) {
    DomainMask all = (hi >= kMaxDomainValue) ? ~DomainMask{0} : (mask_of(hi + 1) - 1);
    return all & ~(mask_of(lo) - 1);
}

enum class ConstraintKind {
    FixValue,
    SumGreaterThan,
    ConditionalEquivalence,
    PathMatrixConnectivity,
    CountEquivalence,
};

/// Membership literal: variable's value lies in `set`.
struct Literal {
    int var;
    DomainMask set;
};

/// Direction of a ConditionalEquivalence. Iff couples both ways;
/// ImpliesOnly states only "some clause true -> target in set".
enum class EquivalenceMode { Iff, ImpliesOnly };

/// Wiring of the connectivity global: which CP variables play the role of
/// joints and components, and how joints map to environment objects.
struct ConnectivityParams {
    int n_joints = 0;
    int n_envos = 0;
    std::vector<int> envo_of;  // per joint, -1 = free
    std::vector<int> joint_vars;
    struct Component {
        int var;
        int joint_i;
        int joint_j;
    };
    std::vector<Component> components;
};

struct Constraint {
    ConstraintKind kind;
    std::vector<int> scope;

    // FixValue
    int fix_var = -1;
    int fix_value = 0;

    // SumGreaterThan: sum of contributions over sum_vars > bound.
    // With count_nonzero, a variable contributes 1 when non-zero, else its value.
    // With guard_var >= 0 the constraint applies only when the guard is non-zero.
    std::vector<int> sum_vars;
    long long bound = 0;
    bool count_nonzero = false;
    int guard_var = -1;

    // ConditionalEquivalence: (target in target_set) <-> OR of clauses,
    // each clause a conjunction of literals.
    int target_var = -1;
    DomainMask target_set = 0;
    std::vector<std::vector<Literal>> clauses;
    EquivalenceMode mode = EquivalenceMode::Iff;

    // CountEquivalence: [joint == joint_type] <-> [#(comp == component_type) > 0]
    int ce_joint_var = -1;
    int ce_joint_type = 0;
    int ce_component_type = 0;
    std::vector<int> ce_component_vars;

    // PathMatrixConnectivity
    ConnectivityParams connectivity;
};

Constraint fix_value(int var, int value);
Constraint sum_greater_than(std::vector<int> vars, long long bound,
                            bool count_nonzero = false, int guard_var = -1);
Constraint conditional_equivalence(int target_var, DomainMask target_set,
                                   std::vector<std::vector<Literal>> clauses,
                                   EquivalenceMode mode = EquivalenceMode::Iff);
Constraint count_equivalence(int joint_var, int joint_type,
                             std::vector<int> component_vars, int component_type);
Constraint path_connectivity(ConnectivityParams params);

enum class ValueOrder { AssignMinValue, AssignMaxValue, AssignRandomValue };
enum class VariableOrder { DeclarationOrder, RandomOrder };

struct SearchStrategy {
    ValueOrder value_order = ValueOrder::AssignMinValue;
    VariableOrder variable_order = VariableOrder::DeclarationOrder;
    std::optional<std::uint64_t> rng_seed;
};

enum class SolveStatus { Sat, Unsat, BudgetExhausted };

struct SolveResult {
    SolveStatus status = SolveStatus::Unsat;
    std::vector<int> assignment;  // complete iff status == Sat
    long long nodes_explored = 0;
};

/// A finite-domain constraint problem with propagation and chronological
/// backtracking. Single-threaded during solve; independent instances may
/// run concurrently.
class Problem {
public:
    /// Registers a variable with the given domain values; returns its handle.
    int add_variable(const std::vector<int>& domain_values);
    int add_variable_mask(DomainMask domain);

    void add_constraint(Constraint c);

    int var_count() const { return static_cast<int>(initial_domains_.size()); }
    DomainMask initial_domain(int var) const { return initial_domains_.at(static_cast<std::size_t>(var)); }
    const std::vector<Constraint>& constraints() const { return constraints_; }

    SolveResult solve(const SearchStrategy& strategy, long long node_budget = -1,
                      std::ostream* trace = nullptr) const;

    /// Exhaustively enumerates solutions, stopping at `limit` when >= 0.
    long long count_solutions(long long limit = -1) const;

    /// Naive full evaluation of every constraint on a complete assignment.
    bool check(const std::vector<int>& assignment) const;

private:
    void validate_scope(const Constraint& c) const;

    std::vector<DomainMask> initial_domains_;
    std::vector<Constraint> constraints_;
};

}  // namespace confopt::cp
