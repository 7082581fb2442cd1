#include "confopt/cp_solver.hpp"

#include <algorithm>
#include <ostream>
#include <queue>

#include "confopt/rng.hpp"

namespace confopt::cp {

namespace {

void require(bool ok, const char* message) {
    if (!ok) throw CpError(message);
}

DomainMask mask_from_values(const std::vector<int>& values) {
    DomainMask m = 0;
    for (int v : values) {
        if (v < 0 || v > kMaxDomainValue) throw CpError("domain value out of supported range");
        m |= mask_of(v);
    }
    return m;
}

}  // namespace

Constraint fix_value(int var, int value) {
    Constraint c;
    c.kind = ConstraintKind::FixValue;
    c.fix_var = var;
    c.fix_value = value;
    c.scope = {var};
    return c;
}

Constraint sum_greater_than(std::vector<int> vars, long long bound, bool count_nonzero, int guard_var) {
    Constraint c;
    c.kind = ConstraintKind::SumGreaterThan;
    c.scope = vars;
    if (guard_var >= 0) c.scope.push_back(guard_var);
    c.bound = bound;
    c.count_nonzero = count_nonzero;
    c.guard_var = guard_var;
    c.sum_vars = std::move(vars);
    return c;
}

Constraint conditional_equivalence(int target_var, DomainMask target_set,
                                   std::vector<std::vector<Literal>> clauses, EquivalenceMode mode) {
    Constraint c;
    c.kind = ConstraintKind::ConditionalEquivalence;
    c.target_var = target_var;
    c.target_set = target_set;
    c.clauses = std::move(clauses);
    c.mode = mode;
    c.scope = {target_var};
    for (const auto& clause : c.clauses) {
        for (const Literal& lit : clause) c.scope.push_back(lit.var);
    }
    return c;
}

Constraint count_equivalence(int joint_var, int joint_type, std::vector<int> component_vars,
                             int component_type) {
    Constraint c;
    c.kind = ConstraintKind::CountEquivalence;
    c.ce_joint_var = joint_var;
    c.ce_joint_type = joint_type;
    c.ce_component_type = component_type;
    c.ce_component_vars = std::move(component_vars);
    c.scope = {joint_var};
    for (int v : c.ce_component_vars) c.scope.push_back(v);
    return c;
}

Constraint path_connectivity(ConnectivityParams params) {
    Constraint c;
    c.kind = ConstraintKind::PathMatrixConnectivity;
    c.connectivity = std::move(params);
    for (int v : c.connectivity.joint_vars) c.scope.push_back(v);
    for (const auto& comp : c.connectivity.components) c.scope.push_back(comp.var);
    return c;
}

int Problem::add_variable(const std::vector<int>& domain_values) {
    return add_variable_mask(mask_from_values(domain_values));
}

int Problem::add_variable_mask(DomainMask domain) {
    require(domain != 0, "EmptyDomain: variable needs at least one value");
    initial_domains_.push_back(domain);
    return static_cast<int>(initial_domains_.size()) - 1;
}

void Problem::validate_scope(const Constraint& c) const {
    require(!c.scope.empty(), "MalformedConstraint: empty scope");
    for (int v : c.scope) {
        require(v >= 0 && v < var_count(), "unknown variable handle in constraint scope");
    }
}

void Problem::add_constraint(Constraint c) {
    switch (c.kind) {
        case ConstraintKind::FixValue:
            validate_scope(c);
            require(c.fix_value >= 0 && c.fix_value <= kMaxDomainValue,
                    "MalformedConstraint: fix value out of range");
            // applies immediately, mirroring a domain reduction at registration
            initial_domains_[static_cast<std::size_t>(c.fix_var)] &= mask_of(c.fix_value);
            break;
        case ConstraintKind::SumGreaterThan:
            require(!c.sum_vars.empty(), "MalformedConstraint: empty sum scope");
            validate_scope(c);
            break;
        case ConstraintKind::ConditionalEquivalence:
            require(!c.clauses.empty(), "MalformedConstraint: equivalence needs clauses");
            for (const auto& clause : c.clauses) {
                require(!clause.empty(), "MalformedConstraint: empty clause");
            }
            require(c.target_set != 0, "MalformedConstraint: empty target set");
            validate_scope(c);
            break;
        case ConstraintKind::CountEquivalence:
            require(!c.ce_component_vars.empty(), "MalformedConstraint: equivalence needs scope");
            validate_scope(c);
            break;
        case ConstraintKind::PathMatrixConnectivity: {
            const auto& p = c.connectivity;
            require(p.n_joints > 0, "MalformedConstraint: connectivity without joints");
            require(static_cast<int>(p.envo_of.size()) == p.n_joints &&
                        static_cast<int>(p.joint_vars.size()) == p.n_joints,
                    "MalformedConstraint: connectivity tables mismatched");
            validate_scope(c);
            break;
        }
    }
    constraints_.push_back(std::move(c));
}

// ---------------------------------------------------------------------------
// Propagation
// ---------------------------------------------------------------------------

namespace {

enum class PropResult { Stable, Changed, Wipeout };

bool fixed(DomainMask d) { return domain_size(d) == 1; }

/// Narrow a domain; reports wipeout on empty intersection.
PropResult narrow(std::vector<DomainMask>& domains, int var, DomainMask keep) {
    DomainMask& d = domains[static_cast<std::size_t>(var)];
    DomainMask next = d & keep;
    if (next == d) return PropResult::Stable;
    d = next;
    return next == 0 ? PropResult::Wipeout : PropResult::Changed;
}

long long max_contribution(DomainMask d, bool count_nonzero) {
    if (count_nonzero) return (d & ~DomainMask{1}) != 0 ? 1 : 0;
    return domain_max(d);
}

long long value_contribution(int value, bool count_nonzero) {
    return count_nonzero ? (value != 0 ? 1 : 0) : value;
}

PropResult propagate_sum(const Constraint& c, std::vector<DomainMask>& domains) {
    bool changed = false;
    bool guard_known_active = c.guard_var < 0;
    if (c.guard_var >= 0) {
        DomainMask g = domains[static_cast<std::size_t>(c.guard_var)];
        if (g == mask_of(0)) return PropResult::Stable;  // vacuous
        guard_known_active = !domain_contains(g, 0);
    }

    long long max_sum = 0;
    for (int v : c.sum_vars) {
        max_sum += max_contribution(domains[static_cast<std::size_t>(v)], c.count_nonzero);
    }
    if (max_sum <= c.bound) {
        if (c.guard_var < 0) return PropResult::Wipeout;
        // constraint cannot hold, so the guard must be inactive
        PropResult r = narrow(domains, c.guard_var, mask_of(0));
        if (r == PropResult::Wipeout) return r;
        return r == PropResult::Changed ? PropResult::Changed : PropResult::Stable;
    }
    if (!guard_known_active) return PropResult::Stable;

    for (int v : c.sum_vars) {
        DomainMask d = domains[static_cast<std::size_t>(v)];
        long long others = max_sum - max_contribution(d, c.count_nonzero);
        DomainMask keep = 0;
        for (int value = domain_min(d); value <= domain_max(d); ++value) {
            if (!domain_contains(d, value)) continue;
            if (value_contribution(value, c.count_nonzero) + others > c.bound) keep |= mask_of(value);
        }
        PropResult r = narrow(domains, v, keep);
        if (r == PropResult::Wipeout) return r;
        if (r == PropResult::Changed) changed = true;
    }
    return changed ? PropResult::Changed : PropResult::Stable;
}

enum class ClauseState { Dead, Entailed, Open };

ClauseState clause_state(const std::vector<Literal>& clause, const std::vector<DomainMask>& domains) {
    bool entailed = true;
    for (const Literal& lit : clause) {
        DomainMask d = domains[static_cast<std::size_t>(lit.var)];
        if ((d & lit.set) == 0) return ClauseState::Dead;
        if ((d & ~lit.set) != 0) entailed = false;
    }
    return entailed ? ClauseState::Entailed : ClauseState::Open;
}

PropResult propagate_equivalence(int target_var, DomainMask target_set,
                                 const std::vector<std::vector<Literal>>& clauses,
                                 EquivalenceMode mode, std::vector<DomainMask>& domains) {
    bool changed = false;
    DomainMask target = domains[static_cast<std::size_t>(target_var)];
    const bool target_must_hold = (target & ~target_set) == 0;
    const bool target_cannot_hold = (target & target_set) == 0;

    int alive = 0;
    const std::vector<Literal>* sole_open = nullptr;
    bool any_entailed = false;
    for (const auto& clause : clauses) {
        ClauseState st = clause_state(clause, domains);
        if (st == ClauseState::Dead) continue;
        ++alive;
        if (st == ClauseState::Entailed) any_entailed = true;
        sole_open = &clause;
    }

    if (any_entailed) {
        PropResult r = narrow(domains, target_var, target_set);
        if (r == PropResult::Wipeout) return r;
        if (r == PropResult::Changed) changed = true;
    } else if (alive == 0 && mode == EquivalenceMode::Iff) {
        PropResult r = narrow(domains, target_var, ~target_set);
        if (r == PropResult::Wipeout) return r;
        if (r == PropResult::Changed) changed = true;
    }

    if (target_cannot_hold) {
        // no clause may become true: kill the last open literal of
        // otherwise-entailed clauses
        for (const auto& clause : clauses) {
            if (clause_state(clause, domains) == ClauseState::Dead) continue;
            const Literal* open_lit = nullptr;
            int open_count = 0;
            for (const Literal& lit : clause) {
                DomainMask d = domains[static_cast<std::size_t>(lit.var)];
                if ((d & ~lit.set) != 0) {
                    ++open_count;
                    open_lit = &lit;
                }
            }
            if (open_count == 0) return PropResult::Wipeout;  // clause already true
            if (open_count == 1) {
                PropResult r = narrow(domains, open_lit->var, ~open_lit->set);
                if (r == PropResult::Wipeout) return r;
                if (r == PropResult::Changed) changed = true;
            }
        }
    } else if (target_must_hold && mode == EquivalenceMode::Iff && !any_entailed) {
        if (alive == 0) return PropResult::Wipeout;
        if (alive == 1 && sole_open != nullptr) {
            for (const Literal& lit : *sole_open) {
                PropResult r = narrow(domains, lit.var, lit.set);
                if (r == PropResult::Wipeout) return r;
                if (r == PropResult::Changed) changed = true;
            }
        }
    }
    return changed ? PropResult::Changed : PropResult::Stable;
}

/// Union-find over connectivity vertices (envo groups + free joints).
struct VertexSets {
    std::vector<int> parent;
    explicit VertexSets(int n) : parent(static_cast<std::size_t>(n)) {
        for (int i = 0; i < n; ++i) parent[static_cast<std::size_t>(i)] = i;
    }
    int find(int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    }
    void unite(int a, int b) { parent[static_cast<std::size_t>(find(a))] = find(b); }
};

struct ConnectivityView {
    int n_vertices;
    std::vector<int> vertex_of_joint;
};

ConnectivityView connectivity_vertices(const ConnectivityParams& p) {
    ConnectivityView view;
    view.n_vertices = p.n_envos;
    view.vertex_of_joint.resize(static_cast<std::size_t>(p.n_joints));
    for (int j = 0; j < p.n_joints; ++j) {
        int e = p.envo_of[static_cast<std::size_t>(j)];
        view.vertex_of_joint[static_cast<std::size_t>(j)] = (e >= 0) ? e : view.n_vertices++;
    }
    return view;
}

bool required_vertices_connected(const ConnectivityParams& p, const ConnectivityView& view,
                                 const std::vector<bool>& edge_active,
                                 const std::vector<bool>& joint_required) {
    VertexSets sets(view.n_vertices);
    for (std::size_t k = 0; k < p.components.size(); ++k) {
        if (!edge_active[k]) continue;
        const auto& comp = p.components[k];
        sets.unite(view.vertex_of_joint[static_cast<std::size_t>(comp.joint_i)],
                   view.vertex_of_joint[static_cast<std::size_t>(comp.joint_j)]);
    }
    int root = -1;
    for (int e = 0; e < p.n_envos; ++e) {
        if (root < 0) root = sets.find(e);
        else if (sets.find(e) != root) return false;
    }
    for (int j = 0; j < p.n_joints; ++j) {
        if (!joint_required[static_cast<std::size_t>(j)]) continue;
        int v = sets.find(view.vertex_of_joint[static_cast<std::size_t>(j)]);
        if (root < 0) root = v;
        else if (v != root) return false;
    }
    return true;
}

PropResult propagate_connectivity(const Constraint& c, std::vector<DomainMask>& domains) {
    const ConnectivityParams& p = c.connectivity;
    ConnectivityView view = connectivity_vertices(p);
    // optimistic graph: any component that can still be non-zero is an edge
    std::vector<bool> edge_possible(p.components.size());
    for (std::size_t k = 0; k < p.components.size(); ++k) {
        DomainMask d = domains[static_cast<std::size_t>(p.components[k].var)];
        edge_possible[k] = (d & ~DomainMask{1}) != 0;
    }
    // joints already forced active must end up connected
    std::vector<bool> joint_required(static_cast<std::size_t>(p.n_joints), false);
    for (int j = 0; j < p.n_joints; ++j) {
        DomainMask d = domains[static_cast<std::size_t>(p.joint_vars[static_cast<std::size_t>(j)])];
        joint_required[static_cast<std::size_t>(j)] = !domain_contains(d, 0);
    }
    if (!required_vertices_connected(p, view, edge_possible, joint_required)) {
        return PropResult::Wipeout;
    }
    return PropResult::Stable;
}

bool connectivity_satisfied(const ConnectivityParams& p, const std::vector<int>& assignment) {
    ConnectivityView view = connectivity_vertices(p);
    std::vector<bool> edge_active(p.components.size());
    for (std::size_t k = 0; k < p.components.size(); ++k) {
        edge_active[k] = assignment[static_cast<std::size_t>(p.components[k].var)] != 0;
    }
    std::vector<bool> joint_required(static_cast<std::size_t>(p.n_joints), false);
    for (int j = 0; j < p.n_joints; ++j) {
        joint_required[static_cast<std::size_t>(j)] =
            assignment[static_cast<std::size_t>(p.joint_vars[static_cast<std::size_t>(j)])] != 0;
    }
    return required_vertices_connected(p, view, edge_active, joint_required);
}

PropResult propagate_one(const Constraint& c, std::vector<DomainMask>& domains) {
    switch (c.kind) {
        case ConstraintKind::FixValue:
            return narrow(domains, c.fix_var, mask_of(c.fix_value));
        case ConstraintKind::SumGreaterThan:
            return propagate_sum(c, domains);
        case ConstraintKind::ConditionalEquivalence:
            return propagate_equivalence(c.target_var, c.target_set, c.clauses, c.mode, domains);
        case ConstraintKind::CountEquivalence: {
            // lowering: [y == g] <-> OR_j (z_j == h)
            static thread_local std::vector<std::vector<Literal>> clauses;
            clauses.clear();
            for (int v : c.ce_component_vars) {
                clauses.push_back({Literal{v, mask_of(c.ce_component_type)}});
            }
            return propagate_equivalence(c.ce_joint_var, mask_of(c.ce_joint_type), clauses,
                                         EquivalenceMode::Iff, domains);
        }
        case ConstraintKind::PathMatrixConnectivity:
            return propagate_connectivity(c, domains);
    }
    return PropResult::Stable;
}

/// Runs all propagators to fixpoint. Returns false on wipeout.
bool propagate_fixpoint(const std::vector<Constraint>& constraints, std::vector<DomainMask>& domains) {
    bool changed = true;
    while (changed) {
        changed = false;
        for (const Constraint& c : constraints) {
            PropResult r = propagate_one(c, domains);
            if (r == PropResult::Wipeout) return false;
            if (r == PropResult::Changed) changed = true;
        }
    }
    return true;
}

bool constraint_satisfied(const Constraint& c, const std::vector<int>& a) {
    switch (c.kind) {
        case ConstraintKind::FixValue:
            return a[static_cast<std::size_t>(c.fix_var)] == c.fix_value;
        case ConstraintKind::SumGreaterThan: {
            if (c.guard_var >= 0 && a[static_cast<std::size_t>(c.guard_var)] == 0) return true;
            long long sum = 0;
            for (int v : c.sum_vars) {
                sum += value_contribution(a[static_cast<std::size_t>(v)], c.count_nonzero);
            }
            return sum > c.bound;
        }
        case ConstraintKind::ConditionalEquivalence: {
            bool any = false;
            for (const auto& clause : c.clauses) {
                bool all = true;
                for (const Literal& lit : clause) {
                    if (!domain_contains(lit.set, a[static_cast<std::size_t>(lit.var)])) {
                        all = false;
                        break;
                    }
                }
                if (all) {
                    any = true;
                    break;
                }
            }
            bool target_in = domain_contains(c.target_set, a[static_cast<std::size_t>(c.target_var)]);
            return c.mode == EquivalenceMode::Iff ? (target_in == any) : (!any || target_in);
        }
        case ConstraintKind::CountEquivalence: {
            bool any = false;
            for (int v : c.ce_component_vars) {
                if (a[static_cast<std::size_t>(v)] == c.ce_component_type) {
                    any = true;
                    break;
                }
            }
            return (a[static_cast<std::size_t>(c.ce_joint_var)] == c.ce_joint_type) == any;
        }
        case ConstraintKind::PathMatrixConnectivity:
            return connectivity_satisfied(c.connectivity, a);
    }
    return true;
}

struct SearchContext {
    const std::vector<Constraint>& constraints;
    const SearchStrategy& strategy;
    Rng* rng;
    long long node_budget;
    long long nodes = 0;
    std::ostream* trace;
    bool budget_hit = false;

    // enumeration mode
    bool enumerate = false;
    long long found = 0;
    long long found_limit = -1;
};

int pick_variable(SearchContext& ctx, const std::vector<DomainMask>& domains) {
    std::vector<int> open;
    for (std::size_t v = 0; v < domains.size(); ++v) {
        if (!fixed(domains[v])) open.push_back(static_cast<int>(v));
    }
    if (open.empty()) return -1;
    if (ctx.strategy.variable_order == VariableOrder::RandomOrder) {
        return open[ctx.rng->next_below(open.size())];
    }
    return open.front();
}

std::vector<int> value_order(SearchContext& ctx, DomainMask d) {
    std::vector<int> values;
    for (int v = domain_min(d); v <= domain_max(d); ++v) {
        if (domain_contains(d, v)) values.push_back(v);
    }
    switch (ctx.strategy.value_order) {
        case ValueOrder::AssignMinValue: break;
        case ValueOrder::AssignMaxValue: std::reverse(values.begin(), values.end()); break;
        case ValueOrder::AssignRandomValue: ctx.rng->shuffle(values); break;
    }
    return values;
}

bool assignment_of(const std::vector<DomainMask>& domains, std::vector<int>& out) {
    out.resize(domains.size());
    for (std::size_t v = 0; v < domains.size(); ++v) {
        if (!fixed(domains[v])) return false;
        out[v] = domain_min(domains[v]);
    }
    return true;
}

/// DFS with chronological backtracking. Returns true when the search should
/// stop (solution found in solve mode, or limit reached in enumerate mode).
bool search(SearchContext& ctx, std::vector<DomainMask> domains, std::vector<int>& solution, int depth) {
    if (!propagate_fixpoint(ctx.constraints, domains)) {
        if (ctx.trace) *ctx.trace << std::string(static_cast<std::size_t>(depth) * 2, ' ') << "wipeout\n";
        return false;
    }
    int var = pick_variable(ctx, domains);
    if (var < 0) {
        std::vector<int> a;
        assignment_of(domains, a);
        for (const Constraint& c : ctx.constraints) {
            if (!constraint_satisfied(c, a)) return false;  // global final check
        }
        if (ctx.trace) *ctx.trace << std::string(static_cast<std::size_t>(depth) * 2, ' ') << "solution\n";
        if (ctx.enumerate) {
            ++ctx.found;
            return ctx.found_limit >= 0 && ctx.found >= ctx.found_limit;
        }
        solution = std::move(a);
        return true;
    }
    for (int value : value_order(ctx, domains[static_cast<std::size_t>(var)])) {
        if (ctx.node_budget >= 0 && ctx.nodes >= ctx.node_budget) {
            ctx.budget_hit = true;
            return false;
        }
        ++ctx.nodes;
        if (ctx.trace) {
            *ctx.trace << std::string(static_cast<std::size_t>(depth) * 2, ' ') << "try x" << var
                       << " = " << value << "\n";
        }
        std::vector<DomainMask> child = domains;
        child[static_cast<std::size_t>(var)] = mask_of(value);
        if (search(ctx, std::move(child), solution, depth + 1)) return true;
        if (ctx.budget_hit) return false;
    }
    return false;
}

}  // namespace

SolveResult Problem::solve(const SearchStrategy& strategy, long long node_budget,
                           std::ostream* trace) const {
    const bool needs_rng = strategy.value_order == ValueOrder::AssignRandomValue ||
                           strategy.variable_order == VariableOrder::RandomOrder;
    if (needs_rng && !strategy.rng_seed) {
        throw CpError("rng_seed required for randomized search strategies");
    }
    Rng rng(strategy.rng_seed.value_or(0));
    SearchContext ctx{constraints_, strategy, &rng, node_budget, 0, trace};
    SolveResult result;
    std::vector<int> solution;
    bool sat = search(ctx, initial_domains_, solution, 0);
    result.nodes_explored = ctx.nodes;
    if (sat) {
        result.status = SolveStatus::Sat;
        result.assignment = std::move(solution);
    } else {
        result.status = ctx.budget_hit ? SolveStatus::BudgetExhausted : SolveStatus::Unsat;
    }
    return result;
}

long long Problem::count_solutions(long long limit) const {
    SearchStrategy strategy;  // deterministic order; the count is order-independent
    Rng rng(0);
    SearchContext ctx{constraints_, strategy, &rng, -1, 0, nullptr};
    ctx.enumerate = true;
    ctx.found_limit = limit;
    std::vector<int> unused;
    search(ctx, initial_domains_, unused, 0);
    return ctx.found;
}

bool Problem::check(const std::vector<int>& assignment) const {
    if (static_cast<int>(assignment.size()) != var_count()) {
        throw CpError("assignment length mismatch");
    }
    for (std::size_t v = 0; v < assignment.size(); ++v) {
        if (!domain_contains(initial_domains_[v], assignment[v])) return false;
    }
    for (const Constraint& c : constraints_) {
        if (!constraint_satisfied(c, assignment)) return false;
    }
    return true;
}

}  // namespace confopt::cp
