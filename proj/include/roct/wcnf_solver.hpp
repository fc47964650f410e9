#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "roct/common.hpp"

namespace roct {

// A parsed weighted CNF, accepting both the classic "p wcnf" header format
// and the 2022 "h"-prefix format.
struct ParsedWcnf {
    int num_vars = 0;
    std::vector<std::vector<int>> hard;
    std::vector<std::pair<long long, std::vector<int>>> soft; // weight, literals
};

inline ParsedWcnf parse_wcnf(const std::string& text) {
    ParsedWcnf out;
    long long top = -1;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == 'c') continue;
        std::istringstream ls(line);
        if (line[0] == 'p') {
            std::string p, fmt;
            int nv = 0;
            long long nc = 0;
            ls >> p >> fmt >> nv >> nc >> top;
            if (fmt != "wcnf") throw Error("unsupported problem line: " + line);
            out.num_vars = std::max(out.num_vars, nv);
            continue;
        }
        std::vector<int> lits;
        long long weight;
        if (line[0] == 'h') {
            char h;
            ls >> h;
            weight = -1; // hard
        } else {
            if (!(ls >> weight))
                throw Error(detail::strprintf("malformed clause at line %d", line_no));
            if (top >= 0 && weight >= top) weight = -1;
        }
        int lit;
        while (ls >> lit) {
            if (lit == 0) break;
            lits.push_back(lit);
            out.num_vars = std::max(out.num_vars, std::abs(lit));
        }
        if (lits.empty()) {
            if (weight < 0) throw Error("empty hard clause: instance is unsatisfiable");
            continue; // empty soft contributes a constant; ignore
        }
        if (weight < 0) out.hard.push_back(std::move(lits));
        else out.soft.emplace_back(weight, std::move(lits));
    }
    return out;
}

struct WcnfSolveResult {
    bool found = false;          // some hard-satisfying assignment was reached
    bool proven_optimal = false; // search space exhausted
    long long best_cost = 0;
    std::vector<bool> assignment; // 1-based
};

// Plain branch-and-bound over full assignments with unit propagation on the
// hard clauses and the falsified-soft-weight bound. Exact but intended for
// small instances; LSU/RC2-class solvers remain the production path.
class WcnfSolver {
public:
    explicit WcnfSolver(const ParsedWcnf& inst, uint64_t step_limit = 200'000'000)
        : inst_(inst), step_limit_(step_limit) {
        assign_.assign(inst.num_vars + 1, -1);
    }

    // on_improve(cost, assignment) fires for every new incumbent.
    WcnfSolveResult solve(
        const std::function<void(long long, const std::vector<bool>&)>& on_improve = nullptr) {
        on_improve_ = on_improve;
        best_cost_ = total_soft_weight() + 1;
        try {
            dfs();
        } catch (const OutOfSteps&) {
            WcnfSolveResult res = result_;
            res.proven_optimal = false;
            return res;
        }
        // Exhausted search: optimal if found, otherwise the hards are unsat.
        result_.proven_optimal = true;
        return result_;
    }

private:
    struct OutOfSteps {};

    long long total_soft_weight() const {
        long long s = 0;
        for (const auto& [w, lits] : inst_.soft) s += w;
        return s;
    }

    void tick() {
        if (++steps_ > step_limit_) throw OutOfSteps{};
    }

    int lit_value(int lit) const { // 0 false, 1 true, -1 unassigned
        int v = assign_[std::abs(lit)];
        if (v < 0) return -1;
        return lit > 0 ? v : 1 - v;
    }

    // Assigns units until fixpoint. Returns false on conflict; records the
    // touched variables in the trail.
    bool propagate(std::vector<int>& trail) {
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto& clause : inst_.hard) {
                tick();
                int unassigned_lit = 0;
                int num_unassigned = 0;
                bool satisfied = false;
                for (int lit : clause) {
                    int v = lit_value(lit);
                    if (v == 1) {
                        satisfied = true;
                        break;
                    }
                    if (v == -1) {
                        ++num_unassigned;
                        unassigned_lit = lit;
                    }
                }
                if (satisfied) continue;
                if (num_unassigned == 0) return false;
                if (num_unassigned == 1) {
                    const int var = std::abs(unassigned_lit);
                    assign_[var] = unassigned_lit > 0 ? 1 : 0;
                    trail.push_back(var);
                    changed = true;
                }
            }
        }
        return true;
    }

    long long falsified_soft() const {
        long long cost = 0;
        for (const auto& [w, lits] : inst_.soft) {
            bool open = false;
            for (int lit : lits) {
                if (lit_value(lit) != 0) {
                    open = true;
                    break;
                }
            }
            if (!open) cost += w;
        }
        return cost;
    }

    int pick_branch_var() const {
        // Prefer variables in unsatisfied hard clauses, then in open softs.
        for (const auto& clause : inst_.hard) {
            bool satisfied = false;
            int candidate = 0;
            for (int lit : clause) {
                int v = lit_value(lit);
                if (v == 1) {
                    satisfied = true;
                    break;
                }
                if (v == -1 && candidate == 0) candidate = std::abs(lit);
            }
            if (!satisfied && candidate) return candidate;
        }
        for (const auto& [w, lits] : inst_.soft) {
            bool satisfied = false;
            int candidate = 0;
            for (int lit : lits) {
                int v = lit_value(lit);
                if (v == 1) {
                    satisfied = true;
                    break;
                }
                if (v == -1 && candidate == 0) candidate = std::abs(lit);
            }
            if (!satisfied && candidate) return candidate;
        }
        for (size_t v = 1; v < assign_.size(); ++v)
            if (assign_[v] < 0) return static_cast<int>(v);
        return 0;
    }

    void record_incumbent(long long cost) {
        best_cost_ = cost;
        result_.found = true;
        result_.best_cost = cost;
        result_.assignment.assign(assign_.size(), false);
        for (size_t v = 1; v < assign_.size(); ++v) result_.assignment[v] = assign_[v] == 1;
        if (on_improve_) on_improve_(cost, result_.assignment);
    }

    void dfs() {
        std::vector<int> trail;
        if (!propagate(trail)) {
            undo(trail);
            return;
        }
        const long long cost = falsified_soft();
        if (cost >= best_cost_) {
            undo(trail);
            return;
        }
        const int var = pick_branch_var();
        if (var == 0) {
            record_incumbent(cost);
            undo(trail);
            return;
        }
        for (int value : {0, 1}) {
            assign_[var] = value;
            dfs();
            assign_[var] = -1;
        }
        undo(trail);
    }

    void undo(std::vector<int>& trail) {
        for (int var : trail) assign_[var] = -1;
        trail.clear();
    }

    const ParsedWcnf& inst_;
    uint64_t step_limit_;
    uint64_t steps_ = 0;
    std::vector<int8_t> assign_;
    long long best_cost_ = 0;
    WcnfSolveResult result_;
    std::function<void(long long, const std::vector<bool>&)> on_improve_;
};

} // namespace roct
