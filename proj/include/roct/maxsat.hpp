#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "roct/adversary.hpp"
#include "roct/common.hpp"
#include "roct/dataset.hpp"
#include "roct/thresholds.hpp"
#include "roct/tree.hpp"

namespace roct {

enum class VarKind { feature, threshold, reach_left, reach_right, leaf_class, error };

struct VarInfo {
    VarKind kind;
    int node = -1;
    int feature = -1;
    int cand = -1;   // candidate index within the feature's list
    int sample = -1;
    int leaf = -1;
};

// Dense 1-based variable ids: a (node-major), then the b chains (node,
// feature, candidate), then s (node, sample, side), then c, then e.
struct VarMap {
    int depth = 0;
    int n = 0;
    int p = 0;
    int num_nodes = 0;
    int num_leaves = 0;
    std::vector<int> cand_prefix;                 // per feature, offset into a node's b block
    int total_cands = 0;
    std::vector<std::vector<double>> cand_values; // decode table
    int num_vars = 0;

    int cand_count(int j) const { return static_cast<int>(cand_values[j].size()); }

    int a(int j, int m) const { return 1 + m * p + j; }
    int b(int j, int v, int m) const {
        return 1 + num_nodes * p + m * total_cands + cand_prefix[j] + v;
    }
    int s(int i, int m, int side) const {
        return 1 + num_nodes * (p + total_cands) + (m * n + i) * 2 + side;
    }
    int c(int t) const { return 1 + num_nodes * (p + total_cands) + 2 * n * num_nodes + t; }
    int e(int i) const {
        return 1 + num_nodes * (p + total_cands) + 2 * n * num_nodes + num_leaves + i;
    }

    VarInfo describe(int id) const {
        int x = id - 1;
        if (x < 0) throw Error("variable id out of range");
        if (x < num_nodes * p) return {VarKind::feature, x / p, x % p, -1, -1, -1};
        x -= num_nodes * p;
        if (x < num_nodes * total_cands) {
            int m = x / total_cands;
            int off = x % total_cands;
            int j = static_cast<int>(std::upper_bound(cand_prefix.begin(), cand_prefix.end(), off) -
                                     cand_prefix.begin()) - 1;
            return {VarKind::threshold, m, j, off - cand_prefix[j], -1, -1};
        }
        x -= num_nodes * total_cands;
        if (x < 2 * n * num_nodes) {
            int m = x / (2 * n);
            int r = x % (2 * n);
            return {r % 2 == 0 ? VarKind::reach_left : VarKind::reach_right,
                    m, -1, -1, r / 2, -1};
        }
        x -= 2 * n * num_nodes;
        if (x < num_leaves) return {VarKind::leaf_class, -1, -1, -1, -1, x};
        x -= num_leaves;
        if (x < n) return {VarKind::error, -1, -1, -1, x, -1};
        throw Error("variable id out of range");
    }
};

// Weighted CNF: hard clauses plus the n unit soft clauses (not e_i), each of
// weight 1; top weight exceeds the soft total.
struct WcnfInstance {
    int num_vars = 0;
    long long top = 0;
    std::vector<std::vector<int>> hard;
    std::vector<std::vector<int>> soft;

    size_t num_clauses() const { return hard.size() + soft.size(); }
};

// Ancestors of leaf slot `t` as (heap node index, went_left) pairs, root first.
inline std::vector<std::pair<int, bool>> leaf_ancestors(int slot, int depth) {
    std::vector<std::pair<int, bool>> out;
    int node = 0;
    for (int bit = depth - 1; bit >= 0; --bit) {
        bool left = ((slot >> bit) & 1) == 0;
        out.emplace_back(node, left);
        node = left ? 2 * node + 1 : 2 * node + 2;
    }
    return out;
}

// Compiles the binary-threshold formulation into weighted CNF. Hard clause
// groups, in emission order: per-node feature selection (at-least-one over
// features with candidates; constant features forced off), per-feature
// threshold chains with an anchor forcing a candidate at 0 left (no [0,1]
// threshold sends a value of 0 right), reachability of each side per sample
// and feature, and error counting per (leaf, sample). Soft: (not e_i) each.
inline std::pair<VarMap, WcnfInstance> build_encoding(const Dataset& d, const AttackModel& attack,
                                                      int depth, bool use_raw_values = false) {
    if (depth < 1) throw Error("encoding requires depth >= 1");
    if (d.n < 1) throw Error("encoding requires at least one sample");
    if (attack.p() != d.p) throw Error("attack model dimension mismatch");

    ThresholdCandidates cands = candidate_thresholds(d, attack, use_raw_values);
    if (cands.all_degenerate())
        throw Error("all features are constant; nothing can be encoded");

    VarMap vm;
    vm.depth = depth;
    vm.n = d.n;
    vm.p = d.p;
    vm.num_nodes = (1 << depth) - 1;
    vm.num_leaves = 1 << depth;
    vm.cand_values = cands.per_feature;
    vm.cand_prefix.resize(d.p);
    for (int j = 0; j < d.p; ++j) {
        vm.cand_prefix[j] = vm.total_cands;
        vm.total_cands += static_cast<int>(cands.values(j).size());
    }
    vm.num_vars = vm.num_nodes * (vm.p + vm.total_cands) + 2 * vm.n * vm.num_nodes +
                  vm.num_leaves + vm.n;

    WcnfInstance inst;
    inst.num_vars = vm.num_vars;
    inst.top = static_cast<long long>(d.n) + 1;

    // (1) feature selection: at least one usable feature per node.
    for (int m = 0; m < vm.num_nodes; ++m) {
        std::vector<int> clause;
        for (int j = 0; j < d.p; ++j) {
            if (vm.cand_count(j) > 0) clause.push_back(vm.a(j, m));
            else inst.hard.push_back({-vm.a(j, m)});
        }
        inst.hard.push_back(std::move(clause));
    }

    // (2) threshold ordering chains, plus the zero anchor.
    for (int m = 0; m < vm.num_nodes; ++m) {
        for (int j = 0; j < d.p; ++j) {
            const int k = vm.cand_count(j);
            if (k > 0 && vm.cand_values[j][0] == 0.0)
                inst.hard.push_back({-vm.b(j, 0, m)});
            for (int v = 0; v + 1 < k; ++v)
                inst.hard.push_back({-vm.b(j, v, m), vm.b(j, v + 1, m)});
        }
    }

    // (3) reachability: a_jm and not b_{v^l m} implies s_im0;
    //                   a_jm and b_{v^r m} implies s_im1.
    for (int m = 0; m < vm.num_nodes; ++m) {
        for (int i = 0; i < d.n; ++i) {
            for (int j = 0; j < d.p; ++j) {
                if (vm.cand_count(j) == 0) continue;
                const int vl = cands.lower_index(j, attack.low(d, i, j));
                const int vr = cands.upper_index(j, attack.high(d, i, j));
                if (vl == kBelowAll)
                    inst.hard.push_back({-vm.a(j, m), vm.s(i, m, 0)});
                else
                    inst.hard.push_back({-vm.a(j, m), vm.b(j, vl, m), vm.s(i, m, 0)});
                if (vr == kAboveAll)
                    inst.hard.push_back({-vm.a(j, m), vm.s(i, m, 1)});
                else
                    inst.hard.push_back({-vm.a(j, m), -vm.b(j, vr, m), vm.s(i, m, 1)});
            }
        }
    }

    // (4) error counting: reaching leaf t with the wrong class forces e_i.
    for (int t = 0; t < vm.num_leaves; ++t) {
        const auto path = leaf_ancestors(t, depth);
        for (int i = 0; i < d.n; ++i) {
            std::vector<int> clause;
            clause.reserve(path.size() + 2);
            for (const auto& [m, left] : path) clause.push_back(-vm.s(i, m, left ? 0 : 1));
            clause.push_back(d.y[i] == 0 ? -vm.c(t) : vm.c(t));
            clause.push_back(vm.e(i));
            inst.hard.push_back(std::move(clause));
        }
    }

    for (int i = 0; i < d.n; ++i) inst.soft.push_back({-vm.e(i)});
    return {std::move(vm), std::move(inst)};
}

// Classic DIMACS WCNF ("p wcnf <vars> <clauses> <top>", hard clauses carry
// the top weight); new_format switches to the 2022 style with "h" prefixes
// and no header line. Byte-deterministic.
inline std::string write_wcnf(const WcnfInstance& inst, bool new_format = false) {
    std::ostringstream out;
    auto emit_lits = [&out](const std::vector<int>& clause) {
        for (int lit : clause) out << lit << " ";
        out << "0\n";
    };
    if (!new_format) {
        out << "p wcnf " << inst.num_vars << " " << inst.num_clauses() << " " << inst.top << "\n";
        for (const auto& cl : inst.hard) {
            out << inst.top << " ";
            emit_lits(cl);
        }
        for (const auto& cl : inst.soft) {
            out << 1 << " ";
            emit_lits(cl);
        }
    } else {
        for (const auto& cl : inst.hard) {
            out << "h ";
            emit_lits(cl);
        }
        for (const auto& cl : inst.soft) {
            out << 1 << " ";
            emit_lits(cl);
        }
    }
    return out.str();
}

inline void write_wcnf_file(const WcnfInstance& inst, const std::string& path,
                            bool new_format = false) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << write_wcnf(inst, new_format);
}

// Assignment indexed by variable id (slot 0 unused).
using Assignment = std::vector<bool>;

inline bool clause_satisfied(const std::vector<int>& clause, const Assignment& assign) {
    for (int lit : clause) {
        const bool v = assign[static_cast<size_t>(std::abs(lit))];
        if (lit > 0 ? v : !v) return true;
    }
    return false;
}

inline int soft_cost(const VarMap& vm, const Assignment& assign) {
    int cost = 0;
    for (int i = 0; i < vm.n; ++i) cost += assign[vm.e(i)] ? 1 : 0;
    return cost;
}

struct DecodedTree {
    Tree tree;
    int verified_errors = 0; // adversary-module evaluation of the tree
    int assignment_cost = 0; // falsified soft clauses
};

// Decodes a hard-satisfying assignment: lowest selected feature per node,
// threshold at the midpoint under the first true chain variable, leaf classes
// from c. The decoded tree is re-evaluated and must not exceed the cost.
inline DecodedTree decode_tree(const VarMap& vm, const WcnfInstance& inst,
                               const Assignment& assign, const Dataset& d,
                               const AttackModel& attack) {
    if (assign.size() < static_cast<size_t>(vm.num_vars) + 1)
        throw Error("assignment does not cover all variables");
    for (const auto& cl : inst.hard)
        if (!clause_satisfied(cl, assign))
            throw Error("assignment violates a hard clause");

    Tree t;
    t.depth = vm.depth;
    t.nodes.resize(vm.num_nodes);
    for (int m = 0; m < vm.num_nodes; ++m) {
        int feature = -1;
        for (int j = 0; j < vm.p; ++j) {
            if (vm.cand_count(j) > 0 && assign[vm.a(j, m)]) {
                feature = j;
                break;
            }
        }
        if (feature < 0) throw Error("no feature selected at a node");
        const auto& vals = vm.cand_values[feature];
        const int k = static_cast<int>(vals.size());
        int first_true = k;
        for (int v = 0; v < k; ++v) {
            if (assign[vm.b(feature, v, m)]) {
                first_true = v;
                break;
            }
        }
        double th;
        if (first_true == k) th = (vals.back() + 1.0) / 2.0; // everything left
        else if (first_true == 0) th = vals.front() / 2.0;   // everything right
        else th = (vals[first_true - 1] + vals[first_true]) / 2.0;
        t.nodes[m] = {feature, th};
    }
    t.leaves.resize(vm.num_leaves);
    for (int lf = 0; lf < vm.num_leaves; ++lf) t.leaves[lf] = assign[vm.c(lf)] ? 1 : 0;
    t.validate();

    DecodedTree res;
    res.tree = std::move(t);
    res.assignment_cost = soft_cost(vm, assign);
    res.verified_errors = adversarial_error_count(res.tree, d, attack);
    if (res.verified_errors > res.assignment_cost)
        throw Error(detail::strprintf(
            "decoded tree has %d errors but the assignment cost is %d (encoding bug)",
            res.verified_errors, res.assignment_cost));
    return res;
}

// Forward direction: the hard-satisfying assignment describing a given tree.
// Every split must use a feature that has candidates.
inline Assignment encode_tree_assignment(const VarMap& vm, const Tree& tree, const Dataset& d,
                                         const AttackModel& attack) {
    if (tree.depth != vm.depth) throw Error("tree depth does not match the encoding");
    tree.check_dims(vm.p);
    Assignment assign(static_cast<size_t>(vm.num_vars) + 1, false);

    for (int m = 0; m < vm.num_nodes; ++m) {
        const int j = tree.nodes[m].feature;
        const double th = tree.nodes[m].threshold;
        if (vm.cand_count(j) == 0)
            throw Error("tree splits on a feature without candidates");
        assign[vm.a(j, m)] = true;
        for (int v = 0; v < vm.cand_count(j); ++v)
            assign[vm.b(j, v, m)] = vm.cand_values[j][v] > th;
        for (int i = 0; i < d.n; ++i) {
            assign[vm.s(i, m, 0)] = attack.low(d, i, j) <= th;
            assign[vm.s(i, m, 1)] = attack.high(d, i, j) > th;
        }
    }
    for (int t = 0; t < vm.num_leaves; ++t) assign[vm.c(t)] = tree.leaves[t] == 1;

    for (int i = 0; i < d.n; ++i) {
        bool err = false;
        for (int t = 0; t < vm.num_leaves && !err; ++t) {
            if (tree.leaves[t] == d.y[i]) continue;
            bool reaches = true;
            for (const auto& [m, left] : leaf_ancestors(t, vm.depth)) {
                if (!assign[vm.s(i, m, left ? 0 : 1)]) {
                    reaches = false;
                    break;
                }
            }
            err = reaches;
        }
        assign[vm.e(i)] = err;
    }
    return assign;
}

} // namespace roct
