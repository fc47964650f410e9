#pragma once

#include <optional>
#include <vector>

#include "roct/common.hpp"
#include "roct/dataset.hpp"
#include "roct/tree.hpp"

namespace roct {

namespace detail {

// Descends the tree keeping the per-feature interval of points that are still
// inside the box and consistent with the path taken. Lower bounds become open
// after a right branch (value > threshold).
struct ReachWalker {
    const Tree& tree;
    std::vector<double> low, high;
    std::vector<bool> low_open;
    std::vector<int> out;

    ReachWalker(const Tree& t, const PerturbationBox& box)
        : tree(t), low(box.low), high(box.high), low_open(box.low.size(), false) {}

    bool can_go_left(int j, double th) const {
        if (low[j] < th) return true;
        return low[j] == th && !low_open[j];
    }
    bool can_go_right(int j, double th) const { return high[j] > th; }

    void walk(int idx) {
        if (idx >= tree.num_nodes()) {
            out.push_back(idx - tree.num_nodes());
            return;
        }
        const int j = tree.nodes[idx].feature;
        const double th = tree.nodes[idx].threshold;
        if (can_go_left(j, th)) {
            double saved = high[j];
            high[j] = std::min(high[j], th);
            walk(2 * idx + 1);
            high[j] = saved;
        }
        if (can_go_right(j, th)) {
            double saved_low = low[j];
            bool saved_open = low_open[j];
            if (th > low[j] || (th == low[j] && !low_open[j])) {
                low[j] = th;
                low_open[j] = true;
            }
            walk(2 * idx + 2);
            low[j] = saved_low;
            low_open[j] = saved_open;
        }
    }
};

} // namespace detail

// Reachable-leaf set of a box: the leaf slots whose decision path is satisfiable
// by some point of the sample's perturbation box. Sorted, never empty.
inline std::vector<int> reachable_leaves(const Tree& tree, const PerturbationBox& box) {
    detail::ReachWalker w(tree, box);
    w.walk(0);
    return w.out;
}

// Same set as a bitmask over leaf slots; requires depth <= 6.
inline uint64_t reachable_leaf_mask(const Tree& tree, const PerturbationBox& box) {
    if (tree.depth > 6) throw Error("leaf masks support depth <= 6");
    detail::ReachWalker w(tree, box);
    w.walk(0);
    uint64_t mask = 0;
    for (int leaf : w.out) mask |= uint64_t(1) << leaf;
    return mask;
}

inline std::vector<int> reachable_leaves(const Tree& tree, const Dataset& d, int i,
                                         const AttackModel& attack) {
    return reachable_leaves(tree, PerturbationBox::around(d, i, attack));
}

// True iff some reachable leaf predicts a class different from `label`.
inline bool adversarially_misclassified(const Tree& tree, const PerturbationBox& box, int label) {
    for (int leaf : reachable_leaves(tree, box))
        if (tree.leaves[leaf] != label) return true;
    return false;
}

inline int adversarial_error_count(const Tree& tree, const Dataset& d, const AttackModel& attack) {
    tree.check_dims(d.p);
    if (attack.p() != d.p) throw Error("attack model dimension mismatch");
    int errors = 0;
    for (int i = 0; i < d.n; ++i)
        if (adversarially_misclassified(tree, PerturbationBox::around(d, i, attack), d.y[i]))
            ++errors;
    return errors;
}

// Fraction of samples that every point of their box classifies correctly.
// Empty data counts as fully correct.
inline double adversarial_accuracy(const Tree& tree, const Dataset& d, const AttackModel& attack) {
    if (d.n == 0) return 1.0;
    return double(d.n - adversarial_error_count(tree, d, attack)) / d.n;
}

namespace detail {

// Builds a concrete point inside the (path-refined) interval stack reaching a
// given leaf, preferring the box's own values where unconstrained.
struct WitnessWalker {
    const Tree& tree;
    int target;
    std::vector<double> low, high;
    std::vector<bool> low_open;
    std::optional<std::vector<double>> found;

    WitnessWalker(const Tree& t, const PerturbationBox& box, int target_leaf)
        : tree(t), target(target_leaf), low(box.low), high(box.high),
          low_open(box.low.size(), false) {}

    void emit() {
        std::vector<double> w(low.size());
        for (size_t j = 0; j < low.size(); ++j) {
            // high is always attainable: upper refinements are closed.
            w[j] = high[j];
        }
        found = std::move(w);
    }

    void walk(int idx) {
        if (found) return;
        if (idx >= tree.num_nodes()) {
            if (idx - tree.num_nodes() == target) emit();
            return;
        }
        const int j = tree.nodes[idx].feature;
        const double th = tree.nodes[idx].threshold;
        bool left_ok = low[j] < th || (low[j] == th && !low_open[j]);
        if (left_ok) {
            double saved = high[j];
            high[j] = std::min(high[j], th);
            walk(2 * idx + 1);
            high[j] = saved;
        }
        if (found) return;
        if (high[j] > th) {
            double saved_low = low[j];
            bool saved_open = low_open[j];
            if (th > low[j] || (th == low[j] && !low_open[j])) {
                low[j] = th;
                low_open[j] = true;
            }
            walk(2 * idx + 2);
            low[j] = saved_low;
            low_open[j] = saved_open;
        }
    }
};

} // namespace detail

// If the sample can be misclassified, returns a point of its box that the
// tree assigns a different class; otherwise nullopt.
inline std::optional<std::vector<double>> attack_witness(const Tree& tree, const Dataset& d,
                                                         int i, const AttackModel& attack) {
    tree.check_dims(d.p);
    PerturbationBox box = PerturbationBox::around(d, i, attack);
    for (int leaf : reachable_leaves(tree, box)) {
        if (tree.leaves[leaf] == d.y[i]) continue;
        detail::WitnessWalker w(tree, box, leaf);
        w.walk(0);
        if (w.found) return w.found;
    }
    return std::nullopt;
}

} // namespace roct
