#pragma once

#include <algorithm>
#include <array>
#include <vector>

#include "roct/common.hpp"
#include "roct/dataset.hpp"
#include "roct/tree.hpp"

namespace roct {

struct SplitScore {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.5; // worst-case weighted Gini, in [0, 0.5]
    int left_count = 0;    // boxes entirely left of the threshold
    int right_count = 0;
    int straddle_count = 0;
};

namespace detail {

// n_side * gini_side for class counts (u, v) reduces to 2uv/(u+v).
inline double gini_mass(double u, double v) {
    double s = u + v;
    return s <= 0.0 ? 0.0 : 2.0 * u * v / s;
}

} // namespace detail

// Worst-case weighted Gini impurity of a split: the adversary places each
// straddling sample on either side to maximize the weighted impurity. All
// placements of the per-class straddler counts are enumerated exactly.
inline double worst_case_gini(std::array<int, 2> left, std::array<int, 2> right,
                              std::array<int, 2> straddle) {
    for (auto& c : {left, right, straddle})
        if (c[0] < 0 || c[1] < 0) throw Error("counts must be nonnegative");
    const double total = left[0] + left[1] + right[0] + right[1] + straddle[0] + straddle[1];
    if (total == 0.0) return 0.0;
    double worst = 0.0;
    for (int x0 = 0; x0 <= straddle[0]; ++x0) {
        for (int x1 = 0; x1 <= straddle[1]; ++x1) {
            double g = detail::gini_mass(left[0] + x0, left[1] + x1) +
                       detail::gini_mass(right[0] + straddle[0] - x0, right[1] + straddle[1] - x1);
            worst = std::max(worst, g);
        }
    }
    return worst / total;
}

namespace detail {

class GreedyFitter {
public:
    GreedyFitter(const Dataset& d, const AttackModel& attack, int depth)
        : d_(d), depth_(depth), num_nodes_((1 << depth) - 1) {
        boxes_.reserve(d.n);
        for (int i = 0; i < d.n; ++i) boxes_.push_back(PerturbationBox::around(d, i, attack));
        // Padding nodes reference a non-constant feature so padded trees stay
        // expressible in the solver encodings.
        for (int j = 0; j < d.p; ++j) {
            bool constant = d.n >= 2;
            for (int i = 1; i < d.n && constant; ++i) constant = d.at(i, j) == d.at(0, j);
            if (!constant || d.n < 2) { pad_feature_ = j; break; }
        }
        nodes_.assign(num_nodes_, {pad_feature_, 1.0});
        leaves_.assign(size_t(1) << depth, 0);
    }

    Tree fit() {
        std::vector<int> all(d_.n);
        for (int i = 0; i < d_.n; ++i) all[i] = i;
        Region region;
        region.low.assign(d_.p, 0.0);
        region.low_open.assign(d_.p, false);
        region.high.assign(d_.p, 1.0);
        fit_node(0, 0, all, region, majority(all, 0));
        return Tree(depth_, std::move(nodes_), std::move(leaves_));
    }

private:
    struct Region {
        std::vector<double> low;
        std::vector<bool> low_open;
        std::vector<double> high;
    };

    int majority(const std::vector<int>& samples, int fallback) const {
        int c1 = 0;
        for (int i : samples) c1 += d_.y[i];
        int c0 = static_cast<int>(samples.size()) - c1;
        if (c1 > c0) return 1;
        if (c0 > c1) return 0;
        return fallback;
    }

    // Effective interval of sample i's box inside the node region.
    void effective(const Region& r, int i, int j, double& lo, bool& lo_open, double& hi) const {
        lo = boxes_[i].low[j];
        lo_open = false;
        if (r.low[j] > lo || (r.low[j] == lo && r.low_open[j])) {
            lo = r.low[j];
            lo_open = r.low_open[j];
        }
        hi = std::min(boxes_[i].high[j], r.high[j]);
    }

    bool fully_contained(const Region& r, int i) const {
        for (int j = 0; j < d_.p; ++j) {
            double lo = boxes_[i].low[j];
            if (lo < r.low[j] || (lo == r.low[j] && r.low_open[j])) return false;
            if (boxes_[i].high[j] > r.high[j]) return false;
        }
        return true;
    }

    void pad_subtree(int heap_idx, int level, int label) {
        if (level == depth_) {
            leaves_[heap_idx - num_nodes_] = label;
            return;
        }
        nodes_[heap_idx] = {pad_feature_, 1.0}; // pass-through: everything routes left
        pad_subtree(2 * heap_idx + 1, level + 1, label);
        pad_subtree(2 * heap_idx + 2, level + 1, label);
    }

    void fit_node(int heap_idx, int level, const std::vector<int>& samples,
                  const Region& region, int fallback) {
        if (level == depth_) {
            std::vector<int> contained;
            for (int i : samples)
                if (fully_contained(region, i)) contained.push_back(i);
            leaves_[heap_idx - num_nodes_] = majority(contained, fallback);
            return;
        }
        if (samples.empty()) {
            pad_subtree(heap_idx, level, fallback);
            return;
        }
        const int node_major = majority(samples, fallback);

        int c1 = 0;
        for (int i : samples) c1 += d_.y[i];
        int c0 = static_cast<int>(samples.size()) - c1;
        if (c0 == 0 || c1 == 0) { // pure
            pad_subtree(heap_idx, level, node_major);
            return;
        }
        const double node_gini = gini_mass(c0, c1) / samples.size();

        SplitScore best;
        best.impurity = node_gini;
        bool found = false;
        for (int j = 0; j < d_.p; ++j) {
            // Candidate gaps: consecutive distinct box endpoints of the node's
            // samples, restricted to the interior of the node region so no
            // split creates an empty descendant region.
            std::vector<double> ends;
            for (int i : samples) {
                double lo, hi;
                bool lo_open;
                effective(region, i, j, lo, lo_open, hi);
                ends.push_back(lo);
                ends.push_back(hi);
            }
            std::sort(ends.begin(), ends.end());
            ends.erase(std::unique(ends.begin(), ends.end()), ends.end());
            for (size_t k = 0; k + 1 < ends.size(); ++k) {
                const double th = (ends[k] + ends[k + 1]) / 2.0;
                if (!(th > region.low[j] && th < region.high[j])) continue;

                std::array<int, 2> lc{0, 0}, rc{0, 0}, sc{0, 0};
                for (int i : samples) {
                    double lo, hi;
                    bool lo_open;
                    effective(region, i, j, lo, lo_open, hi);
                    bool can_left = lo < th || (lo == th && !lo_open);
                    bool can_right = hi > th;
                    if (can_left && can_right) ++sc[d_.y[i]];
                    else if (can_left) ++lc[d_.y[i]];
                    else ++rc[d_.y[i]];
                }
                const double score = worst_case_gini(lc, rc, sc);
                if (score < best.impurity - 1e-12) {
                    best = {j, th, score, lc[0] + lc[1], rc[0] + rc[1], sc[0] + sc[1]};
                    found = true;
                }
            }
        }

        if (!found) { // no split improves the worst-case impurity
            pad_subtree(heap_idx, level, node_major);
            return;
        }

        nodes_[heap_idx] = {best.feature, best.threshold};
        std::vector<int> left_samples, right_samples;
        for (int i : samples) {
            double lo, hi;
            bool lo_open;
            effective(region, i, best.feature, lo, lo_open, hi);
            if (lo < best.threshold || (lo == best.threshold && !lo_open))
                left_samples.push_back(i);
            if (hi > best.threshold) right_samples.push_back(i);
        }

        Region left_region = region;
        left_region.high[best.feature] = std::min(left_region.high[best.feature], best.threshold);
        fit_node(2 * heap_idx + 1, level + 1, left_samples, left_region, node_major);

        Region right_region = region;
        right_region.low[best.feature] = best.threshold;
        right_region.low_open[best.feature] = true;
        fit_node(2 * heap_idx + 2, level + 1, right_samples, right_region, node_major);
    }

    const Dataset& d_;
    int depth_;
    int num_nodes_;
    int pad_feature_ = 0;
    std::vector<PerturbationBox> boxes_;
    std::vector<Tree::Node> nodes_;
    std::vector<int> leaves_;
};

} // namespace detail

// GROOT-style greedy robust tree: recursive top-down splitting scored by the
// worst-case Gini impurity, straddling samples descending into both children.
inline Tree fit_greedy(const Dataset& d, const AttackModel& attack, int depth) {
    if (depth < 0) throw Error("depth must be >= 0");
    if (attack.p() != d.p) throw Error("attack model dimension mismatch");
    detail::GreedyFitter fitter(d, attack, depth);
    return fitter.fit();
}

} // namespace roct
