#pragma once

#include <limits>
#include <vector>

#include "roct/adversary.hpp"
#include "roct/common.hpp"
#include "roct/dataset.hpp"
#include "roct/tree.hpp"

namespace roct {

namespace detail {

// Ancestor chain of a decision node, root first, with the branch direction
// taken towards `node`.
inline std::vector<std::pair<int, bool>> node_ancestors(int node) {
    std::vector<std::pair<int, bool>> up;
    while (node > 0) {
        int parent = (node - 1) / 2;
        up.emplace_back(parent, node == 2 * parent + 1);
        node = parent;
    }
    return {up.rbegin(), up.rend()};
}

} // namespace detail

// Re-centers every threshold in the widest interval of positions that keeps
// each training sample's behavior at that node unchanged, so reachable-leaf
// sets (and the training adversarial accuracy) are preserved. Nodes are
// processed root first: a node's constraints come from the box intervals
// refined along its (already re-centered) ancestor path, which keeps repeated
// features on a path consistent. Thresholds no sample constrains move to the
// center of what remains.
inline Tree maximize_margin(const Tree& tree, const Dataset& d, const AttackModel& attack) {
    tree.check_dims(d.p);
    if (attack.p() != d.p) throw Error("attack model dimension mismatch");
    const double kNoUpper = std::numeric_limits<double>::infinity();

    Tree out = tree;
    std::vector<double> lo(d.p), hi(d.p);
    std::vector<bool> lo_open(d.p);

    for (int m = 0; m < out.num_nodes(); ++m) {
        const int j = out.nodes[m].feature;
        const double th = out.nodes[m].threshold;
        const auto path = detail::node_ancestors(m);

        double lower = 0.0;
        double upper = kNoUpper;
        for (int i = 0; i < d.n; ++i) {
            for (int f = 0; f < d.p; ++f) {
                lo[f] = attack.low(d, i, f);
                hi[f] = attack.high(d, i, f);
                lo_open[f] = false;
            }
            bool reaches = true;
            for (const auto& [a, went_left] : path) {
                const int fa = out.nodes[a].feature;
                const double ta = out.nodes[a].threshold;
                if (went_left) {
                    if (!(lo[fa] < ta || (lo[fa] == ta && !lo_open[fa]))) {
                        reaches = false;
                        break;
                    }
                    hi[fa] = std::min(hi[fa], ta);
                } else {
                    if (!(hi[fa] > ta)) {
                        reaches = false;
                        break;
                    }
                    if (ta > lo[fa] || (ta == lo[fa] && !lo_open[fa])) {
                        lo[fa] = ta;
                        lo_open[fa] = true;
                    }
                }
            }
            if (!reaches) continue;

            // Keep this sample's (can go left, can go right) at m unchanged.
            if (lo[j] < th || (lo[j] == th && !lo_open[j]))
                lower = std::max(lower, lo[j]);
            else
                upper = std::min(upper, lo[j]);
            if (hi[j] > th)
                upper = std::min(upper, hi[j]);
            else
                lower = std::max(lower, hi[j]);
        }

        if (upper == kNoUpper) out.nodes[m].threshold = (lower + 1.0) / 2.0;
        else if (lower == upper) out.nodes[m].threshold = lower;
        else out.nodes[m].threshold = (lower + upper) / 2.0;
    }
    return out;
}

} // namespace roct
