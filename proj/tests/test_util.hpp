#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "roct/adversary.hpp"
#include "roct/dataset.hpp"
#include "roct/matching_bound.hpp"
#include "roct/thresholds.hpp"
#include "roct/tree.hpp"

namespace testutil {

// splitmix64, independent of the library's internals.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}
    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    int below(int n) { return static_cast<int>(next() % static_cast<uint64_t>(n)); }
    double uniform() { return double(next() >> 11) / double(1ull << 53); }

private:
    uint64_t state_;
};

// Mixed continuous / quantized values so duplicated endpoints and clipping at
// 0 and 1 show up regularly.
inline roct::Dataset random_dataset(Rng& rng, int n, int p) {
    std::vector<double> x(static_cast<size_t>(n) * p);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) {
            double v = rng.uniform();
            if (rng.below(2) == 0) v = std::round(v * 10.0) / 10.0;
            x[static_cast<size_t>(i) * p + j] = v;
        }
        y[i] = rng.below(2);
    }
    return roct::Dataset(std::move(x), std::move(y), n, p);
}

inline bool all_features_constant(const roct::Dataset& d) {
    if (d.n < 2) return false;
    for (int j = 0; j < d.p; ++j) {
        bool constant = true;
        for (int i = 1; i < d.n && constant; ++i) constant = d.at(i, j) == d.at(0, j);
        if (!constant) return false;
    }
    return true;
}

struct RandomInstance {
    roct::Dataset data;
    roct::AttackModel attack;
    int depth;
    double epsilon;
};

// Draws (n, p, depth, eps) with the brute-force search space capped so the
// oracle stays cheap.
inline RandomInstance random_instance(Rng& rng, double work_cap = 2e6) {
    const double eps_grid[3] = {0.0, 0.05, 0.1};
    for (;;) {
        int depth = 1 + rng.below(2);
        int p = 1 + rng.below(3);
        int n = depth == 1 ? 1 + rng.below(16) : 2 + rng.below(15);
        double eps = eps_grid[rng.below(3)];
        roct::Dataset d = random_dataset(rng, n, p);
        if (all_features_constant(d)) continue;
        roct::AttackModel attack = roct::AttackModel::uniform(eps, p);
        auto cands = roct::candidate_thresholds(d, attack);
        double choices = 0;
        for (int j = 0; j < p; ++j) choices += double(cands.split_positions(j).size());
        double work = std::pow(choices, (1 << depth) - 1) * std::pow(2.0, 1 << depth);
        if (work > work_cap) continue;
        return {std::move(d), std::move(attack), depth, eps};
    }
}

// A random complete tree over the instance's candidate split positions.
inline roct::Tree random_tree(Rng& rng, const roct::Dataset& d, const roct::AttackModel& attack,
                              int depth) {
    auto cands = roct::candidate_thresholds(d, attack);
    std::vector<roct::Tree::Node> splits;
    splits.push_back({cands.pass_through_feature(), 1.0});
    for (int j = 0; j < d.p; ++j)
        if (!cands.values(j).empty())
            for (double th : cands.split_positions(j)) splits.push_back({j, th});
    std::vector<roct::Tree::Node> nodes;
    std::vector<int> leaves;
    for (int m = 0; m < (1 << depth) - 1; ++m)
        nodes.push_back(splits[rng.below(static_cast<int>(splits.size()))]);
    for (int lf = 0; lf < (1 << depth); ++lf) leaves.push_back(rng.below(2));
    return roct::Tree(depth, std::move(nodes), std::move(leaves));
}

// Exact reachable-leaf oracle: traverses every point of the product set over
// {box ends} union {thresholds of that feature inside the box}. Independent
// of the walker in the adversary module.
inline std::vector<int> corner_probe_leaves(const roct::Tree& tree,
                                            const roct::PerturbationBox& box) {
    const int p = static_cast<int>(box.low.size());
    std::vector<std::vector<double>> axis(p);
    for (int j = 0; j < p; ++j) {
        axis[j].push_back(box.low[j]);
        axis[j].push_back(box.high[j]);
        for (const auto& nd : tree.nodes)
            if (nd.feature == j && nd.threshold >= box.low[j] && nd.threshold <= box.high[j])
                axis[j].push_back(nd.threshold);
        std::sort(axis[j].begin(), axis[j].end());
        axis[j].erase(std::unique(axis[j].begin(), axis[j].end()), axis[j].end());
    }
    std::set<int> leaves;
    std::vector<size_t> pick(p, 0);
    std::vector<double> point(p);
    for (;;) {
        for (int j = 0; j < p; ++j) point[j] = axis[j][pick[j]];
        leaves.insert(tree.traverse(point.data()));
        int j = p - 1;
        while (j >= 0 && ++pick[j] == axis[j].size()) pick[j--] = 0;
        if (j < 0) break;
    }
    return {leaves.begin(), leaves.end()};
}

// Leaves reached by a uniform grid over the box (21 points per feature).
inline std::vector<int> grid_attack_leaves(const roct::Tree& tree,
                                           const roct::PerturbationBox& box,
                                           int points_per_feature = 21) {
    const int p = static_cast<int>(box.low.size());
    std::set<int> leaves;
    std::vector<int> pick(p, 0);
    std::vector<double> point(p);
    for (;;) {
        for (int j = 0; j < p; ++j) {
            double t = points_per_feature == 1
                           ? 0.0
                           : double(pick[j]) / double(points_per_feature - 1);
            point[j] = box.low[j] + t * (box.high[j] - box.low[j]);
        }
        leaves.insert(tree.traverse(point.data()));
        int j = p - 1;
        while (j >= 0 && ++pick[j] == points_per_feature) pick[j--] = 0;
        if (j < 0) break;
    }
    return {leaves.begin(), leaves.end()};
}

// Maximum matching by enumeration: DP over (left vertex, used-right mask).
inline int brute_force_matching(const std::vector<std::vector<int>>& adj) {
    const int nl = static_cast<int>(adj.size());
    std::map<std::pair<int, uint32_t>, int> memo;
    std::function<int(int, uint32_t)> go = [&](int u, uint32_t used) -> int {
        if (u == nl) return 0;
        auto key = std::make_pair(u, used);
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;
        int best = go(u + 1, used); // leave u unmatched
        for (int v : adj[u])
            if (!(used & (uint32_t(1) << v)))
                best = std::max(best, 1 + go(u + 1, used | (uint32_t(1) << v)));
        memo[key] = best;
        return best;
    };
    return go(0, 0);
}

} // namespace testutil
