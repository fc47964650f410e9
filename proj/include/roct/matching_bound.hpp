#pragma once

#include <algorithm>
#include <deque>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

#include "roct/common.hpp"
#include "roct/dataset.hpp"

namespace roct {

// Bipartite graph joining opposite-label samples whose perturbation boxes
// intersect. A maximum matching on it lower-bounds unavoidable errors.
struct ConflictGraph {
    std::vector<int> v0;                 // sample indices with label 0
    std::vector<int> v1;                 // sample indices with label 1
    std::vector<std::vector<int>> adj;   // per v0 position, sorted v1 positions

    size_t num_edges() const {
        size_t e = 0;
        for (const auto& a : adj) e += a.size();
        return e;
    }
};

inline ConflictGraph build_conflict_graph(const Dataset& d, const AttackModel& attack) {
    if (attack.p() != d.p) throw Error("attack model dimension mismatch");
    ConflictGraph g;
    for (int i = 0; i < d.n; ++i) (d.y[i] == 0 ? g.v0 : g.v1).push_back(i);
    g.adj.resize(g.v0.size());
    for (size_t a = 0; a < g.v0.size(); ++a) {
        const int i = g.v0[a];
        for (size_t b = 0; b < g.v1.size(); ++b) {
            const int j = g.v1[b];
            bool overlap = true;
            for (int f = 0; f < d.p && overlap; ++f) {
                double lo = std::max(attack.low(d, i, f), attack.low(d, j, f));
                double hi = std::min(attack.high(d, i, f), attack.high(d, j, f));
                overlap = lo <= hi;
            }
            if (overlap) g.adj[a].push_back(static_cast<int>(b));
        }
    }
    return g;
}

struct MatchingResult {
    int cardinality = 0;
    std::vector<std::pair<int, int>> pairs; // matched (sample in v0, sample in v1)
};

// Hopcroft–Karp. Vertices are processed in ascending order, so the result is
// deterministic for a fixed graph.
inline MatchingResult max_matching(const ConflictGraph& g) {
    const int nl = static_cast<int>(g.v0.size());
    const int nr = static_cast<int>(g.v1.size());
    const int kFree = -1;
    std::vector<int> match_l(nl, kFree), match_r(nr, kFree);
    std::vector<int> dist(nl);

    auto bfs = [&]() {
        std::deque<int> q;
        bool found = false;
        for (int u = 0; u < nl; ++u) {
            if (match_l[u] == kFree) {
                dist[u] = 0;
                q.push_back(u);
            } else {
                dist[u] = std::numeric_limits<int>::max();
            }
        }
        while (!q.empty()) {
            int u = q.front();
            q.pop_front();
            for (int v : g.adj[u]) {
                int w = match_r[v];
                if (w == kFree) {
                    found = true;
                } else if (dist[w] == std::numeric_limits<int>::max()) {
                    dist[w] = dist[u] + 1;
                    q.push_back(w);
                }
            }
        }
        return found;
    };

    std::function<bool(int)> dfs = [&](int u) {
        for (int v : g.adj[u]) {
            int w = match_r[v];
            if (w == kFree || (dist[w] == dist[u] + 1 && dfs(w))) {
                match_l[u] = v;
                match_r[v] = u;
                return true;
            }
        }
        dist[u] = std::numeric_limits<int>::max();
        return false;
    };

    MatchingResult res;
    while (bfs()) {
        for (int u = 0; u < nl; ++u)
            if (match_l[u] == kFree && dfs(u)) ++res.cardinality;
    }
    for (int u = 0; u < nl; ++u)
        if (match_l[u] != kFree)
            res.pairs.emplace_back(g.v0[u], g.v1[match_l[u]]);
    return res;
}

// Matching upper bound: no classifier can adversarially score above (n - M) / n,
// where M is the maximum matching cardinality of the conflict graph.
inline double adversarial_accuracy_bound(const Dataset& d, const AttackModel& attack) {
    if (d.n == 0) throw Error("adversarial accuracy bound undefined for empty data");
    MatchingResult m = max_matching(build_conflict_graph(d, attack));
    return double(d.n - m.cardinality) / d.n;
}

inline std::vector<std::pair<double, double>> epsilon_sweep(const Dataset& d,
                                                            const std::vector<double>& grid) {
    std::vector<std::pair<double, double>> out;
    out.reserve(grid.size());
    for (double eps : grid) {
        if (eps < 0.0 || eps > 1.0) throw Error("sweep epsilon outside [0,1]");
        out.emplace_back(eps, adversarial_accuracy_bound(d, AttackModel::uniform(eps, d.p)));
    }
    return out;
}

inline std::string sweep_to_csv(const std::vector<std::pair<double, double>>& sweep) {
    std::ostringstream out;
    out << "epsilon,bound\n";
    for (const auto& [eps, bound] : sweep)
        out << detail::fmt_double_shortest(eps) << "," << detail::fmt_double_shortest(bound) << "\n";
    return out.str();
}

struct EpsilonChoice {
    double fraction;
    double epsilon;
    double bound;
};

// Picks, per requested fraction f, the smallest epsilon on a 1e-3 grid whose
// bound is closest to b_max - f * (b_max - b_min), where b_max is the bound
// at eps = 0 and b_min the majority-class fraction (the curve's asymptotes).
inline std::vector<EpsilonChoice> select_epsilons(const Dataset& d,
                                                  std::vector<double> fractions = {0.25, 0.5, 0.75}) {
    if (d.n == 0) throw Error("cannot select epsilons on empty data");
    int ones = 0;
    for (int v : d.y) ones += v;
    if (ones == 0 || ones == d.n) throw Error("epsilon selection needs both classes present");

    const int kGrid = 1000; // eps = k / kGrid
    std::vector<double> cache(kGrid + 1, -1.0);
    auto bound_at = [&](int k) {
        if (cache[k] < 0.0)
            cache[k] = adversarial_accuracy_bound(d, AttackModel::uniform(double(k) / kGrid, d.p));
        return cache[k];
    };

    const double b_max = bound_at(0);
    const double b_min = double(std::max(ones, d.n - ones)) / d.n;
    if (!(b_max > b_min))
        throw Error("bound range is degenerate: the bound at eps=0 already equals the majority fraction");

    // First grid index whose bound is <= target (bounds are non-increasing).
    auto first_leq = [&](double target) {
        int lo = 0, hi = kGrid;
        while (lo < hi) {
            int mid = (lo + hi) / 2;
            if (bound_at(mid) <= target) hi = mid;
            else lo = mid + 1;
        }
        return lo;
    };

    std::vector<EpsilonChoice> out;
    for (double f : fractions) {
        if (!(f >= 0.0 && f <= 1.0)) throw Error("fractions must be in [0,1]");
        const double target = b_max - f * (b_max - b_min);
        int k = first_leq(target);
        if (k > 0) {
            double d_here = target - bound_at(k);
            double d_prev = bound_at(k - 1) - target;
            if (d_prev <= d_here) k = k - 1; // ties prefer the smaller epsilon
        }
        // Smallest epsilon achieving the winning bound value.
        k = first_leq(bound_at(k));
        out.push_back({f, double(k) / kGrid, bound_at(k)});
    }
    return out;
}

} // namespace roct
