#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "roct/adversary.hpp"
#include "roct/common.hpp"
#include "roct/dataset.hpp"
#include "roct/matching_bound.hpp"
#include "roct/thresholds.hpp"
#include "roct/tree.hpp"

namespace roct {

struct SearchBudget {
    double wall_seconds = std::numeric_limits<double>::infinity();
    uint64_t node_limit = std::numeric_limits<uint64_t>::max();
    std::optional<Tree> incumbent;
};

enum class SolveStatus { optimal, feasible, timeout_with_incumbent };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::feasible: return "feasible";
        case SolveStatus::timeout_with_incumbent: return "timeout-with-incumbent";
    }
    return "?";
}

struct SolveResult {
    Tree tree;
    int objective = 0; // training adversarial error count, re-verified
    SolveStatus status = SolveStatus::optimal;
    uint64_t nodes_expanded = 0;
    double seconds = 0.0;
};

struct ExactOptions {
    bool use_matching_bound = true;
    bool use_raw_values = false;
};

namespace detail {

struct StopSearch {
    SolveStatus reason;
};

// Depth-first search over (feature, threshold-gap) choices per decision node
// in heap order. Each sample carries the bitmask of leaves it can still
// reach under the true (path-refined) box semantics; leaf labels join the
// search at the last level unless no live sample straddles the node's pair.
class ExactSearcher {
public:
    ExactSearcher(const Dataset& d, const AttackModel& attack, int depth,
                  const SearchBudget& budget, const ExactOptions& opts)
        : d_(d), attack_(attack), depth_(depth), budget_(budget), opts_(opts),
          num_nodes_((1 << depth) - 1), num_leaves_(1 << depth) {
        cands_ = candidate_thresholds(d, attack, opts.use_raw_values);
        // The pass-through split routes every sample left (box highs are
        // clipped to 1). Listed first so it canonically represents the
        // "nothing goes right" behavior under the dedup below.
        splits_.push_back({cands_.pass_through_feature(), 1.0});
        for (int j = 0; j < d.p; ++j)
            for (double th : cands_.split_positions(j)) splits_.push_back({j, th});

        boxes_.reserve(d.n);
        for (int i = 0; i < d.n; ++i) boxes_.push_back(PerturbationBox::around(d, i, attack));
        masks_.assign(d.n, (uint64_t(1) << num_leaves_) - 1);
        doomed_.assign(d.n, 0);
        chosen_.assign(num_nodes_, {0, 1.0});
        labels_.assign(num_leaves_, -1);

        // Behavior of each (split, sample) against the raw box; the refined
        // interval only differs when an ancestor splits the same feature.
        raw_bits_.assign(splits_.size(), {});
        for (size_t s = 0; s < splits_.size(); ++s) {
            raw_bits_[s].resize(d.n);
            for (int i = 0; i < d.n; ++i) {
                const bool can_left = boxes_[i].low[splits_[s].feature] <= splits_[s].threshold;
                const bool can_right = boxes_[i].high[splits_[s].feature] > splits_[s].threshold;
                raw_bits_[s][i] =
                    static_cast<char>('0' + (can_left ? 1 : 0) + (can_right ? 2 : 0));
            }
        }

        if (opts.use_matching_bound) conflicts_ = build_conflict_graph(d, attack);
    }

    SolveResult run() {
        auto t0 = std::chrono::steady_clock::now();
        if (std::isfinite(budget_.wall_seconds) && budget_.wall_seconds < 1e9) {
            deadline_ = t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                 std::chrono::duration<double>(budget_.wall_seconds));
        } else {
            deadline_ = std::chrono::steady_clock::time_point::max();
        }

        if (budget_.incumbent) {
            const Tree& inc = *budget_.incumbent;
            if (inc.depth != depth_) throw Error("incumbent depth does not match search depth");
            inc.check_dims(d_.p);
            best_tree_ = inc;
            best_cost_ = adversarial_error_count(inc, d_, attack_);
        } else {
            best_tree_ = Tree::constant(depth_, d_.majority_class());
            for (auto& nd : best_tree_.nodes) nd.feature = cands_.pass_through_feature();
            best_cost_ = d_.minority_count();
        }

        SolveStatus status = SolveStatus::optimal;
        if (depth_ >= 1 && best_cost_ > 0) {
            try {
                search(0);
            } catch (const StopSearch& stop) {
                status = stop.reason;
            }
        }

        SolveResult res;
        res.tree = best_tree_;
        res.objective = adversarial_error_count(best_tree_, d_, attack_);
        res.status = status;
        res.nodes_expanded = nodes_expanded_;
        res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (res.objective != best_cost_) throw Error("exact solver objective verification failed");
        return res;
    }

private:
    struct Split {
        int feature;
        double threshold;
    };

    void tick() {
        if (++nodes_expanded_ >= budget_.node_limit)
            throw StopSearch{SolveStatus::feasible};
        if ((nodes_expanded_ & 0x3ff) == 0 && std::chrono::steady_clock::now() >= deadline_)
            throw StopSearch{SolveStatus::timeout_with_incumbent};
    }

    static int level_of(int node) {
        int lvl = 0;
        for (int v = node + 1; v > 1; v >>= 1) ++lvl; // floor(log2(node+1))
        return lvl;
    }

    // Feature-j interval of sample i after replaying the path to `node`.
    void refined_interval(int node, int i, int j, double& lo, bool& lo_open, double& hi) const {
        lo = boxes_[i].low[j];
        hi = boxes_[i].high[j];
        lo_open = false;
        int cur = node;
        while (cur > 0) {
            int parent = (cur - 1) / 2;
            if (chosen_[parent].feature == j) {
                double th = chosen_[parent].threshold;
                if (cur == 2 * parent + 1) {
                    hi = std::min(hi, th);
                } else if (th > lo || (th == lo && !lo_open)) {
                    lo = th;
                    lo_open = true;
                }
            }
            cur = parent;
        }
    }

    // doom bookkeeping -------------------------------------------------

    void doom(int i, std::vector<int>& log) {
        if (!doomed_[i]) {
            doomed_[i] = 1;
            ++doomed_count_;
            log.push_back(i);
        }
    }
    void undo_doom(const std::vector<int>& log) {
        for (int i : log) {
            doomed_[i] = 0;
            --doomed_count_;
        }
    }

    void assign_leaf(int slot, int cls, std::vector<int>& doom_log) {
        labels_[slot] = static_cast<int8_t>(cls);
        const uint64_t bit = uint64_t(1) << slot;
        for (int i = 0; i < d_.n; ++i)
            if ((masks_[i] & bit) && d_.y[i] != cls) doom(i, doom_log);
    }

    // Matching lower bound restricted to live samples; simple augmenting paths
    // on the precomputed conflict graph.
    int live_matching_bound() const {
        const auto& g = conflicts_;
        const int nl = static_cast<int>(g.v0.size());
        const int nr = static_cast<int>(g.v1.size());
        std::vector<int> match_r(nr, -1);
        std::vector<char> seen(nr);
        std::vector<char> alive_l(nl), alive_r(nr);
        for (int u = 0; u < nl; ++u) alive_l[u] = !doomed_[g.v0[u]];
        for (int v = 0; v < nr; ++v) alive_r[v] = !doomed_[g.v1[v]];

        std::function<bool(int)> try_augment = [&](int u) {
            for (int v : g.adj[u]) {
                if (!alive_r[v] || seen[v]) continue;
                seen[v] = 1;
                if (match_r[v] < 0 || try_augment(match_r[v])) {
                    match_r[v] = u;
                    return true;
                }
            }
            return false;
        };

        int card = 0;
        for (int u = 0; u < nl; ++u) {
            if (!alive_l[u]) continue;
            std::fill(seen.begin(), seen.end(), 0);
            if (try_augment(u)) ++card;
        }
        return card;
    }

    void record_incumbent() {
        std::vector<Tree::Node> nodes(num_nodes_);
        for (int m = 0; m < num_nodes_; ++m) nodes[m] = {chosen_[m].feature, chosen_[m].threshold};
        std::vector<int> leaves(num_leaves_);
        for (int t = 0; t < num_leaves_; ++t) leaves[t] = labels_[t];
        best_tree_ = Tree(depth_, std::move(nodes), std::move(leaves));
        best_cost_ = doomed_count_;
    }

    void search(int m) {
        if (doomed_count_ >= best_cost_) return;
        if (m == num_nodes_) {
            record_incumbent();
            return;
        }
        if (opts_.use_matching_bound && doomed_count_ + live_matching_bound() >= best_cost_)
            return;

        const int lvl = level_of(m);
        const int span = num_leaves_ >> lvl;
        const int first_leaf = (m + 1 - (1 << lvl)) * span;
        const uint64_t span_mask = ((span == 64 ? ~uint64_t(0) : (uint64_t(1) << span) - 1))
                                   << first_leaf;
        const uint64_t left_mask = span_mask & (((uint64_t(1) << (span / 2)) - 1) << first_leaf);
        const uint64_t right_mask = span_mask & ~left_mask;
        const bool last_level = m >= num_nodes_ / 2;

        // Samples that can still enter this node.
        std::vector<int> touched;
        for (int i = 0; i < d_.n; ++i)
            if (masks_[i] & span_mask) touched.push_back(i);

        // Features split on by an ancestor need the path-refined interval;
        // all others keep their precomputed raw behavior.
        std::vector<char> feature_on_path(d_.p, 0);
        for (int cur = m; cur > 0;) {
            cur = (cur - 1) / 2;
            feature_on_path[chosen_[cur].feature] = 1;
        }

        std::unordered_set<std::string> seen_behavior;
        std::string key(touched.size(), 0);

        for (size_t si = 0; si < splits_.size(); ++si) {
            const Split& s = splits_[si];
            bool any_left = false;
            if (!feature_on_path[s.feature]) {
                const auto& bits = raw_bits_[si];
                for (size_t k = 0; k < touched.size(); ++k) {
                    key[k] = bits[touched[k]];
                    any_left = any_left || ((key[k] - '0') & 1) != 0;
                }
            } else {
                for (size_t k = 0; k < touched.size(); ++k) {
                    int i = touched[k];
                    double lo, hi;
                    bool lo_open;
                    refined_interval(m, i, s.feature, lo, lo_open, hi);
                    bool can_left = lo < s.threshold || (lo == s.threshold && !lo_open);
                    bool can_right = hi > s.threshold;
                    any_left = any_left || can_left;
                    key[k] = static_cast<char>('0' + (can_left ? 1 : 0) + (can_right ? 2 : 0));
                }
            }
            // "Nothing goes left" is the mirror of a pass-through split with
            // swapped subtrees and, unlike it, would leave a region no
            // threshold in [0,1] can empty; skip it.
            if (!touched.empty() && !any_left) continue;
            if (!seen_behavior.insert(key).second) continue;

            tick();
            chosen_[m] = {s.feature, s.threshold};

            std::vector<std::pair<int, uint64_t>> mask_log;
            for (size_t k = 0; k < touched.size(); ++k) {
                int i = touched[k];
                const int bits = key[k] - '0';
                uint64_t cut = 0;
                if (!(bits & 1)) cut |= left_mask;   // cannot go left
                if (!(bits & 2)) cut |= right_mask;  // cannot go right
                uint64_t nm = masks_[i] & ~cut;
                if (nm != masks_[i]) {
                    mask_log.emplace_back(i, masks_[i]);
                    masks_[i] = nm;
                }
            }

            if (!last_level) {
                search(m + 1);
            } else {
                branch_labels(m, first_leaf);
            }

            for (auto& [i, old] : mask_log) masks_[i] = old;
        }
        chosen_[m] = {0, 1.0};
    }

    void branch_labels(int m, int first_leaf) {
        const int l0 = first_leaf;
        const int l1 = first_leaf + 1;
        const uint64_t pair_mask = (uint64_t(3)) << l0;

        // When every live sample touching this pair reaches that single leaf
        // only, the label choice decomposes and per-leaf majority is optimal.
        bool decomposes = true;
        int cnt[2][2] = {{0, 0}, {0, 0}}; // [leaf-of-pair][label]
        for (int i = 0; i < d_.n; ++i) {
            if (doomed_[i] || !(masks_[i] & pair_mask)) continue;
            if (masks_[i] == uint64_t(1) << l0) ++cnt[0][d_.y[i]];
            else if (masks_[i] == uint64_t(1) << l1) ++cnt[1][d_.y[i]];
            else { decomposes = false; break; }
        }

        if (decomposes) {
            std::vector<int> doom_log;
            int c0 = cnt[0][1] > cnt[0][0] ? 1 : 0;
            int c1 = cnt[1][1] > cnt[1][0] ? 1 : 0;
            assign_leaf(l0, c0, doom_log);
            assign_leaf(l1, c1, doom_log);
            search(m + 1);
            undo_doom(doom_log);
            labels_[l0] = labels_[l1] = -1;
            return;
        }

        for (int c0 = 0; c0 <= 1; ++c0) {
            for (int c1 = 0; c1 <= 1; ++c1) {
                std::vector<int> doom_log;
                assign_leaf(l0, c0, doom_log);
                assign_leaf(l1, c1, doom_log);
                search(m + 1);
                undo_doom(doom_log);
                labels_[l0] = labels_[l1] = -1;
            }
        }
    }

    const Dataset& d_;
    const AttackModel& attack_;
    int depth_;
    SearchBudget budget_;
    ExactOptions opts_;
    int num_nodes_;
    int num_leaves_;

    ThresholdCandidates cands_;
    std::vector<Split> splits_;
    std::vector<std::string> raw_bits_; // [split][sample] behavior characters
    std::vector<PerturbationBox> boxes_;
    std::vector<uint64_t> masks_;
    std::vector<char> doomed_;
    int doomed_count_ = 0;
    std::vector<Split> chosen_;
    std::vector<int8_t> labels_;
    ConflictGraph conflicts_;

    Tree best_tree_;
    int best_cost_ = 0;
    uint64_t nodes_expanded_ = 0;
    std::chrono::steady_clock::time_point deadline_;
};

} // namespace detail

// Branch-and-bound over candidate-threshold trees. Proven optimal when the
// search space is exhausted (or the matching bound closes it); otherwise an
// anytime incumbent whose objective is always the verified error count.
inline SolveResult solve_exact(const Dataset& d, const AttackModel& attack, int depth,
                               const SearchBudget& budget = {}, const ExactOptions& opts = {}) {
    if (depth < 0) throw Error("depth must be >= 0");
    if (depth > 6) throw Error("exact solver supports depth <= 6");
    if (attack.p() != d.p) throw Error("attack model dimension mismatch");
    detail::ExactSearcher searcher(d, attack, depth, budget, opts);
    return searcher.run();
}

// Exhaustive enumeration of every tree over the candidate thresholds,
// evaluating each with the adversary module. The oracle under the pruned
// search; refuses instances above the cap.
inline int brute_force_reference(const Dataset& d, const AttackModel& attack, int depth,
                                 double cap = 1e7, bool use_raw_values = false) {
    if (depth < 0) throw Error("depth must be >= 0");
    if (depth > 6) throw Error("brute force supports depth <= 6");
    const int num_nodes = (1 << depth) - 1;
    const int num_leaves = 1 << depth;

    ThresholdCandidates cands = candidate_thresholds(d, attack, use_raw_values);
    std::vector<Tree::Node> splits;
    for (int j = 0; j < d.p; ++j)
        for (double th : cands.split_positions(j)) splits.push_back({j, th});

    const double work = std::pow(double(splits.size()), num_nodes) * std::pow(2.0, num_leaves);
    if (work > cap)
        throw Error(detail::strprintf("brute force search space %.3g exceeds cap %.3g", work, cap));

    std::vector<PerturbationBox> boxes;
    boxes.reserve(d.n);
    for (int i = 0; i < d.n; ++i) boxes.push_back(PerturbationBox::around(d, i, attack));

    int best = d.minority_count(); // constant classifier fallback / depth 0
    if (depth == 0 || best == 0) return best;

    Tree t;
    t.depth = depth;
    t.nodes.assign(num_nodes, {0, 1.0});
    t.leaves.assign(num_leaves, 0);

    std::vector<size_t> pick(num_nodes, 0);
    std::vector<uint64_t> masks(d.n);
    while (true) {
        for (int m = 0; m < num_nodes; ++m) t.nodes[m] = splits[pick[m]];
        for (int i = 0; i < d.n; ++i) masks[i] = reachable_leaf_mask(t, boxes[i]);

        for (uint64_t lab = 0; lab < (uint64_t(1) << num_leaves); ++lab) {
            int errors = 0;
            for (int i = 0; i < d.n; ++i) {
                uint64_t wrong = d.y[i] ? ~lab : lab;
                if (masks[i] & wrong) ++errors;
                if (errors >= best) break;
            }
            best = std::min(best, errors);
            if (best == 0) return 0;
        }

        int m = num_nodes - 1;
        while (m >= 0 && ++pick[m] == splits.size()) pick[m--] = 0;
        if (m < 0) break;
    }
    return best;
}

} // namespace roct
