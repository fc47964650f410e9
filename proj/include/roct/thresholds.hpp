#pragma once

#include <algorithm>
#include <vector>

#include "roct/common.hpp"
#include "roct/dataset.hpp"

namespace roct {

// Index returned by the v^l / v^r lookups when the value falls outside the
// candidate list.
constexpr int kBelowAll = -1;
constexpr int kAboveAll = -2;

// Per feature, the sorted unique positions where the robust 0-1 loss can
// change: the clipped perturbed endpoints of the samples (default), or the
// raw unique feature values when use_raw_values is set.
struct ThresholdCandidates {
    std::vector<std::vector<double>> per_feature;
    std::vector<bool> degenerate; // constant column (n >= 2), no candidates

    int p() const { return static_cast<int>(per_feature.size()); }

    const std::vector<double>& values(int j) const { return per_feature[j]; }

    // Largest candidate <= value, or kBelowAll.
    int lower_index(int j, double value) const {
        const auto& v = per_feature[j];
        auto it = std::upper_bound(v.begin(), v.end(), value);
        if (it == v.begin()) return kBelowAll;
        return static_cast<int>(it - v.begin()) - 1;
    }
    // Smallest candidate >= value, or kAboveAll.
    int upper_index(int j, double value) const {
        const auto& v = per_feature[j];
        auto it = std::lower_bound(v.begin(), v.end(), value);
        if (it == v.end()) return kAboveAll;
        return static_cast<int>(it - v.begin());
    }

    // Distinct-behavior threshold positions for feature j: midpoints of the
    // gaps between consecutive candidates plus the two outer gaps, restricted
    // to [0, 1]. An empty candidate list yields the single pass-through
    // threshold 1.0.
    std::vector<double> split_positions(int j) const {
        const auto& v = per_feature[j];
        std::vector<double> out;
        if (v.empty()) {
            out.push_back(1.0);
            return out;
        }
        if (v.front() > 0.0) out.push_back(v.front() / 2.0);
        for (size_t k = 0; k + 1 < v.size(); ++k) out.push_back((v[k] + v[k + 1]) / 2.0);
        out.push_back((v.back() + 1.0) / 2.0);
        return out;
    }

    // Smallest gap between consecutive candidates over all features (1.0 when
    // no feature has two candidates).
    double min_gap() const {
        double g = 1.0;
        for (const auto& v : per_feature)
            for (size_t k = 0; k + 1 < v.size(); ++k) g = std::min(g, v[k + 1] - v[k]);
        return g;
    }

    bool all_degenerate() const {
        for (const auto& v : per_feature)
            if (!v.empty()) return false;
        return true;
    }

    // Lowest feature with candidates; used with threshold 1.0 for padding
    // nodes that route every sample left.
    int pass_through_feature() const {
        for (int j = 0; j < p(); ++j)
            if (!per_feature[j].empty()) return j;
        return 0;
    }
};

// Derives the candidate threshold set. With endpoints (default) each sample
// contributes its clipped box ends x - delta_left and x + delta_right;
// use_raw_values keeps the unique raw values instead (comparison mode).
// Constant columns are excluded when there is anything to separate (n >= 2).
inline ThresholdCandidates candidate_thresholds(const Dataset& d, const AttackModel& attack,
                                                bool use_raw_values = false) {
    if (attack.p() != d.p) throw Error("attack model dimension mismatch");
    ThresholdCandidates cands;
    cands.per_feature.resize(d.p);
    cands.degenerate.assign(d.p, false);
    for (int j = 0; j < d.p; ++j) {
        if (d.n >= 2) {
            bool constant = true;
            for (int i = 1; i < d.n && constant; ++i)
                constant = d.at(i, j) == d.at(0, j);
            if (constant) {
                cands.degenerate[j] = true;
                continue;
            }
        }
        auto& v = cands.per_feature[j];
        v.reserve(static_cast<size_t>(d.n) * 2);
        for (int i = 0; i < d.n; ++i) {
            if (use_raw_values) {
                v.push_back(d.at(i, j));
            } else {
                v.push_back(attack.low(d, i, j));
                v.push_back(attack.high(d, i, j));
            }
        }
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    return cands;
}

} // namespace roct
