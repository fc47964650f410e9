#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "roct/adversary.hpp"
#include "roct/common.hpp"
#include "roct/dataset.hpp"
#include "roct/solver_bridge.hpp"
#include "roct/tree.hpp"

namespace roct {

namespace detail {

// splitmix64; keeps the shuffle independent of the standard library.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed + 0x9e3779b97f4a7c15ull) {}
    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    // uniform in [0, n)
    uint64_t below(uint64_t n) { return n == 0 ? 0 : next() % n; }

private:
    uint64_t state_;
};

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

} // namespace detail

// Deterministic stratified split: per class, indices are shuffled with the
// seeded generator and the first round(fraction * count) go to train. Both
// halves are returned in ascending sample order.
inline std::pair<std::vector<int>, std::vector<int>> stratified_split(const std::vector<int>& y,
                                                                      double train_fraction,
                                                                      uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw Error("train fraction must be in (0,1)");
    detail::Rng rng(seed);
    std::vector<int> train, test;
    for (int cls = 0; cls <= 1; ++cls) {
        std::vector<int> idx;
        for (size_t i = 0; i < y.size(); ++i)
            if (y[i] == cls) idx.push_back(static_cast<int>(i));
        detail::shuffle(idx, rng);
        const size_t k = static_cast<size_t>(std::llround(train_fraction * double(idx.size())));
        for (size_t i = 0; i < idx.size(); ++i)
            (i < k ? train : test).push_back(idx[i]);
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {std::move(train), std::move(test)};
}

// Stratified fold ids: per class, shuffled indices are dealt round-robin, so
// every fold's class proportions sit within one sample of the global ones.
inline std::vector<int> stratified_folds(const std::vector<int>& y, int folds, uint64_t seed) {
    if (folds < 2) throw Error("need at least 2 folds");
    detail::Rng rng(seed);
    std::vector<int> fold_of(y.size(), 0);
    for (int cls = 0; cls <= 1; ++cls) {
        std::vector<int> idx;
        for (size_t i = 0; i < y.size(); ++i)
            if (y[i] == cls) idx.push_back(static_cast<int>(i));
        detail::shuffle(idx, rng);
        for (size_t i = 0; i < idx.size(); ++i) fold_of[idx[i]] = static_cast<int>(i % folds);
    }
    return fold_of;
}

struct ExperimentPlan {
    std::vector<double> epsilons;          // one experiment row per value, or
    std::optional<AttackModel> deltas;     // a single explicit attack model
    std::vector<int> depths;
    std::vector<FitMethod> methods;
    uint64_t seed = 0;
    double train_fraction = 0.8;
    int folds = 3;
    FitOptions fit_options;

    void validate() const {
        if (epsilons.empty() && !deltas) throw Error("plan needs epsilons or delta vectors");
        if (depths.empty()) throw Error("plan needs at least one depth");
        if (methods.empty()) throw Error("plan needs at least one method");
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw Error("train fraction must be in (0,1)");
        if (folds < 2) throw Error("need at least 2 folds");
    }
};

struct ExperimentCell {
    std::string attack_label;
    FitMethod method = FitMethod::greedy;
    int chosen_depth = 0;
    double cv_score = 0.0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    int train_errors = 0;
    std::string status;
};

namespace detail {

// Fit with a fallback: methods that cannot return an incumbent in
// time are replaced by the constant majority classifier.
inline SolveResult fit_or_dummy(const Dataset& train, const AttackModel& attack, int depth,
                                FitMethod method, const FitOptions& opts,
                                const std::optional<SolverConfig>& solver, bool& dummy) {
    try {
        dummy = false;
        return fit(train, attack, depth, method, opts, solver);
    } catch (const NoIncumbentError&) {
        dummy = true;
        SolveResult res;
        res.tree = Tree::constant(depth, train.majority_class());
        res.objective = train.minority_count();
        res.status = SolveStatus::timeout_with_incumbent;
        return res;
    }
}

} // namespace detail

// The desk-scale protocol: seeded stratified train/test split, per method a
// stratified cross validation over the depth grid scored by adversarial
// accuracy, refit at the winning depth, test-set evaluation.
inline std::vector<ExperimentCell> run_experiment(const Dataset& d, const ExperimentPlan& plan,
                                                  const std::optional<SolverConfig>& solver =
                                                      std::nullopt) {
    plan.validate();
    for (FitMethod m : plan.methods)
        if (method_needs_solver(m) && !solver)
            throw Error(std::string(to_string(m)) + " requires a solver configuration");

    auto [train_idx, test_idx] = stratified_split(d.y, plan.train_fraction, plan.seed);
    Dataset train = d.subset(train_idx);
    Dataset test = d.subset(test_idx);
    std::vector<int> fold_of = stratified_folds(train.y, plan.folds, plan.seed + 1);

    std::vector<std::pair<std::string, AttackModel>> attacks;
    if (plan.deltas) {
        attacks.emplace_back("delta", *plan.deltas);
    } else {
        for (double eps : plan.epsilons)
            attacks.emplace_back(detail::fmt_double_shortest(eps), AttackModel::uniform(eps, d.p));
    }

    std::vector<ExperimentCell> cells;
    for (const auto& [label, attack] : attacks) {
        for (FitMethod method : plan.methods) {
            ExperimentCell cell;
            cell.attack_label = label;
            cell.method = method;
            try {
                double best_score = -1.0;
                int best_depth = plan.depths.front();
                for (int depth : plan.depths) {
                    double score_sum = 0.0;
                    int scored = 0;
                    for (int f = 0; f < plan.folds; ++f) {
                        std::vector<int> fit_rows, val_rows;
                        for (int i = 0; i < train.n; ++i)
                            (fold_of[i] == f ? val_rows : fit_rows).push_back(i);
                        if (val_rows.empty() || fit_rows.empty()) continue;
                        Dataset fit_part = train.subset(fit_rows);
                        Dataset val_part = train.subset(val_rows);
                        bool dummy = false;
                        SolveResult r = detail::fit_or_dummy(fit_part, attack, depth, method,
                                                             plan.fit_options, solver, dummy);
                        score_sum += adversarial_accuracy(r.tree, val_part, attack);
                        ++scored;
                    }
                    const double score = scored ? score_sum / scored : 0.0;
                    if (score > best_score + 1e-12) {
                        best_score = score;
                        best_depth = depth;
                    }
                }
                bool dummy = false;
                SolveResult r = detail::fit_or_dummy(train, attack, best_depth, method,
                                                     plan.fit_options, solver, dummy);
                cell.chosen_depth = best_depth;
                cell.cv_score = best_score;
                cell.train_accuracy = adversarial_accuracy(r.tree, train, attack);
                cell.test_accuracy = adversarial_accuracy(r.tree, test, attack);
                cell.train_errors = r.objective;
                cell.status = dummy ? "dummy" : to_string(r.status);
            } catch (const std::exception& e) {
                cell.status = std::string("error: ") + e.what();
            }
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

inline std::string experiment_to_csv(const std::vector<ExperimentCell>& cells) {
    std::ostringstream out;
    out << "epsilon,method,depth,cv_adv_accuracy,train_adv_accuracy,test_adv_accuracy,"
           "train_errors,status\n";
    for (const auto& c : cells) {
        out << c.attack_label << "," << to_string(c.method) << "," << c.chosen_depth << ","
            << detail::fmt_double_shortest(c.cv_score) << ","
            << detail::fmt_double_shortest(c.train_accuracy) << ","
            << detail::fmt_double_shortest(c.test_accuracy) << "," << c.train_errors << ","
            << c.status << "\n";
    }
    return out.str();
}

} // namespace roct
