#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "roct/adversary.hpp"
#include "roct/common.hpp"
#include "roct/dataset.hpp"
#include "roct/maxsat.hpp"
#include "roct/thresholds.hpp"
#include "roct/tree.hpp"

namespace roct {

enum class MilpMode { continuous, binary };

inline const char* to_string(MilpMode m) {
    return m == MilpMode::continuous ? "continuous" : "binary";
}

enum class ConstraintSense { le, ge, eq };

struct MilpVar {
    std::string name;
    bool is_binary = true;
    double lb = 0.0;
    double ub = 1.0;
};

struct MilpTerm {
    int var;
    double coeff;
};

struct MilpConstraint {
    std::string name;
    std::vector<MilpTerm> terms;
    ConstraintSense sense;
    double rhs;
};

// A threshold-selecting MILP over one of the two formulations. Carries the
// boxes, labels and candidate tables so warm starts and decoding are
// self-contained.
struct MilpModel {
    MilpMode mode = MilpMode::continuous;
    int depth = 0;
    int n = 0;
    int p = 0;
    int num_nodes = 0;
    int num_leaves = 0;
    double big_m = 2.0;
    double delta_strict = 1e-5;

    std::vector<MilpVar> vars;
    std::vector<MilpConstraint> constraints;
    std::vector<int> objective; // e variable indices, minimized with weight 1

    // decode tables
    std::vector<std::vector<int>> a_var;                    // [m][j], -1 for constant features
    std::vector<int> bprime_var;                            // [m], continuous mode
    std::vector<std::vector<std::vector<int>>> b_var;       // [m][j][v], binary mode
    std::vector<std::vector<std::array<int, 2>>> s_var;     // [m][i][side]
    std::vector<int> c_var;                                 // [t]
    std::vector<int> e_var;                                 // [i]
    std::vector<std::vector<double>> cand_values;           // [j]

    // data snapshot for warm starts and verification
    std::vector<std::vector<double>> box_low, box_high;     // [i][j]
    std::vector<int> labels;

    std::unordered_map<std::string, int> name_to_var;

    int add_var(const std::string& name, bool is_binary, double lb = 0.0, double ub = 1.0) {
        vars.push_back({name, is_binary, lb, ub});
        name_to_var.emplace(name, static_cast<int>(vars.size()) - 1);
        return static_cast<int>(vars.size()) - 1;
    }
};

// Builds the MILP for the chosen threshold formulation. Continuous mode keeps
// one threshold variable b_m per node and big-M constraints over the clipped
// box endpoints; binary mode mirrors the MaxSAT clause groups as 0-1
// inequalities with the ordered chain b_vm <= b_(v+1)m. Feature selection is
// the equality sum a_jm = 1 in both modes.
inline MilpModel build_milp(const Dataset& d, const AttackModel& attack, int depth,
                            MilpMode mode, bool use_raw_values = false) {
    if (depth < 1) throw Error("milp requires depth >= 1");
    if (d.n < 1) throw Error("milp requires at least one sample");
    if (attack.p() != d.p) throw Error("attack model dimension mismatch");

    ThresholdCandidates cands = candidate_thresholds(d, attack, use_raw_values);
    if (cands.all_degenerate())
        throw Error("all features are constant; nothing can be encoded");

    MilpModel mod;
    mod.mode = mode;
    mod.depth = depth;
    mod.n = d.n;
    mod.p = d.p;
    mod.num_nodes = (1 << depth) - 1;
    mod.num_leaves = 1 << depth;
    mod.cand_values = cands.per_feature;
    mod.delta_strict = std::min(1e-5, cands.min_gap() / 4.0);
    mod.labels = d.y;
    mod.box_low.assign(d.n, std::vector<double>(d.p));
    mod.box_high.assign(d.n, std::vector<double>(d.p));
    for (int i = 0; i < d.n; ++i) {
        for (int j = 0; j < d.p; ++j) {
            mod.box_low[i][j] = attack.low(d, i, j);
            mod.box_high[i][j] = attack.high(d, i, j);
        }
    }

    // global candidate offset per feature, for b_v_m names in binary mode
    std::vector<int> prefix(d.p, 0);
    for (int j = 1; j < d.p; ++j)
        prefix[j] = prefix[j - 1] + static_cast<int>(cands.values(j - 1).size());

    // variables ----------------------------------------------------------
    mod.a_var.assign(mod.num_nodes, std::vector<int>(d.p, -1));
    for (int m = 0; m < mod.num_nodes; ++m)
        for (int j = 0; j < d.p; ++j)
            if (!cands.values(j).empty())
                mod.a_var[m][j] = mod.add_var(detail::strprintf("a_%d_%d", j, m), true);

    if (mode == MilpMode::continuous) {
        mod.bprime_var.assign(mod.num_nodes, -1);
        for (int m = 0; m < mod.num_nodes; ++m)
            mod.bprime_var[m] = mod.add_var(detail::strprintf("b_%d", m), false, 0.0, 1.0);
    } else {
        mod.b_var.assign(mod.num_nodes, std::vector<std::vector<int>>(d.p));
        for (int m = 0; m < mod.num_nodes; ++m)
            for (int j = 0; j < d.p; ++j) {
                const int k = static_cast<int>(cands.values(j).size());
                mod.b_var[m][j].assign(k, -1);
                for (int v = 0; v < k; ++v)
                    mod.b_var[m][j][v] =
                        mod.add_var(detail::strprintf("b_%d_%d", prefix[j] + v, m), true);
            }
    }

    mod.s_var.assign(mod.num_nodes, std::vector<std::array<int, 2>>(d.n));
    for (int m = 0; m < mod.num_nodes; ++m)
        for (int i = 0; i < d.n; ++i)
            for (int side = 0; side < 2; ++side)
                mod.s_var[m][i][side] =
                    mod.add_var(detail::strprintf("s_%d_%d_%d", i, m, side), true);

    mod.c_var.resize(mod.num_leaves);
    for (int t = 0; t < mod.num_leaves; ++t)
        mod.c_var[t] = mod.add_var(detail::strprintf("c_%d", t), true);
    mod.e_var.resize(d.n);
    for (int i = 0; i < d.n; ++i) {
        mod.e_var[i] = mod.add_var(detail::strprintf("e_%d", i), true);
        mod.objective.push_back(mod.e_var[i]);
    }

    // constraints ---------------------------------------------------------
    for (int m = 0; m < mod.num_nodes; ++m) {
        MilpConstraint sel{detail::strprintf("sel_%d", m), {}, ConstraintSense::eq, 1.0};
        for (int j = 0; j < d.p; ++j)
            if (mod.a_var[m][j] >= 0) sel.terms.push_back({mod.a_var[m][j], 1.0});
        mod.constraints.push_back(std::move(sel));
    }

    if (mode == MilpMode::continuous) {
        // (box.low)·a_m >= b_m + delta - M * s_im0  and
        // (box.high)·a_m <= b_m + M * s_im1
        for (int m = 0; m < mod.num_nodes; ++m) {
            for (int i = 0; i < d.n; ++i) {
                MilpConstraint left{detail::strprintf("rl_%d_%d", i, m), {},
                                    ConstraintSense::ge, mod.delta_strict};
                MilpConstraint right{detail::strprintf("rr_%d_%d", i, m), {},
                                     ConstraintSense::le, 0.0};
                for (int j = 0; j < d.p; ++j) {
                    if (mod.a_var[m][j] < 0) continue;
                    left.terms.push_back({mod.a_var[m][j], mod.box_low[i][j]});
                    right.terms.push_back({mod.a_var[m][j], mod.box_high[i][j]});
                }
                left.terms.push_back({mod.bprime_var[m], -1.0});
                left.terms.push_back({mod.s_var[m][i][0], mod.big_m});
                right.terms.push_back({mod.bprime_var[m], -1.0});
                right.terms.push_back({mod.s_var[m][i][1], -mod.big_m});
                mod.constraints.push_back(std::move(left));
                mod.constraints.push_back(std::move(right));
            }
        }
    } else {
        for (int m = 0; m < mod.num_nodes; ++m) {
            for (int j = 0; j < d.p; ++j) {
                const auto& vals = cands.values(j);
                const int k = static_cast<int>(vals.size());
                if (k > 0 && vals[0] == 0.0) {
                    MilpConstraint anc{detail::strprintf("anc_%d_%d", prefix[j], m),
                                       {{mod.b_var[m][j][0], 1.0}},
                                       ConstraintSense::eq, 0.0};
                    mod.constraints.push_back(std::move(anc));
                }
                for (int v = 0; v + 1 < k; ++v) {
                    MilpConstraint ord{detail::strprintf("ord_%d_%d", prefix[j] + v, m),
                                       {{mod.b_var[m][j][v], 1.0}, {mod.b_var[m][j][v + 1], -1.0}},
                                       ConstraintSense::le, 0.0};
                    mod.constraints.push_back(std::move(ord));
                }
            }
        }
        for (int m = 0; m < mod.num_nodes; ++m) {
            for (int i = 0; i < d.n; ++i) {
                for (int j = 0; j < d.p; ++j) {
                    if (mod.a_var[m][j] < 0) continue;
                    const int vl = cands.lower_index(j, mod.box_low[i][j]);
                    const int vr = cands.upper_index(j, mod.box_high[i][j]);
                    MilpConstraint left{detail::strprintf("rl_%d_%d_%d", i, m, j), {},
                                        ConstraintSense::ge, 0.0};
                    left.terms.push_back({mod.a_var[m][j], -1.0});
                    if (vl != kBelowAll) left.terms.push_back({mod.b_var[m][j][vl], 1.0});
                    left.terms.push_back({mod.s_var[m][i][0], 1.0});
                    mod.constraints.push_back(std::move(left));

                    MilpConstraint right{detail::strprintf("rr_%d_%d_%d", i, m, j), {},
                                         ConstraintSense::ge, vr != kAboveAll ? -1.0 : 0.0};
                    right.terms.push_back({mod.a_var[m][j], -1.0});
                    if (vr != kAboveAll) right.terms.push_back({mod.b_var[m][j][vr], -1.0});
                    right.terms.push_back({mod.s_var[m][i][1], 1.0});
                    mod.constraints.push_back(std::move(right));
                }
            }
        }
    }

    // error counting: e_i >= sum(path s) + g_ti - depth
    for (int t = 0; t < mod.num_leaves; ++t) {
        const auto path = leaf_ancestors(t, depth);
        for (int i = 0; i < d.n; ++i) {
            MilpConstraint err{detail::strprintf("err_%d_%d", t, i), {}, ConstraintSense::le,
                               double(depth)};
            for (const auto& [m, left] : path)
                err.terms.push_back({mod.s_var[m][i][left ? 0 : 1], 1.0});
            if (d.y[i] == 0) {
                err.terms.push_back({mod.c_var[t], 1.0});
            } else {
                err.terms.push_back({mod.c_var[t], -1.0});
                err.rhs -= 1.0;
            }
            err.terms.push_back({mod.e_var[i], -1.0});
            mod.constraints.push_back(std::move(err));
        }
    }

    return mod;
}

// CPLEX-LP text with Minimize / Subject To / Bounds / Binaries sections,
// deterministic ordering and byte output.
inline std::string write_lp(const MilpModel& mod) {
    std::ostringstream out;
    auto term = [&](double coeff, const std::string& name, bool first) {
        if (coeff < 0) out << (first ? "- " : " - ");
        else out << (first ? "" : " + ");
        double a = std::fabs(coeff);
        if (a != 1.0) out << detail::fmt_double(a) << " ";
        out << name;
    };

    out << "Minimize\n obj: ";
    for (size_t k = 0; k < mod.objective.size(); ++k)
        term(1.0, mod.vars[mod.objective[k]].name, k == 0);
    out << "\nSubject To\n";
    for (const auto& con : mod.constraints) {
        out << " " << con.name << ": ";
        for (size_t k = 0; k < con.terms.size(); ++k)
            term(con.terms[k].coeff, mod.vars[con.terms[k].var].name, k == 0);
        switch (con.sense) {
            case ConstraintSense::le: out << " <= "; break;
            case ConstraintSense::ge: out << " >= "; break;
            case ConstraintSense::eq: out << " = "; break;
        }
        out << detail::fmt_double(con.rhs) << "\n";
    }
    out << "Bounds\n";
    for (const auto& v : mod.vars)
        if (!v.is_binary)
            out << " " << detail::fmt_double(v.lb) << " <= " << v.name << " <= "
                << detail::fmt_double(v.ub) << "\n";
    out << "Binaries\n";
    int on_line = 0;
    for (const auto& v : mod.vars) {
        if (!v.is_binary) continue;
        out << (on_line == 0 ? " " : " ") << v.name;
        if (++on_line == 10) {
            out << "\n";
            on_line = 0;
        }
    }
    if (on_line) out << "\n";
    out << "End\n";
    return out.str();
}

inline void write_lp_file(const MilpModel& mod, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << write_lp(mod);
}

// Values indexed like MilpModel::vars.
using MilpValues = std::vector<double>;

// The assignment a tree implies: a and b (or b') from the splits, s from the
// box endpoints against each threshold, c from the leaves, e from the paths.
inline MilpValues warm_start_values(const MilpModel& mod, const Tree& tree) {
    if (tree.depth != mod.depth) throw Error("tree depth does not match the model");
    tree.check_dims(mod.p);
    MilpValues vals(mod.vars.size(), 0.0);

    for (int m = 0; m < mod.num_nodes; ++m) {
        const int j = tree.nodes[m].feature;
        const double th = tree.nodes[m].threshold;
        if (mod.a_var[m][j] < 0) throw Error("tree splits on a feature without candidates");
        vals[mod.a_var[m][j]] = 1.0;
        if (mod.mode == MilpMode::continuous) {
            vals[mod.bprime_var[m]] = th;
        } else {
            const auto& vv = mod.cand_values[j];
            for (size_t v = 0; v < vv.size(); ++v)
                vals[mod.b_var[m][j][v]] = vv[v] > th ? 1.0 : 0.0;
        }
        for (int i = 0; i < mod.n; ++i) {
            // s_im0 may be forced by the strictness slack even when the box
            // cannot quite reach the left side; setting it is always feasible.
            const bool s0 = mod.mode == MilpMode::continuous
                                ? mod.box_low[i][j] < th + mod.delta_strict
                                : mod.box_low[i][j] <= th;
            vals[mod.s_var[m][i][0]] = s0 ? 1.0 : 0.0;
            vals[mod.s_var[m][i][1]] = mod.box_high[i][j] > th ? 1.0 : 0.0;
        }
    }
    for (int t = 0; t < mod.num_leaves; ++t) vals[mod.c_var[t]] = tree.leaves[t];

    for (int i = 0; i < mod.n; ++i) {
        bool err = false;
        for (int t = 0; t < mod.num_leaves && !err; ++t) {
            if (tree.leaves[t] == mod.labels[i]) continue;
            bool reaches = true;
            for (const auto& [m, left] : leaf_ancestors(t, mod.depth))
                if (vals[mod.s_var[m][i][left ? 0 : 1]] != 1.0) {
                    reaches = false;
                    break;
                }
            err = reaches;
        }
        vals[mod.e_var[i]] = err ? 1.0 : 0.0;
    }
    return vals;
}

// MST-style start file: one "name value" line per variable.
inline std::string write_warm_start(const MilpModel& mod, const Tree& tree) {
    MilpValues vals = warm_start_values(mod, tree);
    std::ostringstream out;
    for (size_t k = 0; k < mod.vars.size(); ++k)
        out << mod.vars[k].name << " " << detail::fmt_double_shortest(vals[k]) << "\n";
    return out.str();
}

inline void write_warm_start_file(const MilpModel& mod, const Tree& tree,
                                  const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << write_warm_start(mod, tree);
}

// First violated constraint or bound, if any (substitution check).
inline std::optional<std::string> check_feasible(const MilpModel& mod, const MilpValues& vals,
                                                 double tol = 1e-6) {
    if (vals.size() != mod.vars.size()) return "value vector size mismatch";
    for (size_t k = 0; k < mod.vars.size(); ++k) {
        const auto& v = mod.vars[k];
        double lb = v.is_binary ? 0.0 : v.lb;
        double ub = v.is_binary ? 1.0 : v.ub;
        if (vals[k] < lb - tol || vals[k] > ub + tol)
            return v.name + " violates its bounds";
        if (v.is_binary && std::fabs(vals[k] - std::round(vals[k])) > 1e-4)
            return v.name + " is not integral";
    }
    for (const auto& con : mod.constraints) {
        double lhs = 0.0;
        for (const auto& t : con.terms) lhs += t.coeff * vals[t.var];
        bool ok = true;
        switch (con.sense) {
            case ConstraintSense::le: ok = lhs <= con.rhs + tol; break;
            case ConstraintSense::ge: ok = lhs >= con.rhs - tol; break;
            case ConstraintSense::eq: ok = std::fabs(lhs - con.rhs) <= tol; break;
        }
        if (!ok)
            return detail::strprintf("constraint %s violated (lhs %s, rhs %s)",
                                     con.name.c_str(), detail::fmt_double(lhs).c_str(),
                                     detail::fmt_double(con.rhs).c_str());
    }
    return std::nullopt;
}

inline double objective_value(const MilpModel& mod, const MilpValues& vals) {
    double s = 0.0;
    for (int v : mod.objective) s += vals[v];
    return s;
}

struct MilpDecodeResult {
    Tree tree;
    int verified_errors = 0;
    int objective = 0; // rounded sum of e
};

// Rounds binaries (tolerance 1e-4), reads thresholds (b' directly, or the
// chain midpoint rule in binary mode), then re-verifies with the adversary.
inline MilpDecodeResult decode_tree(const MilpModel& mod, const MilpValues& vals,
                                    const Dataset& d, const AttackModel& attack) {
    if (vals.size() != mod.vars.size()) throw Error("value vector size mismatch");
    auto as_bit = [&](int var) {
        double v = vals[var];
        if (std::fabs(v) <= 1e-4) return 0;
        if (std::fabs(v - 1.0) <= 1e-4) return 1;
        throw Error(mod.vars[var].name + " is fractional beyond tolerance");
    };

    Tree t;
    t.depth = mod.depth;
    t.nodes.resize(mod.num_nodes);
    for (int m = 0; m < mod.num_nodes; ++m) {
        int feature = -1;
        for (int j = 0; j < mod.p; ++j) {
            if (mod.a_var[m][j] >= 0 && as_bit(mod.a_var[m][j])) {
                feature = j;
                break;
            }
        }
        if (feature < 0) throw Error("no feature selected at a node");
        double th;
        if (mod.mode == MilpMode::continuous) {
            th = clamp01(vals[mod.bprime_var[m]]);
        } else {
            const auto& vv = mod.cand_values[feature];
            const int k = static_cast<int>(vv.size());
            int first_true = k;
            for (int v = 0; v < k; ++v)
                if (as_bit(mod.b_var[m][feature][v])) {
                    first_true = v;
                    break;
                }
            if (first_true == k) th = (vv.back() + 1.0) / 2.0;
            else if (first_true == 0) th = vv.front() / 2.0;
            else th = (vv[first_true - 1] + vv[first_true]) / 2.0;
        }
        t.nodes[m] = {feature, th};
    }
    t.leaves.resize(mod.num_leaves);
    for (int lf = 0; lf < mod.num_leaves; ++lf) t.leaves[lf] = as_bit(mod.c_var[lf]);
    t.validate();

    MilpDecodeResult res;
    res.tree = std::move(t);
    for (int i = 0; i < mod.n; ++i) res.objective += as_bit(mod.e_var[i]);
    res.verified_errors = adversarial_error_count(res.tree, d, attack);
    if (res.verified_errors > res.objective)
        throw Error(detail::strprintf(
            "decoded tree has %d errors but the solution objective is %d (encoding bug)",
            res.verified_errors, res.objective));
    return res;
}

} // namespace roct
