#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "roct/common.hpp"
#include "roct/dataset.hpp"

namespace roct {

// Complete binary tree of fixed depth in heap layout: decision node i has
// children 2i+1 and 2i+2 (0-based); the 2^depth leaves are stored left to
// right. Branching is "left iff value <= threshold".
struct Tree {
    struct Node {
        int feature = 0;
        double threshold = 1.0;
    };

    int depth = 0;
    std::vector<Node> nodes;  // size 2^depth - 1
    std::vector<int> leaves;  // size 2^depth, classes in {0, 1}

    Tree() : leaves{0} {}
    Tree(int d, std::vector<Node> ns, std::vector<int> ls)
        : depth(d), nodes(std::move(ns)), leaves(std::move(ls)) {
        validate();
    }

    static Tree constant(int depth, int cls) {
        Tree t;
        t.depth = depth;
        t.nodes.assign((size_t(1) << depth) - 1, Node{0, 1.0});
        t.leaves.assign(size_t(1) << depth, cls);
        return t;
    }

    int num_nodes() const { return static_cast<int>(nodes.size()); }
    int num_leaves() const { return static_cast<int>(leaves.size()); }

    // Heap index of the first node on the last decision level.
    int last_level_begin() const { return num_nodes() / 2; }

    // Heap position of leaf slot s (0-based slots, left to right).
    int leaf_heap_index(int slot) const { return num_nodes() + slot; }

    void validate() const {
        if (depth < 0) throw Error("tree depth must be >= 0");
        if (depth > 25) throw Error("tree depth too large");
        if (nodes.size() != (size_t(1) << depth) - 1) throw Error("tree node count mismatch");
        if (leaves.size() != size_t(1) << depth) throw Error("tree leaf count mismatch");
        for (const Node& nd : nodes) {
            if (nd.feature < 0) throw Error("negative feature index");
            if (!(nd.threshold >= 0.0 && nd.threshold <= 1.0))
                throw Error("threshold outside [0,1]");
        }
        for (int c : leaves)
            if (c != 0 && c != 1) throw Error("leaf class must be 0 or 1");
    }

    void check_dims(int p) const {
        for (const Node& nd : nodes)
            if (nd.feature >= p)
                throw Error(detail::strprintf("tree references feature %d but data has %d features",
                                              nd.feature, p));
    }

    // Plain traversal of a single point; returns the leaf slot.
    int traverse(const double* point) const {
        int idx = 0;
        while (idx < num_nodes())
            idx = point[nodes[idx].feature] <= nodes[idx].threshold ? 2 * idx + 1 : 2 * idx + 2;
        return idx - num_nodes();
    }
    int predict(const std::vector<double>& point) const {
        return leaves[traverse(point.data())];
    }

    double standard_accuracy(const Dataset& d) const {
        if (d.n == 0) return 1.0;
        check_dims(d.p);
        int correct = 0;
        for (int i = 0; i < d.n; ++i)
            if (leaves[traverse(&d.x[static_cast<size_t>(i) * d.p])] == d.y[i]) ++correct;
        return double(correct) / d.n;
    }

    bool operator==(const Tree& o) const {
        if (depth != o.depth || leaves != o.leaves) return false;
        for (size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i].feature != o.nodes[i].feature ||
                nodes[i].threshold != o.nodes[i].threshold)
                return false;
        return true;
    }
};

// Schema: {"depth": d, "nodes": [{"feature": j, "threshold": t}, ...],
//          "leaves": [c, ...]} in heap order. Thresholds are written with 17
// significant digits so the round trip is bit-faithful.
inline std::string tree_to_json(const Tree& t) {
    std::ostringstream out;
    out << "{\"depth\": " << t.depth << ", \"nodes\": [";
    for (int i = 0; i < t.num_nodes(); ++i) {
        if (i) out << ", ";
        out << "{\"feature\": " << t.nodes[i].feature
            << ", \"threshold\": " << detail::fmt_double(t.nodes[i].threshold) << "}";
    }
    out << "], \"leaves\": [";
    for (int i = 0; i < t.num_leaves(); ++i) {
        if (i) out << ", ";
        out << t.leaves[i];
    }
    out << "]}";
    return out.str();
}

namespace detail {

[[noreturn]] inline void schema_error(const std::string& path, const std::string& what) {
    throw Error("tree schema violation at " + path + ": " + what);
}

inline long long require_int(const nlohmann::json& j, const std::string& path) {
    if (!j.is_number_integer()) schema_error(path, "expected an integer");
    return j.get<long long>();
}

} // namespace detail

// Parses and validates the schema above. If expect_p is given, feature
// indices must lie in [0, expect_p).
inline Tree tree_from_json(const std::string& text, std::optional<int> expect_p = std::nullopt) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) detail::schema_error("/", "expected an object");
    for (const char* key : {"depth", "nodes", "leaves"})
        if (!j.contains(key)) detail::schema_error("/", std::string("missing key '") + key + "'");

    long long depth = detail::require_int(j["depth"], "/depth");
    if (depth < 0 || depth > 25) detail::schema_error("/depth", "out of range");

    if (!j["nodes"].is_array()) detail::schema_error("/nodes", "expected an array");
    if (!j["leaves"].is_array()) detail::schema_error("/leaves", "expected an array");

    const size_t want_nodes = (size_t(1) << depth) - 1;
    const size_t want_leaves = size_t(1) << depth;
    if (j["nodes"].size() != want_nodes)
        detail::schema_error("/nodes", detail::strprintf("expected %zu entries for depth %lld",
                                                         want_nodes, depth));
    if (j["leaves"].size() != want_leaves)
        detail::schema_error("/leaves", detail::strprintf("expected %zu entries for depth %lld",
                                                          want_leaves, depth));

    std::vector<Tree::Node> nodes;
    nodes.reserve(want_nodes);
    for (size_t i = 0; i < want_nodes; ++i) {
        const std::string path = detail::strprintf("/nodes/%zu", i);
        const auto& nj = j["nodes"][i];
        if (!nj.is_object()) detail::schema_error(path, "expected an object");
        if (!nj.contains("feature") || !nj.contains("threshold"))
            detail::schema_error(path, "missing 'feature' or 'threshold'");
        long long f = detail::require_int(nj["feature"], path + "/feature");
        if (f < 0) detail::schema_error(path + "/feature", "negative feature index");
        if (expect_p && f >= *expect_p)
            detail::schema_error(path + "/feature",
                                 detail::strprintf("feature %lld out of range [0,%d)", f, *expect_p));
        if (!nj["threshold"].is_number()) detail::schema_error(path + "/threshold", "expected a number");
        double th = nj["threshold"].get<double>();
        if (!(th >= 0.0 && th <= 1.0)) detail::schema_error(path + "/threshold", "outside [0,1]");
        nodes.push_back({static_cast<int>(f), th});
    }
    std::vector<int> leaves;
    leaves.reserve(want_leaves);
    for (size_t i = 0; i < want_leaves; ++i) {
        const std::string path = detail::strprintf("/leaves/%zu", i);
        long long c = detail::require_int(j["leaves"][i], path);
        if (c != 0 && c != 1) detail::schema_error(path, "leaf class must be 0 or 1");
        leaves.push_back(static_cast<int>(c));
    }
    return Tree(static_cast<int>(depth), std::move(nodes), std::move(leaves));
}

inline void save_tree(const Tree& t, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path);
    out << tree_to_json(t) << "\n";
}

inline Tree load_tree(const std::string& path, std::optional<int> expect_p = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return tree_from_json(ss.str(), expect_p);
}

} // namespace roct
