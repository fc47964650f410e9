#include <doctest.h>

#include "roct/matching_bound.hpp"
#include "test_util.hpp"

using namespace roct;

namespace {

const Dataset xor4({0, 0, 1, 1, 0, 1, 1, 0}, {0, 0, 1, 1}, 4, 2);

ConflictGraph make_graph(int nl, int nr, const std::vector<std::pair<int, int>>& edges) {
    ConflictGraph g;
    for (int i = 0; i < nl; ++i) g.v0.push_back(i);
    for (int j = 0; j < nr; ++j) g.v1.push_back(nl + j);
    g.adj.resize(nl);
    for (auto [u, v] : edges) g.adj[u].push_back(v);
    for (auto& a : g.adj) std::sort(a.begin(), a.end());
    return g;
}

} // namespace

TEST_CASE("coincident opposite-label points conflict at every epsilon") {
    Dataset d({0.4, 0.4}, {0, 1}, 2, 1);
    for (double eps : {0.0, 0.1, 0.5}) {
        auto g = build_conflict_graph(d, AttackModel::uniform(eps, 1));
        CHECK(g.num_edges() == 1);
    }
}

TEST_CASE("XOR at eps 0.1 has no conflicts") {
    auto g = build_conflict_graph(xor4, AttackModel::uniform(0.1, 2));
    CHECK(g.num_edges() == 0);
    CHECK(adversarial_accuracy_bound(xor4, AttackModel::uniform(0.1, 2)) == 1.0);
}

TEST_CASE("same-label overlaps never create edges") {
    Dataset d({0.4, 0.41}, {1, 1}, 2, 1);
    auto g = build_conflict_graph(d, AttackModel::uniform(0.2, 1));
    CHECK(g.v0.empty());
    CHECK(g.num_edges() == 0);
}

TEST_CASE("boxes must overlap in every dimension") {
    Dataset d({0.1, 0.1, 0.15, 0.9}, {0, 1}, 2, 2);
    auto g = build_conflict_graph(d, AttackModel::uniform(0.1, 2));
    CHECK(g.num_edges() == 0); // second feature is far apart
    auto g2 = build_conflict_graph(d, AttackModel::uniform(0.4, 2));
    CHECK(g2.num_edges() == 1);
}

TEST_CASE("matching on simple graphs") {
    CHECK(max_matching(make_graph(3, 3, {})).cardinality == 0);
    // complete bipartite 2x3 is bounded by the smaller side
    CHECK(max_matching(make_graph(2, 3, {{0, 0}, {0, 1}, {0, 2}, {1, 0}, {1, 1}, {1, 2}}))
              .cardinality == 2);
    auto res = max_matching(make_graph(2, 2, {{0, 0}, {1, 0}}));
    CHECK(res.cardinality == 1);
    REQUIRE(res.pairs.size() == 1);
    CHECK(res.pairs[0].first == 0);
}

TEST_CASE("hopcroft-karp equals brute-force enumeration on random graphs") {
    testutil::Rng rng(61);
    for (int round = 0; round < 100; ++round) {
        int nl = 1 + rng.below(6);
        int nr = 1 + rng.below(6);
        std::vector<std::pair<int, int>> edges;
        std::vector<std::vector<int>> adj(nl);
        for (int u = 0; u < nl; ++u)
            for (int v = 0; v < nr; ++v)
                if (rng.below(100) < 35) {
                    edges.emplace_back(u, v);
                    adj[u].push_back(v);
                }
        int fast = max_matching(make_graph(nl, nr, edges)).cardinality;
        int brute = testutil::brute_force_matching(adj);
        CHECK(fast == brute);
    }
}

TEST_CASE("a matching of 2 certifies at least 2 unavoidable errors") {
    // two overlapping opposite pairs, far from each other
    Dataset d({0.1, 0.12, 0.8, 0.82}, {0, 1, 0, 1}, 4, 1);
    auto g = build_conflict_graph(d, AttackModel::uniform(0.05, 1));
    CHECK(max_matching(g).cardinality == 2);
    CHECK(adversarial_accuracy_bound(d, AttackModel::uniform(0.05, 1)) ==
          doctest::Approx(0.5));
}

TEST_CASE("full-range boxes leave only the majority class") {
    testutil::Rng rng(67);
    for (int round = 0; round < 20; ++round) {
        int n = 2 + rng.below(10);
        Dataset d = testutil::random_dataset(rng, n, 1 + rng.below(2));
        int ones = 0;
        for (int v : d.y) ones += v;
        double majority = double(std::max(ones, n - ones)) / n;
        CHECK(adversarial_accuracy_bound(d, AttackModel::uniform(1.0, d.p)) ==
              doctest::Approx(majority));
    }
}

TEST_CASE("bound rejects empty data") {
    Dataset d({}, {}, 0, 1);
    CHECK_THROWS_AS(adversarial_accuracy_bound(d, AttackModel::uniform(0.1, 1)), Error);
}

TEST_CASE("sweep is non-increasing and hits the asymptotes") {
    testutil::Rng rng(71);
    Dataset d = testutil::random_dataset(rng, 12, 2);
    std::vector<double> grid;
    for (int k = 0; k <= 20; ++k) grid.push_back(k / 20.0);
    auto sweep = epsilon_sweep(d, grid);
    REQUIRE(sweep.size() == grid.size());
    for (size_t k = 1; k < sweep.size(); ++k) CHECK(sweep[k].second <= sweep[k - 1].second + 1e-15);
    int ones = 0;
    for (int v : d.y) ones += v;
    CHECK(sweep.back().second == doctest::Approx(double(std::max(ones, d.n - ones)) / d.n));

    std::string csv = sweep_to_csv(sweep);
    CHECK(csv.rfind("epsilon,bound\n", 0) == 0);
    CHECK(csv == sweep_to_csv(sweep)); // deterministic bytes
}

TEST_CASE("bound stays 1.0 when no opposite pair coincides at eps 0") {
    Dataset d({0.2, 0.6}, {0, 1}, 2, 1);
    auto sweep = epsilon_sweep(d, {0.0});
    CHECK(sweep[0].second == 1.0);
}

TEST_CASE("epsilon selection inverts the bound curve") {
    // class 0 clustered near 0, class 1 staggered so the matching grows one
    // pair at a time; the first overlap needs eps = 0.2.
    Dataset d({0.0, 0.02, 0.04, 0.06, 0.46, 0.56, 0.68, 0.82},
              {0, 0, 0, 0, 1, 1, 1, 1}, 8, 1);
    auto choices = select_epsilons(d);
    REQUIRE(choices.size() == 3);
    for (const auto& c : choices) CHECK(c.epsilon >= 0.199);
    CHECK(choices[0].epsilon <= choices[1].epsilon);
    CHECK(choices[1].epsilon <= choices[2].epsilon);
    CHECK(choices[0].epsilon == doctest::Approx(0.2).epsilon(0.02));
    CHECK(choices[0].bound == doctest::Approx(7.0 / 8.0));
    CHECK(choices[1].bound == doctest::Approx(6.0 / 8.0));
    CHECK(choices[2].bound == doctest::Approx(5.0 / 8.0));
}

TEST_CASE("epsilon selection rejects degenerate inputs") {
    Dataset constant_label({0.1, 0.9}, {1, 1}, 2, 1);
    CHECK_THROWS_AS(select_epsilons(constant_label), Error);

    // coincident opposite points: the bound equals the majority fraction
    // already at eps = 0
    Dataset coincident({0.4, 0.4}, {0, 1}, 2, 1);
    CHECK_THROWS_AS(select_epsilons(coincident), Error);
}

TEST_CASE("vertex order only relabels the graph") {
    testutil::Rng rng(73);
    Dataset d = testutil::random_dataset(rng, 10, 2);
    AttackModel a = AttackModel::uniform(0.2, 2);
    int base = max_matching(build_conflict_graph(d, a)).cardinality;
    std::vector<int> perm(d.n);
    for (int i = 0; i < d.n; ++i) perm[i] = i;
    for (int round = 0; round < 5; ++round) {
        for (size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(int(i))]);
        Dataset shuffled = d.subset(perm);
        CHECK(max_matching(build_conflict_graph(shuffled, a)).cardinality == base);
    }
}
