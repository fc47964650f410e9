#include <doctest.h>

#include "roct/exact.hpp"
#include "roct/greedy.hpp"
#include "roct/margin.hpp"
#include "roct/matching_bound.hpp"
#include "test_util.hpp"

using namespace roct;

namespace {

const Dataset xor4({0, 0, 1, 1, 0, 1, 1, 0}, {0, 0, 1, 1}, 4, 2);
const Dataset abc3({0.25, 0.42, 0.60}, {0, 1, 1}, 3, 1);

} // namespace

TEST_CASE("XOR at eps 0.1 solves to full robustness at depth 2") {
    AttackModel a = AttackModel::uniform(0.1, 2);
    SolveResult res = solve_exact(xor4, a, 2);
    CHECK(res.objective == 0);
    CHECK(res.status == SolveStatus::optimal);
    CHECK(adversarial_accuracy(res.tree, xor4, a) == 1.0);
}

TEST_CASE("depth 0 returns the best constant classifier") {
    Dataset d({0.1, 0.2, 0.9}, {1, 1, 0}, 3, 1);
    SolveResult res = solve_exact(d, AttackModel::uniform(0.1, 1), 0);
    CHECK(res.objective == 1);
    CHECK(res.tree.depth == 0);
    CHECK(res.tree.leaves[0] == 1);
    CHECK(res.status == SolveStatus::optimal);
}

TEST_CASE("brute force on the worked instance finds exactly one error") {
    CHECK(brute_force_reference(abc3, AttackModel::uniform(0.1, 1), 1) == 1);
}

TEST_CASE("brute force on separable data at eps 0 is error free") {
    Dataset d({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}, 4, 1);
    CHECK(brute_force_reference(d, AttackModel::uniform(0.0, 1), 1) == 0);
}

TEST_CASE("brute force refuses oversized instances") {
    testutil::Rng rng(89);
    Dataset d = testutil::random_dataset(rng, 16, 3);
    CHECK_THROWS_WITH_AS(brute_force_reference(d, AttackModel::uniform(0.1, 3), 2, 10.0),
                         doctest::Contains("cap"), Error);
}

TEST_CASE("pruned search matches brute force with and without the matching bound") {
    testutil::Rng rng(97);
    for (int round = 0; round < 40; ++round) {
        auto inst = testutil::random_instance(rng);
        int want = brute_force_reference(inst.data, inst.attack, inst.depth);
        for (bool matching : {true, false}) {
            ExactOptions opts;
            opts.use_matching_bound = matching;
            SolveResult res = solve_exact(inst.data, inst.attack, inst.depth, {}, opts);
            CHECK(res.status == SolveStatus::optimal);
            CHECK(res.objective == want);
        }
    }
}

TEST_CASE("objective dominates the matching cardinality") {
    testutil::Rng rng(101);
    for (int round = 0; round < 25; ++round) {
        auto inst = testutil::random_instance(rng);
        SolveResult res = solve_exact(inst.data, inst.attack, inst.depth);
        int matching = max_matching(build_conflict_graph(inst.data, inst.attack)).cardinality;
        CHECK(res.objective >= matching);
    }
}

TEST_CASE("anytime: limits yield a valid incumbent with a verified objective") {
    testutil::Rng rng(103);
    auto inst = testutil::random_instance(rng);
    int prev = inst.data.n + 1;
    for (uint64_t limit : {1ull, 4ull, 16ull, 64ull, 256ull, 1024ull, 1ull << 40}) {
        SearchBudget budget;
        budget.node_limit = limit;
        SolveResult res = solve_exact(inst.data, inst.attack, inst.depth, budget);
        CHECK(res.objective == adversarial_error_count(res.tree, inst.data, inst.attack));
        CHECK(res.objective <= prev);
        prev = res.objective;
        if (res.status == SolveStatus::optimal) break;
    }
}

TEST_CASE("a warm start never worsens the result") {
    testutil::Rng rng(107);
    for (int round = 0; round < 15; ++round) {
        auto inst = testutil::random_instance(rng);
        Tree greedy = fit_greedy(inst.data, inst.attack, inst.depth);
        int greedy_errors = adversarial_error_count(greedy, inst.data, inst.attack);
        SearchBudget budget;
        budget.incumbent = greedy;
        SolveResult res = solve_exact(inst.data, inst.attack, inst.depth, budget);
        CHECK(res.objective <= greedy_errors);
        CHECK(res.status == SolveStatus::optimal);
        CHECK(res.objective == brute_force_reference(inst.data, inst.attack, inst.depth));
    }
}

TEST_CASE("incumbent depth mismatch is rejected") {
    SearchBudget budget;
    budget.incumbent = Tree::constant(1, 0);
    CHECK_THROWS_AS(solve_exact(xor4, AttackModel::uniform(0.1, 2), 2, budget), Error);
}

TEST_CASE("depth 3 respects the matching bound and the XOR optimum") {
    AttackModel a2 = AttackModel::uniform(0.1, 2);
    SolveResult xor3 = solve_exact(xor4, a2, 3);
    CHECK(xor3.status == SolveStatus::optimal);
    CHECK(xor3.objective == 0);
    CHECK(adversarial_accuracy(xor3.tree, xor4, a2) == 1.0);

    // the conflict pair makes one error unavoidable at any depth
    AttackModel a1 = AttackModel::uniform(0.1, 1);
    SolveResult deep = solve_exact(abc3, a1, 3);
    CHECK(deep.status == SolveStatus::optimal);
    CHECK(deep.objective == 1);
}

TEST_CASE("all-constant data still solves via the constant classifier") {
    Dataset d({0.5, 0.5, 0.5}, {1, 1, 0}, 3, 1);
    SolveResult res = solve_exact(d, AttackModel::uniform(0.1, 1), 1);
    CHECK(res.objective == 1);
    CHECK(res.status == SolveStatus::optimal);
}

TEST_CASE("empty data solves to a zero-error constant tree") {
    Dataset d({}, {}, 0, 2);
    SolveResult res = solve_exact(d, AttackModel::uniform(0.1, 2), 1);
    CHECK(res.objective == 0);
    CHECK(res.status == SolveStatus::optimal);
}
