#include <doctest.h>

#include <sys/stat.h>

#include <chrono>
#include <filesystem>
#include <fstream>

#include "roct/exact.hpp"
#include "roct/greedy.hpp"
#include "roct/solver_bridge.hpp"
#include "test_util.hpp"

using namespace roct;

namespace {

const Dataset abc3({0.25, 0.42, 0.60}, {0, 1, 1}, 3, 1);
const AttackModel abc_attack = AttackModel::uniform(0.1, 1);
const Dataset xor4({0, 0, 1, 1, 0, 1, 1, 0}, {0, 0, 1, 1}, 4, 2);

struct TempScript {
    std::string path;
    explicit TempScript(const std::string& name, const std::string& body) {
        path = (std::filesystem::temp_directory_path() / name).string();
        std::ofstream out(path);
        out << "#!/bin/sh\n" << body;
        out.close();
        chmod(path.c_str(), 0755);
    }
};

std::string write_temp_file(const std::string& name, const std::string& content) {
    auto path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream out(path);
    out << content;
    return path;
}

SolverConfig wcnf_solver_config(double timeout = 60.0) {
    SolverConfig cfg;
    cfg.command_template = std::string(ROCT_WCNF_SOLVE_PATH) + " {instance}";
    cfg.timeout_seconds = timeout;
    return cfg;
}

} // namespace

TEST_CASE("classic v-lines parse into a truth assignment") {
    TempScript script("roct_mock1.sh", "echo 's OPTIMUM FOUND'\necho 'v -1 2 3 0'\n");
    auto inst = write_temp_file("roct_mock1.wcnf", "p wcnf 3 1 2\n2 1 2 3 0\n");
    SolverConfig cfg;
    cfg.command_template = script.path + " {instance}";
    cfg.timeout_seconds = 10;
    auto res = run_maxsat(inst, cfg);
    REQUIRE(res.assignment.has_value());
    CHECK(res.optimal);
    CHECK_FALSE((*res.assignment)[1]);
    CHECK((*res.assignment)[2]);
    CHECK((*res.assignment)[3]);
}

TEST_CASE("2022 bitstring v-lines parse the same way") {
    TempScript script("roct_mock2.sh", "echo 's OPTIMUM FOUND'\necho 'v 011'\n");
    auto inst = write_temp_file("roct_mock2.wcnf", "p wcnf 3 1 2\n2 1 2 3 0\n");
    SolverConfig cfg;
    cfg.command_template = script.path + " {instance}";
    cfg.timeout_seconds = 10;
    auto res = run_maxsat(inst, cfg);
    REQUIRE(res.assignment.has_value());
    CHECK_FALSE((*res.assignment)[1]);
    CHECK((*res.assignment)[2]);
    CHECK((*res.assignment)[3]);
}

TEST_CASE("timeout keeps the last incumbent") {
    TempScript script("roct_mock3.sh",
                      "echo 'o 5'\necho 'v 1 -2 -3 0'\necho 'o 3'\necho 'v -1 2 -3 0'\nsleep 30\n");
    auto inst = write_temp_file("roct_mock3.wcnf", "p wcnf 3 1 2\n2 1 2 3 0\n");
    SolverConfig cfg;
    cfg.command_template = script.path + " {instance}";
    cfg.timeout_seconds = 1.0;
    auto res = run_maxsat(inst, cfg);
    CHECK(res.timed_out);
    CHECK_FALSE(res.optimal);
    REQUIRE(res.assignment.has_value());
    CHECK_FALSE((*res.assignment)[1]);
    CHECK((*res.assignment)[2]);
    REQUIRE(res.cost.has_value());
    CHECK(*res.cost == 3);
}

TEST_CASE("a half-written line at the kill point is never parsed") {
    TempScript script("roct_mock3b.sh",
                      "echo 'v -1 2 0'\nprintf 'v 1 -2'\nsleep 30\n");
    auto inst = write_temp_file("roct_mock3b.wcnf", "p wcnf 2 1 2\n2 1 2 0\n");
    SolverConfig cfg;
    cfg.command_template = script.path + " {instance}";
    cfg.timeout_seconds = 1.0;
    auto res = run_maxsat(inst, cfg);
    CHECK(res.timed_out);
    REQUIRE(res.assignment.has_value());
    // the terminated first model wins; the unterminated fragment is dropped
    CHECK_FALSE((*res.assignment)[1]);
    CHECK((*res.assignment)[2]);
}

TEST_CASE("an orphaned grandchild holding the pipe does not hang the bridge") {
    TempScript script("roct_mock3c.sh",
                      "sleep 60 &\necho 's OPTIMUM FOUND'\necho 'v 1 0'\nexit 0\n");
    auto inst = write_temp_file("roct_mock3c.wcnf", "p wcnf 1 1 2\n2 1 0\n");
    SolverConfig cfg;
    cfg.command_template = script.path + " {instance}";
    cfg.timeout_seconds = 30;
    auto t0 = std::chrono::steady_clock::now();
    auto res = run_maxsat(inst, cfg);
    double took = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(took < 10.0);
    REQUIRE(res.assignment.has_value());
    CHECK((*res.assignment)[1]);
    CHECK(res.optimal);
}

TEST_CASE("no model means no incumbent, not a crash") {
    TempScript script("roct_mock4.sh", "echo 'c nothing to report'\nexit 1\n");
    auto inst = write_temp_file("roct_mock4.wcnf", "p wcnf 1 1 2\n2 1 0\n");
    SolverConfig cfg;
    cfg.command_template = script.path + " {instance}";
    cfg.timeout_seconds = 10;
    auto res = run_maxsat(inst, cfg);
    CHECK_FALSE(res.assignment.has_value());
}

TEST_CASE("malformed v-lines raise a parse error naming the token") {
    TempScript script("roct_mock5.sh", "echo 'v 1 banana 0'\n");
    auto inst = write_temp_file("roct_mock5.wcnf", "p wcnf 2 1 2\n2 1 2 0\n");
    SolverConfig cfg;
    cfg.command_template = script.path + " {instance}";
    cfg.timeout_seconds = 10;
    CHECK_THROWS_WITH_AS(run_maxsat(inst, cfg), doctest::Contains("banana"), Error);
}

TEST_CASE("template validation") {
    SolverConfig cfg;
    cfg.command_template = "solver";
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.command_template = "solver {instance}";
    cfg.timeout_seconds = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("milp solution files parse name-value pairs") {
    TempScript script("roct_mock6.sh", "cp \"$2\" \"$3\"\necho optimal\n");
    auto inst = write_temp_file("roct_mock6.lp", "Minimize\n obj: e_0\nEnd\n");
    auto solfile = write_temp_file("roct_mock6.sol.src",
                                   "# Objective value = 1\ne_0 0\ne_1 1\nb_0 0.425\n");
    SolverConfig cfg;
    cfg.command_template = script.path + " {instance} " + solfile + " {solution}";
    cfg.timeout_seconds = 10;
    auto out = (std::filesystem::temp_directory_path() / "roct_mock6.sol").string();
    std::filesystem::remove(out);
    auto res = run_milp(inst, std::nullopt, cfg, out);
    REQUIRE(res.values.has_value());
    CHECK(res.optimal);
    CHECK(res.values->at("e_0") == 0.0);
    CHECK(res.values->at("e_1") == 1.0);
    CHECK(res.values->at("b_0") == 0.425);
}

TEST_CASE("a missing solution file is a no-incumbent outcome") {
    TempScript script("roct_mock7.sh", "echo 'time limit reached'\n");
    auto inst = write_temp_file("roct_mock7.lp", "Minimize\n obj: e_0\nEnd\n");
    SolverConfig cfg;
    cfg.command_template = script.path + " {instance} {solution}";
    cfg.timeout_seconds = 10;
    auto out = (std::filesystem::temp_directory_path() / "roct_mock7.sol").string();
    std::filesystem::remove(out);
    auto res = run_milp(inst, std::nullopt, cfg, out);
    CHECK_FALSE(res.values.has_value());
}

TEST_CASE("an infeasible report is a hard error") {
    TempScript script("roct_mock8.sh", "echo 'Model is INFEASIBLE'\n");
    auto inst = write_temp_file("roct_mock8.lp", "Minimize\n obj: e_0\nEnd\n");
    SolverConfig cfg;
    cfg.command_template = script.path + " {instance} {solution}";
    cfg.timeout_seconds = 10;
    auto out = (std::filesystem::temp_directory_path() / "roct_mock8.sol").string();
    CHECK_THROWS_WITH_AS(run_milp(inst, std::nullopt, cfg, out),
                         doctest::Contains("infeasible"), Error);
}

TEST_CASE("fit via the reference maxsat solver matches the exact objective") {
    testutil::Rng rng(157);
    SolverConfig cfg = wcnf_solver_config();
    int done = 0;
    for (int round = 0; round < 200 && done < 8; ++round) {
        auto inst = testutil::random_instance(rng);
        if (inst.data.n < 1 || inst.data.n > 6 || inst.depth > 1) continue;
        SolveResult want = solve_exact(inst.data, inst.attack, inst.depth);
        FitOptions opts;
        SolveResult got = fit(inst.data, inst.attack, inst.depth, FitMethod::maxsat, opts, cfg);
        CHECK(got.status == SolveStatus::optimal);
        CHECK(got.objective == want.objective);
        ++done;
    }
    CHECK(done >= 8);
}

TEST_CASE("fit maxsat solves XOR to full robustness") {
    SolveResult res = fit(xor4, AttackModel::uniform(0.1, 2), 2, FitMethod::maxsat, {},
                          wcnf_solver_config());
    CHECK(res.status == SolveStatus::optimal);
    CHECK(res.objective == 0);
    CHECK(adversarial_accuracy(res.tree, xor4, AttackModel::uniform(0.1, 2)) == 1.0);
}

TEST_CASE("fit milp through a mock solver replaying the optimal warm start") {
    // The mock copies its warm start to the solution file: a stand-in solver
    // that returns exactly the incumbent it was given.
    TempScript script("roct_mock9.sh", "cp \"$2\" \"$3\"\necho optimal\n");
    SolverConfig cfg;
    cfg.command_template = script.path + " {instance} {warmstart} {solution}";
    cfg.timeout_seconds = 10;

    testutil::Rng rng(163);
    for (int round = 0; round < 6; ++round) {
        auto inst = testutil::random_instance(rng);
        if (inst.data.n < 1) continue;
        // the greedy warm start is optimal iff greedy already matches exact;
        // keep instances where it does so "optimal" stays truthful
        Tree greedy = maximize_margin(fit_greedy(inst.data, inst.attack, inst.depth), inst.data,
                                      inst.attack);
        int greedy_errors = adversarial_error_count(greedy, inst.data, inst.attack);
        if (greedy_errors != solve_exact(inst.data, inst.attack, inst.depth).objective) continue;
        FitOptions opts;
        opts.warm = true;
        for (FitMethod method : {FitMethod::milp_continuous, FitMethod::milp_binary}) {
            SolveResult res = fit(inst.data, inst.attack, inst.depth, method, opts, cfg);
            CHECK(res.objective == greedy_errors);
            CHECK(res.status == SolveStatus::optimal);
        }
    }
}

TEST_CASE("fit methods validate their solver requirement") {
    CHECK_THROWS_WITH_AS(fit(abc3, abc_attack, 1, FitMethod::maxsat),
                         doctest::Contains("solver"), Error);
    CHECK_THROWS_AS(fit(abc3, abc_attack, 1, FitMethod::milp_continuous), Error);
}

TEST_CASE("fit greedy and exact ignore the solver and verify objectives") {
    SolveResult g = fit(abc3, abc_attack, 1, FitMethod::greedy);
    CHECK(g.objective == adversarial_error_count(g.tree, abc3, abc_attack));
    SolveResult e = fit(abc3, abc_attack, 1, FitMethod::exact);
    CHECK(e.status == SolveStatus::optimal);
    CHECK(e.objective == 1);
    CHECK(g.objective >= e.objective);
}

TEST_CASE("method names round-trip") {
    for (FitMethod m : {FitMethod::greedy, FitMethod::exact, FitMethod::maxsat,
                        FitMethod::milp_continuous, FitMethod::milp_binary})
        CHECK(parse_method(to_string(m)) == m);
    CHECK_THROWS_AS(parse_method("annealing"), Error);
}
