#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "roct/tree.hpp"

namespace {

struct CliRun {
    int exit_code;
    std::string output;
};

CliRun run_cli(const std::string& args) {
    auto out_path = (std::filesystem::temp_directory_path() / "roct_cli_out.txt").string();
    std::string cmd = std::string(ROCT_CLI_PATH) + " " + args + " > " + out_path + " 2>&1";
    int status = std::system(cmd.c_str());
    CliRun run;
    run.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out_path);
    std::stringstream ss;
    ss << in.rdbuf();
    run.output = ss.str();
    return run;
}

const std::string kXor = std::string(ROCT_TEST_DATA_DIR) + "/xor.csv";
const std::string kSeparable = std::string(ROCT_TEST_DATA_DIR) + "/separable.csv";

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("fit exact on xor reports full robustness") {
    auto model = temp_path("roct_cli_xor.json");
    auto run = run_cli("fit --data " + kXor + " --epsilon 0.1 --depth 2 --method exact --out " +
                       model);
    CHECK(run.exit_code == 0);
    CHECK(run.output.find("status: optimal") != std::string::npos);
    CHECK(run.output.find("train adversarial accuracy: 1\n") != std::string::npos);
    CHECK(run.output.find("objective (training errors): 0") != std::string::npos);
    CHECK(std::filesystem::exists(model));
    roct::Tree t = roct::load_tree(model, 2);
    CHECK(t.depth == 2);
}

TEST_CASE("fit exact at eps 0 on separable data has zero errors") {
    auto run = run_cli("fit --data " + kSeparable + " --epsilon 0 --depth 1 --method exact");
    CHECK(run.exit_code == 0);
    CHECK(run.output.find("objective (training errors): 0") != std::string::npos);
}

TEST_CASE("maxsat without a solver command is a usage error") {
    auto run = run_cli("fit --data " + kXor + " --epsilon 0.1 --depth 2 --method maxsat");
    CHECK(run.exit_code == 1);
    CHECK(run.output.find("--solver-cmd") != std::string::npos);
}

TEST_CASE("fit via the bundled wcnf solver") {
    auto run = run_cli("fit --data " + kXor + " --epsilon 0.1 --depth 2 --method maxsat "
                       "--solver-cmd '" + std::string(ROCT_WCNF_SOLVE_PATH) + " {instance}'");
    CHECK(run.exit_code == 0);
    CHECK(run.output.find("status: optimal") != std::string::npos);
    CHECK(run.output.find("train adversarial accuracy: 1\n") != std::string::npos);
}

TEST_CASE("missing attack model is a usage error") {
    auto run = run_cli("fit --data " + kXor + " --depth 1 --method greedy");
    CHECK(run.exit_code == 1);
}

TEST_CASE("eval round trip with witnesses") {
    auto model = temp_path("roct_cli_eval.json");
    auto fit_run = run_cli("fit --data " + kXor + " --epsilon 0.1 --depth 2 --method exact --out " +
                           model);
    REQUIRE(fit_run.exit_code == 0);

    auto witnesses = temp_path("roct_cli_witness.csv");
    auto run = run_cli("eval --data " + kXor + " --epsilon 0.1 --model " + model +
                       " --witnesses " + witnesses);
    CHECK(run.exit_code == 0);
    CHECK(run.output.find("adversarial accuracy: 1\n") != std::string::npos);
    std::ifstream in(witnesses);
    std::string header;
    std::getline(in, header);
    CHECK(header == "index,label,robust,w_0,w_1");
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        // every xor sample is robust under this model: empty witness cells
        CHECK(line.substr(line.find(',', 2)) == ",1,,");
        ++rows;
    }
    CHECK(rows == 4);
}

TEST_CASE("eval rejects dimension mismatches") {
    auto model = temp_path("roct_cli_dim.json");
    {
        std::ofstream out(model);
        out << "{\"depth\": 1, \"nodes\": [{\"feature\": 5, \"threshold\": 0.5}], "
               "\"leaves\": [0,1]}";
    }
    auto run = run_cli("eval --data " + kXor + " --epsilon 0.1 --model " + model);
    CHECK(run.exit_code == 2);
}

TEST_CASE("bound at eps 1 equals the majority fraction") {
    auto run = run_cli("bound --data " + kSeparable + " --epsilon 1");
    CHECK(run.exit_code == 0);
    CHECK(run.output.find("adversarial accuracy bound: 0.5") != std::string::npos);
}

TEST_CASE("sweep is flat where epsilon has no effect and never increases") {
    auto run = run_cli("sweep --data " + kXor + " --epsilons 0,0.05,0.1,0.3,0.5,0.7,1");
    CHECK(run.exit_code == 0);
    std::istringstream in(run.output);
    std::string header;
    std::getline(in, header);
    CHECK(header == "epsilon,bound");
    double prev = 2.0;
    int rows = 0;
    bool flat_prefix = true;
    std::string line;
    while (std::getline(in, line)) {
        auto comma = line.find(',');
        REQUIRE(comma != std::string::npos);
        double bound = std::stod(line.substr(comma + 1));
        if (rows < 3 && bound != 1.0) flat_prefix = false;
        CHECK(bound <= prev + 1e-12);
        prev = bound;
        ++rows;
    }
    CHECK(rows == 7);
    CHECK(flat_prefix); // eps up to 0.1 changes nothing on xor
}

TEST_CASE("select-eps prints three fractions") {
    auto run = run_cli("select-eps --data " + kSeparable);
    CHECK(run.exit_code == 0);
    CHECK(run.output.find("fraction,epsilon,bound") != std::string::npos);
    CHECK(run.output.find("0.25,") != std::string::npos);
    CHECK(run.output.find("0.75,") != std::string::npos);
}

TEST_CASE("export writes solver-ready files") {
    auto wcnf = temp_path("roct_cli_export.wcnf");
    auto run = run_cli("export --data " + kXor + " --epsilon 0.1 --depth 2 --format wcnf --out " +
                       wcnf);
    CHECK(run.exit_code == 0);
    std::ifstream in(wcnf);
    std::string first;
    std::getline(in, first);
    CHECK(first.rfind("p wcnf ", 0) == 0);

    auto lp = temp_path("roct_cli_export.lp");
    auto warm = temp_path("roct_cli_export.mst");
    auto run2 = run_cli("export --data " + kXor + " --epsilon 0.1 --depth 2 "
                        "--format lp-continuous --out " + lp + " --warm-start-out " + warm);
    CHECK(run2.exit_code == 0);
    std::ifstream lpin(lp);
    std::string lpfirst;
    std::getline(lpin, lpfirst);
    CHECK(lpfirst == "Minimize");
    CHECK(std::filesystem::exists(warm));
}

TEST_CASE("experiment emits a deterministic csv") {
    auto out1 = temp_path("roct_cli_exp1.csv");
    auto out2 = temp_path("roct_cli_exp2.csv");
    std::string args = "experiment --data " + kSeparable +
                       " --epsilons 0.05,0.1 --depths 1 --methods greedy,exact --seed 9 "
                       "--folds 2 --out ";
    CHECK(run_cli(args + out1).exit_code == 0);
    CHECK(run_cli(args + out2).exit_code == 0);
    std::ifstream a(out1), b(out2);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(sa.str() == sb.str());
    CHECK(sa.str().rfind("epsilon,method,depth,", 0) == 0);
}

TEST_CASE("runtime failures exit with code 2") {
    auto run = run_cli("eval --data " + kXor + " --epsilon 0.1 --model /nonexistent.json");
    CHECK(run.exit_code == 2);
    auto run2 = run_cli("fit --data /nonexistent.csv --epsilon 0.1 --depth 1 --method greedy");
    CHECK(run2.exit_code == 2);
}

TEST_CASE("unknown subcommands and flags are usage errors") {
    CHECK(run_cli("frobnicate").exit_code == 1);
    CHECK(run_cli("fit --data " + kXor + " --epsilon 0.1 --depth 1 --method greedy "
                  "--bogus-flag").exit_code == 1);
}
