// Reference MaxSAT solver for small instances: reads a WCNF file (classic
// "p wcnf" header or 2022 "h"-prefix format), runs an exact branch-and-bound,
// and prints evaluation-style output (o / s / v lines). Anytime: every
// incumbent is printed as soon as it is found.

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "roct/wcnf_solver.hpp"

namespace {

void print_model(const std::vector<bool>& assignment, bool bitstring) {
    std::string line = "v";
    if (bitstring) {
        line += " ";
        for (size_t v = 1; v < assignment.size(); ++v) line += assignment[v] ? '1' : '0';
    } else {
        for (size_t v = 1; v < assignment.size(); ++v) {
            line += " ";
            if (!assignment[v]) line += "-";
            line += std::to_string(v);
        }
        line += " 0";
    }
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
}

int usage() {
    std::fprintf(stderr,
                 "usage: wcnf_solve [--bitstring-model] [--steps N] <instance.wcnf>\n");
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    bool bitstring = false;
    uint64_t steps = 200'000'000ull;
    const char* path = nullptr;
    for (int k = 1; k < argc; ++k) {
        if (std::strcmp(argv[k], "--bitstring-model") == 0) {
            bitstring = true;
        } else if (std::strcmp(argv[k], "--steps") == 0 && k + 1 < argc) {
            steps = std::strtoull(argv[++k], nullptr, 10);
        } else if (argv[k][0] == '-') {
            return usage();
        } else {
            path = argv[k];
        }
    }
    if (!path) return usage();

    std::ifstream in(path);
    if (!in) {
        std::fprintf(stderr, "cannot open %s\n", path);
        return 2;
    }
    std::stringstream ss;
    ss << in.rdbuf();

    try {
        roct::ParsedWcnf inst = roct::parse_wcnf(ss.str());
        std::printf("c wcnf_solve: %d vars, %zu hard, %zu soft\n", inst.num_vars,
                    inst.hard.size(), inst.soft.size());
        roct::WcnfSolver solver(inst, steps);
        auto res = solver.solve([](long long cost, const std::vector<bool>&) {
            std::printf("o %lld\n", cost);
            std::fflush(stdout);
        });
        if (res.found && res.proven_optimal) {
            std::printf("s OPTIMUM FOUND\n");
            print_model(res.assignment, bitstring);
        } else if (res.found) {
            std::printf("s SATISFIABLE\n");
            print_model(res.assignment, bitstring);
        } else if (res.proven_optimal) {
            std::printf("s UNSATISFIABLE\n");
        } else {
            std::printf("s UNKNOWN\n");
        }
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
