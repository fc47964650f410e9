#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cctype>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "roct/adversary.hpp"
#include "roct/common.hpp"
#include "roct/dataset.hpp"
#include "roct/exact.hpp"
#include "roct/greedy.hpp"
#include "roct/margin.hpp"
#include "roct/maxsat.hpp"
#include "roct/milp.hpp"
#include "roct/tree.hpp"

namespace roct {

struct SolverConfig {
    // Whitespace-separated command with {instance} and, for MILP runs,
    // {solution} / {warmstart} placeholders. {timeout} expands to the limit
    // in whole seconds for solvers that take their own flag.
    std::string command_template;
    double timeout_seconds = 1800.0;
    std::string solution_format = "auto"; // maxsat-v-line | lp-solution-file
    std::string work_dir;                 // empty: a fresh temp directory per run

    void validate() const {
        if (timeout_seconds <= 0) throw Error("solver timeout must be > 0");
        if (command_template.find("{instance}") == std::string::npos)
            throw Error("solver command template must contain {instance}");
    }
};

namespace detail {

struct RunOutcome {
    int exit_code = -1;
    bool timed_out = false;
    std::string output; // captured stdout
};

inline std::vector<std::string> split_template(const std::string& tmpl) {
    std::vector<std::string> out;
    std::istringstream in(tmpl);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    if (out.empty()) throw Error("empty solver command");
    return out;
}

inline void substitute(std::string& arg, const std::string& key, const std::string& value) {
    size_t pos;
    while ((pos = arg.find(key)) != std::string::npos) arg.replace(pos, key.size(), value);
}

// Runs argv as a child process, captures stdout, enforces the deadline with
// SIGTERM then SIGKILL. Never returns a partial read: the pipe is drained to
// EOF even after a kill.
inline RunOutcome run_subprocess(const std::vector<std::string>& argv, double timeout_seconds,
                                 const std::string& work_dir) {
    int fds[2];
    if (pipe(fds) != 0) throw Error("pipe() failed");

    pid_t pid = fork();
    if (pid < 0) throw Error("fork() failed");
    if (pid == 0) {
        close(fds[0]);
        dup2(fds[1], STDOUT_FILENO);
        close(fds[1]);
        if (!work_dir.empty() && chdir(work_dir.c_str()) != 0) _exit(127);
        std::vector<char*> cargv;
        for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
        cargv.push_back(nullptr);
        execvp(cargv[0], cargv.data());
        _exit(127);
    }

    close(fds[1]);
    RunOutcome res;
    const auto deadline =
        std::chrono::steady_clock::now() +
        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(std::min(timeout_seconds, 1e8)));
    bool child_done = false;
    bool sent_term = false;
    auto term_time = std::chrono::steady_clock::time_point{};
    char buf[4096];
    bool eof = false;
    int drains_after_exit = 0;
    while (!eof || !child_done) {
        if (!eof) {
            struct pollfd pfd{fds[0], POLLIN, 0};
            int pr = poll(&pfd, 1, 50);
            if (pr > 0) {
                ssize_t k = read(fds[0], buf, sizeof(buf));
                if (k > 0) res.output.append(buf, static_cast<size_t>(k));
                else eof = true;
            } else if (child_done && ++drains_after_exit > 20) {
                eof = true; // an orphaned grandchild still holds the pipe
            }
        } else if (!child_done) {
            usleep(20 * 1000);
        }
        if (!child_done) {
            int status = 0;
            pid_t w = waitpid(pid, &status, WNOHANG);
            if (w == pid) {
                child_done = true;
                res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -WTERMSIG(status);
            } else {
                auto now = std::chrono::steady_clock::now();
                if (!sent_term && now >= deadline) {
                    res.timed_out = true;
                    kill(pid, SIGTERM);
                    sent_term = true;
                    term_time = now;
                } else if (sent_term && now - term_time > std::chrono::milliseconds(500)) {
                    kill(pid, SIGKILL);
                }
            }
        }
    }
    close(fds[0]);
    return res;
}

// Owns a freshly created scratch directory unless the caller supplied one.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& preset) {
        if (!preset.empty()) {
            path_ = preset;
            std::filesystem::create_directories(path_);
            owned_ = false;
        } else {
            std::string tmpl = (std::filesystem::temp_directory_path() / "roct-XXXXXX").string();
            std::vector<char> buf(tmpl.begin(), tmpl.end());
            buf.push_back('\0');
            if (!mkdtemp(buf.data())) throw Error("mkdtemp() failed");
            path_ = buf.data();
            owned_ = true;
        }
    }
    ~ScratchDir() {
        if (owned_) {
            std::error_code ec;
            std::filesystem::remove_all(path_, ec);
        }
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;
    const std::string& path() const { return path_; }

private:
    std::string path_;
    bool owned_ = false;
};

// A process killed at the deadline may leave a final line half-written;
// parsing only newline-terminated lines keeps partial output out.
inline std::string drop_unterminated_tail(std::string text) {
    if (!text.empty() && text.back() != '\n') {
        size_t cut = text.find_last_of('\n');
        text.erase(cut == std::string::npos ? 0 : cut + 1);
    }
    return text;
}

inline int scan_wcnf_num_vars(const std::string& path) {
    std::ifstream in(path);
    if (!in) return 0;
    std::string line;
    int max_var = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == 'c') continue;
        if (line.rfind("p wcnf", 0) == 0) {
            std::istringstream ls(line);
            std::string p, fmt;
            int nv = 0;
            ls >> p >> fmt >> nv;
            return nv;
        }
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) {
            try {
                int lit = std::stoi(tok);
                max_var = std::max(max_var, std::abs(lit));
            } catch (...) {
            }
        }
    }
    return max_var;
}

} // namespace detail

struct MaxsatRunResult {
    std::optional<Assignment> assignment; // nullopt: no incumbent emitted
    bool optimal = false;
    bool timed_out = false;
    std::optional<long long> cost; // last "o" line
};

// Launches a MaxSAT solver on a WCNF file and parses the last emitted model.
// "v" lines may hold space-separated signed literals (classic) or a 0/1
// string (2022 format); the dialect is auto-detected.
inline MaxsatRunResult run_maxsat(const std::string& instance_path, const SolverConfig& config,
                                  int num_vars = 0) {
    config.validate();
    if (!std::filesystem::exists(instance_path))
        throw Error("instance file does not exist: " + instance_path);
    if (num_vars <= 0) num_vars = detail::scan_wcnf_num_vars(instance_path);

    std::vector<std::string> argv = detail::split_template(config.command_template);
    for (auto& arg : argv) {
        detail::substitute(arg, "{instance}", instance_path);
        detail::substitute(arg, "{timeout}",
                           detail::strprintf("%.0f", std::max(1.0, config.timeout_seconds)));
    }
    detail::RunOutcome run =
        detail::run_subprocess(argv, config.timeout_seconds, config.work_dir);

    MaxsatRunResult res;
    res.timed_out = run.timed_out;

    std::vector<std::string> model_tokens;
    std::vector<std::string> last_model;
    bool prev_was_v = false;
    std::istringstream in(detail::drop_unterminated_tail(run.output));
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("v ", 0) == 0 || line == "v") {
            if (!prev_was_v) model_tokens.clear();
            std::istringstream ls(line);
            std::string tok;
            ls >> tok; // consume 'v'
            while (ls >> tok) model_tokens.push_back(tok);
            last_model = model_tokens;
            prev_was_v = true;
        } else {
            prev_was_v = false;
            if (line.rfind("s ", 0) == 0) {
                if (line.find("OPTIMUM FOUND") != std::string::npos) res.optimal = true;
                if (line.find("UNSATISFIABLE") != std::string::npos)
                    throw Error("solver reported UNSATISFIABLE; the hard clauses are always "
                                "satisfiable, so this is a bridge or encoding bug");
            } else if (line.rfind("o ", 0) == 0) {
                try {
                    res.cost = std::stoll(line.substr(2));
                } catch (...) {
                    throw Error("malformed o-line: " + line);
                }
            }
        }
    }

    if (last_model.empty()) return res; // no incumbent

    size_t binary_len = 0;
    bool all_binary_tokens = true;
    for (const auto& tok : last_model) {
        for (char ch : tok)
            if (ch != '0' && ch != '1') all_binary_tokens = false;
        binary_len += tok.size();
    }

    Assignment assign(static_cast<size_t>(std::max(num_vars, 1)) + 1, false);
    if (all_binary_tokens && num_vars > 0 && binary_len == static_cast<size_t>(num_vars)) {
        int var = 1;
        for (const auto& tok : last_model)
            for (char ch : tok) assign[var++] = ch == '1';
    } else {
        for (const auto& tok : last_model) {
            long long lit;
            try {
                lit = std::stoll(tok);
            } catch (...) {
                throw Error("malformed v-line token: " + tok);
            }
            if (lit == 0) continue;
            const size_t var = static_cast<size_t>(std::llabs(lit));
            if (var >= assign.size()) assign.resize(var + 1, false);
            assign[var] = lit > 0;
        }
    }
    res.assignment = std::move(assign);
    return res;
}

struct MilpRunResult {
    std::optional<std::unordered_map<std::string, double>> values;
    bool optimal = false;
    bool timed_out = false;
};

// Launches a MILP solver; the solution file is parsed as "name value" lines
// ('#' comments skipped). A missing or empty solution file means no incumbent.
inline MilpRunResult run_milp(const std::string& instance_path,
                              const std::optional<std::string>& warm_start_path,
                              const SolverConfig& config, const std::string& solution_path) {
    config.validate();
    if (!std::filesystem::exists(instance_path))
        throw Error("instance file does not exist: " + instance_path);

    const bool wants_warm = config.command_template.find("{warmstart}") != std::string::npos;
    if (warm_start_path && !wants_warm)
        throw Error("warm start requested but the command template has no {warmstart}");
    if (!warm_start_path && wants_warm)
        throw Error("command template expects {warmstart} but none was provided");

    std::vector<std::string> argv = detail::split_template(config.command_template);
    for (auto& arg : argv) {
        detail::substitute(arg, "{instance}", instance_path);
        detail::substitute(arg, "{solution}", solution_path);
        if (warm_start_path) detail::substitute(arg, "{warmstart}", *warm_start_path);
        detail::substitute(arg, "{timeout}",
                           detail::strprintf("%.0f", std::max(1.0, config.timeout_seconds)));
    }
    detail::RunOutcome run =
        detail::run_subprocess(argv, config.timeout_seconds, config.work_dir);

    MilpRunResult res;
    res.timed_out = run.timed_out;
    {
        std::string lower = run.output;
        for (char& ch : lower) ch = static_cast<char>(std::tolower(ch));
        if (lower.find("infeasible") != std::string::npos)
            throw Error("solver reported infeasible; the model is always feasible, so this is "
                        "a bridge or encoding bug");
        if (lower.find("optimal") != std::string::npos) res.optimal = true;
    }

    std::ifstream sol(solution_path);
    if (!sol) return res;
    std::stringstream raw;
    raw << sol.rdbuf();
    std::istringstream lines(detail::drop_unterminated_tail(raw.str()));
    std::unordered_map<std::string, double> values;
    std::string line;
    int line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string name;
        double value;
        if (!(ls >> name >> value))
            throw Error(detail::strprintf("malformed solution line %d: %s", line_no, line.c_str()));
        values[name] = value;
    }
    if (values.empty()) return res;
    res.values = std::move(values);
    return res;
}

enum class FitMethod { greedy, exact, maxsat, milp_continuous, milp_binary };

inline const char* to_string(FitMethod m) {
    switch (m) {
        case FitMethod::greedy: return "greedy";
        case FitMethod::exact: return "exact";
        case FitMethod::maxsat: return "maxsat";
        case FitMethod::milp_continuous: return "milp-continuous";
        case FitMethod::milp_binary: return "milp-binary";
    }
    return "?";
}

inline FitMethod parse_method(const std::string& name) {
    if (name == "greedy") return FitMethod::greedy;
    if (name == "exact") return FitMethod::exact;
    if (name == "maxsat") return FitMethod::maxsat;
    if (name == "milp-continuous") return FitMethod::milp_continuous;
    if (name == "milp-binary") return FitMethod::milp_binary;
    throw Error("unknown method: " + name +
                " (expected greedy|exact|maxsat|milp-continuous|milp-binary)");
}

inline bool method_needs_solver(FitMethod m) {
    return m == FitMethod::maxsat || m == FitMethod::milp_continuous ||
           m == FitMethod::milp_binary;
}

struct FitOptions {
    bool warm = false;
    bool use_raw_values = false;
    bool use_matching_bound = true;          // exact solver pruning
    double time_limit = std::numeric_limits<double>::infinity(); // exact solver wall clock
};

namespace detail {

inline MilpValues values_from_map(const MilpModel& mod,
                                  const std::unordered_map<std::string, double>& map,
                                  std::vector<std::string>* missing) {
    MilpValues vals(mod.vars.size(), 0.0);
    for (size_t k = 0; k < mod.vars.size(); ++k) {
        auto it = map.find(mod.vars[k].name);
        if (it == map.end()) {
            if (missing) missing->push_back(mod.vars[k].name);
            continue; // defaults to 0
        }
        vals[k] = it->second;
    }
    return vals;
}

} // namespace detail

// Full pipeline: encode, optionally warm start, solve, decode, maximize the
// margin, and re-verify with the adversary module. The reported objective is
// always the verified training error count of the returned tree.
inline SolveResult fit(const Dataset& d, const AttackModel& attack, int depth, FitMethod method,
                       const FitOptions& opts = {},
                       const std::optional<SolverConfig>& solver = std::nullopt) {
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&t0] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    auto finish = [&](Tree tree, SolveStatus status, uint64_t nodes) {
        const int before = adversarial_error_count(tree, d, attack);
        Tree widened = maximize_margin(tree, d, attack);
        SolveResult res;
        res.objective = adversarial_error_count(widened, d, attack);
        if (res.objective != before)
            throw Error("margin maximization changed the training error count");
        res.tree = std::move(widened);
        res.status = status;
        res.nodes_expanded = nodes;
        res.seconds = elapsed();
        return res;
    };

    if (method_needs_solver(method) && !solver)
        throw Error("method requires a --solver-cmd configuration");

    switch (method) {
        case FitMethod::greedy: {
            Tree t = fit_greedy(d, attack, depth);
            return finish(std::move(t), SolveStatus::feasible, 0);
        }
        case FitMethod::exact: {
            SearchBudget budget;
            budget.wall_seconds = opts.time_limit;
            if (solver && std::isfinite(solver->timeout_seconds))
                budget.wall_seconds = std::min(budget.wall_seconds, solver->timeout_seconds);
            if (opts.warm)
                budget.incumbent = maximize_margin(fit_greedy(d, attack, depth), d, attack);
            ExactOptions eo;
            eo.use_matching_bound = opts.use_matching_bound;
            eo.use_raw_values = opts.use_raw_values;
            SolveResult res = solve_exact(d, attack, depth, budget, eo);
            SolveResult out = finish(res.tree, res.status, res.nodes_expanded);
            if (out.objective != res.objective)
                throw Error("verified objective drifted from the search objective");
            return out;
        }
        case FitMethod::maxsat: {
            auto [vm, inst] = build_encoding(d, attack, depth, opts.use_raw_values);
            detail::ScratchDir scratch(solver->work_dir);
            const std::string path = scratch.path() + "/instance.wcnf";
            write_wcnf_file(inst, path);
            SolverConfig cfg = *solver;
            cfg.work_dir = scratch.path();
            MaxsatRunResult run = run_maxsat(path, cfg, vm.num_vars);
            if (!run.assignment)
                throw NoIncumbentError("maxsat solver produced no model");
            DecodedTree dec = decode_tree(vm, inst, *run.assignment, d, attack);
            if (run.optimal && dec.verified_errors != dec.assignment_cost)
                throw Error("optimal assignment cost does not match the verified error count");
            SolveStatus status = run.optimal ? SolveStatus::optimal
                                : run.timed_out ? SolveStatus::timeout_with_incumbent
                                                : SolveStatus::feasible;
            return finish(std::move(dec.tree), status, 0);
        }
        case FitMethod::milp_continuous:
        case FitMethod::milp_binary: {
            const MilpMode mode = method == FitMethod::milp_continuous ? MilpMode::continuous
                                                                       : MilpMode::binary;
            MilpModel mod = build_milp(d, attack, depth, mode, opts.use_raw_values);
            detail::ScratchDir scratch(solver->work_dir);
            const std::string lp_path = scratch.path() + "/model.lp";
            const std::string sol_path = scratch.path() + "/solution.sol";
            write_lp_file(mod, lp_path);

            std::optional<std::string> warm_path;
            std::optional<int> warm_errors;
            if (opts.warm) {
                Tree warm_tree = maximize_margin(fit_greedy(d, attack, depth), d, attack);
                warm_errors = adversarial_error_count(warm_tree, d, attack);
                warm_path = scratch.path() + "/warm.mst";
                write_warm_start_file(mod, warm_tree, *warm_path);
            }
            SolverConfig cfg = *solver;
            cfg.work_dir = scratch.path();
            MilpRunResult run = run_milp(lp_path, warm_path, cfg, sol_path);
            if (!run.values)
                throw NoIncumbentError("milp solver produced no solution file");
            std::vector<std::string> missing;
            MilpValues vals = detail::values_from_map(mod, *run.values, &missing);
            for (size_t k = 0; k < missing.size() && k < 8; ++k)
                std::fprintf(stderr, "warning: solution is missing %s (defaulting to 0)\n",
                             missing[k].c_str());
            MilpDecodeResult dec = decode_tree(mod, vals, d, attack);
            if (run.optimal && dec.verified_errors != dec.objective)
                throw Error("optimal solution objective does not match the verified error count");
            if (warm_errors && dec.objective > *warm_errors)
                throw Error("solver returned a solution worse than the warm start");
            SolveStatus status = run.optimal ? SolveStatus::optimal
                                : run.timed_out ? SolveStatus::timeout_with_incumbent
                                                : SolveStatus::feasible;
            return finish(std::move(dec.tree), status, 0);
        }
    }
    throw Error("unreachable");
}

} // namespace roct
