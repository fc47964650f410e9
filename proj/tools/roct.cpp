// Command line surface for the robust-tree toolkit: fit / eval / bound /
// sweep / select-eps / export / experiment. Exit codes: 0 ok, 1 usage,
// 2 runtime failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "roct/roct.hpp"

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stod(tok));
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    for (double v : parse_double_list(csv)) out.push_back(static_cast<int>(v));
    return out;
}

struct DataFlags {
    std::string path;
    double epsilon = -1.0;
    std::string delta_left, delta_right;
    bool raw_candidates = false;
};

void add_data_flags(CLI::App* cmd, DataFlags& f, bool with_attack = true) {
    cmd->add_option("--data", f.path, "CSV file; header row, label in the last column")
        ->required();
    if (with_attack) {
        cmd->add_option("--epsilon", f.epsilon, "L-infinity perturbation radius in [0,1]");
        cmd->add_option("--delta-left", f.delta_left, "comma separated per-feature decreases");
        cmd->add_option("--delta-right", f.delta_right, "comma separated per-feature increases");
        cmd->add_flag("--raw-candidates", f.raw_candidates,
                      "candidate thresholds from raw values instead of perturbed endpoints");
    }
}

std::pair<roct::Dataset, roct::ScalingInfo> load_scaled(const std::string& path) {
    roct::RawData raw = roct::load_csv(path);
    return roct::scale_features(raw);
}

roct::AttackModel make_attack(const DataFlags& f, int p) {
    const bool has_delta = !f.delta_left.empty() || !f.delta_right.empty();
    if (f.epsilon >= 0.0 && has_delta)
        throw UsageError("give either --epsilon or --delta-left/--delta-right, not both");
    if (f.epsilon >= 0.0) return roct::AttackModel::uniform(f.epsilon, p);
    if (has_delta) {
        auto dl = parse_double_list(f.delta_left);
        auto dr = parse_double_list(f.delta_right);
        if (static_cast<int>(dl.size()) != p || static_cast<int>(dr.size()) != p)
            throw UsageError("delta vectors must list one value per feature");
        return roct::AttackModel(std::move(dl), std::move(dr));
    }
    throw UsageError("an attack model is required: --epsilon or --delta-left/--delta-right");
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw roct::Error("cannot write file: " + path);
    out << text;
}

// fit ----------------------------------------------------------------------

struct FitFlags {
    DataFlags data;
    std::string test_path;
    int depth = 2;
    std::string method = "exact";
    bool warm = false;
    std::string solver_cmd;
    double timeout = 1800.0;
    std::string out_path;
    bool no_matching_bound = false;
};

int cmd_fit(const FitFlags& f) {
    auto [d, scaling] = load_scaled(f.data.path);
    roct::AttackModel attack = make_attack(f.data, d.p);
    roct::FitMethod method = roct::parse_method(f.method);

    std::optional<roct::SolverConfig> solver;
    if (!f.solver_cmd.empty()) {
        solver.emplace();
        solver->command_template = f.solver_cmd;
        solver->timeout_seconds = f.timeout;
    }
    if (roct::method_needs_solver(method) && !solver)
        throw UsageError(std::string(f.method) + " requires --solver-cmd");

    roct::FitOptions opts;
    opts.warm = f.warm;
    opts.use_raw_values = f.data.raw_candidates;
    opts.use_matching_bound = !f.no_matching_bound;
    opts.time_limit = f.timeout;

    roct::SolveResult res = roct::fit(d, attack, f.depth, method, opts, solver);

    std::printf("method: %s\n", f.method.c_str());
    std::printf("depth: %d\n", f.depth);
    std::printf("status: %s\n", roct::to_string(res.status));
    std::printf("objective (training errors): %d\n", res.objective);
    std::printf("train adversarial accuracy: %s\n",
                roct::detail::fmt_double_shortest(roct::adversarial_accuracy(res.tree, d, attack))
                    .c_str());
    std::printf("train standard accuracy: %s\n",
                roct::detail::fmt_double_shortest(res.tree.standard_accuracy(d)).c_str());
    if (!f.test_path.empty()) {
        roct::RawData raw = roct::load_csv(f.test_path);
        if (raw.p != d.p) throw roct::Error("test data feature count mismatch");
        roct::Dataset test;
        test.n = raw.n;
        test.p = raw.p;
        test.y = raw.y;
        test.feature_names = raw.feature_names;
        test.x.resize(raw.x.size());
        for (int i = 0; i < raw.n; ++i)
            for (int j = 0; j < raw.p; ++j)
                test.x[size_t(i) * raw.p + j] =
                    roct::clamp01(scaling.degenerate[j]
                                      ? 0.5
                                      : (raw.at(i, j) - scaling.min[j]) /
                                            (scaling.max[j] - scaling.min[j]));
        std::printf("test adversarial accuracy: %s\n",
                    roct::detail::fmt_double_shortest(
                        roct::adversarial_accuracy(res.tree, test, attack))
                        .c_str());
    }
    std::printf("nodes expanded: %llu\n", static_cast<unsigned long long>(res.nodes_expanded));
    std::printf("wall time: %.3f s\n", res.seconds);
    if (!f.out_path.empty()) {
        roct::save_tree(res.tree, f.out_path);
        std::printf("model written to %s\n", f.out_path.c_str());
    }
    return 0;
}

// eval ---------------------------------------------------------------------

struct EvalFlags {
    DataFlags data;
    std::string model_path;
    std::string witness_path;
};

int cmd_eval(const EvalFlags& f) {
    auto [d, scaling] = load_scaled(f.data.path);
    roct::AttackModel attack = make_attack(f.data, d.p);
    roct::Tree tree = roct::load_tree(f.model_path, d.p);

    std::printf("adversarial accuracy: %s\n",
                roct::detail::fmt_double_shortest(roct::adversarial_accuracy(tree, d, attack))
                    .c_str());
    std::printf("standard accuracy: %s\n",
                roct::detail::fmt_double_shortest(tree.standard_accuracy(d)).c_str());

    if (!f.witness_path.empty()) {
        std::ostringstream out;
        out << "index,label,robust";
        for (int j = 0; j < d.p; ++j) out << ",w_" << j;
        out << "\n";
        for (int i = 0; i < d.n; ++i) {
            auto witness = roct::attack_witness(tree, d, i, attack);
            out << i << "," << d.y[i] << "," << (witness ? 0 : 1);
            for (int j = 0; j < d.p; ++j) {
                out << ",";
                if (witness) out << roct::detail::fmt_double_shortest((*witness)[j]);
            }
            out << "\n";
        }
        write_text_file(f.witness_path, out.str());
        std::printf("witness dump written to %s\n", f.witness_path.c_str());
    }
    return 0;
}

// bound / sweep / select-eps -------------------------------------------------

int cmd_bound(const DataFlags& f) {
    auto [d, scaling] = load_scaled(f.path);
    roct::AttackModel attack = make_attack(f, d.p);
    auto graph = roct::build_conflict_graph(d, attack);
    auto matching = roct::max_matching(graph);
    std::printf("samples: %d\n", d.n);
    std::printf("conflict edges: %zu\n", graph.num_edges());
    std::printf("maximum matching: %d\n", matching.cardinality);
    std::printf("adversarial accuracy bound: %s\n",
                roct::detail::fmt_double_shortest(double(d.n - matching.cardinality) / d.n)
                    .c_str());
    return 0;
}

struct SweepFlags {
    std::string data_path;
    std::string epsilons;
    int points = 21;
    double max_eps = 0.5;
    std::string out_path;
};

int cmd_sweep(const SweepFlags& f) {
    auto [d, scaling] = load_scaled(f.data_path);
    std::vector<double> grid;
    if (!f.epsilons.empty()) {
        grid = parse_double_list(f.epsilons);
    } else {
        if (f.points < 2) throw UsageError("--points must be >= 2");
        for (int k = 0; k < f.points; ++k)
            grid.push_back(f.max_eps * double(k) / double(f.points - 1));
    }
    auto sweep = roct::epsilon_sweep(d, grid);
    std::string csv = roct::sweep_to_csv(sweep);
    if (f.out_path.empty()) std::fputs(csv.c_str(), stdout);
    else {
        write_text_file(f.out_path, csv);
        std::printf("sweep written to %s\n", f.out_path.c_str());
    }
    return 0;
}

struct SelectFlags {
    std::string data_path;
    std::string fractions = "0.25,0.5,0.75";
};

int cmd_select_eps(const SelectFlags& f) {
    auto [d, scaling] = load_scaled(f.data_path);
    auto choices = roct::select_epsilons(d, parse_double_list(f.fractions));
    std::printf("fraction,epsilon,bound\n");
    for (const auto& c : choices)
        std::printf("%s,%s,%s\n", roct::detail::fmt_double_shortest(c.fraction).c_str(),
                    roct::detail::fmt_double_shortest(c.epsilon).c_str(),
                    roct::detail::fmt_double_shortest(c.bound).c_str());
    return 0;
}

// export ---------------------------------------------------------------------

struct ExportFlags {
    DataFlags data;
    int depth = 2;
    std::string format = "wcnf";
    std::string out_path;
    std::string warm_out_path;
};

int cmd_export(const ExportFlags& f) {
    auto [d, scaling] = load_scaled(f.data.path);
    roct::AttackModel attack = make_attack(f.data, d.p);
    if (f.format == "wcnf" || f.format == "wcnf2022") {
        auto [vm, inst] = roct::build_encoding(d, attack, f.depth, f.data.raw_candidates);
        roct::write_wcnf_file(inst, f.out_path, f.format == "wcnf2022");
        std::printf("wrote %s: %d vars, %zu clauses\n", f.out_path.c_str(), inst.num_vars,
                    inst.num_clauses());
        if (!f.warm_out_path.empty())
            throw UsageError("--warm-start-out applies to the LP formats only");
    } else if (f.format == "lp-continuous" || f.format == "lp-binary") {
        auto mode = f.format == "lp-continuous" ? roct::MilpMode::continuous
                                                : roct::MilpMode::binary;
        roct::MilpModel mod = roct::build_milp(d, attack, f.depth, mode, f.data.raw_candidates);
        roct::write_lp_file(mod, f.out_path);
        std::printf("wrote %s: %zu vars, %zu constraints\n", f.out_path.c_str(),
                    mod.vars.size(), mod.constraints.size());
        if (!f.warm_out_path.empty()) {
            roct::Tree warm = roct::maximize_margin(roct::fit_greedy(d, attack, f.depth), d,
                                                    attack);
            roct::write_warm_start_file(mod, warm, f.warm_out_path);
            std::printf("warm start written to %s\n", f.warm_out_path.c_str());
        }
    } else {
        throw UsageError("unknown format: " + f.format +
                         " (expected wcnf|wcnf2022|lp-continuous|lp-binary)");
    }
    return 0;
}

// experiment ------------------------------------------------------------------

struct ExperimentFlags {
    DataFlags data;
    std::string epsilons;
    std::string depths = "1,2";
    std::string methods = "greedy,exact";
    uint64_t seed = 0;
    double train_fraction = 0.8;
    int folds = 3;
    bool warm = false;
    std::string solver_cmd;
    double timeout = 1800.0;
    std::string out_path;
};

int cmd_experiment(const ExperimentFlags& f) {
    auto [d, scaling] = load_scaled(f.data.path);

    roct::ExperimentPlan plan;
    if (!f.epsilons.empty()) plan.epsilons = parse_double_list(f.epsilons);
    else if (f.data.epsilon >= 0.0) plan.epsilons = {f.data.epsilon};
    if (!f.data.delta_left.empty() || !f.data.delta_right.empty())
        plan.deltas = make_attack(f.data, d.p);
    plan.depths = parse_int_list(f.depths);
    std::stringstream ms(f.methods);
    std::string tok;
    while (std::getline(ms, tok, ','))
        if (!tok.empty()) plan.methods.push_back(roct::parse_method(tok));
    plan.seed = f.seed;
    plan.train_fraction = f.train_fraction;
    plan.folds = f.folds;
    plan.fit_options.warm = f.warm;
    plan.fit_options.use_raw_values = f.data.raw_candidates;
    plan.fit_options.time_limit = f.timeout;

    std::optional<roct::SolverConfig> solver;
    if (!f.solver_cmd.empty()) {
        solver.emplace();
        solver->command_template = f.solver_cmd;
        solver->timeout_seconds = f.timeout;
    }
    for (roct::FitMethod m : plan.methods)
        if (roct::method_needs_solver(m) && !solver)
            throw UsageError(std::string(roct::to_string(m)) + " requires --solver-cmd");

    auto cells = roct::run_experiment(d, plan, solver);
    std::string csv = roct::experiment_to_csv(cells);
    if (f.out_path.empty()) std::fputs(csv.c_str(), stdout);
    else {
        write_text_file(f.out_path, csv);
        std::printf("results written to %s\n", f.out_path.c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ROCT: optimally robust classification trees"};
    app.require_subcommand(1);

    FitFlags fit_flags;
    auto* fit_cmd = app.add_subcommand("fit", "train a robust tree");
    add_data_flags(fit_cmd, fit_flags.data);
    fit_cmd->add_option("--test-data", fit_flags.test_path, "optional held-out CSV");
    fit_cmd->add_option("--depth", fit_flags.depth, "tree depth")->required();
    fit_cmd->add_option("--method", fit_flags.method,
                        "greedy|exact|maxsat|milp-continuous|milp-binary")
        ->required();
    fit_cmd->add_flag("--warm", fit_flags.warm, "warm start from the greedy tree");
    fit_cmd->add_option("--solver-cmd", fit_flags.solver_cmd,
                        "external solver template, e.g. 'wcnf_solve {instance}'");
    fit_cmd->add_option("--timeout", fit_flags.timeout, "solver wall clock limit in seconds");
    fit_cmd->add_option("--out", fit_flags.out_path, "write the tree as JSON");
    fit_cmd->add_flag("--no-matching-bound", fit_flags.no_matching_bound,
                      "disable the matching lower bound in the exact search");

    EvalFlags eval_flags;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a tree JSON on data");
    add_data_flags(eval_cmd, eval_flags.data);
    eval_cmd->add_option("--model", eval_flags.model_path, "tree JSON path")->required();
    eval_cmd->add_option("--witnesses", eval_flags.witness_path,
                         "write per-sample attack witnesses as CSV");

    DataFlags bound_flags;
    auto* bound_cmd = app.add_subcommand("bound", "matching upper bound on adversarial accuracy");
    add_data_flags(bound_cmd, bound_flags);

    SweepFlags sweep_flags;
    auto* sweep_cmd = app.add_subcommand("sweep", "bound across an epsilon grid, as CSV");
    sweep_cmd->add_option("--data", sweep_flags.data_path, "CSV file")->required();
    sweep_cmd->add_option("--epsilons", sweep_flags.epsilons, "explicit comma separated grid");
    sweep_cmd->add_option("--points", sweep_flags.points, "grid size when --epsilons is absent");
    sweep_cmd->add_option("--max-eps", sweep_flags.max_eps, "grid upper end");
    sweep_cmd->add_option("--out", sweep_flags.out_path, "output CSV (default stdout)");

    SelectFlags select_flags;
    auto* select_cmd = app.add_subcommand("select-eps", "epsilons at fractions of the bound range");
    select_cmd->add_option("--data", select_flags.data_path, "CSV file")->required();
    select_cmd->add_option("--fractions", select_flags.fractions, "default 0.25,0.5,0.75");

    ExportFlags export_flags;
    auto* export_cmd = app.add_subcommand("export", "write the WCNF or LP encoding");
    add_data_flags(export_cmd, export_flags.data);
    export_cmd->add_option("--depth", export_flags.depth, "tree depth")->required();
    export_cmd->add_option("--format", export_flags.format,
                           "wcnf|wcnf2022|lp-continuous|lp-binary")
        ->required();
    export_cmd->add_option("--out", export_flags.out_path, "output path")->required();
    export_cmd->add_option("--warm-start-out", export_flags.warm_out_path,
                           "also write a greedy warm start (LP formats)");

    ExperimentFlags exp_flags;
    auto* exp_cmd = app.add_subcommand("experiment", "split + CV harness, results as CSV");
    add_data_flags(exp_cmd, exp_flags.data);
    exp_cmd->add_option("--epsilons", exp_flags.epsilons, "comma separated epsilon list");
    exp_cmd->add_option("--depths", exp_flags.depths, "comma separated depth grid");
    exp_cmd->add_option("--methods", exp_flags.methods, "comma separated method list");
    exp_cmd->add_option("--seed", exp_flags.seed, "seed fixing all randomness");
    exp_cmd->add_option("--train-fraction", exp_flags.train_fraction, "default 0.8");
    exp_cmd->add_option("--folds", exp_flags.folds, "cross validation folds, default 3");
    exp_cmd->add_flag("--warm", exp_flags.warm, "warm start solver methods");
    exp_cmd->add_option("--solver-cmd", exp_flags.solver_cmd, "external solver template");
    exp_cmd->add_option("--timeout", exp_flags.timeout, "per-fit wall clock limit in seconds");
    exp_cmd->add_option("--out", exp_flags.out_path, "output CSV (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(fit_cmd)) return cmd_fit(fit_flags);
        if (app.got_subcommand(eval_cmd)) return cmd_eval(eval_flags);
        if (app.got_subcommand(bound_cmd)) return cmd_bound(bound_flags);
        if (app.got_subcommand(sweep_cmd)) return cmd_sweep(sweep_flags);
        if (app.got_subcommand(select_cmd)) return cmd_select_eps(select_flags);
        if (app.got_subcommand(export_cmd)) return cmd_export(export_flags);
        if (app.got_subcommand(exp_cmd)) return cmd_experiment(exp_flags);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
