// Batch front end for the robust co-scheduling pipeline.  Argument parsing
// only; all behavior lives in the cli library so tests can drive the same
// code paths without spawning processes.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "plantsched/cli.hpp"

namespace cli = plantsched::cli;

int main(int argc, char** argv) {
    CLI::App app{
        "Robust co-scheduling of production equipment and energy dispatch.\n"
        "Set PLANTSCHED_LOG=0|1|2 to control stderr verbosity."};
    app.require_subcommand(1);

    cli::RunConfig cfg;
    std::string corners = "exact";

    auto add_common = [&](CLI::App* c) {
        c->add_option("--out", cfg.out_dir, "artifact directory");
        c->add_option("--label", cfg.label, "artifact file-name prefix");
        c->add_option("--seed", cfg.seed, "random seed");
        c->add_option("--threads", cfg.threads,
                      "0 = default, 1 = serial, >1 = thread cap");
    };
    auto add_instance = [&](CLI::App* c, bool required) {
        auto* o = c->add_option("--instance", cfg.instance, "plant JSON file");
        if (required) o->required();
        c->add_flag("--lenient", cfg.lenient,
                    "tolerate unknown keys in the plant JSON");
    };
    auto add_uncertainty = [&](CLI::App* c) {
        c->add_option("--ddu", cfg.ddu, "uncertainty JSON file");
        c->add_option("--history-loads", cfg.history_loads,
                      "hourly load history CSV");
        c->add_option("--history-idm", cfg.history_line,
                      "line state history CSV");
        c->add_option("--epsilon", cfg.epsilon, "chance budget override");
        c->add_option("--gamma", cfg.gamma, "credal confidence override");
        c->add_option("--gamma1", cfg.gamma1, "mean-moment scale override");
        c->add_option("--gamma2", cfg.gamma2, "variance-moment scale override");
        c->add_option("--calibration", cfg.calibration,
                      "load-box calibration: gaussian | distribution-free");
        c->add_flag("--no-ddu", cfg.no_ddu,
                    "strip decision-dependent sets before solving");
    };
    auto add_engine = [&](CLI::App* c) {
        c->add_option("--gap", cfg.gap, "stopping tolerance on the bound gap");
        c->add_option("--max-iters", cfg.max_iters, "iteration limit");
        c->add_option("--node-limit", cfg.node_limit,
                      "branch-and-bound node limit");
        c->add_option("--psi-floor", cfg.psi_floor,
                      "recourse epigraph lower bound");
        c->add_option("--corners", corners,
                      "adversary scan mode: exact | greedy")
            ->check(CLI::IsMember({"exact", "greedy"}));
        c->add_flag("--idm-updates", cfg.idm_updates,
                    "re-tighten credal intervals each iteration");
    };

    auto* validate =
        app.add_subcommand("validate", "check a plant document and its links");
    add_instance(validate, true);
    add_uncertainty(validate);
    add_common(validate);

    auto* fit = app.add_subcommand(
        "fit", "fit uncertainty parameters from history CSVs");
    fit->add_option("--history-loads", cfg.history_loads,
                    "hourly load history CSV")
        ->required();
    fit->add_option("--history-idm", cfg.history_line,
                    "line state history CSV");
    fit->add_option("--epsilon", cfg.epsilon, "chance budget");
    fit->add_option("--gamma", cfg.gamma, "credal confidence");
    fit->add_option("--gamma1", cfg.gamma1, "mean-moment scale");
    fit->add_option("--gamma2", cfg.gamma2, "variance-moment scale");
    fit->add_option("--calibration", cfg.calibration,
                    "load-box calibration: gaussian | distribution-free");
    add_common(fit);

    auto* gen =
        app.add_subcommand("gen", "generate a seeded synthetic instance");
    gen->add_option("--workshops", cfg.gen_workshops, "workshop count");
    gen->add_option("--options", cfg.gen_options, "options per workshop");
    gen->add_option("--hours", cfg.gen_horizon, "scheduling horizon");
    gen->add_option("--intensity", cfg.gen_intensity,
                    "decision-dependence intensity (0 = none)");
    gen->add_option("--samples", cfg.gen_samples, "history depth per hour");
    gen->add_option("--epsilon", cfg.epsilon, "chance budget");
    gen->add_option("--gamma", cfg.gamma, "credal confidence");
    gen->add_option("--gamma1", cfg.gamma1, "mean-moment scale");
    gen->add_option("--gamma2", cfg.gamma2, "variance-moment scale");
    add_common(gen);

    auto* solve = app.add_subcommand(
        "solve", "robust co-schedule via column-and-constraint generation");
    add_instance(solve, true);
    add_uncertainty(solve);
    add_engine(solve);
    solve->add_option("--gamma-sweep", cfg.gamma_sweep,
                      "solve once per credal confidence value")
        ->delimiter(',');
    add_common(solve);

    auto* oracle = app.add_subcommand(
        "oracle", "exhaustive min-max-min cross-check (small instances)");
    add_instance(oracle, true);
    add_uncertainty(oracle);
    add_engine(oracle);
    add_common(oracle);

    auto* mc = app.add_subcommand(
        "mc", "Monte Carlo replay of a stored solution");
    add_instance(mc, true);
    add_uncertainty(mc);
    mc->add_option("--solution", cfg.solution, "stored solution JSON")
        ->required();
    mc->add_option("--trials", cfg.trials, "sample count");
    mc->add_flag("--stress-law", cfg.stress_law,
                 "sample the extremal two-point load law");
    add_common(mc);

    auto* report = app.add_subcommand(
        "report", "tabulate stored run summaries into comparison tables");
    add_common(report);

    auto* engine_case = app.add_subcommand(
        "engine-case", "write the bundled engine-assembly plant document");
    engine_case->add_option("--hours", cfg.engine_hours, "scheduling horizon");
    add_common(engine_case);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : cli::kValidationError;
    }

    cfg.greedy_corners = corners == "greedy";
    for (auto* sub : {validate, fit, gen, solve, oracle, mc, report, engine_case})
        if (sub->parsed()) cfg.subcommand = sub->get_name();

    return cli::dispatch(cfg, std::cout, std::cerr);
}
