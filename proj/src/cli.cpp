// Subcommand implementations for the batch front end.  See cli.hpp for the
// contract; the overriding design rule is determinism: identical inputs and
// seed produce byte-identical artifacts, so nothing time- or host-dependent
// is ever written to a file or to the `out` stream.

#include "plantsched/cli.hpp"

#include <algorithm>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "plantsched/scenario.hpp"
#include "plantsched/specfun.hpp"

#ifdef PLANTSCHED_HAVE_OPENMP
#include <omp.h>
#endif

namespace plantsched::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sfmt(const char* f, ...) {
    char buf[256];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

int log_level() {
    const char* v = std::getenv("PLANTSCHED_LOG");
    if (!v || !*v) return 1;
    const int n = std::atoi(v);
    return n < 0 ? 0 : (n > 2 ? 2 : n);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument(sfmt("cannot read '%s'", path.c_str()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream o(path, std::ios::binary | std::ios::trunc);
    if (!o) throw std::runtime_error("cannot write '" + path.string() + "'");
    o << content;
    o.flush();
    if (!o) throw std::runtime_error("short write to '" + path.string() + "'");
}

fs::path artifact(const RunConfig& cfg, const std::string& label,
                  const std::string& suffix) {
    fs::create_directories(cfg.out_dir);
    return fs::path(cfg.out_dir) / (label + suffix);
}

// ---------------------------------------------------------------------------
// Problem loading shared by validate / solve / oracle / mc
// ---------------------------------------------------------------------------

void apply_overrides(const RunConfig& cfg, ddccg::UncertaintyModel& um) {
    if (cfg.epsilon >= 0) um.fr.epsilon = cfg.epsilon;
    if (cfg.gamma1 >= 0) um.fr.gamma1 = cfg.gamma1;
    if (cfg.gamma2 >= 0) um.fr.gamma2 = cfg.gamma2;
    if (cfg.gamma >= 0) um.demand.gamma = cfg.gamma;
    if (!cfg.calibration.empty()) {
        if (cfg.calibration == "gaussian")
            um.calibration = ddu::FrCalibration::Gaussian;
        else if (cfg.calibration == "distribution-free")
            um.calibration = ddu::FrCalibration::DistributionFree;
        else
            throw std::invalid_argument(
                sfmt("--calibration must be 'gaussian' or 'distribution-free', "
                     "got '%s'",
                     cfg.calibration.c_str()));
    }
    if (cfg.no_ddu) {
        um.yields = {};
        um.demand.states.clear();
        um.demand.ratios.clear();
        um.demand.hist_counts.clear();
        um.demand.rt_counts.clear();
    }
}

scenario::FitKnobs knobs_from(const RunConfig& cfg) {
    scenario::FitKnobs k;
    if (cfg.epsilon >= 0) k.epsilon = cfg.epsilon;
    if (cfg.gamma1 >= 0) k.gamma1 = cfg.gamma1;
    if (cfg.gamma2 >= 0) k.gamma2 = cfg.gamma2;
    if (cfg.gamma >= 0) k.gamma = cfg.gamma;
    return k;
}

factory::FactoryGraph load_graph(const RunConfig& cfg) {
    if (cfg.instance.empty())
        throw std::invalid_argument("--instance is required for this command");
    return factory::load_factory(read_file(cfg.instance), cfg.lenient);
}

ddccg::UncertaintyModel load_uncertainty_source(const RunConfig& cfg) {
    ddccg::UncertaintyModel um;
    if (!cfg.ddu.empty()) {
        um = scenario::load_uncertainty(read_file(cfg.ddu));
    } else if (!cfg.history_loads.empty()) {
        const std::string line_text =
            cfg.history_line.empty() ? "" : read_file(cfg.history_line);
        const auto bundle =
            scenario::load_history_csv(read_file(cfg.history_loads), line_text);
        const auto fitted = scenario::fit_ddu_params(bundle, knobs_from(cfg));
        um.fr = fitted.fr;
        um.demand = fitted.demand;
    } else {
        throw std::invalid_argument(
            "an uncertainty source is required: pass --ddu or --history-loads");
    }
    apply_overrides(cfg, um);
    return um;
}

ddccg::DdccgOptions engine_options(const RunConfig& cfg) {
    ddccg::DdccgOptions o;
    o.epsilon = cfg.gap;
    o.max_iters = cfg.max_iters;
    o.psi_floor = cfg.psi_floor;
    o.force_greedy = cfg.greedy_corners;
    o.idm_updates = cfg.idm_updates;
    o.solver.node_limit = cfg.node_limit;
    return o;
}

// ---------------------------------------------------------------------------
// JSON helpers for the solution format
// ---------------------------------------------------------------------------

[[noreturn]] void sol_fail(const std::string& what) {
    throw scenario::ParseError("solution json: " + what);
}

const json& sol_need(const json& o, const char* key) {
    auto it = o.find(key);
    if (it == o.end()) sol_fail(sfmt("missing key '%s'", key));
    return *it;
}

std::vector<double> sol_vecd(const json& j, const char* key) {
    if (!j.is_array()) sol_fail(sfmt("'%s' must be an array", key));
    std::vector<double> out;
    for (const auto& e : j) {
        if (!e.is_number()) sol_fail(sfmt("'%s' must hold numbers", key));
        out.push_back(e.get<double>());
    }
    return out;
}

}  // namespace

std::string save_solution(const ddccg::Solution& sol) {
    json j;
    j["objective"] = sol.objective;
    j["lower_bound"] = sol.lower_bound;
    j["upper_bound"] = sol.upper_bound;
    j["iterations"] = sol.iterations;
    j["status"] = sol.status == ddccg::RunStatus::Converged ? "converged"
                                                            : "iteration_limit";
    j["on"] = sol.schedule.on;
    j["sell_by"] = sol.schedule.sell_by.empty() ? sol.sell_by
                                                : sol.schedule.sell_by;
    j["dispatch"] = {{"storage_out", sol.dispatch.storage_out},
                     {"local_use", sol.dispatch.local_use},
                     {"storage_in", sol.dispatch.storage_in}};
    j["worst_case"] = {{"tau_yield", sol.worst_u.tau_yield},
                       {"tau_zeta", sol.worst_u.tau_zeta},
                       {"zeta_states", sol.worst_u.zeta_state_values},
                       {"load_dev", sol.worst_u.load_dev}};
    return j.dump(2) + "\n";
}

ddccg::Solution load_solution(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        sol_fail(e.what());
    }
    if (!j.is_object()) sol_fail("top level must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        static const char* known[] = {"objective", "lower_bound", "upper_bound",
                                      "iterations", "status", "on", "sell_by",
                                      "dispatch", "worst_case"};
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) sol_fail(sfmt("unknown key '%s'", it.key().c_str()));
    }

    ddccg::Solution sol;
    sol.objective = sol_need(j, "objective").get<double>();
    sol.lower_bound = sol_need(j, "lower_bound").get<double>();
    sol.upper_bound = sol_need(j, "upper_bound").get<double>();
    sol.iterations = sol_need(j, "iterations").get<int>();
    const std::string st = sol_need(j, "status").get<std::string>();
    if (st == "converged")
        sol.status = ddccg::RunStatus::Converged;
    else if (st == "iteration_limit")
        sol.status = ddccg::RunStatus::IterationLimit;
    else
        sol_fail(sfmt("unknown status '%s'", st.c_str()));

    const json& on = sol_need(j, "on");
    if (!on.is_array()) sol_fail("'on' must be an array of hours");
    for (const auto& hour : on) {
        if (!hour.is_array()) sol_fail("'on' hours must be arrays of workshops");
        std::vector<std::vector<int>> hrow;
        for (const auto& shop : hour) {
            if (!shop.is_array())
                sol_fail("'on' workshops must be arrays of options");
            std::vector<int> prow;
            for (const auto& v : shop) {
                if (!v.is_number_integer() ||
                    (v.get<int>() != 0 && v.get<int>() != 1))
                    sol_fail("'on' entries must be 0 or 1");
                prow.push_back(v.get<int>());
            }
            hrow.push_back(std::move(prow));
        }
        sol.schedule.on.push_back(std::move(hrow));
    }
    sol.schedule.sell_by = sol_vecd(sol_need(j, "sell_by"), "sell_by");
    sol.sell_by = sol.schedule.sell_by;

    const json& d = sol_need(j, "dispatch");
    if (!d.is_object()) sol_fail("'dispatch' must be an object");
    sol.dispatch.storage_out = sol_vecd(sol_need(d, "storage_out"), "storage_out");
    sol.dispatch.local_use = sol_vecd(sol_need(d, "local_use"), "local_use");
    sol.dispatch.storage_in = sol_vecd(sol_need(d, "storage_in"), "storage_in");

    const json& w = sol_need(j, "worst_case");
    if (!w.is_object()) sol_fail("'worst_case' must be an object");
    sol.worst_u.tau_yield = sol_need(w, "tau_yield").get<int>();
    sol.worst_u.tau_zeta = sol_need(w, "tau_zeta").get<int>();
    sol.worst_u.zeta_state_values =
        sol_vecd(sol_need(w, "zeta_states"), "zeta_states");
    sol.worst_u.load_dev = sol_vecd(sol_need(w, "load_dev"), "load_dev");
    return sol;
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

int cmd_validate(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
    bool all_ok = true;
    bool usable_graph = false;
    factory::FactoryGraph g;

    auto check = [&](const char* name, auto&& body) {
        if (!all_ok) {
            out << "check " << name << ": skipped\n";
            return;
        }
        try {
            body();
            out << "check " << name << ": ok\n";
        } catch (const std::exception& e) {
            out << "check " << name << ": FAIL " << e.what() << "\n";
            all_ok = false;
        }
    };

    std::string text;
    check("read_instance", [&] { text = read_file(cfg.instance); });
    check("schema", [&] {
        try {
            g = factory::load_factory(text, cfg.lenient);
            usable_graph = true;
        } catch (const factory::ConsistencyError&) {
            // shape is fine, coherence is the next check's business
        }
    });
    check("consistency", [&] {
        if (!usable_graph) {
            g = factory::load_factory(text, cfg.lenient);
            usable_graph = true;
        }
    });
    check("outlets", [&] {
        g.main_outlet_index();
        g.byproduct_outlet_index();
    });

    if (!cfg.ddu.empty() || !cfg.history_loads.empty()) {
        ddccg::UncertaintyModel um;
        check("uncertainty_parse", [&] { um = load_uncertainty_source(cfg); });
        check("uncertainty_link", [&] { ddccg::build_master(g, um); });
    }

    out << "result: " << (all_ok ? "valid" : "invalid") << "\n";
    if (!all_ok && log_level() >= 1)
        log << "validate: '" << cfg.instance << "' failed\n";
    return all_ok ? kOk : kValidationError;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

int cmd_fit(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
    if (cfg.history_loads.empty())
        throw std::invalid_argument("fit requires --history-loads");
    const std::string line_text =
        cfg.history_line.empty() ? "" : read_file(cfg.history_line);
    const auto bundle =
        scenario::load_history_csv(read_file(cfg.history_loads), line_text);
    const auto fitted = scenario::fit_ddu_params(bundle, knobs_from(cfg));

    ddccg::UncertaintyModel um;
    um.fr = fitted.fr;
    um.demand = fitted.demand;
    apply_overrides(cfg, um);

    const auto path = artifact(cfg, cfg.label, ".uncertainty.json");
    write_file(path, scenario::save_uncertainty(um));
    if (log_level() >= 1)
        log << "fit: " << um.fr.horizon() << " hours, " << um.demand.states.size()
            << " states -> " << path.string() << "\n";
    out << "fit " << cfg.label << ": hours " << um.fr.horizon() << " states "
        << um.demand.states.size() << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

int cmd_gen(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
    scenario::SyntheticConfig sc;
    sc.workshops = cfg.gen_workshops;
    sc.options_per_workshop = cfg.gen_options;
    sc.horizon = cfg.gen_horizon;
    sc.seed = cfg.seed;
    sc.samples_per_hour = cfg.gen_samples;
    sc.ddu_intensity = cfg.gen_intensity;
    if (cfg.epsilon >= 0) sc.epsilon = cfg.epsilon;
    if (cfg.gamma1 >= 0) sc.gamma1 = cfg.gamma1;
    if (cfg.gamma2 >= 0) sc.gamma2 = cfg.gamma2;
    if (cfg.gamma >= 0) sc.gamma = cfg.gamma;

    const auto inst = scenario::gen_synthetic(sc);

    write_file(artifact(cfg, cfg.label, ".instance.json"),
               factory::save_factory(inst.graph));
    write_file(artifact(cfg, cfg.label, ".loads.csv"),
               scenario::save_loads_csv(inst.bundle));
    write_file(artifact(cfg, cfg.label, ".line.csv"),
               scenario::save_line_csv(inst.bundle));
    write_file(artifact(cfg, cfg.label, ".uncertainty.json"),
               scenario::save_uncertainty(inst.uncertainty));
    ddccg::Solution planted;
    planted.schedule = inst.planted;
    write_file(artifact(cfg, cfg.label, ".planted.json"),
               save_solution(planted));

    if (log_level() >= 1)
        log << "gen: seed " << cfg.seed << " -> " << cfg.out_dir << "/"
            << cfg.label << ".{instance,loads,line,uncertainty,planted}\n";
    out << "gen " << cfg.label << ": workshops " << sc.workshops << " options "
        << sc.options_per_workshop << " horizon " << sc.horizon << " seed "
        << cfg.seed << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

namespace {

std::string trace_jsonl(const std::vector<ddccg::TraceEntry>& trace) {
    // elapsed_ms is deliberately not written: artifacts must be byte-stable
    // across runs with identical inputs.
    std::string text;
    for (const auto& e : trace) {
        json t;
        t["k"] = e.k;
        t["lb"] = e.lb;
        t["ub"] = e.ub;
        t["gap"] = e.gap;
        t["sp"] = e.sp_status;
        t["cut"] = e.cut_kind;
        text += t.dump() + "\n";
    }
    return text;
}

// Writes the three per-run artifacts and prints the stable one-line result.
int solve_one(const RunConfig& cfg, const factory::FactoryGraph& g,
              const ddccg::UncertaintyModel& um, const std::string& label,
              std::ostream& out, std::ostream& log) {
    std::vector<ddccg::TraceEntry> trace;
    ddccg::Solution sol;
    int code = kOk;
    try {
        sol = ddccg::run(g, um, engine_options(cfg), &trace);
    } catch (const ddccg::IterationLimitExceeded& e) {
        sol = e.incumbent;
        trace = e.trace;
        code = kLimitHit;
        if (log_level() >= 1)
            log << "solve " << label << ": " << e.what() << "\n";
    }

    write_file(artifact(cfg, label, ".solution.json"), save_solution(sol));
    write_file(artifact(cfg, label, ".trace.jsonl"), trace_jsonl(trace));

    // The summary holds terms every run can be compared on: a replay of the
    // schedule at the nominal point (re-optimized dispatch), plus the
    // certified worst-case numbers from the solve itself.
    if (!sol.schedule.on.empty()) {
        const auto rep = scenario::eval_nominal(g, um, sol.schedule);
        json s;
        s["label"] = label;
        s["certified_objective"] = sol.objective;
        s["lower_bound"] = sol.lower_bound;
        s["upper_bound"] = sol.upper_bound;
        s["iterations"] = sol.iterations;
        s["status"] = sol.status == ddccg::RunStatus::Converged
                          ? "converged"
                          : "iteration_limit";
        s["power_cost"] = rep.purchase_cost;
        s["main_products"] = rep.main_revenue;
        s["by_products"] = rep.by_revenue;
        s["nominal_objective"] = rep.objective;
        s["equipment_cost"] = rep.equipment_cost;
        s["degradation_cost"] = rep.degradation_cost;
        s["reg_penalty"] = rep.reg_penalty;
        s["per_hour_consumption"] = rep.per_hour_energy;
        s["per_hour_purchase"] = rep.per_hour_purchase;
        write_file(artifact(cfg, label, ".summary.json"), s.dump(2) + "\n");
    } else if (log_level() >= 1) {
        log << "solve " << label
            << ": no incumbent schedule, summary not written\n";
    }

    out << sfmt("run %s: objective %.10g gap %.6g iterations %d status %s\n",
                label.c_str(), sol.objective,
                sol.upper_bound - sol.lower_bound, sol.iterations,
                sol.status == ddccg::RunStatus::Converged ? "converged"
                                                          : "iteration_limit");
    return code;
}

// Exit code for the exception currently being handled; must be called from
// inside a catch block.
int current_exception_code(std::ostream& log) {
    try {
        throw;
    } catch (const TooLargeForOracle& e) {
        log << "error: " << e.what() << "\n";
        return kLimitHit;
    } catch (const ddccg::IterationLimitExceeded& e) {
        log << "error: " << e.what() << "\n";
        return kLimitHit;
    } catch (const opt::NodeLimitExceeded& e) {
        log << "error: " << e.what() << "\n";
        return kLimitHit;
    } catch (const ddccg::InfeasibleInstance& e) {
        log << "error: " << e.what() << "\n";
        return kInfeasible;
    } catch (const factory::InfeasibleSchedule& e) {
        log << "error: " << e.what() << "\n";
        return kInfeasible;
    } catch (const MissingRun& e) {
        log << "error: " << e.what() << "\n";
        return kValidationError;
    } catch (const factory::SchemaError& e) {
        log << "error: " << e.what() << "\n";
        return kValidationError;
    } catch (const factory::ConsistencyError& e) {
        log << "error: " << e.what() << "\n";
        return kValidationError;
    } catch (const scenario::ParseError& e) {
        log << "error: " << e.what() << "\n";
        return kValidationError;
    } catch (const scenario::MissingHour& e) {
        log << "error: " << e.what() << "\n";
        return kValidationError;
    } catch (const ddu::DomainError& e) {
        log << "error: " << e.what() << "\n";
        return kValidationError;
    } catch (const std::invalid_argument& e) {
        log << "error: " << e.what() << "\n";
        return kValidationError;
    } catch (const std::exception& e) {
        log << "internal error: " << e.what() << "\n";
        return kInternalError;
    } catch (...) {
        log << "internal error: unknown exception\n";
        return kInternalError;
    }
}

}  // namespace

int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
    const auto g = load_graph(cfg);
    const auto um = load_uncertainty_source(cfg);

    if (cfg.gamma_sweep.empty())
        return solve_one(cfg, g, um, cfg.label, out, log);

    // One full solve per confidence value; artifacts are suffixed with the
    // value so a report can tabulate them side by side.
    int worst = kOk;
    for (double gv : cfg.gamma_sweep) {
        auto um_g = um;
        um_g.demand.gamma = gv;
        const std::string label = cfg.label + "_gamma" + sfmt("%g", gv);
        int code;
        try {
            code = solve_one(cfg, g, um_g, label, out, log);
        } catch (...) {
            code = current_exception_code(log);
            out << "run " << label << ": failed (exit " << code << ")\n";
        }
        worst = std::max(worst, code);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

int cmd_oracle(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
    const auto g = load_graph(cfg);
    const auto um = load_uncertainty_source(cfg);

    const int binaries = g.horizon * g.total_options();
    if (binaries > 16)
        throw TooLargeForOracle(
            sfmt("the instance has %d first-stage binaries; the exhaustive "
                 "solve supports at most 16",
                 binaries));

    const auto dopts = engine_options(cfg);
    auto ctx = ddccg::build_master(g, um, dopts);
    // Pin the epigraph variable so a pinned-schedule solve returns exactly
    // the schedule-side cost; the adversary's value is added separately.
    {
        auto& psi = ctx.model.var_mutable(ctx.psi);
        psi.lo = psi.up = 0.0;
    }

    const int H = g.horizon;
    const std::size_t cells = static_cast<std::size_t>(H) * g.workshops.size();
    std::vector<int> radix(cells);
    for (std::size_t c = 0; c < cells; ++c)
        radix[c] =
            static_cast<int>(g.workshops[c % g.workshops.size()].options.size()) +
            1;
    std::vector<int> choice(cells, 0);

    long total = 0;
    long feasible = 0;
    bool have_best = false;
    double best = 0.0;
    factory::ScheduleDecision best_x;
    ddccg::SpResult best_sp;
    bool any_greedy = false;

    for (;;) {
        ++total;
        factory::ScheduleDecision x;
        x.on.assign(static_cast<std::size_t>(H), {});
        for (int h = 0; h < H; ++h) {
            auto& row = x.on[static_cast<std::size_t>(h)];
            row.resize(g.workshops.size());
            for (std::size_t n = 0; n < g.workshops.size(); ++n) {
                const int pick =
                    choice[static_cast<std::size_t>(h) * g.workshops.size() + n];
                row[n].assign(g.workshops[n].options.size(), 0);
                if (pick > 0) row[n][static_cast<std::size_t>(pick - 1)] = 1;
            }
        }
        for (std::size_t h = 0; h < ctx.run_idx.size(); ++h)
            for (std::size_t n = 0; n < ctx.run_idx[h].size(); ++n)
                for (std::size_t p = 0; p < ctx.run_idx[h][n].size(); ++p) {
                    auto& v = ctx.model.var_mutable(ctx.run_idx[h][n][p]);
                    v.lo = v.up = static_cast<double>(x.on[h][n][p]);
                }

        const auto ms = opt::solve_milp(ctx.model, dopts.solver);
        if (ms.status == opt::SolveStatus::Optimal) {
            const auto sp = ddccg::solve_sp_oracle(ctx, x, dopts);
            any_greedy = any_greedy || sp.mode == ddccg::SpMode::Greedy;
            if (sp.feasible) {
                ++feasible;
                const double value = ms.objective_value + sp.value;
                if (!have_best || value < best) {
                    have_best = true;
                    best = value;
                    best_x = x;
                    best_sp = sp;
                }
                if (log_level() >= 2)
                    log << sfmt("oracle: schedule %ld value %.10g\n", total,
                                value);
            }
        }

        // mixed-radix increment over the per-(hour, workshop) choices
        std::size_t c = 0;
        while (c < cells && ++choice[c] == radix[c]) choice[c++] = 0;
        if (c == cells) break;
    }

    if (!have_best)
        throw ddccg::InfeasibleInstance(
            "no schedule admits a feasible recourse against its worst case");

    json oj;
    oj["objective"] = best;
    oj["schedules_total"] = total;
    oj["schedules_feasible"] = feasible;
    oj["first_stage_binaries"] = binaries;
    oj["sp_mode"] = any_greedy ? "greedy" : "exact";
    write_file(artifact(cfg, cfg.label, ".oracle.json"), oj.dump(2) + "\n");

    ddccg::Solution sol;
    sol.schedule = best_x;
    sol.schedule.sell_by = best_sp.sell_by;
    sol.sell_by = best_sp.sell_by;
    sol.dispatch = best_sp.dispatch;
    sol.objective = sol.lower_bound = sol.upper_bound = best;
    sol.worst_u = best_sp.worst_u;
    write_file(artifact(cfg, cfg.label, ".oracle_solution.json"),
               save_solution(sol));

    if (log_level() >= 1)
        log << "oracle: " << total << " schedules enumerated, " << feasible
            << " feasible\n";
    out << sfmt("oracle %s: objective %.10g schedules %ld feasible %ld\n",
                cfg.label.c_str(), best, total, feasible);
    return kOk;
}

// ---------------------------------------------------------------------------
// mc
// ---------------------------------------------------------------------------

int cmd_mc(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
    if (cfg.solution.empty())
        throw std::invalid_argument("mc requires --solution (a stored solve)");
    const auto g = load_graph(cfg);
    const auto um = load_uncertainty_source(cfg);
    const auto sol = load_solution(read_file(cfg.solution));

    scenario::McOptions mopts;
    mopts.parallel = cfg.threads != 1;
    mopts.law = cfg.stress_law ? scenario::LoadLaw::TwoPointExtremal
                               : scenario::LoadLaw::TruncatedGaussian;

    const scenario::CoSchedule co{sol.schedule, sol.dispatch};
    const auto summary =
        scenario::monte_carlo_eval(g, um, co, cfg.trials, cfg.seed, mopts);

    const std::string text = summary.to_text();
    write_file(artifact(cfg, cfg.label, ".mc.txt"), text);
    if (log_level() >= 1)
        log << "mc: " << cfg.trials << " trials of '" << cfg.solution << "'\n";
    out << text;
    return kOk;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
    struct Row {
        std::string label;
        double power = 0, main = 0, by = 0, objective = 0;
        std::vector<double> consumption;
    };
    std::vector<Row> rows;

    std::vector<fs::path> files;
    if (fs::is_directory(cfg.out_dir))
        for (const auto& e : fs::directory_iterator(cfg.out_dir)) {
            const std::string name = e.path().filename().string();
            const std::string tail = ".summary.json";
            if (name.size() > tail.size() &&
                name.compare(name.size() - tail.size(), tail.size(), tail) == 0)
                files.push_back(e.path());
        }
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw MissingRun(sfmt("no run summaries (*.summary.json) under '%s'",
                              cfg.out_dir.c_str()));

    for (const auto& f : files) {
        json s;
        try {
            s = json::parse(read_file(f.string()));
        } catch (const json::exception& e) {
            throw scenario::ParseError(
                sfmt("summary '%s': %s", f.string().c_str(), e.what()));
        }
        Row r;
        r.label = s.value("label", f.stem().stem().string());
        r.power = s.value("power_cost", 0.0);
        r.main = s.value("main_products", 0.0);
        r.by = s.value("by_products", 0.0);
        r.objective = s.value("certified_objective", 0.0);
        if (s.contains("per_hour_consumption"))
            for (const auto& v : s["per_hour_consumption"])
                r.consumption.push_back(v.get<double>());
        rows.push_back(std::move(r));
    }

    // Machine-readable table.
    std::string csv = "run,power_cost,main_products,by_products,objective\n";
    for (const auto& r : rows)
        csv += sfmt("%s,%.10g,%.10g,%.10g,%.10g\n", r.label.c_str(), r.power,
                    r.main, r.by, r.objective);
    write_file(artifact(cfg, "report", ".csv"), csv);

    // Human-readable table.
    std::size_t w0 = 3;
    for (const auto& r : rows) w0 = std::max(w0, r.label.size());
    std::string txt = sfmt("%-*s  %12s  %13s  %11s  %12s\n",
                           static_cast<int>(w0), "Run", "Power Cost",
                           "Main Products", "By-products", "Objective");
    for (const auto& r : rows)
        txt += sfmt("%-*s  %12.4f  %13.4f  %11.4f  %12.4f\n",
                    static_cast<int>(w0), r.label.c_str(), r.power, r.main,
                    r.by, r.objective);
    write_file(artifact(cfg, "report", ".txt"), txt);

    // Per-hour production-demand series, one column per run, for external
    // plotting.
    std::size_t hmax = 0;
    for (const auto& r : rows) hmax = std::max(hmax, r.consumption.size());
    std::string series = "hour";
    for (const auto& r : rows) series += "," + r.label;
    series += "\n";
    for (std::size_t h = 0; h < hmax; ++h) {
        series += sfmt("%zu", h);
        for (const auto& r : rows)
            series += h < r.consumption.size()
                          ? sfmt(",%.10g", r.consumption[h])
                          : ",";
        series += "\n";
    }
    write_file(artifact(cfg, "consumption", ".csv"), series);

    if (log_level() >= 1)
        log << "report: " << rows.size() << " runs tabulated\n";
    out << txt;
    return kOk;
}

// ---------------------------------------------------------------------------
// engine-case
// ---------------------------------------------------------------------------

int cmd_engine_case(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
    const auto g = factory::build_engine_case(cfg.engine_hours);
    const auto path = artifact(cfg, cfg.label, ".instance.json");
    write_file(path, factory::save_factory(g));
    if (log_level() >= 1) log << "engine-case -> " << path.string() << "\n";
    out << "engine-case " << cfg.label << ": workshops " << g.workshops.size()
        << " options " << g.total_options() << " buffers " << g.buffers.size()
        << " horizon " << g.horizon << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// dispatch
// ---------------------------------------------------------------------------

int dispatch(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
#ifdef PLANTSCHED_HAVE_OPENMP
    if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#endif
    try {
        if (cfg.subcommand == "validate") return cmd_validate(cfg, out, log);
        if (cfg.subcommand == "fit") return cmd_fit(cfg, out, log);
        if (cfg.subcommand == "gen") return cmd_gen(cfg, out, log);
        if (cfg.subcommand == "solve") return cmd_solve(cfg, out, log);
        if (cfg.subcommand == "oracle") return cmd_oracle(cfg, out, log);
        if (cfg.subcommand == "mc") return cmd_mc(cfg, out, log);
        if (cfg.subcommand == "report") return cmd_report(cfg, out, log);
        if (cfg.subcommand == "engine-case")
            return cmd_engine_case(cfg, out, log);
        throw std::invalid_argument(
            sfmt("unknown subcommand '%s'", cfg.subcommand.c_str()));
    } catch (...) {
        return current_exception_code(log);
    }
}

}  // namespace plantsched::cli
