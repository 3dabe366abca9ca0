#pragma once

// Command-line front end tying the pipeline together: validate plant
// documents, fit uncertainty parameters from history files, generate
// synthetic instances, solve (robust or nominal), cross-check against an
// exhaustive oracle, Monte-Carlo evaluate a stored solution, and tabulate
// comparison reports.
//
// Every command is a pure function of its input files and flags: given the
// same inputs and seed it writes byte-identical artifacts (no timestamps or
// wall-clock data in any output).  Result data goes to files under the
// output directory, a short stable summary to the `out` stream, and progress
// logs to the `log` stream, gated by the PLANTSCHED_LOG environment variable
// (0 = silent, 1 = progress, 2 = per-iteration detail; default 1).

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "plantsched/ddccg.hpp"

namespace plantsched::cli {

// The exhaustive solve would enumerate more first-stage binaries than the
// supported cap; use the decomposition solve instead.
struct TooLargeForOracle : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The report command found no stored run summaries to tabulate.
struct MissingRun : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Stable exit-code contract shared by every subcommand.
enum ExitCode : int {
    kOk = 0,
    kValidationError = 2,  // bad inputs, unusable files, contract violations
    kInfeasible = 3,       // no schedule survives its worst case
    kLimitHit = 4,         // iteration/node/size limit reached
    kInternalError = 5,    // solver breakdown or unexpected failure
};

struct RunConfig {
    std::string subcommand;     // validate | fit | gen | solve | oracle | mc |
                                // report | engine-case
    std::string instance;       // plant JSON path
    std::string ddu;            // uncertainty JSON path (input)
    std::string history_loads;  // load-history CSV path
    std::string history_line;   // line-state-history CSV path
    std::string solution;       // stored solution JSON path (input for mc)
    std::string out_dir = ".";  // artifact directory (created if missing)
    std::string label = "run";  // artifact file-name prefix

    bool lenient = false;        // tolerate unknown keys in the plant JSON
    bool no_ddu = false;         // strip decision-dependent sets before solving
    bool greedy_corners = false; // --corners greedy: heuristic load-box scan
    bool idm_updates = false;    // re-tighten credal intervals each iteration

    // Uncertainty overrides; negative = keep the fitted/loaded value.
    double epsilon = -1.0;  // chance budget
    double gamma = -1.0;    // credal confidence
    double gamma1 = -1.0;   // mean-moment scale
    double gamma2 = -1.0;   // variance-moment scale
    // Load-box calibration override: "", "gaussian", or "distribution-free".
    std::string calibration;

    double gap = 1e-4;         // decomposition stopping tolerance
    double psi_floor = -1e9;   // recourse epigraph lower bound
    int max_iters = 200;
    long node_limit = 2000000;
    int threads = 0;  // 0 = library default, 1 = serial, >1 = thread cap
    std::uint64_t seed = 1;
    long trials = 10000;  // Monte Carlo sample count
    bool stress_law = false;  // mc: sample the extremal two-point load law
    std::vector<double> gamma_sweep;  // solve once per value when non-empty

    // gen knobs
    int gen_workshops = 2;
    int gen_options = 2;
    int gen_horizon = 3;
    double gen_intensity = 1.0;
    int gen_samples = 40;

    // engine-case knobs
    int engine_hours = 24;
};

// Solution (de)serialization shared by solve, oracle, gen, and mc.  The
// format round-trips exactly: load_solution(save_solution(s)) == s.
std::string save_solution(const ddccg::Solution& sol);
ddccg::Solution load_solution(const std::string& json_text);

// Each command returns its exit code and writes artifacts under
// cfg.out_dir.  Commands throw on errors outside their own contract;
// dispatch() maps every exception onto the exit-code table.
int cmd_validate(const RunConfig& cfg, std::ostream& out, std::ostream& log);
int cmd_fit(const RunConfig& cfg, std::ostream& out, std::ostream& log);
int cmd_gen(const RunConfig& cfg, std::ostream& out, std::ostream& log);
int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& log);
int cmd_oracle(const RunConfig& cfg, std::ostream& out, std::ostream& log);
int cmd_mc(const RunConfig& cfg, std::ostream& out, std::ostream& log);
int cmd_report(const RunConfig& cfg, std::ostream& out, std::ostream& log);
int cmd_engine_case(const RunConfig& cfg, std::ostream& out, std::ostream& log);

// Runs the configured subcommand and translates exceptions into the stable
// exit codes (2 validation, 3 infeasible, 4 limits, 5 internal), logging the
// reason to `log`.
int dispatch(const RunConfig& cfg, std::ostream& out, std::ostream& log);

}  // namespace plantsched::cli
