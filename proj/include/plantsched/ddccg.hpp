#pragma once
// Two-stage robust co-scheduling engine whose uncertainty sets depend on the
// first-stage decision.
//
// Stage 1 fixes the hourly equipment schedule.  An adversary then picks, from
// schedule-dependent sets, the realized yields of quality-corrected options,
// the acceptance level of by-product demand, and the deviation of the
// measured hourly load from its forecast.  Stage 2 reacts with energy
// dispatch, storage use, and by-product sales.
//
// The solver alternates:
//   master  — a MILP over schedules carrying one copied recourse block per
//             adversary scenario found so far (plus an epigraph variable for
//             the worst recourse cost), giving a monotone lower bound;
//   oracle  — exact enumeration of the adversary's extreme points for a fixed
//             schedule (the recourse LP value is convex in each uncertain
//             parameter, so the maximum sits at a corner), giving an upper
//             bound.
// Each oracle answer is added back to the master as an optimality cut (a new
// recourse block tied to the epigraph variable) or a feasibility cut (the
// block alone, which excludes schedules that leave no feasible recourse).
// With finitely many schedules and corners the gap closes in finitely many
// iterations.

#include <stdexcept>
#include <string>
#include <vector>

#include "plantsched/ddu.hpp"
#include "plantsched/factory.hpp"
#include "plantsched/opt.hpp"

namespace plantsched::ddccg {

// A full model could not be separated into schedule-side and recourse-side
// pieces (unknown variable family, or an integer variable on the recourse
// side).
struct SplitError : std::runtime_error {
    explicit SplitError(const std::string& what) : std::runtime_error(what) {}
};

// The adversary oracle failed (solver breakdown, not model infeasibility).
struct OracleFailure : std::runtime_error {
    explicit OracleFailure(const std::string& what) : std::runtime_error(what) {}
};

// No schedule admits a feasible recourse against its worst case.
struct InfeasibleInstance : std::runtime_error {
    explicit InfeasibleInstance(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Uncertainty description
// ---------------------------------------------------------------------------

// Everything the adversary controls, grouped by mechanism:
//  - yields:   corrected options may fall to schedule-dependent floors;
//  - demand:   by-product acceptance weights lie in credal intervals that are
//              activated by which options the schedule runs;
//  - fr:       measured hourly load deviates from forecast within a moment-
//              calibrated band (schedule-independent).
struct UncertaintyModel {
    ddu::FrMomentModel fr;
    ddu::FrCalibration calibration = ddu::FrCalibration::Gaussian;
    ddu::YieldAmbiguity yields;
    ddu::ProductStructureIdm demand;
};

// One adversary choice.  Yields and demand acceptance move along stress
// segments whose endpoints depend on the schedule; the load deviation is a
// free box.
//  tau_yield = 1 : every corrected option's yield is pinned to its floor;
//  tau_yield = 0 : yields stay at 1.
//  tau_zeta  = 1 : acceptance at the low end of each credal interval;
//  tau_zeta  = 0 : high end;  -1 : custom per-state values below.
struct WorstCase {
    int tau_yield = 0;
    int tau_zeta = -1;
    std::vector<double> zeta_state_values;  // per retained demand state
    std::vector<double> load_dev;           // per hour, within [-delta_h, +delta_h]

    bool operator==(const WorstCase& o) const;
};

enum class SpMode { Exact, Greedy };

// Adversary oracle answer for one fixed schedule.
struct SpResult {
    double value = 0.0;   // worst-case recourse cost (second-stage terms only)
    bool feasible = true; // false: worst_u leaves no feasible recourse
    WorstCase worst_u;
    SpMode mode = SpMode::Exact;
    factory::EnergyDispatch dispatch;  // recourse at worst_u (when feasible)
    std::vector<double> sell_by;       // by-product sales at worst_u
    int corners_evaluated = 0;
};

struct TraceEntry {
    int k = 0;
    double lb = 0.0;
    double ub = 0.0;
    double gap = 0.0;
    std::string sp_status;  // "exact" | "greedy" | "infeasible"
    std::string cut_kind;   // "optimality" | "feasibility" | "repeat" | "none"
    double elapsed_ms = 0.0;
};

enum class RunStatus { Converged, IterationLimit };

struct Solution {
    factory::ScheduleDecision schedule;
    factory::EnergyDispatch dispatch;  // recourse against worst_u
    std::vector<double> sell_by;       // by-product sales against worst_u
    double objective = 0.0;            // guaranteed (worst-case) total cost
    double lower_bound = 0.0;
    double upper_bound = 0.0;
    int iterations = 0;
    WorstCase worst_u;
    RunStatus status = RunStatus::Converged;
};

// Iteration limit was hit before the bound gap closed; carries the best
// schedule found and the full iteration trace.
struct IterationLimitExceeded : std::runtime_error {
    IterationLimitExceeded(const std::string& what, Solution best,
                           std::vector<TraceEntry> tr)
        : std::runtime_error(what), incumbent(std::move(best)), trace(std::move(tr)) {}
    Solution incumbent;
    std::vector<TraceEntry> trace;
};

struct DdccgOptions {
    double epsilon = 1e-4;     // stop when ub - lb <= epsilon * max(1, |ub|)
    int max_iters = 200;
    double psi_floor = -1e9;   // lower bound for the epigraph variable
    int exact_corner_bits = 12;  // enumerate exactly up to 2^bits corners
    bool force_greedy = false;   // always use the greedy load-box heuristic
    bool idm_updates = false;    // re-tighten credal intervals each iteration
    double sell_big = -1.0;      // override by-product sale bound; <0 = derive
    opt::SolverOptions solver;
};

// ---------------------------------------------------------------------------
// Model separation
// ---------------------------------------------------------------------------

// Classification of a fully emitted co-scheduling model into schedule-side
// (stage 1) and recourse-side (stage 2) variables and rows.  A row belongs to
// the master iff it touches only stage-1 variables.
struct ProblemSplit {
    std::vector<int> first_stage_vars;
    std::vector<int> second_stage_vars;
    std::vector<int> master_rows;
    std::vector<int> recourse_rows;
};

ProblemSplit split_problem(const opt::OptModel& full_model);

// ---------------------------------------------------------------------------
// Master problem state
// ---------------------------------------------------------------------------

// Identifies where one scenario's recourse block lives in the master.
struct ScenarioBlock {
    int label = 0;
    WorstCase u;
    bool optimality = true;  // false: feasibility cut (no epigraph row)
    int psi_row = -1;        // index of the epigraph row when optimality
    std::vector<int> row_indices;
    opt::LinExpr objective_expr;  // this scenario's recourse cost
};

struct CutPool {
    std::vector<ScenarioBlock> scenarios;
    int optimality_count = 0;
    int feasibility_count = 0;
};

// The master MILP plus every index needed to extend it with new scenarios.
// Built once by build_master(); add_cuts() appends scenario blocks.
struct MasterContext {
    opt::OptModel model;
    const factory::FactoryGraph* graph = nullptr;

    int horizon = 0;
    std::vector<std::vector<std::vector<int>>> run_idx;  // [h][n][p]
    std::vector<int> tuse_idx;                           // [h]
    std::vector<int> energy_idx;                         // [h]
    int psi = -1;

    // Corrected options: global option ids resolved to (workshop, option).
    struct CorrectedOption {
        std::string id;
        int n = 0, p = 0;
        double floor = 0.0;
    };
    std::vector<CorrectedOption> corrected;
    // Simultaneity combos: members resolved to (workshop, option), plus the
    // floor shift each active combo applies.
    struct ComboRef {
        std::vector<std::pair<int, int>> members;
        double delta = 0.0;
    };
    std::vector<ComboRef> combos;
    // combo_aux[c][h]: AND variable of combo c's members at hour h.
    std::vector<std::vector<int>> combo_aux;
    // Lazily created when the first floor-yield scenario arrives:
    // alpha_idx[h][j], z_idx[h][j] for corrected option j (-1 until built).
    std::vector<std::vector<int>> alpha_idx;
    std::vector<std::vector<int>> z_idx;

    // Retained demand states (ratio above threshold).
    struct DemandState {
        int spec_index = 0;     // index into UncertaintyModel::demand.states
        double weight = 0.0;    // contribution ratio
        std::vector<std::pair<int, int>> members;  // pattern as (workshop, option)
        std::vector<int> ind;   // indicator variable per hour (AND of pattern)
        double lo = 0.0, hi = 0.0;  // current credal interval endpoints
    };
    std::vector<DemandState> states;

    std::vector<double> mu;     // forecast load per hour
    std::vector<double> delta;  // load deviation half-width per hour
    std::vector<double> sell_cap;  // by-product sale bound per hour
    int outlet = -1;            // by-product outlet buffer (-1: none)
    int main_outlet = -1;       // terminal-sale buffer (-1: none)

    CutPool cuts;
    int next_label = 0;
};

// Builds the schedule-side master: run binaries with uniqueness / daily-cap /
// minimum-uptime rows, machine-time and energy aggregates, combo and demand-
// state indicator linearizations, and the epigraph variable.  No recourse
// blocks yet.  Throws factory::ConsistencyError when the uncertainty model
// references unknown option ids or has inconsistent shapes.
MasterContext build_master(const factory::FactoryGraph& g, const UncertaintyModel& um,
                           const DdccgOptions& opts = {});

// Recomputes the credal interval endpoints from the (possibly grown) run-time
// counts in `updated`.  Affects future cuts and oracle calls; blocks already
// in the master keep their wider intervals, which remain valid.
void tighten_wx(MasterContext& ctx, const ddu::ProductStructureIdm& updated);

// Exact (or greedy, past the corner budget) adversary oracle at a fixed
// schedule.  Evaluates the recourse LP at uncertainty-set corners and returns
// the maximizer.  `value` excludes schedule-side machine-time cost.
SpResult solve_sp_oracle(const MasterContext& ctx, const factory::ScheduleDecision& sched,
                         const DdccgOptions& opts = {});

// Appends one scenario block for `u`; with optimality=true also ties the
// block's cost to the epigraph variable.  Returns the scenario label.
int add_cuts(MasterContext& ctx, const WorstCase& u, bool optimality);

// Full engine loop.  Throws InfeasibleInstance when no schedule survives,
// IterationLimitExceeded (with incumbent and trace) when max_iters is hit.
Solution run(const factory::FactoryGraph& g, const UncertaintyModel& um,
             const DdccgOptions& opts = {}, std::vector<TraceEntry>* trace = nullptr);

// Single-scenario reference: solves the co-schedule against the nominal world
// (yields 1, credal midpoints, zero load deviation).  Same objective terms as
// run(), no robustness.
Solution solve_deterministic(const factory::FactoryGraph& g, const UncertaintyModel& um,
                             const DdccgOptions& opts = {});

}  // namespace plantsched::ddccg
