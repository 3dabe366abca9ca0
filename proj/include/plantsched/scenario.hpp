#pragma once
// Data-side companion to the robust scheduling engine:
//  - fits the uncertainty parameters (load moments, credal state counts)
//    from historical records;
//  - generates reproducible synthetic plants with a planted feasible
//    schedule, for fuzzing and benchmarks;
//  - replays a fixed co-schedule against sampled realizations (Monte Carlo)
//    for out-of-sample validation of robust solutions.

#include "plantsched/ddccg.hpp"
#include "plantsched/ddu.hpp"
#include "plantsched/factory.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace plantsched::scenario {

// An hour required by the fitting contract has no samples.
struct MissingHour : std::runtime_error {
    explicit MissingHour(const std::string& what) : std::runtime_error(what) {}
};

// Malformed history text (bad header, unparsable field, out-of-range value).
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Historical records
// ---------------------------------------------------------------------------

// One observed line-structure event: at `hour`, the option combination named
// by `state_id` (option ids joined with '+') was seen `count` times, with
// by-product acceptance ratio `ratio`.
struct LineRecord {
    int hour = 0;
    std::string state_id;
    long count = 0;
    double ratio = 0.0;
};

struct HistoryBundle {
    std::vector<std::vector<double>> load_samples;  // [hour][sample], kWh
    std::vector<LineRecord> line_history;
    std::vector<double> rtp_profile;  // optional price series, one per hour
};

// CSV ingestion / emission.  Formats (exact headers required):
//   loads: "hour,sample_kwh"        one sample per row
//   line:  "hour,state_id,count,ratio"
// The horizon is the largest load hour + 1; every smaller hour must carry at
// least one sample (MissingHour otherwise), and line records must stay
// inside that horizon (ParseError).  An empty line CSV text means no line
// history.  Doubles are emitted with round-trip precision, so
// load -> save -> load is exact.
HistoryBundle load_history_csv(const std::string& loads_csv_text,
                               const std::string& line_csv_text);
std::string save_loads_csv(const HistoryBundle& bundle);
std::string save_line_csv(const HistoryBundle& bundle);

// ---------------------------------------------------------------------------
// Parameter fitting
// ---------------------------------------------------------------------------

// Everything the history alone cannot determine: ambiguity budgets,
// confidence levels, and the mean-drift coefficients.
struct FitKnobs {
    double gamma1 = 0.1;
    double gamma2 = 1.2;
    double epsilon = 0.1;
    double drift_k = 0.0;
    double drift_b = 0.0;
    double s = 1.0;          // credal prior equivalent sample size
    double gamma = 0.95;     // credal band confidence
    double threshold = 0.0;  // acceptance-ratio cutoff for retained states
};

struct FittedParams {
    ddu::FrMomentModel fr;
    ddu::ProductStructureIdm demand;
};

// Per-hour load moments via the population estimator; one credal state per
// distinct state_id (first-appearance order) with historical counts summed
// over hours, count-weighted mean acceptance ratio, the option pattern
// parsed from the id, uniform priors, and runtime counts zeroed.
// Throws MissingHour when any hour of the bundle has no load samples.
FittedParams fit_ddu_params(const HistoryBundle& bundle,
                            const FitKnobs& knobs = {});

// JSON round trip for a full uncertainty description
// (load_uncertainty(save_uncertainty(um)) reproduces every field exactly).
std::string save_uncertainty(const ddccg::UncertaintyModel& um);
ddccg::UncertaintyModel load_uncertainty(const std::string& json_text);

// ---------------------------------------------------------------------------
// Synthetic instance generation
// ---------------------------------------------------------------------------

struct SyntheticConfig {
    int workshops = 2;
    int options_per_workshop = 2;
    int horizon = 3;
    std::uint64_t seed = 1;
    int samples_per_hour = 40;  // depth of the generated load history
    // Scales every decision-dependent effect: 0 collapses the uncertainty
    // sets to points (no corrected yields, no credal states, zero-width
    // load box), making the robust and deterministic solves coincide.
    double ddu_intensity = 1.0;
    double gamma1 = 0.1;
    double gamma2 = 1.2;
    double epsilon = 0.1;
    double gamma = 0.9;   // credal band confidence
    double dalpha = 0.1;  // magnitude scale of the combo floor shifts
};

struct SyntheticInstance {
    factory::FactoryGraph graph;
    HistoryBundle bundle;
    factory::ScheduleDecision planted;  // feasible under nominal conditions
    ddccg::UncertaintyModel uncertainty;  // fitted from `bundle` + generated sets
};

// Deterministic in the config: the same seed yields byte-identical graphs,
// histories, and parameters.  The planted schedule is made feasible by
// construction (initial stocks cover its worst cumulative draw-down) and the
// all-idle schedule keeps every instance robustly feasible.
SyntheticInstance gen_synthetic(const SyntheticConfig& cfg);

// ---------------------------------------------------------------------------
// Monte Carlo evaluation
// ---------------------------------------------------------------------------

// Out-of-sample law for the hourly load; both draw the distribution's
// moments uniformly from the fitted moment set first.
//  - TruncatedGaussian: light-tailed member, truncated at +-4 sigma;
//  - TwoPointExtremal:  the two-point law with those moments whose upper
//    atom sits just beyond the deviation box, i.e. the stress case that
//    attains the distribution-free tail bound.
enum class LoadLaw { TruncatedGaussian, TwoPointExtremal };

struct McOptions {
    LoadLaw law = LoadLaw::TruncatedGaussian;
    bool parallel = true;
    double box_tol = 1e-9;  // violation = strictly beyond delta + box_tol
};

// A first-stage schedule together with the dispatch to replay against every
// sample (typically the robust solution's recourse at its worst case).
struct CoSchedule {
    factory::ScheduleDecision schedule;
    factory::EnergyDispatch dispatch;
};

struct McSummary {
    long trials = 0;
    double mean_objective = 0.0;
    double std_objective = 0.0;  // population std over trials
    double q05 = 0.0;            // objective quantiles, linear interpolation
    double q95 = 0.0;
    // Fraction of (trial, hour) cells whose sampled load leaves the fitted
    // deviation box around the hourly mean.
    double fr_violation_rate = 0.0;
    double mean_equipment = 0.0;
    double mean_degradation = 0.0;
    double mean_purchase = 0.0;
    double mean_reg_penalty = 0.0;
    double mean_main_revenue = 0.0;
    double mean_by_revenue = 0.0;

    std::string to_text() const;  // "field: value" lines, stable order
};

// One in-family draw for a fixed schedule (exposed so property tests can
// check the sampler's bounds directly).  Stream layout per hour: the load
// moments and value first, then one draw per corrected option in workshop
// then option order.  Yields of corrected options are uniform on
// [floor(schedule), 1] with the floor shifted by the active combos; other
// yields are 1.  State acceptance is the credal posterior mean (all states,
// regardless of the retention threshold), weighted by the states active
// under the schedule.  The generator is mt19937_64 seeded from
// {seed, trial}, so trials are independent of evaluation order.
factory::UncertaintyRealization sample_realization(
    const factory::FactoryGraph& g, const ddccg::UncertaintyModel& um,
    const factory::ScheduleDecision& sched, std::uint64_t seed, long trial,
    const McOptions& opts = {});

// Replays `co` against n sampled realizations and aggregates the cost
// reports (order-independent pairwise reduction; identical seeds give
// byte-identical summaries whether or not trials run concurrently).
// Propagates the first per-trial simulation error if the fixed co-schedule
// is physically infeasible for some sample; a robust solution never is.
McSummary monte_carlo_eval(const factory::FactoryGraph& g,
                           const ddccg::UncertaintyModel& um,
                           const CoSchedule& co, long n, std::uint64_t seed,
                           const McOptions& opts = {});

// Deterministic evaluation of a fixed schedule at the nominal point of the
// uncertainty model (forecast loads, unit yields, mid-interval acceptance of
// the retained demand states), with the dispatch and by-product sales
// re-optimized for that point.  Makes runs solved under different
// uncertainty models comparable on equal terms.  Throws
// factory::InfeasibleSchedule when the schedule admits no feasible dispatch.
factory::CostReport eval_nominal(const factory::FactoryGraph& g,
                                 const ddccg::UncertaintyModel& um,
                                 const factory::ScheduleDecision& x);

}  // namespace plantsched::scenario
