#pragma once

// Plant model: workshops with selectable equipment options, material buffers
// connecting them, and an on-site energy system (storage, local generation,
// grid purchases).  This header defines the data model, a strict JSON
// loader/saver, linear-constraint emission over a shared variable naming
// scheme, and a literal hour-by-hour schedule simulator used as the ground
// truth for costs and feasibility.

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "plantsched/opt.hpp"

namespace plantsched::factory {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

// Structural problem in an input document: missing key, wrong type, unknown
// key in strict mode.  The message carries a path like "workshops[2].options[0].id".
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The document parsed but the data is incoherent: dangling buffer reference,
// price series of the wrong length, out-of-range parameter.
struct ConsistencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A simulated schedule/dispatch violates a physical constraint (stock going
// negative, storage bounds, ramp limits...).  The message names the hour and
// the constraint.
struct InfeasibleSchedule : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Data model
// ---------------------------------------------------------------------------

// One way of running a workshop for one hour.
struct EquipmentOption {
    std::string id;
    double time_cost = 1.0;    // machine-hours consumed per active hour
    double energy_cost = 0.0;  // kWh consumed per active hour
    double output_qty = 0.0;   // units added to each downstream buffer
    double input_qty = 0.0;    // units drawn from each upstream buffer
    int min_uptime = 1;        // once started, must stay on this many hours
    int max_daily_uses = 1 << 20;  // cap on total active hours in the horizon
};

struct Workshop {
    std::string id;
    double location_x = 0.0;
    double location_y = 0.0;
    std::vector<std::string> upstream;    // buffer ids drawn from
    std::vector<std::string> downstream;  // buffer ids produced into
    std::vector<EquipmentOption> options;
};

struct Buffer {
    std::string id;
    double initial_stock = 0.0;
    double transport_batch = 1.0;  // units moved per trip
    double transport_time = 0.0;   // hours per trip
    bool is_byproduct_outlet = false;  // stock can be sold hour by hour
    bool is_main_outlet = false;       // terminal stock sold at horizon end
};

struct EnergySystem {
    double bess_capacity = 0.0;  // storage size, kWh
    double bess_initial = 0.0;   // state of charge at hour 0, kWh
    double discharge_eff = 1.0;  // kWh drained from storage per kWh delivered
    double charge_eff = 1.0;     // kWh stored per kWh fed in
    double ramp_lo = 0.0;        // min |state-of-charge change| per hour, kWh
    double ramp_hi = opt::kInf;  // max |state-of-charge change| per hour, kWh
    std::vector<double> rtp;         // grid price per hour, one entry per hour
    std::vector<double> der_output;  // local generation budget per hour, kWh
    double degr_coeff = 0.0;      // storage wear cost per kWh held per hour
    double sale_price_main = 0.0; // revenue per unit of terminal main stock
    double sale_price_by = 0.0;   // revenue per unit of byproduct sold
    double usage_rate = 1.0;      // cost per machine-hour (incl. transport)
};

struct FactoryGraph {
    int horizon = 0;  // number of scheduling hours
    std::vector<Workshop> workshops;
    std::vector<Buffer> buffers;
    EnergySystem energy;

    int buffer_index(const std::string& id) const;    // -1 if absent
    int workshop_index(const std::string& id) const;  // -1 if absent
    // Workshop indices producing into / consuming from buffer m.
    std::vector<int> producers_of(int m) const;
    std::vector<int> consumers_of(int m) const;
    // Index of the unique byproduct outlet buffer; -1 if none, throws
    // ConsistencyError if several.
    int byproduct_outlet_index() const;
    // Index of the terminal-sale buffer: the one flagged is_main_outlet, or
    // the unique non-byproduct buffer nobody consumes from.  Throws
    // ConsistencyError when ambiguous or absent.
    int main_outlet_index() const;
    int total_options() const;
};

// ---------------------------------------------------------------------------
// Decisions, realizations, reports
// ---------------------------------------------------------------------------

// First-stage plan: which option each workshop runs each hour, plus the
// hourly byproduct sale quantity.
struct ScheduleDecision {
    // on[h][n][p] = 1 when workshop n runs option p during hour h.
    std::vector<std::vector<std::vector<int>>> on;
    std::vector<double> sell_by;  // byproduct units sold each hour (may be empty = 0)
};

// Hourly energy operation.  soc / net_purchase may be left empty; the
// simulator derives them and fills the report.
struct EnergyDispatch {
    std::vector<double> storage_out;  // kWh delivered from storage (E_EU)
    std::vector<double> local_use;    // kWh of local generation consumed (E_LU)
    std::vector<double> storage_in;   // kWh of local generation stored (E_SU)
    std::vector<double> soc;          // optional: state of charge after each hour
    std::vector<double> net_purchase; // optional: grid purchase per hour
};

// One realized sample of the uncertain quantities.
struct UncertaintyRealization {
    // yield[h][n][p]: fraction of nominal output actually produced.
    std::vector<std::vector<std::vector<double>>> yield;
    std::vector<double> expected_load;  // reference load per hour, kWh
    std::vector<double> zeta;           // byproduct demand acceptance in [0,1]
};

// Uniform realization: every yield = y, loads = 0, zeta = z.
UncertaintyRealization flat_realization(const FactoryGraph& g, double y, double z);

struct CostReport {
    double equipment_cost = 0.0;    // usage_rate * total adjusted machine time
    double degradation_cost = 0.0;  // degr_coeff * sum of hourly state of charge
    double purchase_cost = 0.0;     // sum of rtp * net grid purchase
    double reg_penalty = 0.0;       // sum of |net purchase - expected load|
    double main_revenue = 0.0;      // sale_price_main * terminal main stock
    double by_revenue = 0.0;        // sale_price_by * sum zeta * sold
    double objective = 0.0;         // costs minus revenues

    std::vector<double> per_hour_time;      // adjusted machine time per hour
    std::vector<double> per_hour_energy;    // production demand per hour
    std::vector<double> per_hour_purchase;  // net grid purchase per hour
    std::vector<double> per_hour_soc;       // state of charge after each hour
    std::vector<double> per_hour_reg_dev;   // |purchase - expected load|
    // stock[m] has horizon+1 entries: initial stock then after each hour.
    std::vector<std::vector<double>> stock;
};

// ---------------------------------------------------------------------------
// Variable naming shared by constraint emission and the solver layers
// ---------------------------------------------------------------------------

std::string run_name(int h, int n, int p);   // binary: option p of workshop n at hour h
std::string buf_name(int h, int m);          // stock of buffer m after hour h (h=0: initial)
std::string flow_name(int h, int m);         // |stock change| of buffer m over hour h
std::string tuse_name(int h);                // raw machine time at hour h
std::string ttot_name(int h);                // machine time incl. transport at hour h
std::string energy_name(int h);              // production energy demand at hour h
std::string sell_name(int h);                // byproduct units sold at hour h
std::string bdis_name(int h);                // storage output at hour h
std::string bchg_name(int h);                // storage input at hour h
std::string deru_name(int h);                // local generation consumed at hour h
std::string soc_name(int h);                 // state of charge after hour h (h=0: initial)
std::string grid_name(int h);                // net grid purchase at hour h

// ---------------------------------------------------------------------------
// Constraint emission
// ---------------------------------------------------------------------------

struct ConstraintBlock {
    std::string role;            // e.g. "service_uniqueness"
    std::vector<int> row_indices;  // rows added to the model for this role
};

struct EmitOptions {
    // yield[h][n][p] used as the output coefficient multiplier in stock
    // recurrences.  Empty means 1.0 everywhere.
    std::vector<std::vector<std::vector<double>>> yield;
    bool include_energy = true;    // also emit dispatch variables/rows
    bool include_material = true;  // stocks, transport flow, byproduct sales
};

// Creates every schedule (and optionally dispatch) variable for the graph in
// `m` and appends the coupled constraint rows, grouped by role.  Variable
// bounds carry the box part (stock >= 0, state-of-charge box, fixed initial
// values); rows carry the couplings.
std::vector<ConstraintBlock> emit_constraints(const FactoryGraph& g,
                                              opt::OptModel& m,
                                              const EmitOptions& opts = {});

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

// Plays the schedule forward hour by hour against one realization and returns
// the exact cost breakdown.  Throws InfeasibleSchedule when a physical
// constraint is violated; economically bad schedules simulate fine.
CostReport simulate_schedule(const FactoryGraph& g,
                             const ScheduleDecision& sched,
                             const EnergyDispatch& dispatch,
                             const UncertaintyRealization& real);

// ---------------------------------------------------------------------------
// I/O and the bundled demonstration plant
// ---------------------------------------------------------------------------

// Parses a JSON document into a validated FactoryGraph.  Strict mode rejects
// unknown keys (SchemaError, with the offending path); lenient mode ignores
// them.  Inconsistent data raises ConsistencyError.
FactoryGraph load_factory(const std::string& json_text, bool lenient = false);

// Serializes a graph back to JSON (load_factory(save_factory(g)) == g).
std::string save_factory(const FactoryGraph& g);

// A 12-workshop engine-assembly plant: machining line, a parallel
// grind/mount branch that merges before final assembly, one byproduct
// outlet (machining swarf) and a finished-goods outlet.  14 equipment
// options in total.  All numbers are synthetic defaults chosen so the line
// can run profitably within the horizon.
FactoryGraph build_engine_case(int hours = 24);

}  // namespace plantsched::factory
