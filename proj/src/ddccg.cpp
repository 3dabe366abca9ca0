#include "plantsched/ddccg.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "plantsched/parallel.hpp"

namespace plantsched::ddccg {

namespace {

using factory::ConsistencyError;
using factory::FactoryGraph;
using opt::kInf;
using opt::LinExpr;
using opt::OptModel;
using opt::Rel;
using opt::VarKind;

std::string fmt(const char* pattern, ...) {
    char buf[96];
    va_list args;
    va_start(args, pattern);
    int n = std::vsnprintf(buf, sizeof(buf), pattern, args);
    va_end(args);
    if (n < 0) return pattern;
    return std::string(buf, static_cast<std::size_t>(n));
}

// Resolves a globally unique option id to its (workshop, option) position.
std::pair<int, int> option_location(const FactoryGraph& g, const std::string& id) {
    int found_n = -1, found_p = -1;
    for (std::size_t n = 0; n < g.workshops.size(); ++n)
        for (std::size_t p = 0; p < g.workshops[n].options.size(); ++p)
            if (g.workshops[n].options[p].id == id) {
                if (found_n >= 0)
                    throw ConsistencyError("option id '" + id +
                                           "' is ambiguous across workshops");
                found_n = static_cast<int>(n);
                found_p = static_cast<int>(p);
            }
    if (found_n < 0)
        throw ConsistencyError("uncertainty model references unknown option '" + id + "'");
    return {found_n, found_p};
}

// AND indicator of a set of schedule binaries for one hour; a single member
// is its own indicator.
int hour_indicator(OptModel& m, const std::vector<int>& vars, const std::string& name) {
    if (vars.size() == 1) return vars[0];
    return ddu::and_linearize(m, vars, name);
}

}  // namespace

bool WorstCase::operator==(const WorstCase& o) const {
    return tau_yield == o.tau_yield && tau_zeta == o.tau_zeta &&
           zeta_state_values == o.zeta_state_values && load_dev == o.load_dev;
}

// ---------------------------------------------------------------------------
// Model separation
// ---------------------------------------------------------------------------

ProblemSplit split_problem(const opt::OptModel& full_model) {
    static const char* kFirst[] = {"run_", "tuse_", "energy_"};
    static const char* kSecond[] = {"buf_",  "flow_", "ttot_", "sell_", "bdis_",
                                    "bchg_", "deru_", "soc_",  "grid_"};
    auto starts_with = [](const std::string& s, const char* p) {
        return s.rfind(p, 0) == 0;
    };

    ProblemSplit out;
    std::vector<int> stage(full_model.num_vars(), 0);
    for (std::size_t i = 0; i < full_model.num_vars(); ++i) {
        const auto& v = full_model.vars()[i];
        bool first = false, second = false;
        for (const char* p : kFirst) first = first || starts_with(v.name, p);
        for (const char* p : kSecond) second = second || starts_with(v.name, p);
        if (first == second)
            throw SplitError("variable '" + v.name + "' belongs to no known stage");
        if (second && v.kind == VarKind::Binary)
            throw SplitError("integer variable '" + v.name + "' on the recourse side");
        stage[i] = second ? 2 : 1;
        (second ? out.second_stage_vars : out.first_stage_vars)
            .push_back(static_cast<int>(i));
    }
    for (std::size_t r = 0; r < full_model.num_rows(); ++r) {
        bool touches_second = false;
        for (const auto& [var, coef] : full_model.rows()[r].expr.terms)
            if (coef != 0.0 && stage[static_cast<std::size_t>(var)] == 2) {
                touches_second = true;
                break;
            }
        (touches_second ? out.recourse_rows : out.master_rows)
            .push_back(static_cast<int>(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Master construction
// ---------------------------------------------------------------------------

MasterContext build_master(const FactoryGraph& g, const UncertaintyModel& um,
                           const DdccgOptions& opts) {
    MasterContext ctx;
    ctx.graph = &g;
    ctx.horizon = g.horizon;
    const int H = g.horizon;
    const int W = static_cast<int>(g.workshops.size());

    if (static_cast<int>(um.fr.horizon()) != H)
        throw ConsistencyError("load moment model covers " +
                               std::to_string(um.fr.horizon()) + " hours, schedule needs " +
                               std::to_string(H));

    // Schedule-side skeleton: run binaries, uniqueness / cap / uptime rows,
    // machine-time and production-energy aggregates.
    factory::EmitOptions eo;
    eo.include_energy = false;
    eo.include_material = false;
    factory::emit_constraints(g, ctx.model, eo);

    ctx.run_idx.assign(static_cast<std::size_t>(H), {});
    for (int h = 0; h < H; ++h) {
        ctx.run_idx[h].resize(static_cast<std::size_t>(W));
        for (int n = 0; n < W; ++n) {
            ctx.run_idx[h][n].resize(g.workshops[n].options.size());
            for (std::size_t p = 0; p < g.workshops[n].options.size(); ++p)
                ctx.run_idx[h][n][p] =
                    ctx.model.require_var(factory::run_name(h, n, static_cast<int>(p)));
        }
    }
    ctx.tuse_idx.resize(static_cast<std::size_t>(H));
    ctx.energy_idx.resize(static_cast<std::size_t>(H));
    for (int h = 0; h < H; ++h) {
        ctx.tuse_idx[h] = ctx.model.require_var(factory::tuse_name(h));
        ctx.energy_idx[h] = ctx.model.require_var(factory::energy_name(h));
    }

    ctx.outlet = g.byproduct_outlet_index();
    ctx.main_outlet = g.main_outlet_index();

    // Corrected options and their simultaneity combos.
    double shift_down = 0.0, shift_up = 0.0;
    for (const auto& combo : um.yields.combos) {
        if (combo.members.empty())
            throw ConsistencyError("a yield combo has no member options");
        MasterContext::ComboRef ref;
        ref.delta = combo.delta;
        for (const auto& id : combo.members) ref.members.push_back(option_location(g, id));
        ctx.combos.push_back(std::move(ref));
        shift_down += std::max(combo.delta, 0.0);
        shift_up += std::max(-combo.delta, 0.0);
    }
    for (const auto& id : um.yields.corrected) {
        MasterContext::CorrectedOption co;
        co.id = id;
        auto [n, p] = option_location(g, id);
        co.n = n;
        co.p = p;
        auto it = um.yields.floors.find(id);
        if (it == um.yields.floors.end())
            throw ConsistencyError("corrected option '" + id + "' has no yield floor");
        co.floor = it->second;
        if (!(co.floor >= 0.0 && co.floor <= 1.0))
            throw ConsistencyError("yield floor of '" + id + "' must lie in [0, 1]");
        if (co.floor - shift_down < -1e-12)
            throw ConsistencyError("combo corrections can push the yield floor of '" + id +
                                   "' below zero");
        if (co.floor + shift_up > 1.0 + 1e-12)
            throw ConsistencyError("combo corrections can push the yield floor of '" + id +
                                   "' above one");
        ctx.corrected.push_back(std::move(co));
    }
    ctx.combo_aux.assign(ctx.combos.size(), std::vector<int>(static_cast<std::size_t>(H), -1));
    for (std::size_t c = 0; c < ctx.combos.size(); ++c)
        for (int h = 0; h < H; ++h) {
            std::vector<int> vars;
            for (auto [n, p] : ctx.combos[c].members) vars.push_back(ctx.run_idx[h][n][p]);
            ctx.combo_aux[c][h] =
                hour_indicator(ctx.model, vars, fmt("cmb%d_h%d", static_cast<int>(c), h));
        }

    // Demand states with contribution above the retention threshold.  Their
    // credal intervals matter only when a by-product outlet exists.
    if (um.demand.ratios.size() != um.demand.states.size())
        throw ConsistencyError("demand model has " + std::to_string(um.demand.states.size()) +
                               " states but " + std::to_string(um.demand.ratios.size()) +
                               " contribution ratios");
    ddu::ProductStructureIdm demand = um.demand;
    if (!opts.idm_updates) demand.rt_counts.clear();
    if (ctx.outlet >= 0) {
        for (std::size_t i = 0; i < demand.states.size(); ++i) {
            if (!(demand.ratios[i] > demand.threshold)) continue;
            const auto& st = demand.states[i];
            if (st.pattern.empty())
                throw ConsistencyError("demand state '" + st.id + "' has an empty pattern");
            MasterContext::DemandState ds;
            ds.spec_index = static_cast<int>(i);
            ds.weight = demand.ratios[i];
            for (const auto& id : st.pattern) ds.members.push_back(option_location(g, id));
            ds.ind.resize(static_cast<std::size_t>(H));
            for (int h = 0; h < H; ++h) {
                std::vector<int> vars;
                for (auto [n, p] : ds.members) vars.push_back(ctx.run_idx[h][n][p]);
                ds.ind[h] = hour_indicator(ctx.model, vars,
                                           fmt("sti%d_h%d", static_cast<int>(i), h));
            }
            ddu::ThetaInterval ti = ddu::idm_interval(demand, static_cast<int>(i));
            ds.lo = ti.lo;
            ds.hi = ti.hi;
            ctx.states.push_back(std::move(ds));
        }
    }

    // Load-deviation band (schedule independent): half-width per hour around
    // the forecast, using the forecast itself as the drift proxy.
    ctx.mu = um.fr.mu;
    ctx.delta.resize(static_cast<std::size_t>(H));
    for (int h = 0; h < H; ++h)
        ctx.delta[h] = ddu::fr_delta(um.fr, h, um.fr.mu[h], um.calibration);

    // By-product sale bound per hour: initial stock plus everything the
    // producers could have added by then (yields at most 1).
    if (ctx.outlet >= 0) {
        double max_inflow = 0.0;
        for (int n : g.producers_of(ctx.outlet)) {
            double best = 0.0;
            for (const auto& op : g.workshops[n].options)
                best = std::max(best, op.output_qty);
            max_inflow += best;
        }
        ctx.sell_cap.resize(static_cast<std::size_t>(H));
        for (int h = 0; h < H; ++h)
            ctx.sell_cap[h] = (opts.sell_big >= 0.0)
                                  ? opts.sell_big
                                  : g.buffers[ctx.outlet].initial_stock + h * max_inflow;
    }

    ctx.psi = ctx.model.add_var("psi", VarKind::Continuous, opts.psi_floor, kInf);
    LinExpr obj;
    for (int h = 0; h < H; ++h) obj.add(ctx.tuse_idx[h], g.energy.usage_rate);
    obj.add(ctx.psi, 1.0);
    ctx.model.objective = obj;
    ctx.model.sense = opt::Sense::Min;
    return ctx;
}

void tighten_wx(MasterContext& ctx, const ddu::ProductStructureIdm& updated) {
    for (auto& ds : ctx.states) {
        ddu::ThetaInterval ti = ddu::idm_interval(updated, ds.spec_index);
        ds.lo = ti.lo;
        ds.hi = ti.hi;
    }
}

// ---------------------------------------------------------------------------
// Scenario blocks (cuts)
// ---------------------------------------------------------------------------

namespace {

// Creates the shared floor-yield machinery on first use: one pinned yield
// variable per (hour, corrected option) and its product with the option's
// run binary.  Every floor scenario reuses these.
void ensure_yield_vars(MasterContext& ctx) {
    if (!ctx.alpha_idx.empty() || ctx.corrected.empty()) return;
    const int H = ctx.horizon;
    auto& m = ctx.model;
    ctx.alpha_idx.assign(static_cast<std::size_t>(H),
                         std::vector<int>(ctx.corrected.size(), -1));
    ctx.z_idx.assign(static_cast<std::size_t>(H), std::vector<int>(ctx.corrected.size(), -1));
    for (int h = 0; h < H; ++h)
        for (std::size_t j = 0; j < ctx.corrected.size(); ++j) {
            const auto& co = ctx.corrected[j];
            const int a = m.add_var(fmt("alpha_h%d_j%d", h, static_cast<int>(j)),
                                    VarKind::Continuous, 0.0, 1.0);
            LinExpr pin;
            pin.add(a, 1.0);
            for (std::size_t c = 0; c < ctx.combos.size(); ++c)
                pin.add(ctx.combo_aux[c][h], ctx.combos[c].delta);
            m.add_row(fmt("apin_h%d_j%d", h, static_cast<int>(j)), pin, Rel::Eq, co.floor);

            const int z = m.add_var(fmt("zy_h%d_j%d", h, static_cast<int>(j)),
                                    VarKind::Continuous, 0.0, 1.0);
            const int run = ctx.run_idx[h][co.n][co.p];
            LinExpr ub_run;
            ub_run.add(z, 1.0);
            ub_run.add(run, -1.0);
            m.add_row(fmt("zubr_h%d_j%d", h, static_cast<int>(j)), ub_run, Rel::Le, 0.0);
            LinExpr ub_a;
            ub_a.add(z, 1.0);
            ub_a.add(a, -1.0);
            m.add_row(fmt("zuba_h%d_j%d", h, static_cast<int>(j)), ub_a, Rel::Le, 0.0);
            LinExpr lb;
            lb.add(z, 1.0);
            lb.add(a, -1.0);
            lb.add(run, -1.0);
            m.add_row(fmt("zlb_h%d_j%d", h, static_cast<int>(j)), lb, Rel::Ge, -1.0);
            ctx.alpha_idx[h][j] = a;
            ctx.z_idx[h][j] = z;
        }
}

// Does (n, p) name a corrected option?  Returns its index or -1.
int corrected_index(const MasterContext& ctx, int n, int p) {
    for (std::size_t j = 0; j < ctx.corrected.size(); ++j)
        if (ctx.corrected[j].n == n && ctx.corrected[j].p == p) return static_cast<int>(j);
    return -1;
}

}  // namespace

int add_cuts(MasterContext& ctx, const WorstCase& u, bool optimality) {
    const FactoryGraph& g = *ctx.graph;
    const int H = ctx.horizon;
    const int M = static_cast<int>(g.buffers.size());
    auto& m = ctx.model;

    WorstCase stored = u;
    if (stored.load_dev.empty()) stored.load_dev.assign(static_cast<std::size_t>(H), 0.0);
    if (static_cast<int>(stored.load_dev.size()) != H)
        throw ConsistencyError("scenario load deviation has wrong hour count");
    if (stored.tau_zeta == 0 || stored.tau_zeta == 1) {
        stored.zeta_state_values.clear();
        for (const auto& ds : ctx.states)
            stored.zeta_state_values.push_back(stored.tau_zeta == 1 ? ds.lo : ds.hi);
    } else if (stored.zeta_state_values.size() != ctx.states.size()) {
        throw ConsistencyError("scenario demand values have wrong state count");
    }

    if (stored.tau_yield == 1) ensure_yield_vars(ctx);

    const int label = ctx.next_label++;
    ScenarioBlock block;
    block.label = label;
    block.u = stored;
    block.optimality = optimality;

    // --- variables ---
    std::vector<std::vector<int>> buf(static_cast<std::size_t>(H) + 1,
                                      std::vector<int>(static_cast<std::size_t>(M)));
    std::vector<std::vector<int>> flow(static_cast<std::size_t>(H),
                                       std::vector<int>(static_cast<std::size_t>(M)));
    for (int h = 0; h <= H; ++h)
        for (int mm = 0; mm < M; ++mm) {
            double lo = 0.0, up = kInf;
            if (h == 0) lo = up = g.buffers[mm].initial_stock;
            buf[h][mm] = m.add_var(fmt("s%d_buf_h%d_m%d", label, h, mm),
                                   VarKind::Continuous, lo, up);
        }
    for (int h = 0; h < H; ++h)
        for (int mm = 0; mm < M; ++mm)
            flow[h][mm] = m.add_var(fmt("s%d_flow_h%d_m%d", label, h, mm));
    std::vector<int> sell(static_cast<std::size_t>(H), -1);
    std::vector<std::vector<int>> accept;  // [state][h]
    if (ctx.outlet >= 0) {
        for (int h = 0; h < H; ++h)
            sell[h] = m.add_var(fmt("s%d_sell_h%d", label, h), VarKind::Continuous, 0.0,
                                ctx.sell_cap[h]);
        accept.resize(ctx.states.size());
        for (std::size_t i = 0; i < ctx.states.size(); ++i) {
            accept[i].resize(static_cast<std::size_t>(H));
            for (int h = 0; h < H; ++h)
                accept[i][h] = m.add_var(fmt("s%d_v_i%d_h%d", label, static_cast<int>(i), h),
                                         VarKind::Continuous, 0.0, ctx.sell_cap[h]);
        }
    }
    const auto& es = g.energy;
    std::vector<int> bdis(static_cast<std::size_t>(H)), bchg(static_cast<std::size_t>(H)),
        deru(static_cast<std::size_t>(H)), soc(static_cast<std::size_t>(H) + 1),
        grid(static_cast<std::size_t>(H)), frdev(static_cast<std::size_t>(H));
    for (int h = 0; h < H; ++h) bdis[h] = m.add_var(fmt("s%d_bdis_h%d", label, h));
    for (int h = 0; h < H; ++h) bchg[h] = m.add_var(fmt("s%d_bchg_h%d", label, h));
    for (int h = 0; h < H; ++h) deru[h] = m.add_var(fmt("s%d_deru_h%d", label, h));
    for (int h = 0; h <= H; ++h) {
        double lo = (h == 0) ? es.bess_initial : 0.0;
        double up = (h == 0) ? es.bess_initial : es.bess_capacity;
        soc[h] = m.add_var(fmt("s%d_soc_h%d", label, h), VarKind::Continuous, lo, up);
    }
    for (int h = 0; h < H; ++h) grid[h] = m.add_var(fmt("s%d_grid_h%d", label, h));
    for (int h = 0; h < H; ++h) frdev[h] = m.add_var(fmt("s%d_fr_h%d", label, h));

    auto row = [&](const std::string& tag, const LinExpr& e, Rel rel, double rhs) {
        block.row_indices.push_back(m.add_row(tag, e, rel, rhs));
    };

    // --- stock recurrences under this scenario's yields ---
    for (int h = 0; h < H; ++h)
        for (int mm = 0; mm < M; ++mm) {
            LinExpr e;
            e.add(buf[h + 1][mm], 1.0);
            e.add(buf[h][mm], -1.0);
            for (int n : g.producers_of(mm))
                for (std::size_t p = 0; p < g.workshops[n].options.size(); ++p) {
                    const double out = g.workshops[n].options[p].output_qty;
                    const int j = corrected_index(ctx, n, static_cast<int>(p));
                    if (stored.tau_yield == 1 && j >= 0)
                        e.add(ctx.z_idx[h][j], -out);
                    else
                        e.add(ctx.run_idx[h][n][p], -out);
                }
            for (int n : g.consumers_of(mm))
                for (std::size_t p = 0; p < g.workshops[n].options.size(); ++p)
                    e.add(ctx.run_idx[h][n][p], g.workshops[n].options[p].input_qty);
            if (mm == ctx.outlet) e.add(sell[h], 1.0);
            row(fmt("s%d_rec_h%d_m%d", label, h, mm), e, Rel::Eq, 0.0);
        }

    // --- transport flow epigraph ---
    for (int h = 0; h < H; ++h)
        for (int mm = 0; mm < M; ++mm) {
            LinExpr ep;
            ep.add(flow[h][mm], 1.0);
            ep.add(buf[h + 1][mm], -1.0);
            ep.add(buf[h][mm], 1.0);
            row(fmt("s%d_flowp_h%d_m%d", label, h, mm), ep, Rel::Ge, 0.0);
            LinExpr en;
            en.add(flow[h][mm], 1.0);
            en.add(buf[h + 1][mm], 1.0);
            en.add(buf[h][mm], -1.0);
            row(fmt("s%d_flown_h%d_m%d", label, h, mm), en, Rel::Ge, 0.0);
        }

    // --- by-product sales: stock cap and acceptance products ---
    if (ctx.outlet >= 0) {
        for (int h = 0; h < H; ++h) {
            LinExpr e;
            e.add(sell[h], 1.0);
            e.add(buf[h][ctx.outlet], -1.0);
            row(fmt("s%d_sellcap_h%d", label, h), e, Rel::Le, 0.0);
        }
        // accept = indicator * sell, exact at binary indicators.
        for (std::size_t i = 0; i < ctx.states.size(); ++i)
            for (int h = 0; h < H; ++h) {
                const double big = ctx.sell_cap[h];
                const int ind = ctx.states[i].ind[h];
                LinExpr ub_ind;
                ub_ind.add(accept[i][h], 1.0);
                ub_ind.add(ind, -big);
                row(fmt("s%d_vubi_i%d_h%d", label, static_cast<int>(i), h), ub_ind, Rel::Le,
                    0.0);
                LinExpr ub_sell;
                ub_sell.add(accept[i][h], 1.0);
                ub_sell.add(sell[h], -1.0);
                row(fmt("s%d_vubs_i%d_h%d", label, static_cast<int>(i), h), ub_sell, Rel::Le,
                    0.0);
                LinExpr lb;
                lb.add(accept[i][h], 1.0);
                lb.add(sell[h], -1.0);
                lb.add(ind, -big);
                row(fmt("s%d_vlb_i%d_h%d", label, static_cast<int>(i), h), lb, Rel::Ge, -big);
            }
    }

    // --- dispatch ---
    for (int h = 0; h < H; ++h) {
        LinExpr bal;
        bal.add(grid[h], 1.0);
        bal.add(ctx.energy_idx[h], -1.0);
        bal.add(bdis[h], 1.0);
        bal.add(deru[h], 1.0);
        row(fmt("s%d_grid_h%d", label, h), bal, Rel::Eq, 0.0);

        LinExpr der;
        der.add(bchg[h], 1.0);
        der.add(deru[h], 1.0);
        row(fmt("s%d_der_h%d", label, h), der, Rel::Le,
            es.der_output.empty() ? 0.0 : es.der_output[h]);

        LinExpr tr;
        tr.add(soc[h + 1], 1.0);
        tr.add(soc[h], -1.0);
        tr.add(bdis[h], es.discharge_eff);
        tr.add(bchg[h], -es.charge_eff);
        row(fmt("s%d_soc_h%d", label, h), tr, Rel::Eq, 0.0);

        if (std::isfinite(es.ramp_hi)) {
            LinExpr up;
            up.add(soc[h + 1], 1.0);
            up.add(soc[h], -1.0);
            row(fmt("s%d_rampup_h%d", label, h), up, Rel::Le, es.ramp_hi);
            LinExpr dn;
            dn.add(soc[h], 1.0);
            dn.add(soc[h + 1], -1.0);
            row(fmt("s%d_rampdn_h%d", label, h), dn, Rel::Le, es.ramp_hi);
        }

        const double load = ctx.mu[h] + stored.load_dev[h];
        LinExpr fp;
        fp.add(frdev[h], 1.0);
        fp.add(grid[h], -1.0);
        row(fmt("s%d_frp_h%d", label, h), fp, Rel::Ge, -load);
        LinExpr fn;
        fn.add(frdev[h], 1.0);
        fn.add(grid[h], 1.0);
        row(fmt("s%d_frn_h%d", label, h), fn, Rel::Ge, load);
    }

    // --- this scenario's recourse cost ---
    LinExpr cost;
    for (int h = 0; h < H; ++h) {
        for (int mm = 0; mm < M; ++mm) {
            const auto& b = g.buffers[mm];
            cost.add(flow[h][mm], es.usage_rate * b.transport_time / b.transport_batch);
        }
        cost.add(soc[h + 1], es.degr_coeff);
        cost.add(grid[h], es.rtp.empty() ? 0.0 : es.rtp[h]);
        cost.add(frdev[h], 1.0);
        if (ctx.outlet >= 0)
            for (std::size_t i = 0; i < ctx.states.size(); ++i)
                cost.add(accept[i][h], -es.sale_price_by * ctx.states[i].weight *
                                           stored.zeta_state_values[i]);
    }
    if (ctx.main_outlet >= 0) cost.add(buf[H][ctx.main_outlet], -es.sale_price_main);
    block.objective_expr = cost;

    if (optimality) {
        LinExpr epi;
        epi.add(ctx.psi, 1.0);
        for (const auto& [var, coef] : cost.terms) epi.add(var, -coef);
        block.psi_row = m.add_row(fmt("s%d_psi", label), epi, Rel::Ge, 0.0);
        block.row_indices.push_back(block.psi_row);
        ++ctx.cuts.optimality_count;
    } else {
        ++ctx.cuts.feasibility_count;
    }
    ctx.cuts.scenarios.push_back(std::move(block));
    return label;
}

// ---------------------------------------------------------------------------
// Adversary oracle
// ---------------------------------------------------------------------------

namespace {

// Everything about a fixed schedule the corner LPs need.
struct SpPre {
    std::vector<double> e_prod;              // production energy per hour
    bool feasible[2] = {true, true};         // material feasibility per tau_yield
    double transport_const[2] = {0.0, 0.0};  // non-outlet trips cost
    double main_rev[2] = {0.0, 0.0};
    std::vector<double> outlet_inflow[2];    // net outlet production per hour
    std::vector<double> zeta[2];             // realized acceptance per hour, [tz]
    std::vector<std::vector<int>> state_on;  // [state][h]
};

SpPre precompute(const MasterContext& ctx, const factory::ScheduleDecision& sched) {
    const FactoryGraph& g = *ctx.graph;
    const int H = ctx.horizon;
    const int W = static_cast<int>(g.workshops.size());
    const int M = static_cast<int>(g.buffers.size());

    if (static_cast<int>(sched.on.size()) != H)
        throw ConsistencyError("schedule covers wrong hour count");
    SpPre pre;
    for (int h = 0; h < H; ++h) {
        if (static_cast<int>(sched.on[h].size()) != W)
            throw ConsistencyError("schedule covers wrong workshop count");
        for (int n = 0; n < W; ++n) {
            if (sched.on[h][n].size() != g.workshops[n].options.size())
                throw ConsistencyError("schedule covers wrong option count");
            for (std::size_t p = 0; p < g.workshops[n].options.size(); ++p) {
                int v = sched.on[h][n][p];
                if (v != 0 && v != 1)
                    throw ConsistencyError("schedule entries must be 0 or 1");
            }
        }
    }

    auto on = [&](int h, int n, int p) { return sched.on[h][n][p]; };

    pre.e_prod.assign(static_cast<std::size_t>(H), 0.0);
    for (int h = 0; h < H; ++h)
        for (int n = 0; n < W; ++n)
            for (std::size_t p = 0; p < g.workshops[n].options.size(); ++p)
                if (on(h, n, static_cast<int>(p)))
                    pre.e_prod[h] += g.workshops[n].options[p].energy_cost;

    // Active combos shift every corrected floor; actives depend only on x.
    std::vector<std::vector<char>> combo_on(ctx.combos.size(),
                                            std::vector<char>(static_cast<std::size_t>(H), 1));
    for (std::size_t c = 0; c < ctx.combos.size(); ++c)
        for (int h = 0; h < H; ++h)
            for (auto [n, p] : ctx.combos[c].members)
                if (!on(h, n, p)) {
                    combo_on[c][h] = 0;
                    break;
                }

    // Yield of option (n, p) at hour h when the adversary stresses yields.
    auto floor_yield = [&](int h, int n, int p) {
        const int j = corrected_index(ctx, n, p);
        if (j < 0) return 1.0;
        double f = ctx.corrected[j].floor;
        for (std::size_t c = 0; c < ctx.combos.size(); ++c)
            if (combo_on[c][h]) f -= ctx.combos[c].delta;
        return f;
    };

    // Material trajectories for both yield regimes: non-outlet buffers are
    // fully determined by the schedule; the outlet keeps its net inflow.
    for (int ty = 0; ty < 2; ++ty) {
        pre.outlet_inflow[ty].assign(static_cast<std::size_t>(H), 0.0);
        std::vector<double> stock(static_cast<std::size_t>(M));
        for (int mm = 0; mm < M; ++mm) stock[mm] = g.buffers[mm].initial_stock;
        for (int h = 0; h < H && pre.feasible[ty]; ++h) {
            for (int mm = 0; mm < M; ++mm) {
                double net = 0.0;
                for (int n : g.producers_of(mm))
                    for (std::size_t p = 0; p < g.workshops[n].options.size(); ++p)
                        if (on(h, n, static_cast<int>(p))) {
                            double yld =
                                ty ? floor_yield(h, n, static_cast<int>(p)) : 1.0;
                            net += yld * g.workshops[n].options[p].output_qty;
                        }
                for (int n : g.consumers_of(mm))
                    for (std::size_t p = 0; p < g.workshops[n].options.size(); ++p)
                        if (on(h, n, static_cast<int>(p)))
                            net -= g.workshops[n].options[p].input_qty;
                if (mm == ctx.outlet) {
                    pre.outlet_inflow[ty][h] = net;
                    continue;
                }
                const auto& b = g.buffers[mm];
                double next = stock[mm] + net;
                if (next < -1e-9) {
                    pre.feasible[ty] = false;
                    break;
                }
                pre.transport_const[ty] += g.energy.usage_rate * std::fabs(next - stock[mm]) *
                                           b.transport_time / b.transport_batch;
                stock[mm] = next;
            }
        }
        if (pre.feasible[ty] && ctx.main_outlet >= 0)
            pre.main_rev[ty] = g.energy.sale_price_main * stock[ctx.main_outlet];
    }

    // Realized acceptance per hour for both demand endpoints.
    pre.state_on.assign(ctx.states.size(), std::vector<int>(static_cast<std::size_t>(H), 0));
    for (std::size_t i = 0; i < ctx.states.size(); ++i)
        for (int h = 0; h < H; ++h) {
            int all = 1;
            for (auto [n, p] : ctx.states[i].members)
                if (!on(h, n, p)) {
                    all = 0;
                    break;
                }
            pre.state_on[i][h] = all;
        }
    for (int tz = 0; tz < 2; ++tz) {
        pre.zeta[tz].assign(static_cast<std::size_t>(H), 0.0);
        for (std::size_t i = 0; i < ctx.states.size(); ++i) {
            const double end = tz ? ctx.states[i].lo : ctx.states[i].hi;
            for (int h = 0; h < H; ++h)
                pre.zeta[tz][h] += ctx.states[i].weight * end * pre.state_on[i][h];
        }
    }
    return pre;
}

// The recourse LP at one adversary corner: outlet stock/sales plus dispatch.
struct CornerLp {
    OptModel m;
    std::vector<int> sell, bdis, bchg, deru, soc, grid, frdev, obuf;
    double base_const = 0.0;
};

CornerLp build_corner_lp(const MasterContext& ctx, const SpPre& pre, int ty, int tz,
                         const std::vector<double>& dev) {
    const FactoryGraph& g = *ctx.graph;
    const auto& es = g.energy;
    const int H = ctx.horizon;
    CornerLp lp;
    lp.base_const = pre.transport_const[ty] - pre.main_rev[ty];
    auto& m = lp.m;

    LinExpr obj;
    if (ctx.outlet >= 0) {
        const auto& ob = g.buffers[ctx.outlet];
        lp.obuf.resize(static_cast<std::size_t>(H) + 1);
        lp.sell.resize(static_cast<std::size_t>(H));
        for (int h = 0; h <= H; ++h) {
            double lo = 0.0, up = kInf;
            if (h == 0) lo = up = ob.initial_stock;
            lp.obuf[h] = m.add_var(fmt("obuf_h%d", h), VarKind::Continuous, lo, up);
        }
        for (int h = 0; h < H; ++h)
            lp.sell[h] = m.add_var(fmt("osell_h%d", h), VarKind::Continuous, 0.0,
                                   ctx.sell_cap[h]);
        for (int h = 0; h < H; ++h) {
            const int oflow = m.add_var(fmt("oflow_h%d", h));
            LinExpr rec;
            rec.add(lp.obuf[h + 1], 1.0);
            rec.add(lp.obuf[h], -1.0);
            rec.add(lp.sell[h], 1.0);
            m.add_row(fmt("orec_h%d", h), rec, Rel::Eq, pre.outlet_inflow[ty][h]);
            LinExpr cap;
            cap.add(lp.sell[h], 1.0);
            cap.add(lp.obuf[h], -1.0);
            m.add_row(fmt("ocap_h%d", h), cap, Rel::Le, 0.0);
            LinExpr ep;
            ep.add(oflow, 1.0);
            ep.add(lp.obuf[h + 1], -1.0);
            ep.add(lp.obuf[h], 1.0);
            m.add_row(fmt("oflowp_h%d", h), ep, Rel::Ge, 0.0);
            LinExpr en;
            en.add(oflow, 1.0);
            en.add(lp.obuf[h + 1], 1.0);
            en.add(lp.obuf[h], -1.0);
            m.add_row(fmt("oflown_h%d", h), en, Rel::Ge, 0.0);
            obj.add(oflow, es.usage_rate * ob.transport_time / ob.transport_batch);
            obj.add(lp.sell[h], -es.sale_price_by * pre.zeta[tz][h]);
        }
    }

    lp.bdis.resize(static_cast<std::size_t>(H));
    lp.bchg.resize(static_cast<std::size_t>(H));
    lp.deru.resize(static_cast<std::size_t>(H));
    lp.soc.resize(static_cast<std::size_t>(H) + 1);
    lp.grid.resize(static_cast<std::size_t>(H));
    lp.frdev.resize(static_cast<std::size_t>(H));
    for (int h = 0; h < H; ++h) lp.bdis[h] = m.add_var(fmt("bdis_h%d", h));
    for (int h = 0; h < H; ++h) lp.bchg[h] = m.add_var(fmt("bchg_h%d", h));
    for (int h = 0; h < H; ++h) lp.deru[h] = m.add_var(fmt("deru_h%d", h));
    for (int h = 0; h <= H; ++h) {
        double lo = (h == 0) ? es.bess_initial : 0.0;
        double up = (h == 0) ? es.bess_initial : es.bess_capacity;
        lp.soc[h] = m.add_var(fmt("soc_h%d", h), VarKind::Continuous, lo, up);
    }
    for (int h = 0; h < H; ++h) lp.grid[h] = m.add_var(fmt("grid_h%d", h));
    for (int h = 0; h < H; ++h) lp.frdev[h] = m.add_var(fmt("fr_h%d", h));

    for (int h = 0; h < H; ++h) {
        LinExpr bal;
        bal.add(lp.grid[h], 1.0);
        bal.add(lp.bdis[h], 1.0);
        bal.add(lp.deru[h], 1.0);
        m.add_row(fmt("grid_h%d", h), bal, Rel::Eq, pre.e_prod[h]);
        LinExpr der;
        der.add(lp.bchg[h], 1.0);
        der.add(lp.deru[h], 1.0);
        m.add_row(fmt("der_h%d", h), der, Rel::Le,
                  es.der_output.empty() ? 0.0 : es.der_output[h]);
        LinExpr tr;
        tr.add(lp.soc[h + 1], 1.0);
        tr.add(lp.soc[h], -1.0);
        tr.add(lp.bdis[h], es.discharge_eff);
        tr.add(lp.bchg[h], -es.charge_eff);
        m.add_row(fmt("soc_h%d", h), tr, Rel::Eq, 0.0);
        if (std::isfinite(es.ramp_hi)) {
            LinExpr up;
            up.add(lp.soc[h + 1], 1.0);
            up.add(lp.soc[h], -1.0);
            m.add_row(fmt("rampup_h%d", h), up, Rel::Le, es.ramp_hi);
            LinExpr dn;
            dn.add(lp.soc[h], 1.0);
            dn.add(lp.soc[h + 1], -1.0);
            m.add_row(fmt("rampdn_h%d", h), dn, Rel::Le, es.ramp_hi);
        }
        const double load = ctx.mu[h] + dev[h];
        LinExpr fp;
        fp.add(lp.frdev[h], 1.0);
        fp.add(lp.grid[h], -1.0);
        m.add_row(fmt("frp_h%d", h), fp, Rel::Ge, -load);
        LinExpr fn;
        fn.add(lp.frdev[h], 1.0);
        fn.add(lp.grid[h], 1.0);
        m.add_row(fmt("frn_h%d", h), fn, Rel::Ge, load);

        obj.add(lp.soc[h + 1], es.degr_coeff);
        obj.add(lp.grid[h], es.rtp.empty() ? 0.0 : es.rtp[h]);
        obj.add(lp.frdev[h], 1.0);
    }
    m.objective = obj;
    m.sense = opt::Sense::Min;
    return lp;
}

std::vector<double> corner_dev(const MasterContext& ctx, unsigned long long bits) {
    std::vector<double> d(ctx.delta.size());
    for (std::size_t h = 0; h < ctx.delta.size(); ++h)
        d[h] = (bits >> h & 1ULL) ? ctx.delta[h] : -ctx.delta[h];
    return d;
}

}  // namespace

SpResult solve_sp_oracle(const MasterContext& ctx, const factory::ScheduleDecision& sched,
                         const DdccgOptions& opts) {
    const int H = ctx.horizon;
    SpPre pre = precompute(ctx, sched);

    SpResult res;
    std::vector<int> tys;
    if (pre.feasible[0]) tys.push_back(0);
    if (pre.feasible[1]) tys.push_back(1);

    // Stressed yields only shrink stocks, so an infeasible nominal world
    // implies an infeasible stressed one; report the stressed corner either
    // way — it is always a valid certificate.
    if (!pre.feasible[1]) {
        res.feasible = false;
        res.value = kInf;
        res.worst_u.tau_yield = 1;
        res.worst_u.tau_zeta = 1;
        for (const auto& ds : ctx.states) res.worst_u.zeta_state_values.push_back(ds.lo);
        res.worst_u.load_dev.assign(static_cast<std::size_t>(H), 0.0);
        res.mode = SpMode::Exact;
        return res;
    }

    struct Corner {
        int ty, tz;
        std::vector<double> dev;
    };
    std::vector<Corner> corners;
    const bool exact = !opts.force_greedy && H + 2 <= opts.exact_corner_bits;
    if (exact) {
        const unsigned long long nd = 1ULL << H;
        for (int ty : tys)
            for (int tz = 0; tz < 2; ++tz)
                for (unsigned long long b = 0; b < nd; ++b)
                    corners.push_back({ty, tz, corner_dev(ctx, b)});
    } else {
        // Greedy: solve at the band centre, then push each hour's deviation
        // against the resulting net purchase.
        for (int ty : tys)
            for (int tz = 0; tz < 2; ++tz) {
                std::vector<double> zero(static_cast<std::size_t>(H), 0.0);
                CornerLp lp0 = build_corner_lp(ctx, pre, ty, tz, zero);
                opt::OptSolution s0 = opt::solve_lp(lp0.m, opts.solver);
                corners.push_back({ty, tz, zero});
                if (s0.status == opt::SolveStatus::Optimal) {
                    std::vector<double> dev(static_cast<std::size_t>(H));
                    for (int h = 0; h < H; ++h) {
                        const double ghat = s0.values[lp0.grid[h]];
                        dev[h] = (ghat >= ctx.mu[h]) ? -ctx.delta[h] : ctx.delta[h];
                    }
                    corners.push_back({ty, tz, std::move(dev)});
                }
            }
    }

    std::vector<double> values(corners.size(), -kInf);
    std::vector<std::string> errors(corners.size());
    parallel_for(corners.size(), [&](std::size_t i) {
        try {
            CornerLp lp = build_corner_lp(ctx, pre, corners[i].ty, corners[i].tz,
                                          corners[i].dev);
            opt::OptSolution s = opt::solve_lp(lp.m, opts.solver);
            if (s.status == opt::SolveStatus::Infeasible)
                values[i] = kInf;
            else if (s.status == opt::SolveStatus::Optimal)
                values[i] = s.objective_value + lp.base_const;
            else
                errors[i] = "recourse evaluation unbounded";
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (const auto& err : errors)
        if (!err.empty()) throw OracleFailure("corner evaluation failed: " + err);

    std::size_t best = 0;
    for (std::size_t i = 1; i < corners.size(); ++i)
        if (values[i] > values[best]) best = i;

    res.mode = exact ? SpMode::Exact : SpMode::Greedy;
    res.corners_evaluated = static_cast<int>(corners.size());
    res.worst_u.tau_yield = corners[best].ty;
    res.worst_u.tau_zeta = corners[best].tz;
    for (const auto& ds : ctx.states)
        res.worst_u.zeta_state_values.push_back(corners[best].tz ? ds.lo : ds.hi);
    res.worst_u.load_dev = corners[best].dev;

    if (values[best] >= kInf) {  // some corner admits no recourse
        res.feasible = false;
        res.value = kInf;
        return res;
    }
    res.value = values[best];

    // Re-solve the winning corner serially to extract the recourse.
    CornerLp lp = build_corner_lp(ctx, pre, corners[best].ty, corners[best].tz,
                                  corners[best].dev);
    opt::OptSolution s = opt::solve_lp(lp.m, opts.solver);
    if (s.status != opt::SolveStatus::Optimal)
        throw OracleFailure("winning corner failed to re-solve");
    auto pull = [&](const std::vector<int>& idx, int count) {
        std::vector<double> out(static_cast<std::size_t>(count));
        for (int h = 0; h < count; ++h) out[h] = s.values[idx[h]];
        return out;
    };
    res.dispatch.storage_out = pull(lp.bdis, H);
    res.dispatch.local_use = pull(lp.deru, H);
    res.dispatch.storage_in = pull(lp.bchg, H);
    res.dispatch.soc = pull(lp.soc, H + 1);
    res.dispatch.net_purchase = pull(lp.grid, H);
    if (ctx.outlet >= 0) res.sell_by = pull(lp.sell, H);
    return res;
}

// ---------------------------------------------------------------------------
// Engine loop
// ---------------------------------------------------------------------------

namespace {

factory::ScheduleDecision extract_schedule(const MasterContext& ctx,
                                           const std::vector<double>& values) {
    const FactoryGraph& g = *ctx.graph;
    factory::ScheduleDecision sched;
    sched.on.assign(static_cast<std::size_t>(ctx.horizon), {});
    for (int h = 0; h < ctx.horizon; ++h) {
        sched.on[h].resize(g.workshops.size());
        for (std::size_t n = 0; n < g.workshops.size(); ++n) {
            sched.on[h][n].resize(g.workshops[n].options.size());
            for (std::size_t p = 0; p < g.workshops[n].options.size(); ++p)
                sched.on[h][n][p] = values[ctx.run_idx[h][n][p]] > 0.5 ? 1 : 0;
        }
    }
    return sched;
}

}  // namespace

Solution run(const FactoryGraph& g, const UncertaintyModel& um, const DdccgOptions& opts,
             std::vector<TraceEntry>* trace) {
    MasterContext ctx = build_master(g, um, opts);
    std::vector<TraceEntry> local;
    std::vector<TraceEntry>& tr = trace ? *trace : local;

    double lb = -kInf, ub = kInf;
    Solution best;
    bool have_best = false;

    for (int k = 0; k < opts.max_iters; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        opt::OptSolution mp;
        try {
            mp = opt::solve_milp(ctx.model, opts.solver);
        } catch (const opt::NodeLimitExceeded& e) {
            throw OracleFailure(std::string("master search hit its node limit: ") + e.what());
        }
        if (mp.status == opt::SolveStatus::Infeasible)
            throw InfeasibleInstance(
                k == 0 ? "no schedule satisfies the first-stage constraints"
                       : "every schedule admits an uncertainty realization without "
                         "feasible recourse");
        if (mp.status != opt::SolveStatus::Optimal)
            throw OracleFailure("master problem unbounded; raise the epigraph floor");

        lb = std::max(lb, mp.objective_value);
        const factory::ScheduleDecision xhat = extract_schedule(ctx, mp.values);
        const double psi_star = mp.values[static_cast<std::size_t>(ctx.psi)];
        const double certain = mp.objective_value - psi_star;

        SpResult sp = solve_sp_oracle(ctx, xhat, opts);
        if (sp.feasible) {
            const double cand = certain + sp.value;
            if (cand < ub) {
                ub = cand;
                best.schedule = xhat;
                best.schedule.sell_by = sp.sell_by;
                best.dispatch = sp.dispatch;
                best.sell_by = sp.sell_by;
                best.worst_u = sp.worst_u;
                have_best = true;
            }
        }

        const double gap = ub - lb;
        const bool done = gap <= opts.epsilon * std::max(1.0, std::fabs(ub));
        std::string cut_kind = "none";
        if (!done) {
            bool repeat = false;
            for (const auto& blk : ctx.cuts.scenarios)
                if (blk.u == sp.worst_u) {
                    repeat = true;
                    break;
                }
            if (repeat) {
                cut_kind = "repeat";
            } else {
                add_cuts(ctx, sp.worst_u, sp.feasible);
                cut_kind = sp.feasible ? "optimality" : "feasibility";
            }
        }
        const double ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
        tr.push_back({k, lb, ub, gap,
                      sp.feasible ? (sp.mode == SpMode::Exact ? "exact" : "greedy")
                                  : "infeasible",
                      cut_kind, ms});
        if (done) {
            best.objective = ub;
            best.lower_bound = lb;
            best.upper_bound = ub;
            best.iterations = k + 1;
            best.status = RunStatus::Converged;
            return best;
        }
    }

    Solution inc = have_best ? best : Solution{};
    inc.objective = ub;
    inc.lower_bound = lb;
    inc.upper_bound = ub;
    inc.iterations = opts.max_iters;
    inc.status = RunStatus::IterationLimit;
    throw IterationLimitExceeded("bound gap still " + std::to_string(ub - lb) + " after " +
                                     std::to_string(opts.max_iters) + " iterations",
                                 std::move(inc), std::move(tr));
}

Solution solve_deterministic(const FactoryGraph& g, const UncertaintyModel& um,
                             const DdccgOptions& opts) {
    MasterContext ctx = build_master(g, um, opts);
    WorstCase nominal;
    nominal.tau_yield = 0;
    nominal.tau_zeta = -1;
    for (const auto& ds : ctx.states)
        nominal.zeta_state_values.push_back(0.5 * (ds.lo + ds.hi));
    nominal.load_dev.assign(static_cast<std::size_t>(ctx.horizon), 0.0);
    add_cuts(ctx, nominal, true);

    opt::OptSolution mp;
    try {
        mp = opt::solve_milp(ctx.model, opts.solver);
    } catch (const opt::NodeLimitExceeded& e) {
        throw OracleFailure(std::string("nominal search hit its node limit: ") + e.what());
    }
    if (mp.status == opt::SolveStatus::Infeasible)
        throw InfeasibleInstance("no schedule admits a feasible nominal operation");
    if (mp.status != opt::SolveStatus::Optimal)
        throw OracleFailure("nominal problem unbounded; raise the epigraph floor");

    const int H = ctx.horizon;
    Solution sol;
    sol.schedule = extract_schedule(ctx, mp.values);
    const double psi_star = mp.values[static_cast<std::size_t>(ctx.psi)];
    const double certain = mp.objective_value - psi_star;
    const double recourse = ctx.cuts.scenarios[0].objective_expr.eval(mp.values);
    sol.objective = certain + recourse;
    sol.lower_bound = sol.objective;
    sol.upper_bound = sol.objective;
    sol.iterations = 1;
    sol.worst_u = ctx.cuts.scenarios[0].u;
    sol.status = RunStatus::Converged;

    auto pull = [&](const char* stem, int count, int from = 0) {
        std::vector<double> out;
        for (int h = from; h < count; ++h)
            out.push_back(mp.values[static_cast<std::size_t>(
                ctx.model.require_var(fmt("s0_%s_h%d", stem, h)))]);
        return out;
    };
    sol.dispatch.storage_out = pull("bdis", H);
    sol.dispatch.local_use = pull("deru", H);
    sol.dispatch.storage_in = pull("bchg", H);
    sol.dispatch.soc = pull("soc", H + 1);
    sol.dispatch.net_purchase = pull("grid", H);
    if (ctx.outlet >= 0) {
        sol.sell_by = pull("sell", H);
        sol.schedule.sell_by = sol.sell_by;
    }
    return sol;
}

}  // namespace plantsched::ddccg
