#include "plantsched/factory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace plantsched::factory {

namespace {

std::string fmt(const char* pattern, int a, int b = -1, int c = -1, int d = -1) {
    char buf[96];
    if (d >= 0)
        std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
    else if (c >= 0)
        std::snprintf(buf, sizeof buf, pattern, a, b, c);
    else if (b >= 0)
        std::snprintf(buf, sizeof buf, pattern, a, b);
    else
        std::snprintf(buf, sizeof buf, pattern, a);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Graph helpers
// ---------------------------------------------------------------------------

int FactoryGraph::buffer_index(const std::string& id) const {
    for (std::size_t i = 0; i < buffers.size(); ++i)
        if (buffers[i].id == id) return static_cast<int>(i);
    return -1;
}

int FactoryGraph::workshop_index(const std::string& id) const {
    for (std::size_t i = 0; i < workshops.size(); ++i)
        if (workshops[i].id == id) return static_cast<int>(i);
    return -1;
}

std::vector<int> FactoryGraph::producers_of(int m) const {
    std::vector<int> out;
    const std::string& id = buffers.at(m).id;
    for (std::size_t n = 0; n < workshops.size(); ++n)
        for (const auto& b : workshops[n].downstream)
            if (b == id) {
                out.push_back(static_cast<int>(n));
                break;
            }
    return out;
}

std::vector<int> FactoryGraph::consumers_of(int m) const {
    std::vector<int> out;
    const std::string& id = buffers.at(m).id;
    for (std::size_t n = 0; n < workshops.size(); ++n)
        for (const auto& b : workshops[n].upstream)
            if (b == id) {
                out.push_back(static_cast<int>(n));
                break;
            }
    return out;
}

int FactoryGraph::byproduct_outlet_index() const {
    int found = -1;
    for (std::size_t m = 0; m < buffers.size(); ++m) {
        if (!buffers[m].is_byproduct_outlet) continue;
        if (found >= 0)
            throw ConsistencyError("buffers '" + buffers[found].id + "' and '" +
                                   buffers[m].id + "' are both flagged byproduct_outlet");
        found = static_cast<int>(m);
    }
    return found;
}

int FactoryGraph::main_outlet_index() const {
    int flagged = -1;
    for (std::size_t m = 0; m < buffers.size(); ++m) {
        if (!buffers[m].is_main_outlet) continue;
        if (flagged >= 0)
            throw ConsistencyError("buffers '" + buffers[flagged].id + "' and '" +
                                   buffers[m].id + "' are both flagged main_outlet");
        flagged = static_cast<int>(m);
    }
    if (flagged >= 0) return flagged;
    // Fall back to the unique non-byproduct buffer nobody consumes from.
    int sink = -1;
    for (std::size_t m = 0; m < buffers.size(); ++m) {
        if (buffers[m].is_byproduct_outlet) continue;
        if (!consumers_of(static_cast<int>(m)).empty()) continue;
        if (sink >= 0)
            throw ConsistencyError("buffers '" + buffers[sink].id + "' and '" +
                                   buffers[m].id +
                                   "' are both terminal; flag one with main_outlet");
        sink = static_cast<int>(m);
    }
    return sink;
}

int FactoryGraph::total_options() const {
    int k = 0;
    for (const auto& w : workshops) k += static_cast<int>(w.options.size());
    return k;
}

// ---------------------------------------------------------------------------
// Variable names
// ---------------------------------------------------------------------------

std::string run_name(int h, int n, int p) { return fmt("run_h%d_n%d_p%d", h, n, p); }
std::string buf_name(int h, int m) { return fmt("buf_h%d_m%d", h, m); }
std::string flow_name(int h, int m) { return fmt("flow_h%d_m%d", h, m); }
std::string tuse_name(int h) { return fmt("tuse_h%d", h); }
std::string ttot_name(int h) { return fmt("ttot_h%d", h); }
std::string energy_name(int h) { return fmt("energy_h%d", h); }
std::string sell_name(int h) { return fmt("sell_h%d", h); }
std::string bdis_name(int h) { return fmt("bdis_h%d", h); }
std::string bchg_name(int h) { return fmt("bchg_h%d", h); }
std::string deru_name(int h) { return fmt("deru_h%d", h); }
std::string soc_name(int h) { return fmt("soc_h%d", h); }
std::string grid_name(int h) { return fmt("grid_h%d", h); }

// ---------------------------------------------------------------------------
// Realizations
// ---------------------------------------------------------------------------

UncertaintyRealization flat_realization(const FactoryGraph& g, double y, double z) {
    UncertaintyRealization r;
    r.yield.resize(g.horizon);
    for (auto& per_w : r.yield) {
        per_w.resize(g.workshops.size());
        for (std::size_t n = 0; n < g.workshops.size(); ++n)
            per_w[n].assign(g.workshops[n].options.size(), y);
    }
    r.expected_load.assign(g.horizon, 0.0);
    r.zeta.assign(g.horizon, z);
    return r;
}

// ---------------------------------------------------------------------------
// Constraint emission
// ---------------------------------------------------------------------------

std::vector<ConstraintBlock> emit_constraints(const FactoryGraph& g,
                                              opt::OptModel& m,
                                              const EmitOptions& opts) {
    const int H = g.horizon;
    const int W = static_cast<int>(g.workshops.size());
    const int M = static_cast<int>(g.buffers.size());
    if (H < 1) throw ConsistencyError("horizon must be at least 1");

    if (!opts.yield.empty()) {
        if (static_cast<int>(opts.yield.size()) != H)
            throw ConsistencyError("yield table has wrong hour count");
        for (int h = 0; h < H; ++h) {
            if (static_cast<int>(opts.yield[h].size()) != W)
                throw ConsistencyError("yield table has wrong workshop count");
            for (int n = 0; n < W; ++n)
                if (opts.yield[h][n].size() != g.workshops[n].options.size())
                    throw ConsistencyError("yield table has wrong option count");
        }
    }
    auto yld = [&](int h, int n, int p) {
        return opts.yield.empty() ? 1.0 : opts.yield[h][n][p];
    };

    const int outlet = g.byproduct_outlet_index();

    // --- variables (fixed order so names and indices are reproducible) ---
    for (int h = 0; h < H; ++h)
        for (int n = 0; n < W; ++n)
            for (std::size_t p = 0; p < g.workshops[n].options.size(); ++p)
                m.add_var(run_name(h, n, static_cast<int>(p)), opt::VarKind::Binary);
    if (opts.include_material) {
        for (int h = 0; h <= H; ++h)
            for (int mm = 0; mm < M; ++mm) {
                double lo = 0.0, up = opt::kInf;
                if (h == 0) lo = up = g.buffers[mm].initial_stock;
                m.add_var(buf_name(h, mm), opt::VarKind::Continuous, lo, up);
            }
        for (int h = 0; h < H; ++h)
            for (int mm = 0; mm < M; ++mm) m.add_var(flow_name(h, mm));
    }
    for (int h = 0; h < H; ++h) m.add_var(tuse_name(h));
    if (opts.include_material)
        for (int h = 0; h < H; ++h) m.add_var(ttot_name(h));
    for (int h = 0; h < H; ++h) m.add_var(energy_name(h));
    if (outlet >= 0 && opts.include_material)
        for (int h = 0; h < H; ++h) m.add_var(sell_name(h));
    if (opts.include_energy) {
        const auto& es = g.energy;
        for (int h = 0; h < H; ++h) m.add_var(bdis_name(h));
        for (int h = 0; h < H; ++h) m.add_var(bchg_name(h));
        for (int h = 0; h < H; ++h) m.add_var(deru_name(h));
        for (int h = 0; h <= H; ++h) {
            double lo = (h == 0) ? es.bess_initial : 0.0;
            double up = (h == 0) ? es.bess_initial : es.bess_capacity;
            m.add_var(soc_name(h), opt::VarKind::Continuous, lo, up);
        }
        for (int h = 0; h < H; ++h) m.add_var(grid_name(h));
    }

    auto v = [&](const std::string& name) { return m.require_var(name); };

    std::vector<ConstraintBlock> blocks;
    auto block = [&](const std::string& role) -> ConstraintBlock& {
        blocks.push_back({role, {}});
        return blocks.back();
    };

    // Each workshop runs at most one option per hour.
    {
        auto& b = block("service_uniqueness");
        for (int h = 0; h < H; ++h)
            for (int n = 0; n < W; ++n) {
                opt::LinExpr e;
                for (std::size_t p = 0; p < g.workshops[n].options.size(); ++p)
                    e.add(v(run_name(h, n, static_cast<int>(p))), 1.0);
                b.row_indices.push_back(
                    m.add_row(fmt("uniq_h%d_n%d", h, n), e, opt::Rel::Le, 1.0));
            }
    }

    // Per-option cap on total active hours (emitted only when it can bind).
    {
        auto& b = block("daily_cap");
        for (int n = 0; n < W; ++n)
            for (std::size_t p = 0; p < g.workshops[n].options.size(); ++p) {
                const auto& op = g.workshops[n].options[p];
                if (op.max_daily_uses >= H) continue;
                opt::LinExpr e;
                for (int h = 0; h < H; ++h) e.add(v(run_name(h, n, static_cast<int>(p))), 1.0);
                b.row_indices.push_back(m.add_row(fmt("cap_n%d_p%d", n, static_cast<int>(p)),
                                                  e, opt::Rel::Le,
                                                  static_cast<double>(op.max_daily_uses)));
            }
    }

    // Once an option starts it stays on: run[h+t] >= run[h] - run[h-1],
    // skipped where the window would cross the end of the horizon.
    {
        auto& b = block("min_uptime");
        for (int n = 0; n < W; ++n)
            for (std::size_t p = 0; p < g.workshops[n].options.size(); ++p) {
                const int T = g.workshops[n].options[p].min_uptime;
                if (T < 2) continue;
                for (int h = 0; h < H; ++h)
                    for (int t = 1; t < T && h + t <= H - 1; ++t) {
                        opt::LinExpr e;
                        e.add(v(run_name(h + t, n, static_cast<int>(p))), 1.0);
                        e.add(v(run_name(h, n, static_cast<int>(p))), -1.0);
                        if (h > 0) e.add(v(run_name(h - 1, n, static_cast<int>(p))), 1.0);
                        b.row_indices.push_back(m.add_row(
                            fmt("uptime_n%d_p%d_h%d_t%d", n, static_cast<int>(p), h, t),
                            e, opt::Rel::Ge, 0.0));
                    }
            }
    }

    // Raw machine time per hour.
    {
        auto& b = block("time_aggregate");
        for (int h = 0; h < H; ++h) {
            opt::LinExpr e;
            e.add(v(tuse_name(h)), 1.0);
            for (int n = 0; n < W; ++n)
                for (std::size_t p = 0; p < g.workshops[n].options.size(); ++p)
                    e.add(v(run_name(h, n, static_cast<int>(p))),
                          -g.workshops[n].options[p].time_cost);
            b.row_indices.push_back(m.add_row(fmt("tagg_h%d", h), e, opt::Rel::Eq, 0.0));
        }
    }

    // flow >= |stock change| epigraph, then time including transport trips.
    if (opts.include_material) {
        auto& b = block("transport_flow");
        for (int h = 0; h < H; ++h)
            for (int mm = 0; mm < M; ++mm) {
                opt::LinExpr ep;
                ep.add(v(flow_name(h, mm)), 1.0);
                ep.add(v(buf_name(h + 1, mm)), -1.0);
                ep.add(v(buf_name(h, mm)), 1.0);
                b.row_indices.push_back(
                    m.add_row(fmt("flowp_h%d_m%d", h, mm), ep, opt::Rel::Ge, 0.0));
                opt::LinExpr en;
                en.add(v(flow_name(h, mm)), 1.0);
                en.add(v(buf_name(h + 1, mm)), 1.0);
                en.add(v(buf_name(h, mm)), -1.0);
                b.row_indices.push_back(
                    m.add_row(fmt("flown_h%d_m%d", h, mm), en, opt::Rel::Ge, 0.0));
            }
    }
    if (opts.include_material) {
        auto& b = block("transport_time");
        for (int h = 0; h < H; ++h) {
            opt::LinExpr e;
            e.add(v(ttot_name(h)), 1.0);
            e.add(v(tuse_name(h)), -1.0);
            for (int mm = 0; mm < M; ++mm) {
                const auto& buf = g.buffers[mm];
                e.add(v(flow_name(h, mm)), -buf.transport_time / buf.transport_batch);
            }
            b.row_indices.push_back(m.add_row(fmt("ttot_h%d", h), e, opt::Rel::Eq, 0.0));
        }
    }

    // Production energy demand per hour.
    {
        auto& b = block("energy_aggregate");
        for (int h = 0; h < H; ++h) {
            opt::LinExpr e;
            e.add(v(energy_name(h)), 1.0);
            for (int n = 0; n < W; ++n)
                for (std::size_t p = 0; p < g.workshops[n].options.size(); ++p)
                    e.add(v(run_name(h, n, static_cast<int>(p))),
                          -g.workshops[n].options[p].energy_cost);
            b.row_indices.push_back(m.add_row(fmt("eagg_h%d", h), e, opt::Rel::Eq, 0.0));
        }
    }

    // Stock recurrences: next = current + yielded production - consumption
    // (- sales at the byproduct outlet).
    auto recurrence = [&](int h, int mm, bool with_sell) {
        opt::LinExpr e;
        e.add(v(buf_name(h + 1, mm)), 1.0);
        e.add(v(buf_name(h, mm)), -1.0);
        for (int n : g.producers_of(mm))
            for (std::size_t p = 0; p < g.workshops[n].options.size(); ++p)
                e.add(v(run_name(h, n, static_cast<int>(p))),
                      -yld(h, n, static_cast<int>(p)) * g.workshops[n].options[p].output_qty);
        for (int n : g.consumers_of(mm))
            for (std::size_t p = 0; p < g.workshops[n].options.size(); ++p)
                e.add(v(run_name(h, n, static_cast<int>(p))),
                      g.workshops[n].options[p].input_qty);
        if (with_sell) e.add(v(sell_name(h)), 1.0);
        return e;
    };
    if (opts.include_material) {
        auto& b = block("buffer_recurrence");
        for (int h = 0; h < H; ++h)
            for (int mm = 0; mm < M; ++mm) {
                if (mm == outlet) continue;
                b.row_indices.push_back(m.add_row(fmt("brec_h%d_m%d", h, mm),
                                                  recurrence(h, mm, false), opt::Rel::Eq, 0.0));
            }
    }
    if (outlet >= 0 && opts.include_material) {
        auto& b = block("byproduct_balance");
        for (int h = 0; h < H; ++h)
            b.row_indices.push_back(m.add_row(fmt("bysell_h%d", h),
                                              recurrence(h, outlet, true), opt::Rel::Eq, 0.0));
        auto& c = block("sell_stock_cap");
        for (int h = 0; h < H; ++h) {
            opt::LinExpr e;
            e.add(v(sell_name(h)), 1.0);
            e.add(v(buf_name(h, outlet)), -1.0);
            c.row_indices.push_back(m.add_row(fmt("sellcap_h%d", h), e, opt::Rel::Le, 0.0));
        }
    }

    if (opts.include_energy) {
        const auto& es = g.energy;
        {
            auto& b = block("grid_balance");
            for (int h = 0; h < H; ++h) {
                opt::LinExpr e;
                e.add(v(grid_name(h)), 1.0);
                e.add(v(energy_name(h)), -1.0);
                e.add(v(bdis_name(h)), 1.0);
                e.add(v(deru_name(h)), 1.0);
                b.row_indices.push_back(m.add_row(fmt("grid_h%d", h), e, opt::Rel::Eq, 0.0));
            }
        }
        {
            auto& b = block("der_budget");
            for (int h = 0; h < H; ++h) {
                opt::LinExpr e;
                e.add(v(bchg_name(h)), 1.0);
                e.add(v(deru_name(h)), 1.0);
                double budget = es.der_output.empty() ? 0.0 : es.der_output[h];
                b.row_indices.push_back(m.add_row(fmt("der_h%d", h), e, opt::Rel::Le, budget));
            }
        }
        {
            auto& b = block("soc_transfer");
            for (int h = 0; h < H; ++h) {
                opt::LinExpr e;
                e.add(v(soc_name(h + 1)), 1.0);
                e.add(v(soc_name(h)), -1.0);
                e.add(v(bdis_name(h)), es.discharge_eff);
                e.add(v(bchg_name(h)), -es.charge_eff);
                b.row_indices.push_back(m.add_row(fmt("soc_h%d", h), e, opt::Rel::Eq, 0.0));
            }
        }
        {
            auto& b = block("soc_ramp");
            if (std::isfinite(es.ramp_hi)) {
                for (int h = 0; h < H; ++h) {
                    opt::LinExpr up;
                    up.add(v(soc_name(h + 1)), 1.0);
                    up.add(v(soc_name(h)), -1.0);
                    b.row_indices.push_back(
                        m.add_row(fmt("rampup_h%d", h), up, opt::Rel::Le, es.ramp_hi));
                    opt::LinExpr dn;
                    dn.add(v(soc_name(h)), 1.0);
                    dn.add(v(soc_name(h + 1)), -1.0);
                    b.row_indices.push_back(
                        m.add_row(fmt("rampdn_h%d", h), dn, opt::Rel::Le, es.ramp_hi));
                }
            }
        }
    }

    return blocks;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void infeasible(int hour, const std::string& what, const std::string& role) {
    throw InfeasibleSchedule("hour " + std::to_string(hour) + ": " + what + " (" + role + ")");
}

double at_or_zero(const std::vector<double>& v, int h) {
    return v.empty() ? 0.0 : v[static_cast<std::size_t>(h)];
}

void check_len(const std::vector<double>& v, int H, const std::string& what) {
    if (!v.empty() && static_cast<int>(v.size()) != H)
        throw ConsistencyError(what + " has " + std::to_string(v.size()) +
                               " entries, expected " + std::to_string(H));
}

}  // namespace

CostReport simulate_schedule(const FactoryGraph& g, const ScheduleDecision& sched,
                             const EnergyDispatch& dispatch,
                             const UncertaintyRealization& real) {
    const int H = g.horizon;
    const int W = static_cast<int>(g.workshops.size());
    const int M = static_cast<int>(g.buffers.size());
    const auto& es = g.energy;

    if (static_cast<int>(sched.on.size()) != H)
        throw ConsistencyError("schedule covers " + std::to_string(sched.on.size()) +
                               " hours, expected " + std::to_string(H));
    for (int h = 0; h < H; ++h) {
        if (static_cast<int>(sched.on[h].size()) != W)
            throw ConsistencyError("schedule hour " + std::to_string(h) +
                                   " has wrong workshop count");
        for (int n = 0; n < W; ++n) {
            if (sched.on[h][n].size() != g.workshops[n].options.size())
                throw ConsistencyError("schedule hour " + std::to_string(h) + " workshop '" +
                                       g.workshops[n].id + "' has wrong option count");
            for (int x : sched.on[h][n])
                if (x != 0 && x != 1)
                    throw ConsistencyError("schedule entries must be 0 or 1");
        }
    }
    check_len(sched.sell_by, H, "sell_by");
    check_len(dispatch.storage_out, H, "storage_out");
    check_len(dispatch.local_use, H, "local_use");
    check_len(dispatch.storage_in, H, "storage_in");
    check_len(dispatch.net_purchase, H, "net_purchase");
    if (!dispatch.soc.empty() && static_cast<int>(dispatch.soc.size()) != H &&
        static_cast<int>(dispatch.soc.size()) != H + 1)
        throw ConsistencyError("soc trajectory has wrong length");
    if (!real.yield.empty()) {
        if (static_cast<int>(real.yield.size()) != H)
            throw ConsistencyError("yield realization has wrong hour count");
        for (int h = 0; h < H; ++h) {
            if (static_cast<int>(real.yield[h].size()) != W)
                throw ConsistencyError("yield realization has wrong workshop count");
            for (int n = 0; n < W; ++n)
                if (real.yield[h][n].size() != g.workshops[n].options.size())
                    throw ConsistencyError("yield realization has wrong option count");
        }
    }
    check_len(real.expected_load, H, "expected_load");
    check_len(real.zeta, H, "zeta");
    if (!es.der_output.empty() && static_cast<int>(es.der_output.size()) != H)
        throw ConsistencyError("der_output has wrong length");
    if (!es.rtp.empty() && static_cast<int>(es.rtp.size()) != H)
        throw ConsistencyError("rtp has wrong length");

    const int outlet = g.byproduct_outlet_index();
    const int main_m = g.main_outlet_index();
    if (outlet < 0)
        for (double s : sched.sell_by)
            if (s != 0.0)
                throw ConsistencyError("sell_by is nonzero but no buffer is a byproduct outlet");

    // Schedule invariants: uniqueness, daily caps, minimum uptime.
    for (int h = 0; h < H; ++h)
        for (int n = 0; n < W; ++n) {
            int active = 0;
            for (int x : sched.on[h][n]) active += x;
            if (active > 1)
                infeasible(h, "workshop '" + g.workshops[n].id + "' runs several options",
                           "service_uniqueness");
        }
    for (int n = 0; n < W; ++n)
        for (std::size_t p = 0; p < g.workshops[n].options.size(); ++p) {
            const auto& op = g.workshops[n].options[p];
            int uses = 0;
            for (int h = 0; h < H; ++h) uses += sched.on[h][n][p];
            if (uses > op.max_daily_uses)
                infeasible(0, "option '" + op.id + "' used " + std::to_string(uses) +
                                  " times, cap " + std::to_string(op.max_daily_uses),
                           "daily_cap");
            if (op.min_uptime >= 2) {
                int run_start = -1;
                for (int h = 0; h <= H; ++h) {
                    bool on = h < H && sched.on[h][n][p] == 1;
                    if (on && run_start < 0) run_start = h;
                    if (!on && run_start >= 0) {
                        int len = h - run_start;
                        if (len < op.min_uptime && h - 1 != H - 1)
                            infeasible(run_start,
                                       "option '" + op.id + "' runs " + std::to_string(len) +
                                           " hour(s), minimum " + std::to_string(op.min_uptime),
                                       "min_uptime");
                        run_start = -1;
                    }
                }
            }
        }

    CostReport rep;
    rep.stock.assign(M, std::vector<double>(H + 1, 0.0));
    for (int mm = 0; mm < M; ++mm) rep.stock[mm][0] = g.buffers[mm].initial_stock;
    rep.per_hour_time.resize(H);
    rep.per_hour_energy.resize(H);
    rep.per_hour_purchase.resize(H);
    rep.per_hour_soc.resize(H);
    rep.per_hour_reg_dev.resize(H);

    double soc = es.bess_initial;
    const bool soc_has_initial = static_cast<int>(dispatch.soc.size()) == H + 1;
    if (soc_has_initial && std::fabs(dispatch.soc[0] - soc) > 1e-6 * (1.0 + std::fabs(soc)))
        throw ConsistencyError("provided soc[0] disagrees with the configured initial charge");

    for (int h = 0; h < H; ++h) {
        double t_raw = 0.0, e_prod = 0.0;
        std::vector<double> delta(M, 0.0);
        for (int n = 0; n < W; ++n)
            for (std::size_t p = 0; p < g.workshops[n].options.size(); ++p) {
                if (!sched.on[h][n][p]) continue;
                const auto& op = g.workshops[n].options[p];
                t_raw += op.time_cost;
                e_prod += op.energy_cost;
                double y = real.yield.empty() ? 1.0 : real.yield[h][n][p];
                for (const auto& bid : g.workshops[n].downstream)
                    delta[g.buffer_index(bid)] += y * op.output_qty;
                for (const auto& bid : g.workshops[n].upstream)
                    delta[g.buffer_index(bid)] -= op.input_qty;
            }

        double sell = at_or_zero(sched.sell_by, h);
        if (sell < -1e-9) infeasible(h, "negative byproduct sale", "sell_stock_cap");
        if (outlet >= 0) {
            double have = rep.stock[outlet][h];
            if (sell > have + 1e-7 * (1.0 + std::fabs(have)))
                infeasible(h, "selling " + std::to_string(sell) + " from stock " +
                               std::to_string(have), "sell_stock_cap");
            delta[outlet] -= sell;
        }

        for (int mm = 0; mm < M; ++mm) {
            double next = rep.stock[mm][h] + delta[mm];
            if (next < -1e-7 * (1.0 + std::fabs(rep.stock[mm][h])))
                infeasible(h, "buffer '" + g.buffers[mm].id + "' stock falls to " +
                               std::to_string(next), "buffer_nonneg");
            rep.stock[mm][h + 1] = next;
        }

        double bdis = at_or_zero(dispatch.storage_out, h);
        double bchg = at_or_zero(dispatch.storage_in, h);
        double deru = at_or_zero(dispatch.local_use, h);
        if (bdis < -1e-9 || bchg < -1e-9 || deru < -1e-9)
            infeasible(h, "negative dispatch quantity", "grid_balance");
        double budget = at_or_zero(es.der_output, h);
        if (bchg + deru > budget + 1e-7 * (1.0 + budget))
            infeasible(h, "local generation use " + std::to_string(bchg + deru) +
                           " exceeds budget " + std::to_string(budget), "der_budget");

        double grid = e_prod - bdis - deru;
        if (grid < -1e-7 * (1.0 + e_prod))
            infeasible(h, "net purchase would be negative", "grid_balance");
        if (grid < 0.0) grid = 0.0;

        double soc_next = soc - es.discharge_eff * bdis + es.charge_eff * bchg;
        if (soc_next < -1e-7 || soc_next > es.bess_capacity + 1e-7 * (1.0 + es.bess_capacity))
            infeasible(h, "state of charge " + std::to_string(soc_next) + " leaves [0, " +
                           std::to_string(es.bess_capacity) + "]", "soc_bounds");
        double step = std::fabs(soc_next - soc);
        if (std::isfinite(es.ramp_hi) && step > es.ramp_hi + 1e-7 * (1.0 + es.ramp_hi))
            infeasible(h, "state-of-charge step " + std::to_string(step) + " above limit",
                       "soc_ramp");
        if (es.ramp_lo > 0.0 && step < es.ramp_lo - 1e-7)
            infeasible(h, "state-of-charge step " + std::to_string(step) + " below minimum",
                       "soc_ramp");

        int soc_idx = soc_has_initial ? h + 1 : h;
        if (!dispatch.soc.empty() &&
            std::fabs(dispatch.soc[soc_idx] - soc_next) > 1e-6 * (1.0 + std::fabs(soc_next)))
            throw ConsistencyError("provided soc at hour " + std::to_string(h) +
                                   " disagrees with the storage recursion");
        if (!dispatch.net_purchase.empty() &&
            std::fabs(dispatch.net_purchase[h] - grid) > 1e-6 * (1.0 + std::fabs(grid)))
            throw ConsistencyError("provided net_purchase at hour " + std::to_string(h) +
                                   " disagrees with the energy balance");

        double trips = 0.0;
        for (int mm = 0; mm < M; ++mm) {
            const auto& buf = g.buffers[mm];
            trips += std::fabs(rep.stock[mm][h + 1] - rep.stock[mm][h]) * buf.transport_time /
                     buf.transport_batch;
        }
        double t_tot = t_raw + trips;
        double price = at_or_zero(es.rtp, h);
        double load = at_or_zero(real.expected_load, h);
        double dev = std::fabs(grid - load);

        rep.equipment_cost += es.usage_rate * t_tot;
        rep.purchase_cost += price * grid;
        rep.reg_penalty += dev;
        rep.degradation_cost += es.degr_coeff * soc_next;
        rep.by_revenue += es.sale_price_by * at_or_zero(real.zeta, h) * sell;

        rep.per_hour_time[h] = t_tot;
        rep.per_hour_energy[h] = e_prod;
        rep.per_hour_purchase[h] = grid;
        rep.per_hour_soc[h] = soc_next;
        rep.per_hour_reg_dev[h] = dev;
        soc = soc_next;
    }

    if (main_m >= 0) rep.main_revenue = es.sale_price_main * rep.stock[main_m][H];
    rep.objective = rep.equipment_cost + rep.degradation_cost + rep.purchase_cost +
                    rep.reg_penalty - rep.main_revenue - rep.by_revenue;
    return rep;
}

// ---------------------------------------------------------------------------
// Bundled demonstration plant
// ---------------------------------------------------------------------------

FactoryGraph build_engine_case(int hours) {
    if (hours < 1) throw ConsistencyError("horizon must be at least 1");
    FactoryGraph g;
    g.horizon = hours;

    auto buffer = [&](const std::string& id, double initial, double batch, double ttime,
                      bool byp = false, bool main = false) {
        Buffer b;
        b.id = id;
        b.initial_stock = initial;
        b.transport_batch = batch;
        b.transport_time = ttime;
        b.is_byproduct_outlet = byp;
        b.is_main_outlet = main;
        g.buffers.push_back(b);
    };
    buffer("raw", 200.0, 10.0, 0.2);
    buffer("b1", 0.0, 5.0, 0.1);
    buffer("b2", 0.0, 5.0, 0.1);
    buffer("b3", 0.0, 5.0, 0.1);
    buffer("b4", 0.0, 5.0, 0.1);
    buffer("b5g", 0.0, 5.0, 0.1);
    buffer("b5m", 0.0, 5.0, 0.1);
    buffer("b6", 0.0, 5.0, 0.1);
    buffer("b7", 0.0, 5.0, 0.1);
    buffer("b8", 0.0, 5.0, 0.1);
    buffer("b9", 0.0, 5.0, 0.1);
    buffer("b10", 0.0, 5.0, 0.1);
    buffer("swarf", 0.0, 2.0, 0.05, true, false);
    buffer("main", 0.0, 1.0, 0.1, false, true);

    auto workshop = [&](const std::string& id, double x, double y,
                        std::vector<std::string> up, std::vector<std::string> down,
                        std::vector<EquipmentOption> opts) {
        Workshop w;
        w.id = id;
        w.location_x = x;
        w.location_y = y;
        w.upstream = std::move(up);
        w.downstream = std::move(down);
        w.options = std::move(opts);
        g.workshops.push_back(w);
    };
    auto op = [&](const std::string& id, double t, double e, double out, double in,
                  int uptime = 1, int cap = 1 << 20) {
        EquipmentOption o;
        o.id = id;
        o.time_cost = t;
        o.energy_cost = e;
        o.output_qty = out;
        o.input_qty = in;
        o.min_uptime = uptime;
        o.max_daily_uses = cap;
        return o;
    };

    workshop("casting", 0, 0, {"raw"}, {"b1"},
             {op("cast_fast", 1.0, 30.0, 4.0, 4.0), op("cast_slow", 1.5, 18.0, 3.0, 3.0)});
    workshop("rough_machining", 1, 0, {"b1"}, {"b2", "swarf"},
             {op("mill", 1.0, 25.0, 3.0, 3.0)});
    workshop("precision_grind", 2, 0, {"b2"}, {"b3"},
             {op("grind_hi", 1.0, 28.0, 2.0, 2.0, 2), op("grind_lo", 1.2, 16.0, 2.0, 2.0)});
    workshop("heat_treat", 3, 0, {"b3"}, {"b4"}, {op("furnace", 1.0, 35.0, 2.0, 2.0, 2)});
    workshop("crank_line", 4, 1, {"b4"}, {"b5g"}, {op("crank", 1.0, 20.0, 2.0, 1.0)});
    workshop("cylinder_line", 4, -1, {"b4"}, {"b5m"}, {op("bore", 1.0, 22.0, 2.0, 1.0)});
    workshop("subassembly", 5, 0, {"b5g", "b5m"}, {"b6"}, {op("join", 1.0, 15.0, 1.0, 1.0)});
    workshop("engine_dress", 6, 0, {"b6"}, {"b7"}, {op("dress", 1.0, 12.0, 1.0, 1.0)});
    workshop("test_bench", 7, 0, {"b7"}, {"b8"}, {op("hot_test", 1.0, 40.0, 1.0, 1.0, 1, 16)});
    workshop("paint", 8, 0, {"b8"}, {"b9"}, {op("coat", 1.0, 10.0, 1.0, 1.0)});
    workshop("quality_gate", 9, 0, {"b9"}, {"b10"}, {op("inspect", 0.5, 6.0, 1.0, 1.0)});
    workshop("packing", 10, 0, {"b10"}, {"main"}, {op("pack", 0.5, 5.0, 1.0, 1.0)});

    EnergySystem es;
    es.bess_capacity = 120.0;
    es.bess_initial = 60.0;
    es.discharge_eff = 0.95;
    es.charge_eff = 0.90;
    es.ramp_lo = 0.0;
    es.ramp_hi = 60.0;
    es.degr_coeff = 0.002;
    es.sale_price_main = 150.0;
    es.sale_price_by = 1.5;
    es.usage_rate = 3.0;
    const double day_price[24] = {0.30, 0.30, 0.30, 0.30, 0.30, 0.30, 0.55, 0.55, 0.55,
                                  0.85, 0.85, 0.85, 0.70, 0.70, 0.70, 0.60, 0.60, 0.95,
                                  0.95, 0.95, 0.95, 0.60, 0.45, 0.35};
    es.rtp.resize(hours);
    es.der_output.resize(hours);
    for (int h = 0; h < hours; ++h) {
        int d = h % 24;
        es.rtp[h] = day_price[d];
        double sun = (d >= 6 && d <= 18) ? std::sin(3.14159265358979323846 * (d - 6) / 12.0)
                                         : 0.0;
        es.der_output[h] = 45.0 * std::max(0.0, sun);
    }
    g.energy = es;
    return g;
}

}  // namespace plantsched::factory
