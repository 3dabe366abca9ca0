#include "plantsched/opt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <queue>
#include <sstream>

namespace plantsched::opt {

namespace {
constexpr double kPivotEps = 1e-10;  // entries below this never pivot
constexpr double kRatioTie = 1e-12;
}

void LinExpr::normalize() {
    std::sort(terms.begin(), terms.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::pair<int, double>> folded;
    for (const auto& [v, c] : terms) {
        if (!folded.empty() && folded.back().first == v)
            folded.back().second += c;
        else
            folded.emplace_back(v, c);
    }
    folded.erase(std::remove_if(folded.begin(), folded.end(),
                                [](const auto& t) { return t.second == 0.0; }),
                 folded.end());
    terms = std::move(folded);
}

double LinExpr::eval(const std::vector<double>& x) const {
    double s = constant;
    for (const auto& [v, c] : terms) s += c * x[v];
    return s;
}

int OptModel::add_var(const std::string& name, VarKind kind, double lo, double up) {
    if (index_.count(name))
        throw InvalidModel("duplicate variable name: " + name);
    if (kind == VarKind::Binary) { lo = 0.0; up = 1.0; }
    if (kind == VarKind::Free) { lo = -kInf; up = kInf; }
    if (lo > up)
        throw InvalidModel("inverted bounds on variable: " + name);
    int idx = static_cast<int>(vars_.size());
    vars_.push_back(Variable{name, kind, lo, up});
    index_[name] = idx;
    return idx;
}

int OptModel::add_row(const std::string& tag, LinExpr expr, Rel rel, double rhs) {
    expr.normalize();
    for (const auto& [v, c] : expr.terms) {
        (void)c;
        if (v < 0 || v >= static_cast<int>(vars_.size()))
            throw InvalidModel("row " + tag + " references unknown variable index");
    }
    rhs -= expr.constant;
    expr.constant = 0.0;
    rows_.push_back(RowDef{tag, std::move(expr), rel, rhs});
    return static_cast<int>(rows_.size()) - 1;
}

int OptModel::var_index(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
}

int OptModel::require_var(const std::string& name) const {
    int idx = var_index(name);
    if (idx < 0) throw InvalidModel("unknown variable: " + name);
    return idx;
}

bool OptModel::has_binaries() const {
    for (const auto& v : vars_)
        if (v.kind == VarKind::Binary) return true;
    return false;
}

// ---------------------------------------------------------------------------
// Bounded-variable two-phase primal simplex on a dense tableau.
//
// Internal form: min c'x  s.t.  A x = b,  0 <= x_j <= U_j (U_j may be +inf).
// Variables with a finite lower bound are shifted so it becomes 0; variables
// unbounded below but bounded above are reflected; doubly unbounded ones are
// split into a difference of nonnegatives. Ge rows are negated into Le and
// given a slack; Eq rows (and Le rows whose start residual is negative) get
// an artificial column for phase 1. Artificials stay in the tableau pinned at
// [0,0] so dual values can still be read off their columns (B^-1 e_i).
// ---------------------------------------------------------------------------
namespace {

enum class ColState : std::uint8_t { AtLo, AtUp, Basic };

struct Tableau {
    int m = 0;
    int n = 0;
    std::vector<double> T;      // m*n row-major: B^-1 A
    std::vector<double> beta;   // B^-1 b
    std::vector<double> upper;  // column upper bounds (lower bounds are 0)
    std::vector<ColState> state;
    std::vector<int> basis;     // column basic in each row
    std::vector<double> xb;     // basic values

    double& at(int i, int j) { return T[static_cast<std::size_t>(i) * n + j]; }
    double at(int i, int j) const { return T[static_cast<std::size_t>(i) * n + j]; }

    void refresh_basic_values() {
        for (int i = 0; i < m; ++i) xb[i] = beta[i];
        for (int j = 0; j < n; ++j) {
            if (state[j] == ColState::AtUp && upper[j] != 0.0)
                for (int i = 0; i < m; ++i) xb[i] -= at(i, j) * upper[j];
        }
    }

    void pivot(int r, int q) {
        const double inv = 1.0 / at(r, q);
        double* rowr = &T[static_cast<std::size_t>(r) * n];
        for (int j = 0; j < n; ++j) rowr[j] *= inv;
        beta[r] *= inv;
        for (int i = 0; i < m; ++i) {
            if (i == r) continue;
            const double f = at(i, q);
            if (f == 0.0) continue;
            double* rowi = &T[static_cast<std::size_t>(i) * n];
            for (int j = 0; j < n; ++j) rowi[j] -= f * rowr[j];
            beta[i] -= f * beta[r];
        }
    }
};

// Mapping from an original variable to working columns: x = shift + sign*x'
// for single-column vars, or x = x'(plus) - x'(minus) for split free vars.
struct ColMap {
    int plus = -1;
    int minus = -1;
    double shift = 0.0;
    double sign = 1.0;
};

struct WorkingLp {
    Tableau tab;
    std::vector<ColMap> cols;
    std::vector<double> cost;       // phase-2 costs per column
    std::vector<int> slack_col;     // per original row, -1 if none
    std::vector<int> art_col;       // per original row, -1 if none
    std::vector<bool> is_art;       // per column
    std::vector<double> row_scale;  // net +-1 applied to each internal row
    bool maximize = false;
};

WorkingLp build_working(const OptModel& model, const std::vector<double>& lo_ov,
                        const std::vector<double>& up_ov) {
    WorkingLp w;
    const auto& vars = model.vars();
    const int nv = static_cast<int>(vars.size());
    w.cols.resize(nv);

    int ncols = 0;
    for (int j = 0; j < nv; ++j) {
        double lo = lo_ov[j], up = up_ov[j];
        if (lo != -kInf) {
            w.cols[j].plus = ncols++;
            w.cols[j].shift = lo;
        } else if (up != kInf) {
            w.cols[j].plus = ncols++;
            w.cols[j].shift = up;
            w.cols[j].sign = -1.0;  // x = up - x'
        } else {
            w.cols[j].plus = ncols++;
            w.cols[j].minus = ncols++;
        }
    }

    const auto& rows = model.rows();
    const int mr = static_cast<int>(rows.size());
    w.slack_col.assign(mr, -1);
    w.art_col.assign(mr, -1);
    w.row_scale.assign(mr, 1.0);

    int cols_with_slacks = ncols;
    for (int i = 0; i < mr; ++i)
        if (rows[i].rel != Rel::Eq) w.slack_col[i] = cols_with_slacks++;

    Tableau& t = w.tab;
    t.m = mr;
    std::vector<double> dense(static_cast<std::size_t>(mr) * cols_with_slacks, 0.0);
    std::vector<double> rhs(mr, 0.0);

    for (int i = 0; i < mr; ++i) {
        const RowDef& r = rows[i];
        const double scale = (r.rel == Rel::Ge) ? -1.0 : 1.0;
        w.row_scale[i] = scale;
        double b = scale * r.rhs;
        for (const auto& [v, c] : r.expr.terms) {
            const ColMap& cm = w.cols[v];
            const double sc = scale * c;
            if (cm.minus >= 0) {
                dense[static_cast<std::size_t>(i) * cols_with_slacks + cm.plus] += sc;
                dense[static_cast<std::size_t>(i) * cols_with_slacks + cm.minus] -= sc;
            } else {
                dense[static_cast<std::size_t>(i) * cols_with_slacks + cm.plus] +=
                    sc * cm.sign;
                b -= sc * cm.shift;
            }
        }
        if (w.slack_col[i] >= 0)
            dense[static_cast<std::size_t>(i) * cols_with_slacks + w.slack_col[i]] = 1.0;
        rhs[i] = b;
    }

    std::vector<double> upper(cols_with_slacks, kInf);
    for (int j = 0; j < nv; ++j) {
        const ColMap& cm = w.cols[j];
        if (cm.minus >= 0) continue;
        if (lo_ov[j] != -kInf && up_ov[j] != kInf) {
            double span = up_ov[j] - lo_ov[j];
            upper[cm.plus] = span < 0.0 ? 0.0 : span;
        }
    }

    std::vector<int> needs_art;
    for (int i = 0; i < mr; ++i)
        if (w.slack_col[i] < 0 || rhs[i] < 0.0) needs_art.push_back(i);

    const int full_cols = cols_with_slacks + static_cast<int>(needs_art.size());
    t.n = full_cols;
    t.T.assign(static_cast<std::size_t>(mr) * full_cols, 0.0);
    for (int i = 0; i < mr; ++i)
        for (int j = 0; j < cols_with_slacks; ++j)
            t.at(i, j) = dense[static_cast<std::size_t>(i) * cols_with_slacks + j];
    t.beta = std::move(rhs);
    t.upper = std::move(upper);
    t.upper.resize(full_cols, kInf);
    t.state.assign(full_cols, ColState::AtLo);
    t.basis.assign(mr, -1);
    t.xb.assign(mr, 0.0);
    w.is_art.assign(full_cols, false);

    int next_art = cols_with_slacks;
    for (int i : needs_art) {
        if (t.beta[i] < 0.0) {
            for (int j = 0; j < full_cols; ++j) t.at(i, j) = -t.at(i, j);
            t.beta[i] = -t.beta[i];
            w.row_scale[i] = -w.row_scale[i];
        }
        t.at(i, next_art) = 1.0;
        w.art_col[i] = next_art;
        w.is_art[next_art] = true;
        ++next_art;
    }

    for (int i = 0; i < mr; ++i) {
        t.basis[i] = (w.art_col[i] >= 0) ? w.art_col[i] : w.slack_col[i];
        t.state[t.basis[i]] = ColState::Basic;
    }
    t.refresh_basic_values();

    w.maximize = model.sense == Sense::Max;
    w.cost.assign(full_cols, 0.0);
    const double sgn = w.maximize ? -1.0 : 1.0;
    LinExpr obj = model.objective;
    obj.normalize();
    for (const auto& [v, c] : obj.terms) {
        const ColMap& cm = w.cols[v];
        if (cm.minus >= 0) {
            w.cost[cm.plus] += sgn * c;
            w.cost[cm.minus] -= sgn * c;
        } else {
            w.cost[cm.plus] += sgn * c * cm.sign;
        }
    }
    return w;
}

struct SimplexOutcome {
    SolveStatus status = SolveStatus::Optimal;
    long pivots = 0;
};

SimplexOutcome run_simplex(WorkingLp& w, const std::vector<double>& cost,
                           const SolverOptions& opts, long& pivot_budget) {
    Tableau& t = w.tab;
    SimplexOutcome out;

    std::vector<double> d;
    auto recompute_reduced = [&]() {
        d = cost;
        for (int i = 0; i < t.m; ++i) {
            const double cb = cost[t.basis[i]];
            if (cb == 0.0) continue;
            for (int j = 0; j < t.n; ++j) d[j] -= cb * t.at(i, j);
        }
    };
    recompute_reduced();

    long pivots_here = 0;
    while (true) {
        if (pivot_budget <= 0)
            throw NumericalFailure("simplex pivot limit exceeded");
        if (pivots_here > 0 && pivots_here % 256 == 0) recompute_reduced();
        const bool bland = pivots_here > opts.bland_threshold;

        int q = -1, dir = +1;
        double best = opts.opt_tol;
        for (int j = 0; j < t.n; ++j) {
            if (t.state[j] == ColState::Basic || t.upper[j] == 0.0) continue;
            const double dj = d[j];
            if (t.state[j] == ColState::AtLo && dj < -opts.opt_tol) {
                if (bland) { q = j; dir = +1; break; }
                if (-dj > best) { best = -dj; q = j; dir = +1; }
            } else if (t.state[j] == ColState::AtUp && dj > opts.opt_tol) {
                if (bland) { q = j; dir = -1; break; }
                if (dj > best) { best = dj; q = j; dir = -1; }
            }
        }
        if (q < 0) return out;

        // Two-pass ratio test (Harris style).  Pass 1 finds the tightest step
        // with each basic bound cushioned by the feasibility tolerance; pass 2
        // picks, among rows whose exact ratio fits inside that cushioned step,
        // the one with the largest pivot element.  Without the cushion a
        // degenerate or near-degenerate vertex can force a pivot on an element
        // just above kPivotEps, which scales its row by up to 1/kPivotEps and
        // destroys the tableau.  The chosen row's exact ratio is the step, so
        // no bound is overshot by more than the cushion.  Under Bland's rule
        // the plain lowest-index rule must run instead: its anti-cycling
        // argument needs exact minimal ratios.
        const double cushion = bland ? 0.0 : opts.feas_tol;
        double step_lim = kInf;   // cushioned minimum (pass 1)
        double step_rows = kInf;  // exact ratio of the chosen row
        int leave_row = -1;
        bool leave_at_up = false;
        auto candidate = [&](int i, double& ratio, double& relaxed,
                             bool& cand_at_up, double& mag) {
            const double a = t.at(i, q) * dir;
            mag = std::abs(a);
            if (a > kPivotEps) {
                const double room = std::max(t.xb[i], 0.0);
                ratio = room / a;
                relaxed = (room + cushion) / a;
                cand_at_up = false;
            } else if (a < -kPivotEps) {
                const double ub = t.upper[t.basis[i]];
                if (ub == kInf) return false;
                const double room = std::max(ub - t.xb[i], 0.0);
                ratio = room / (-a);
                relaxed = (room + cushion) / (-a);
                cand_at_up = true;
            } else {
                return false;
            }
            return true;
        };
        for (int i = 0; i < t.m; ++i) {
            double ratio, relaxed, mag;
            bool cand_at_up;
            if (!candidate(i, ratio, relaxed, cand_at_up, mag)) continue;
            if (relaxed < step_lim) step_lim = relaxed;
        }
        if (step_lim < kInf) {
            double leave_elem = 0.0;
            for (int i = 0; i < t.m; ++i) {
                double ratio, relaxed, mag;
                bool cand_at_up;
                if (!candidate(i, ratio, relaxed, cand_at_up, mag)) continue;
                if (ratio > step_lim + kRatioTie) continue;
                const bool better =
                    leave_row < 0 ||
                    (bland ? ratio < step_rows - kRatioTie ||
                                 (ratio <= step_rows + kRatioTie &&
                                  t.basis[i] < t.basis[leave_row])
                           : mag > leave_elem ||
                                 (mag == leave_elem &&
                                  t.basis[i] < t.basis[leave_row]));
                if (better) {
                    step_rows = ratio;
                    leave_row = i;
                    leave_at_up = cand_at_up;
                    leave_elem = mag;
                }
            }
        }
        const double step_own = t.upper[q];

        if (step_rows == kInf && step_own == kInf) {
            out.status = SolveStatus::Unbounded;
            return out;
        }

        ++pivots_here;
        ++out.pivots;
        --pivot_budget;

        if (step_own < step_rows - kRatioTie) {
            t.state[q] = (dir > 0) ? ColState::AtUp : ColState::AtLo;
            t.refresh_basic_values();
            continue;
        }

        const int leave_col = t.basis[leave_row];
        t.pivot(leave_row, q);
        const double dq = d[q];
        if (dq != 0.0)
            for (int j = 0; j < t.n; ++j) d[j] -= dq * t.at(leave_row, j);
        d[q] = 0.0;
        t.basis[leave_row] = q;
        t.state[q] = ColState::Basic;
        t.state[leave_col] = leave_at_up ? ColState::AtUp : ColState::AtLo;
        t.refresh_basic_values();
    }
}

struct LpCoreResult {
    SolveStatus status = SolveStatus::Infeasible;
    std::vector<double> values;
    double objective = 0.0;
    std::vector<double> duals;
    long pivots = 0;
};

LpCoreResult solve_lp_core(const OptModel& model, const std::vector<double>& lo_ov,
                           const std::vector<double>& up_ov,
                           const SolverOptions& opts, bool want_duals) {
    LpCoreResult res;
    const int nv = static_cast<int>(model.num_vars());
    for (int j = 0; j < nv; ++j)
        if (lo_ov[j] > up_ov[j] + 1e-12) return res;  // empty box

    WorkingLp w = build_working(model, lo_ov, up_ov);
    Tableau& t = w.tab;
    long budget = opts.max_pivots;

    bool any_art = false;
    for (int c : w.art_col)
        if (c >= 0) { any_art = true; break; }

    if (any_art) {
        std::vector<double> c1(t.n, 0.0);
        for (int c : w.art_col)
            if (c >= 0) c1[c] = 1.0;
        SimplexOutcome o1 = run_simplex(w, c1, opts, budget);
        res.pivots += o1.pivots;
        double infeas = 0.0;
        for (int i = 0; i < t.m; ++i)
            if (w.is_art[t.basis[i]]) infeas += std::max(t.xb[i], 0.0);
        if (infeas > opts.feas_tol) {
            res.status = SolveStatus::Infeasible;
            return res;
        }
        // Drive basic artificials out where a structural pivot exists; rows
        // that admit none are redundant and keep a pinned artificial.  The
        // replacement pivots on the largest available element — these rows
        // are degenerate (the artificial sits at ~0), so any small-element
        // pivot would amplify accumulated error without numerical need.
        for (int i = 0; i < t.m; ++i) {
            const int b = t.basis[i];
            if (!w.is_art[b]) continue;
            int enter = -1;
            double best = 1e-7;
            for (int j = 0; j < t.n; ++j) {
                if (w.is_art[j] || t.state[j] == ColState::Basic) continue;
                const double mag = std::abs(t.at(i, j));
                if (mag > best) { best = mag; enter = j; }
            }
            if (enter >= 0) {
                t.pivot(i, enter);
                t.basis[i] = enter;
                t.state[enter] = ColState::Basic;
                t.state[b] = ColState::AtLo;
                t.refresh_basic_values();
            }
        }
        for (int c : w.art_col)
            if (c >= 0) t.upper[c] = 0.0;
    }

    SimplexOutcome o2 = run_simplex(w, w.cost, opts, budget);
    res.pivots += o2.pivots;
    if (o2.status == SolveStatus::Unbounded) {
        res.status = SolveStatus::Unbounded;
        return res;
    }

    res.values.assign(nv, 0.0);
    std::vector<double> colval(t.n, 0.0);
    for (int j = 0; j < t.n; ++j)
        if (t.state[j] == ColState::AtUp) colval[j] = t.upper[j];
    for (int i = 0; i < t.m; ++i) colval[t.basis[i]] = t.xb[i];
    for (int j = 0; j < nv; ++j) {
        const ColMap& cm = w.cols[j];
        if (cm.minus >= 0)
            res.values[j] = colval[cm.plus] - colval[cm.minus];
        else
            res.values[j] = cm.shift + cm.sign * colval[cm.plus];
    }

    // Feasibility audit against the original rows; drift beyond tolerance is
    // reported, never silent.  The violation is judged relative to the row's
    // activity |a_i x_i|, since a residual of a few ulps of the summed terms
    // is the best any finite-precision pivot sequence can leave behind.
    for (const auto& row : model.rows()) {
        const double lhs = row.expr.eval(res.values);
        double activity = std::abs(row.rhs);
        for (const auto& [j, c] : row.expr.terms)
            activity += std::abs(c * res.values[static_cast<std::size_t>(j)]);
        double viol = 0.0;
        if (row.rel == Rel::Le) viol = lhs - row.rhs;
        else if (row.rel == Rel::Ge) viol = row.rhs - lhs;
        else viol = std::abs(lhs - row.rhs);
        if (viol > 1e-6 * (1.0 + activity)) {
            char msg[160];
            std::snprintf(msg, sizeof msg,
                          "solution fails feasibility audit on row %s "
                          "(violation %.3e, activity %.3e)",
                          row.tag.c_str(), viol, activity);
            throw NumericalFailure(msg);
        }
    }

    res.objective = model.objective.eval(res.values);
    res.status = SolveStatus::Optimal;

    if (want_duals) {
        // d(objective)/d(rhs_i). The unit column of row i inside the tableau
        // is its slack (inequalities) or its artificial (equalities); the net
        // row negations are undone through scale factors.
        res.duals.assign(model.num_rows(), 0.0);
        const double sense_sgn = w.maximize ? -1.0 : 1.0;
        for (std::size_t i = 0; i < model.num_rows(); ++i) {
            double y;
            if (w.slack_col[i] >= 0) {
                double acc = 0.0;
                for (int r = 0; r < t.m; ++r) {
                    const double cb = w.cost[t.basis[r]];
                    if (cb != 0.0) acc += cb * t.at(r, w.slack_col[i]);
                }
                const double ge_scale =
                    model.rows()[i].rel == Rel::Ge ? -1.0 : 1.0;
                y = sense_sgn * ge_scale * acc;
            } else if (w.art_col[i] >= 0) {
                double acc = 0.0;
                for (int r = 0; r < t.m; ++r) {
                    const double cb = w.cost[t.basis[r]];
                    if (cb != 0.0) acc += cb * t.at(r, w.art_col[i]);
                }
                y = sense_sgn * w.row_scale[i] * acc;
            } else {
                y = 0.0;
            }
            res.duals[i] = y;
        }
    }
    return res;
}

}  // namespace

OptSolution solve_lp(const OptModel& model, const SolverOptions& opts) {
    if (model.has_binaries())
        throw InvalidModel("solve_lp requires a model without binaries");
    const int nv = static_cast<int>(model.num_vars());
    std::vector<double> lo(nv), up(nv);
    for (int j = 0; j < nv; ++j) {
        lo[j] = model.vars()[j].lo;
        up[j] = model.vars()[j].up;
    }
    LpCoreResult core = solve_lp_core(model, lo, up, opts, /*want_duals=*/true);
    OptSolution s;
    s.status = core.status;
    s.values = std::move(core.values);
    s.objective_value = core.objective;
    s.dual_values = std::move(core.duals);
    s.pivots = core.pivots;
    return s;
}

// ---------------------------------------------------------------------------
// Best-first branch-and-bound. Nodes inherit the parent's LP bound and are
// solved once when popped; branching picks the lowest-index fractional
// binary, with the zero branch enqueued first. Fully deterministic.
// ---------------------------------------------------------------------------
namespace {

struct BnbNode {
    double bound = 0.0;  // inherited lower bound, Min space
    long id = 0;
    std::vector<std::pair<int, int>> fixings;
};

struct NodeOrder {
    bool operator()(const BnbNode& a, const BnbNode& b) const {
        if (a.bound != b.bound) return a.bound > b.bound;
        return a.id > b.id;
    }
};

}  // namespace

OptSolution solve_milp(const OptModel& model, const SolverOptions& opts) {
    const int nv = static_cast<int>(model.num_vars());
    std::vector<int> bins;
    for (int j = 0; j < nv; ++j)
        if (model.vars()[j].kind == VarKind::Binary) bins.push_back(j);

    std::vector<double> lo0(nv), up0(nv);
    for (int j = 0; j < nv; ++j) {
        lo0[j] = model.vars()[j].lo;
        up0[j] = model.vars()[j].up;
    }
    const double sense_mul = model.sense == Sense::Max ? -1.0 : 1.0;

    OptSolution best;
    best.status = SolveStatus::Infeasible;
    double best_min = kInf;
    long nodes = 0, pivots = 0, next_id = 1;

    auto solve_node = [&](const std::vector<std::pair<int, int>>& fixings) {
        std::vector<double> lo(lo0), up(up0);
        for (auto [v, val] : fixings) { lo[v] = val; up[v] = val; }
        LpCoreResult r = solve_lp_core(model, lo, up, opts, false);
        pivots += r.pivots;
        return r;
    };

    auto fractional_binary = [&](const std::vector<double>& x) {
        for (int j : bins)
            if (std::abs(x[j] - std::floor(x[j] + 0.5)) > opts.int_tol) return j;
        return -1;
    };

    auto accept_incumbent = [&](const LpCoreResult& r) {
        const double val = sense_mul * r.objective;
        if (val < best_min - 1e-12) {
            best_min = val;
            best.status = SolveStatus::Optimal;
            best.values = r.values;
            for (int j : bins) best.values[j] = std::floor(best.values[j] + 0.5);
            best.objective_value = r.objective;
        }
    };

    std::priority_queue<BnbNode, std::vector<BnbNode>, NodeOrder> heap;
    heap.push(BnbNode{-kInf, 0, {}});

    while (!heap.empty()) {
        BnbNode node = heap.top();
        heap.pop();
        if (node.bound >= best_min - opts.opt_tol) break;
        if (nodes >= opts.node_limit)
            throw NodeLimitExceeded(
                "branch-and-bound node limit exceeded",
                best.status == SolveStatus::Optimal ? best.objective_value : kInf);

        LpCoreResult rel = solve_node(node.fixings);
        ++nodes;
        if (rel.status == SolveStatus::Unbounded) {
            // A relaxation ray; the mixed problem is declared unbounded.
            best.status = SolveStatus::Unbounded;
            best.values.clear();
            best.nodes = nodes;
            best.pivots = pivots;
            return best;
        }
        if (rel.status != SolveStatus::Optimal) continue;
        const double bound = sense_mul * rel.objective;
        if (bound >= best_min - opts.opt_tol) continue;

        const int frac = fractional_binary(rel.values);
        if (frac < 0) {
            accept_incumbent(rel);
            continue;
        }
        for (int branch_val = 0; branch_val <= 1; ++branch_val) {
            auto fixings = node.fixings;
            fixings.emplace_back(frac, branch_val);
            heap.push(BnbNode{bound, next_id++, std::move(fixings)});
        }
    }

    best.nodes = nodes;
    best.pivots = pivots;
    return best;
}

// ---------------------------------------------------------------------------
// Dualization.
// ---------------------------------------------------------------------------
namespace {

// Rewrites finite bounds (other than the implicit lo=0) as explicit rows so
// the textbook dual applies to a model with only x >= 0 and free variables.
OptModel fold_bounds(const OptModel& model) {
    OptModel out;
    out.sense = model.sense;
    for (const auto& v : model.vars()) {
        if (v.kind == VarKind::Binary)
            throw InvalidModel("dualize_lp requires a model without binaries");
        // Only the natural lo=0 bound survives as an implicit sign condition;
        // anything else becomes an explicit row on a free variable.
        out.add_var(v.name,
                    v.lo == 0.0 ? VarKind::Continuous : VarKind::Free);
    }
    out.objective = model.objective;
    for (const auto& r : model.rows()) out.add_row(r.tag, r.expr, r.rel, r.rhs);
    for (std::size_t j = 0; j < model.num_vars(); ++j) {
        const auto& v = model.vars()[j];
        if (v.lo != -kInf && v.lo != 0.0) {
            LinExpr e;
            e.add(static_cast<int>(j), 1.0);
            out.add_row("lb_" + v.name, e, Rel::Ge, v.lo);
        }
        if (v.up != kInf) {
            LinExpr e;
            e.add(static_cast<int>(j), 1.0);
            out.add_row("ub_" + v.name, e, Rel::Le, v.up);
        }
    }
    return out;
}

}  // namespace

OptModel dualize_lp(const OptModel& model) {
    OptModel p = fold_bounds(model);
    const bool min_primal = p.sense == Sense::Min;
    OptModel d;
    d.sense = min_primal ? Sense::Max : Sense::Min;

    // Min primal: Ge rows -> y >= 0, Le rows -> y <= 0 (stored negated as
    // y' >= 0), Eq rows -> free. Max primal mirrors this.
    std::vector<int> yidx(p.num_rows());
    std::vector<double> ysign(p.num_rows(), 1.0);
    for (std::size_t i = 0; i < p.num_rows(); ++i) {
        const auto& r = p.rows()[i];
        VarKind kind = VarKind::Continuous;
        double sgn = 1.0;
        if (r.rel == Rel::Eq)
            kind = VarKind::Free;
        else if (min_primal)
            sgn = (r.rel == Rel::Ge) ? 1.0 : -1.0;
        else
            sgn = (r.rel == Rel::Le) ? 1.0 : -1.0;
        ysign[i] = sgn;
        yidx[i] = d.add_var("y_" + std::to_string(i), kind);
    }
    for (std::size_t i = 0; i < p.num_rows(); ++i) {
        const double coeff = ysign[i] * p.rows()[i].rhs;
        if (coeff != 0.0) d.objective.add(yidx[i], coeff);
    }

    std::vector<LinExpr> cols(p.num_vars());
    for (std::size_t i = 0; i < p.num_rows(); ++i)
        for (const auto& [v, c] : p.rows()[i].expr.terms)
            cols[v].add(yidx[i], ysign[i] * c);

    LinExpr obj = p.objective;
    obj.normalize();
    std::vector<double> cvec(p.num_vars(), 0.0);
    for (const auto& [v, c] : obj.terms) cvec[v] = c;

    for (std::size_t j = 0; j < p.num_vars(); ++j) {
        const auto& v = p.vars()[j];
        Rel rel;
        if (v.lo == -kInf)
            rel = Rel::Eq;
        else
            rel = min_primal ? Rel::Le : Rel::Ge;
        d.add_row("d_" + v.name, cols[j], rel, cvec[j]);
    }
    return d;
}

OptModel canonicalize(const OptModel& model) {
    OptModel p = fold_bounds(model);
    OptModel out;
    out.sense = Sense::Min;
    for (const auto& v : p.vars())
        out.add_var(v.name,
                    v.kind == VarKind::Free ? VarKind::Free : VarKind::Continuous);
    const double sgn = p.sense == Sense::Max ? -1.0 : 1.0;
    LinExpr obj = p.objective;
    obj.normalize();
    for (auto& [v, c] : obj.terms) out.objective.add(v, sgn * c);
    out.objective.constant = sgn * obj.constant;
    for (const auto& r : p.rows()) {
        if (r.rel == Rel::Eq) {
            out.add_row(r.tag, r.expr, Rel::Ge, r.rhs);
            LinExpr neg;
            for (const auto& [v, c] : r.expr.terms) neg.add(v, -c);
            out.add_row(r.tag + "_flip", neg, Rel::Ge, -r.rhs);
        } else if (r.rel == Rel::Ge) {
            out.add_row(r.tag, r.expr, Rel::Ge, r.rhs);
        } else {
            LinExpr neg;
            for (const auto& [v, c] : r.expr.terms) neg.add(v, -c);
            out.add_row(r.tag, neg, Rel::Ge, -r.rhs);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Vertex enumeration: every d-subset of candidate tight hyperplanes (rows as
// equalities plus box faces) is solved and filtered for feasibility.
// ---------------------------------------------------------------------------
namespace {

bool solve_dense(std::vector<std::vector<double>> A, std::vector<double> b,
                 std::vector<double>& x) {
    const int n = static_cast<int>(b.size());
    for (int k = 0; k < n; ++k) {
        int piv = k;
        for (int i = k + 1; i < n; ++i)
            if (std::abs(A[i][k]) > std::abs(A[piv][k])) piv = i;
        if (std::abs(A[piv][k]) < 1e-11) return false;
        std::swap(A[piv], A[k]);
        std::swap(b[piv], b[k]);
        for (int i = k + 1; i < n; ++i) {
            const double f = A[i][k] / A[k][k];
            if (f == 0.0) continue;
            for (int j = k; j < n; ++j) A[i][j] -= f * A[k][j];
            b[i] -= f * b[k];
        }
    }
    x.assign(n, 0.0);
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int j = i + 1; j < n; ++j) s -= A[i][j] * x[j];
        x[i] = s / A[i][i];
    }
    return true;
}

}  // namespace

std::vector<std::vector<double>> enumerate_extreme_points(
    const std::vector<RowDef>& rows, const std::vector<double>& lo,
    const std::vector<double>& up, double dedup_tol) {
    const int d = static_cast<int>(lo.size());
    if (d == 0 || d > 8)
        throw InvalidModel("enumerate_extreme_points supports dimensions 1..8");
    for (int j = 0; j < d; ++j)
        if (lo[j] == -kInf || up[j] == kInf)
            throw UnboundedSet("enumerate_extreme_points needs a bounding box");

    struct Plane {
        std::vector<double> a;
        double b;
    };
    std::vector<Plane> planes;
    for (const auto& r : rows) {
        Plane p;
        p.a.assign(d, 0.0);
        for (const auto& [v, c] : r.expr.terms) {
            if (v < 0 || v >= d)
                throw InvalidModel("row references coordinate outside the box");
            p.a[v] += c;
        }
        p.b = r.rhs;
        planes.push_back(std::move(p));
    }
    for (int j = 0; j < d; ++j) {
        Plane f;
        f.a.assign(d, 0.0);
        f.a[j] = 1.0;
        f.b = lo[j];
        planes.push_back(f);
        f.b = up[j];
        planes.push_back(f);
    }

    auto feasible = [&](const std::vector<double>& x) {
        for (int j = 0; j < d; ++j)
            if (x[j] < lo[j] - 1e-7 || x[j] > up[j] + 1e-7) return false;
        for (const auto& r : rows) {
            const double lhs = r.expr.eval(x);
            if (r.rel == Rel::Le && lhs > r.rhs + 1e-7) return false;
            if (r.rel == Rel::Ge && lhs < r.rhs - 1e-7) return false;
            if (r.rel == Rel::Eq && std::abs(lhs - r.rhs) > 1e-7) return false;
        }
        return true;
    };

    std::vector<std::vector<double>> verts;
    const int np = static_cast<int>(planes.size());
    std::vector<int> idx(d);
    for (int i = 0; i < d; ++i) idx[i] = i;
    while (true) {
        std::vector<std::vector<double>> A(d, std::vector<double>(d));
        std::vector<double> b(d);
        for (int i = 0; i < d; ++i) {
            A[i] = planes[idx[i]].a;
            b[i] = planes[idx[i]].b;
        }
        std::vector<double> x;
        if (solve_dense(A, b, x) && feasible(x)) {
            bool dup = false;
            for (const auto& v : verts) {
                double dist = 0.0;
                for (int j = 0; j < d; ++j)
                    dist = std::max(dist, std::abs(v[j] - x[j]));
                if (dist <= dedup_tol) { dup = true; break; }
            }
            if (!dup) verts.push_back(std::move(x));
        }
        int i = d - 1;
        while (i >= 0 && idx[i] == np - d + i) --i;
        if (i < 0) break;
        ++idx[i];
        for (int k = i + 1; k < d; ++k) idx[k] = idx[k - 1] + 1;
    }

    std::sort(verts.begin(), verts.end());
    return verts;
}

// ---------------------------------------------------------------------------
// LP-format text dump.
// ---------------------------------------------------------------------------
namespace {

std::string fmt_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void append_expr(std::string& out, const LinExpr& e,
                 const std::vector<Variable>& vars) {
    bool first = true;
    for (const auto& [v, c] : e.terms) {
        if (c == 0.0) continue;
        if (first) {
            if (c < 0) out += "- ";
            first = false;
        } else {
            out += (c < 0) ? " - " : " + ";
        }
        const double a = std::abs(c);
        if (a != 1.0) {
            out += fmt_num(a);
            out += " ";
        }
        out += vars[v].name;
    }
    if (first) out += "0";
}

}  // namespace

std::string dump_lp_text(const OptModel& model) {
    std::string out;
    out += model.sense == Sense::Min ? "Minimize\n obj: " : "Maximize\n obj: ";
    LinExpr obj = model.objective;
    obj.normalize();
    append_expr(out, obj, model.vars());
    if (obj.constant != 0.0) {
        out += obj.constant > 0 ? " + " : " - ";
        out += fmt_num(std::abs(obj.constant));
    }
    out += "\nSubject To\n";
    int i = 0;
    for (const auto& r : model.rows()) {
        out += " r" + std::to_string(i++) + "_" + r.tag + ": ";
        append_expr(out, r.expr, model.vars());
        out += r.rel == Rel::Le ? " <= " : (r.rel == Rel::Ge ? " >= " : " = ");
        out += fmt_num(r.rhs);
        out += "\n";
    }
    out += "Bounds\n";
    for (const auto& v : model.vars()) {
        if (v.lo == -kInf && v.up == kInf) {
            out += " " + v.name + " free\n";
        } else if (v.up == kInf) {
            out += " " + fmt_num(v.lo) + " <= " + v.name + "\n";
        } else if (v.lo == -kInf) {
            out += " " + v.name + " <= " + fmt_num(v.up) + "\n";
        } else {
            out += " " + fmt_num(v.lo) + " <= " + v.name + " <= " +
                   fmt_num(v.up) + "\n";
        }
    }
    bool any_bin = false;
    for (const auto& v : model.vars())
        if (v.kind == VarKind::Binary) {
            if (!any_bin) { out += "Binaries\n"; any_bin = true; }
            out += " " + v.name + "\n";
        }
    out += "End\n";
    return out;
}

}  // namespace plantsched::opt
