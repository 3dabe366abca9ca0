// Kernel validation. Independent routes used as oracles:
//  - hand-computed LPs and MILPs with pinned answers,
//  - exhaustive vertex enumeration vs the simplex on random bounded models,
//  - test-local brute force over binary patterns vs branch-and-bound,
//  - finite-difference rhs sensitivity vs reported dual values,
//  - machine-built duals vs primal objective (strong duality).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "plantsched/opt.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using namespace plantsched::opt;

namespace {

constexpr double kValueTol = 1e-6;   // optimal-value agreement
constexpr double kDualFdTol = 5e-4;  // finite-difference vs dual value
constexpr double kCsTol = 1e-5;      // complementary slackness residual

double uni(std::mt19937_64& rng, double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
}
int uni_int(std::mt19937_64& rng, int a, int b) {
    return std::uniform_int_distribution<int>(a, b)(rng);
}

// Random nonempty bounded LP: a feasible point is planted inside the box and
// every row is built to keep it feasible.
OptModel random_bounded_lp(std::mt19937_64& rng, int dmin, int dmax,
                           bool allow_eq) {
    const int d = uni_int(rng, dmin, dmax);
    OptModel m;
    std::vector<double> p(d);
    for (int j = 0; j < d; ++j) {
        const double up = uni(rng, 0.5, 3.0);
        m.add_var("x" + std::to_string(j), VarKind::Continuous, 0.0, up);
        p[j] = uni(rng, 0.0, up);
    }
    const int nrows = uni_int(rng, 1, d + 2);
    for (int r = 0; r < nrows; ++r) {
        LinExpr e;
        double dot = 0.0, amax = 0.0;
        for (int j = 0; j < d; ++j) {
            const double a = uni(rng, -2.0, 2.0);
            e.add(j, a);
            dot += a * p[j];
            amax = std::max(amax, std::abs(a));
        }
        if (amax < 0.3) { --r; continue; }
        const int kind = uni_int(rng, 0, allow_eq ? 9 : 7);
        const double margin = uni(rng, 0.05, 0.8);
        if (kind < 5)
            m.add_row("r" + std::to_string(r), e, Rel::Le, dot + margin);
        else if (kind < 8)
            m.add_row("r" + std::to_string(r), e, Rel::Ge, dot - margin);
        else
            m.add_row("r" + std::to_string(r), e, Rel::Eq, dot);
    }
    for (int j = 0; j < d; ++j) m.objective.add(j, uni(rng, -2.0, 2.0));
    m.sense = uni_int(rng, 0, 1) ? Sense::Max : Sense::Min;
    return m;
}

double best_vertex_value(const OptModel& m,
                         const std::vector<std::vector<double>>& verts) {
    REQUIRE(!verts.empty());
    double best = m.objective.eval(verts[0]);
    for (const auto& v : verts) {
        const double val = m.objective.eval(v);
        if (m.sense == Sense::Min) best = std::min(best, val);
        else best = std::max(best, val);
    }
    return best;
}

// Test-local rank computation (Gaussian elimination with partial pivoting).
int matrix_rank(std::vector<std::vector<double>> A) {
    if (A.empty()) return 0;
    const int rows = static_cast<int>(A.size());
    const int cols = static_cast<int>(A[0].size());
    int rank = 0;
    for (int c = 0; c < cols && rank < rows; ++c) {
        int piv = rank;
        for (int i = rank + 1; i < rows; ++i)
            if (std::abs(A[i][c]) > std::abs(A[piv][c])) piv = i;
        if (std::abs(A[piv][c]) < 1e-8) continue;
        std::swap(A[piv], A[rank]);
        for (int i = rank + 1; i < rows; ++i) {
            const double f = A[i][c] / A[rank][c];
            for (int j = c; j < cols; ++j) A[i][j] -= f * A[rank][j];
        }
        ++rank;
    }
    return rank;
}

bool point_feasible(const OptModel& m, const std::vector<double>& x,
                    double tol) {
    for (std::size_t j = 0; j < m.num_vars(); ++j) {
        if (x[j] < m.vars()[j].lo - tol) return false;
        if (x[j] > m.vars()[j].up + tol) return false;
    }
    for (const auto& r : m.rows()) {
        const double lhs = r.expr.eval(x);
        if (r.rel == Rel::Le && lhs > r.rhs + tol) return false;
        if (r.rel == Rel::Ge && lhs < r.rhs - tol) return false;
        if (r.rel == Rel::Eq && std::abs(lhs - r.rhs) > tol) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("hand lp: basic min over halfplane") {
    OptModel m;
    const int x = m.add_var("x");
    const int y = m.add_var("y");
    m.objective.add(x, 1.0);
    m.objective.add(y, 1.0);
    LinExpr e;
    e.add(x, 1.0);
    e.add(y, 1.0);
    m.add_row("cover", e, Rel::Ge, 1.0);
    OptSolution s = solve_lp(m);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.objective_value == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(s.dual_values[0] == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("hand lp: max with box and coupling row") {
    OptModel m;
    const int x = m.add_var("x", VarKind::Continuous, 0.0, 2.0);
    const int y = m.add_var("y", VarKind::Continuous, 0.0, 3.0);
    m.sense = Sense::Max;
    m.objective.add(x, 3.0);
    m.objective.add(y, 2.0);
    LinExpr e;
    e.add(x, 1.0);
    e.add(y, 1.0);
    m.add_row("cap", e, Rel::Le, 4.0);
    OptSolution s = solve_lp(m);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.objective_value == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(s.values[x] == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(s.values[y] == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(s.dual_values[0] == doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("hand lp: free variable pushed to a row bound") {
    OptModel m;
    const int x = m.add_var("x", VarKind::Free);
    m.objective.add(x, 1.0);
    LinExpr e;
    e.add(x, 1.0);
    m.add_row("floor", e, Rel::Ge, -5.0);
    OptSolution s = solve_lp(m);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.objective_value == doctest::Approx(-5.0).epsilon(1e-9));
}

TEST_CASE("hand lp: variable unbounded below with finite upper bound") {
    OptModel m;
    const int x = m.add_var("x", VarKind::Continuous, -kInf, 7.0);
    m.objective.add(x, -1.0);
    OptSolution s = solve_lp(m);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.objective_value == doctest::Approx(-7.0).epsilon(1e-9));
    CHECK(s.values[x] == doctest::Approx(7.0).epsilon(1e-9));
}

TEST_CASE("hand lp: equality with negative rhs and its dual") {
    OptModel m;
    const int x = m.add_var("x");
    const int y = m.add_var("y");
    m.objective.add(x, 1.0);
    m.objective.add(y, 2.0);
    LinExpr e;
    e.add(x, -1.0);
    e.add(y, -1.0);
    m.add_row("bal", e, Rel::Eq, -3.0);
    OptSolution s = solve_lp(m);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.objective_value == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(s.values[x] == doctest::Approx(3.0).epsilon(1e-8));
    CHECK(s.dual_values[0] == doctest::Approx(-1.0).epsilon(1e-7));
}

TEST_CASE("hand lp: objective constant carried through") {
    OptModel m;
    const int x = m.add_var("x");
    m.objective.add(x, 1.0);
    m.objective.constant = 5.0;
    LinExpr e;
    e.add(x, 1.0);
    m.add_row("floor", e, Rel::Ge, 1.0);
    OptSolution s = solve_lp(m);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.objective_value == doctest::Approx(6.0).epsilon(1e-9));
}

TEST_CASE("hand lp: pure bound flips reach the box corner") {
    OptModel m;
    const int x = m.add_var("x", VarKind::Continuous, 0.0, 1.0);
    const int y = m.add_var("y", VarKind::Continuous, 0.0, 1.0);
    m.objective.add(x, -1.0);
    m.objective.add(y, -1.0);
    OptSolution s = solve_lp(m);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.objective_value == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(s.values[x] == doctest::Approx(1.0));
    CHECK(s.values[y] == doctest::Approx(1.0));
}

TEST_CASE("hand lp: infeasible and unbounded detection") {
    OptModel inf;
    const int x = inf.add_var("x");
    LinExpr lo_row;
    lo_row.add(x, 1.0);
    inf.add_row("lo", lo_row, Rel::Ge, 2.0);
    LinExpr hi_row;
    hi_row.add(x, 1.0);
    inf.add_row("hi", hi_row, Rel::Le, 1.0);
    inf.objective.add(x, 1.0);
    CHECK(solve_lp(inf).status == SolveStatus::Infeasible);

    OptModel unb;
    const int y = unb.add_var("y");
    unb.sense = Sense::Max;
    unb.objective.add(y, 1.0);
    CHECK(solve_lp(unb).status == SolveStatus::Unbounded);

    OptModel unb2;
    const int z = unb2.add_var("z", VarKind::Free);
    unb2.objective.add(z, 1.0);
    CHECK(solve_lp(unb2).status == SolveStatus::Unbounded);
}

TEST_CASE("hand lp: classic cycling-prone instance solves") {
    // Known degenerate instance that cycles under naive pivoting rules.
    OptModel m;
    const int x1 = m.add_var("x1");
    const int x2 = m.add_var("x2");
    const int x3 = m.add_var("x3");
    const int x4 = m.add_var("x4");
    m.objective.add(x1, -0.75);
    m.objective.add(x2, 150.0);
    m.objective.add(x3, -0.02);
    m.objective.add(x4, 6.0);
    LinExpr r1;
    r1.add(x1, 0.25);
    r1.add(x2, -60.0);
    r1.add(x3, -0.04);
    r1.add(x4, 9.0);
    m.add_row("a", r1, Rel::Le, 0.0);
    LinExpr r2;
    r2.add(x1, 0.5);
    r2.add(x2, -90.0);
    r2.add(x3, -0.02);
    r2.add(x4, 3.0);
    m.add_row("b", r2, Rel::Le, 0.0);
    LinExpr r3;
    r3.add(x3, 1.0);
    m.add_row("c", r3, Rel::Le, 1.0);
    OptSolution s = solve_lp(m);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.objective_value == doctest::Approx(-0.05).epsilon(1e-7));
}

TEST_CASE("lp fuzz: simplex agrees with exhaustive vertex enumeration") {
    std::mt19937_64 rng(20240801);
    int solved = 0;
    for (int it = 0; it < 300; ++it) {
        OptModel m = random_bounded_lp(rng, 1, 4, true);
        std::vector<double> lo, up;
        for (const auto& v : m.vars()) {
            lo.push_back(v.lo);
            up.push_back(v.up);
        }
        const auto verts = enumerate_extreme_points(m.rows(), lo, up);
        OptSolution s = solve_lp(m);
        REQUIRE(s.status == SolveStatus::Optimal);
        const double oracle = best_vertex_value(m, verts);
        CHECK(std::abs(s.objective_value - oracle) <=
              kValueTol * (1.0 + std::abs(oracle)));
        ++solved;
    }
    CHECK(solved == 300);
}

TEST_CASE("lp fuzz: repeat solves are bit-for-bit deterministic") {
    std::mt19937_64 rng(977);
    for (int it = 0; it < 40; ++it) {
        OptModel m = random_bounded_lp(rng, 2, 4, true);
        OptSolution a = solve_lp(m);
        OptSolution b = solve_lp(m);
        CHECK(a.pivots == b.pivots);
        REQUIRE(a.values.size() == b.values.size());
        for (std::size_t j = 0; j < a.values.size(); ++j)
            CHECK(a.values[j] == b.values[j]);
        CHECK(a.objective_value == b.objective_value);
    }
}

TEST_CASE("lp fuzz: medium dense instances stay feasible and finite") {
    std::mt19937_64 rng(42017);
    for (int it = 0; it < 20; ++it) {
        const int d = 30;
        OptModel m;
        std::vector<double> p(d);
        for (int j = 0; j < d; ++j) {
            m.add_var("x" + std::to_string(j), VarKind::Continuous, 0.0, 5.0);
            p[j] = uni(rng, 0.0, 5.0);
        }
        for (int r = 0; r < 40; ++r) {
            LinExpr e;
            double dot = 0.0;
            for (int j = 0; j < d; ++j) {
                const double a = uni(rng, -1.0, 1.0);
                e.add(j, a);
                dot += a * p[j];
            }
            m.add_row("r" + std::to_string(r), e, Rel::Le, dot + uni(rng, 0.1, 2.0));
        }
        for (int j = 0; j < d; ++j) m.objective.add(j, uni(rng, -3.0, 3.0));
        OptSolution s = solve_lp(m);
        REQUIRE(s.status == SolveStatus::Optimal);
        CHECK(point_feasible(m, s.values, 1e-6));
    }
}

TEST_CASE("duality fuzz: strong duality, signs, slackness, sensitivity") {
    std::mt19937_64 rng(555123);
    int fd_checked = 0;
    for (int it = 0; it < 150; ++it) {
        OptModel m = random_bounded_lp(rng, 2, 4, true);
        OptSolution s = solve_lp(m);
        REQUIRE(s.status == SolveStatus::Optimal);

        // Machine-built dual reaches the same optimal value.
        OptModel d = dualize_lp(m);
        OptSolution ds = solve_lp(d);
        REQUIRE(ds.status == SolveStatus::Optimal);
        CHECK(std::abs(ds.objective_value - s.objective_value) <=
              kValueTol * (1.0 + std::abs(s.objective_value)));

        const bool minimize = m.sense == Sense::Min;
        for (std::size_t i = 0; i < m.num_rows(); ++i) {
            const RowDef& r = m.rows()[i];
            const double y = s.dual_values[i];
            // Sign of d(objective)/d(rhs): relaxing a Le row can only help,
            // tightening a Ge row can only hurt.
            if (r.rel == Rel::Le) {
                if (minimize) CHECK(y <= 1e-6);
                else CHECK(y >= -1e-6);
            } else if (r.rel == Rel::Ge) {
                if (minimize) CHECK(y >= -1e-6);
                else CHECK(y <= 1e-6);
            }
            if (r.rel != Rel::Eq) {
                const double lhs = r.expr.eval(s.values);
                const double slack = r.rel == Rel::Le ? r.rhs - lhs : lhs - r.rhs;
                CHECK(std::abs(y) * std::abs(slack) <=
                      kCsTol * (1.0 + std::abs(r.rhs)));
            }
        }

        // Finite-difference cross-check of one dual value per instance.
        const std::size_t i =
            static_cast<std::size_t>(uni_int(rng, 0, static_cast<int>(m.num_rows()) - 1));
        const double h = 1e-5 * (1.0 + std::abs(m.rows()[i].rhs));
        OptModel mp = m, mm = m;
        mp.rows_mutable()[i].rhs += h;
        mm.rows_mutable()[i].rhs -= h;
        OptSolution sp = solve_lp(mp), sm = solve_lp(mm);
        if (sp.status == SolveStatus::Optimal && sm.status == SolveStatus::Optimal) {
            const double d1 = (sp.objective_value - s.objective_value) / h;
            const double d2 = (s.objective_value - sm.objective_value) / h;
            if (std::abs(d1 - d2) <= 1e-3 * (1.0 + std::abs(d1))) {
                const double fd = 0.5 * (d1 + d2);
                CHECK(std::abs(fd - s.dual_values[i]) <=
                      kDualFdTol * (1.0 + std::abs(s.dual_values[i])));
                ++fd_checked;
            }
        }
    }
    CHECK(fd_checked > 100);  // degenerate skips must stay rare
}

TEST_CASE("hand duality: transposed model solves to the same value") {
    OptModel m;
    const int x = m.add_var("x");
    const int y = m.add_var("y");
    m.objective.add(x, 3.0);
    m.objective.add(y, 2.0);
    LinExpr e;
    e.add(x, 1.0);
    e.add(y, 1.0);
    m.add_row("cover", e, Rel::Ge, 2.0);
    OptModel d = dualize_lp(m);
    CHECK(d.sense == Sense::Max);
    OptSolution ps = solve_lp(m), ds = solve_lp(d);
    REQUIRE(ps.status == SolveStatus::Optimal);
    REQUIRE(ds.status == SolveStatus::Optimal);
    CHECK(ps.objective_value == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(ds.objective_value == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("canonicalize: value preserved, twice-dualized model matches") {
    std::mt19937_64 rng(80991);
    for (int it = 0; it < 50; ++it) {
        OptModel m = random_bounded_lp(rng, 2, 3, true);
        OptSolution s = solve_lp(m);
        REQUIRE(s.status == SolveStatus::Optimal);
        const double sgn = m.sense == Sense::Max ? -1.0 : 1.0;

        OptModel c = canonicalize(m);
        CHECK(c.sense == Sense::Min);
        for (const auto& r : c.rows()) CHECK(r.rel == Rel::Ge);
        OptSolution cs = solve_lp(c);
        REQUIRE(cs.status == SolveStatus::Optimal);
        CHECK(std::abs(cs.objective_value - sgn * s.objective_value) <=
              kValueTol * (1.0 + std::abs(s.objective_value)));

        OptModel dd = dualize_lp(dualize_lp(m));
        OptSolution dds = solve_lp(dd);
        REQUIRE(dds.status == SolveStatus::Optimal);
        const double ddsgn = dd.sense == m.sense ? 1.0 : -1.0;
        CHECK(std::abs(ddsgn * dds.objective_value - s.objective_value) <=
              kValueTol * (1.0 + std::abs(s.objective_value)));
    }
}

TEST_CASE("hand milp: knapsack") {
    OptModel m;
    const int a = m.add_var("a", VarKind::Binary);
    const int b = m.add_var("b", VarKind::Binary);
    const int c = m.add_var("c", VarKind::Binary);
    m.sense = Sense::Max;
    m.objective.add(a, 5.0);
    m.objective.add(b, 4.0);
    m.objective.add(c, 3.0);
    LinExpr e;
    e.add(a, 2.0);
    e.add(b, 3.0);
    e.add(c, 1.0);
    m.add_row("w", e, Rel::Le, 3.0);
    OptSolution s = solve_milp(m);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.objective_value == doctest::Approx(8.0).epsilon(1e-9));
    CHECK(s.values[a] == doctest::Approx(1.0));
    CHECK(s.values[b] == doctest::Approx(0.0));
    CHECK(s.values[c] == doctest::Approx(1.0));
}

TEST_CASE("hand milp: mixed binary and continuous") {
    OptModel m;
    const int a = m.add_var("a", VarKind::Binary);
    const int t = m.add_var("t", VarKind::Continuous, 0.0, 10.0);
    m.sense = Sense::Max;
    m.objective.add(a, 1.0);
    m.objective.add(t, 0.5);
    LinExpr e;
    e.add(t, 1.0);
    e.add(a, -2.0);
    m.add_row("gate", e, Rel::Le, 0.0);
    OptSolution s = solve_milp(m);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.objective_value == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(s.values[a] == doctest::Approx(1.0));
    CHECK(s.values[t] == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("hand milp: infeasible set of binaries") {
    OptModel m;
    const int a = m.add_var("a", VarKind::Binary);
    const int b = m.add_var("b", VarKind::Binary);
    m.objective.add(a, 1.0);
    LinExpr e;
    e.add(a, 1.0);
    e.add(b, 1.0);
    m.add_row("need3", e, Rel::Ge, 3.0);
    CHECK(solve_milp(m).status == SolveStatus::Infeasible);
}

TEST_CASE("milp on a model without binaries behaves like the lp") {
    OptModel m;
    const int x = m.add_var("x", VarKind::Continuous, 0.0, 4.0);
    m.sense = Sense::Max;
    m.objective.add(x, 2.0);
    OptSolution s = solve_milp(m);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.objective_value == doctest::Approx(8.0));
    CHECK(s.nodes == 1);
}

TEST_CASE("milp fuzz: pure binary vs test-local exhaustive search") {
    std::mt19937_64 rng(31337);
    for (int it = 0; it < 400; ++it) {
        const int nb = uni_int(rng, 1, 10);
        OptModel m;
        for (int j = 0; j < nb; ++j)
            m.add_var("b" + std::to_string(j), VarKind::Binary);
        const int nrows = uni_int(rng, 1, std::max(1, nb - 1));
        for (int r = 0; r < nrows; ++r) {
            LinExpr e;
            bool nonzero = false;
            for (int j = 0; j < nb; ++j) {
                const int a = uni_int(rng, -3, 3);
                if (a != 0) { e.add(j, a); nonzero = true; }
            }
            if (!nonzero) { --r; continue; }
            std::vector<double> pt(nb);
            for (int j = 0; j < nb; ++j) pt[j] = uni_int(rng, 0, 1);
            const double base = e.eval(pt);
            const int rel = uni_int(rng, 0, 2);
            const int off = uni_int(rng, -1, 2);
            if (rel == 0) m.add_row("r" + std::to_string(r), e, Rel::Le, base + off);
            else if (rel == 1) m.add_row("r" + std::to_string(r), e, Rel::Ge, base - off);
            else m.add_row("r" + std::to_string(r), e, Rel::Eq, base);
        }
        for (int j = 0; j < nb; ++j) m.objective.add(j, uni(rng, -5.0, 5.0));
        m.sense = uni_int(rng, 0, 1) ? Sense::Max : Sense::Min;

        // Exhaustive reference using no kernel code paths.
        bool any = false;
        double best = 0.0;
        std::vector<double> x(nb);
        for (int mask = 0; mask < (1 << nb); ++mask) {
            for (int j = 0; j < nb; ++j) x[j] = (mask >> j) & 1;
            if (!point_feasible(m, x, 1e-9)) continue;
            const double val = m.objective.eval(x);
            if (!any || (m.sense == Sense::Min ? val < best : val > best)) {
                any = true;
                best = val;
            }
        }

        if (!any) {
            CHECK(solve_milp(m).status == SolveStatus::Infeasible);
            continue;
        }
        OptSolution s = solve_milp(m);
        REQUIRE(s.status == SolveStatus::Optimal);
        CHECK(std::abs(s.objective_value - best) <= 1e-7 * (1.0 + std::abs(best)));
        CHECK(point_feasible(m, s.values, 1e-7));
        CHECK(std::abs(m.objective.eval(s.values) - s.objective_value) <= 1e-9);
    }
}

TEST_CASE("milp fuzz: mixed models vs fix-and-solve enumeration") {
    std::mt19937_64 rng(909090);
    for (int it = 0; it < 150; ++it) {
        const int nb = uni_int(rng, 1, 6);
        const int nc = uni_int(rng, 1, 3);
        OptModel m;
        for (int j = 0; j < nb; ++j)
            m.add_var("b" + std::to_string(j), VarKind::Binary);
        std::vector<double> up(nc);
        for (int j = 0; j < nc; ++j) {
            up[j] = uni(rng, 0.5, 2.5);
            m.add_var("t" + std::to_string(j), VarKind::Continuous, 0.0, up[j]);
        }
        const int nv = nb + nc;
        const int nrows = uni_int(rng, 1, 4);
        for (int r = 0; r < nrows; ++r) {
            LinExpr e;
            std::vector<double> pt(nv);
            for (int j = 0; j < nb; ++j) pt[j] = uni_int(rng, 0, 1);
            for (int j = 0; j < nc; ++j) pt[nb + j] = uni(rng, 0.0, up[j]);
            double amax = 0.0;
            for (int j = 0; j < nv; ++j) {
                const double a = uni(rng, -2.0, 2.0);
                e.add(j, a);
                amax = std::max(amax, std::abs(a));
            }
            if (amax < 0.3) { --r; continue; }
            const double dot = e.eval(pt);
            if (uni_int(rng, 0, 1))
                m.add_row("r" + std::to_string(r), e, Rel::Le, dot + uni(rng, 0.05, 1.0));
            else
                m.add_row("r" + std::to_string(r), e, Rel::Ge, dot - uni(rng, 0.05, 1.0));
        }
        for (int j = 0; j < nv; ++j) m.objective.add(j, uni(rng, -3.0, 3.0));
        m.sense = uni_int(rng, 0, 1) ? Sense::Max : Sense::Min;

        // Reference: enumerate binary patterns, clamp them as bounds, solve
        // the continuous remainder.
        bool any = false;
        double best = 0.0;
        for (int mask = 0; mask < (1 << nb); ++mask) {
            OptModel fixed = m;
            for (int j = 0; j < nb; ++j) {
                Variable& v = fixed.var_mutable(j);
                v.kind = VarKind::Continuous;
                v.lo = v.up = (mask >> j) & 1;
            }
            OptSolution ls = solve_lp(fixed);
            if (ls.status != SolveStatus::Optimal) continue;
            if (!any || (m.sense == Sense::Min ? ls.objective_value < best
                                               : ls.objective_value > best)) {
                any = true;
                best = ls.objective_value;
            }
        }

        OptSolution s;
        if (!any) {
            CHECK(solve_milp(m).status == SolveStatus::Infeasible);
            continue;
        }
        s = solve_milp(m);
        REQUIRE(s.status == SolveStatus::Optimal);
        CHECK(std::abs(s.objective_value - best) <= 1e-6 * (1.0 + std::abs(best)));
        CHECK(point_feasible(m, s.values, 1e-6));
    }
}

TEST_CASE("milp fuzz: node and pivot counts are deterministic") {
    std::mt19937_64 rng(616);
    for (int it = 0; it < 20; ++it) {
        const int nb = uni_int(rng, 3, 8);
        OptModel m;
        LinExpr e;
        for (int j = 0; j < nb; ++j) {
            m.add_var("b" + std::to_string(j), VarKind::Binary);
            m.objective.add(j, uni(rng, 0.5, 3.0));
            e.add(j, uni_int(rng, 1, 5));
        }
        m.sense = Sense::Max;
        m.add_row("cap", e, Rel::Le, uni_int(rng, 2, 3 * nb));
        OptSolution a = solve_milp(m);
        OptSolution b = solve_milp(m);
        CHECK(a.nodes == b.nodes);
        CHECK(a.pivots == b.pivots);
        REQUIRE(a.status == b.status);
        for (std::size_t j = 0; j < a.values.size(); ++j)
            CHECK(a.values[j] == b.values[j]);
    }
}

TEST_CASE("limits: node budget raises and carries the incumbent") {
    OptModel m;
    LinExpr cap;
    std::mt19937_64 rng(8080);
    for (int j = 0; j < 20; ++j) {
        m.add_var("b" + std::to_string(j), VarKind::Binary);
        const double w = 2.0 * j + 3.0;
        m.objective.add(j, w + uni(rng, 0.0, 0.01));
        cap.add(j, w);
    }
    m.sense = Sense::Max;
    m.add_row("cap", cap, Rel::Le, 200.0);
    SolverOptions opts;
    opts.node_limit = 5;
    CHECK_THROWS_AS(solve_milp(m, opts), NodeLimitExceeded);
}

TEST_CASE("limits: pivot budget raises a numerical failure") {
    OptModel m;
    const int x = m.add_var("x", VarKind::Continuous, 0.0, 2.0);
    const int y = m.add_var("y", VarKind::Continuous, 0.0, 3.0);
    m.sense = Sense::Max;
    m.objective.add(x, 3.0);
    m.objective.add(y, 2.0);
    LinExpr e;
    e.add(x, 1.0);
    e.add(y, 1.0);
    m.add_row("cap", e, Rel::Le, 4.0);
    SolverOptions opts;
    opts.max_pivots = 1;
    CHECK_THROWS_AS(solve_lp(m, opts), NumericalFailure);
}

TEST_CASE("invalid models are rejected eagerly") {
    OptModel m;
    m.add_var("x");
    CHECK_THROWS_AS(m.add_var("x"), InvalidModel);
    LinExpr bad;
    bad.add(7, 1.0);
    CHECK_THROWS_AS(m.add_row("r", bad, Rel::Le, 0.0), InvalidModel);
    CHECK_THROWS_AS(m.require_var("nope"), InvalidModel);
    CHECK(m.var_index("nope") == -1);

    OptModel b;
    b.add_var("a", VarKind::Binary);
    b.objective.add(0, 1.0);
    CHECK_THROWS_AS(solve_lp(b), InvalidModel);
    CHECK_THROWS_AS(dualize_lp(b), InvalidModel);
}

TEST_CASE("extreme points: unit square with a corner cut") {
    std::vector<RowDef> rows;
    LinExpr e;
    e.add(0, 1.0);
    e.add(1, 1.0);
    rows.push_back(RowDef{"cut", e, Rel::Le, 1.5});
    const auto verts =
        enumerate_extreme_points(rows, {0.0, 0.0}, {1.0, 1.0});
    REQUIRE(verts.size() == 5);
    const std::vector<std::vector<double>> want = {
        {0.0, 0.0}, {0.0, 1.0}, {0.5, 1.0}, {1.0, 0.0}, {1.0, 0.5}};
    for (std::size_t i = 0; i < want.size(); ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(verts[i][j] == doctest::Approx(want[i][j]).epsilon(1e-9));
}

TEST_CASE("extreme points: equality row reduces the square to a segment") {
    std::vector<RowDef> rows;
    LinExpr e;
    e.add(0, 1.0);
    e.add(1, -1.0);
    rows.push_back(RowDef{"diag", e, Rel::Eq, 0.0});
    const auto verts =
        enumerate_extreme_points(rows, {0.0, 0.0}, {1.0, 1.0});
    REQUIRE(verts.size() == 2);
    CHECK(verts[0][0] == doctest::Approx(0.0));
    CHECK(verts[0][1] == doctest::Approx(0.0));
    CHECK(verts[1][0] == doctest::Approx(1.0));
    CHECK(verts[1][1] == doctest::Approx(1.0));
}

TEST_CASE("extreme points: empty region and one-dimensional box") {
    std::vector<RowDef> rows;
    LinExpr e;
    e.add(0, 1.0);
    e.add(1, 1.0);
    rows.push_back(RowDef{"neg", e, Rel::Le, -1.0});
    CHECK(enumerate_extreme_points(rows, {0.0, 0.0}, {1.0, 1.0}).empty());

    const auto seg = enumerate_extreme_points({}, {2.0}, {5.0});
    REQUIRE(seg.size() == 2);
    CHECK(seg[0][0] == doctest::Approx(2.0));
    CHECK(seg[1][0] == doctest::Approx(5.0));
}

TEST_CASE("extreme points: guard rails") {
    CHECK_THROWS_AS(enumerate_extreme_points({}, {0.0}, {kInf}), UnboundedSet);
    std::vector<double> lo(9, 0.0), up(9, 1.0);
    CHECK_THROWS_AS(enumerate_extreme_points({}, lo, up), InvalidModel);
}

TEST_CASE("extreme points fuzz: feasibility and tightness rank") {
    std::mt19937_64 rng(70707);
    for (int it = 0; it < 60; ++it) {
        OptModel m = random_bounded_lp(rng, 2, 4, true);
        const int d = static_cast<int>(m.num_vars());
        std::vector<double> lo, up;
        for (const auto& v : m.vars()) {
            lo.push_back(v.lo);
            up.push_back(v.up);
        }
        const auto verts = enumerate_extreme_points(m.rows(), lo, up);
        for (const auto& x : verts) {
            CHECK(point_feasible(m, x, 1e-6));
            // A vertex must have d linearly independent tight constraints.
            std::vector<std::vector<double>> tight;
            for (const auto& r : m.rows()) {
                const double lhs = r.expr.eval(x);
                const bool is_tight = r.rel == Rel::Eq
                                          ? true && std::abs(lhs - r.rhs) <= 1e-6
                                          : std::abs(lhs - r.rhs) <= 1e-6;
                if (is_tight) {
                    std::vector<double> a(d, 0.0);
                    for (const auto& [v, c] : r.expr.terms) a[v] += c;
                    tight.push_back(std::move(a));
                }
            }
            for (int j = 0; j < d; ++j) {
                if (std::abs(x[j] - lo[j]) <= 1e-6 ||
                    std::abs(x[j] - up[j]) <= 1e-6) {
                    std::vector<double> a(d, 0.0);
                    a[j] = 1.0;
                    tight.push_back(std::move(a));
                }
            }
            CHECK(matrix_rank(tight) == d);
        }
    }
}

TEST_CASE("lp text dump: exact rendering and stability") {
    auto build = [](bool shuffled) {
        OptModel m;
        const int x = m.add_var("x");
        const int y = m.add_var("y", VarKind::Continuous, 0.0, 2.5);
        const int z = m.add_var("z", VarKind::Free);
        const int b = m.add_var("b", VarKind::Binary);
        if (shuffled) {
            m.objective.add(z, 1.0);
            m.objective.add(y, -1.0);
            m.objective.add(x, 2.0);
            m.objective.add(y, -2.0);
        } else {
            m.objective.add(x, 2.0);
            m.objective.add(y, -3.0);
            m.objective.add(z, 1.0);
        }
        m.objective.constant = 1.0;
        LinExpr r0;
        r0.add(x, 1.0);
        r0.add(y, 1.0);
        m.add_row("cap", r0, Rel::Le, 4.0);
        LinExpr r1;
        r1.add(x, 1.0);
        r1.add(z, -1.0);
        m.add_row("link", r1, Rel::Eq, 0.0);
        LinExpr r2;
        r2.add(y, 1.0);
        r2.add(b, 1.0);
        m.add_row("pick", r2, Rel::Ge, 1.0);
        return m;
    };
    const std::string a = dump_lp_text(build(false));
    const std::string b = dump_lp_text(build(true));
    CHECK(a == b);
    const std::string want =
        "Minimize\n obj: 2 x - 3 y + z + 1\n"
        "Subject To\n"
        " r0_cap: x + y <= 4\n"
        " r1_link: x - z = 0\n"
        " r2_pick: y + b >= 1\n"
        "Bounds\n"
        " 0 <= x\n"
        " 0 <= y <= 2.5\n"
        " z free\n"
        " 0 <= b <= 1\n"
        "Binaries\n"
        " b\n"
        "End\n";
    CHECK(a == want);
}
