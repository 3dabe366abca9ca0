#pragma once

// Small dense LP / MILP kernel: bounded-variable two-phase primal simplex,
// best-first branch-and-bound over binaries, LP dualization, and vertex
// enumeration for low-dimensional polytopes. Deterministic by construction:
// identical models yield identical pivot sequences and identical output.

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace plantsched::opt {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class VarKind : std::uint8_t { Continuous, Binary, Free };
enum class Rel : std::uint8_t { Le, Eq, Ge };
enum class Sense : std::uint8_t { Min, Max };

struct Variable {
    std::string name;
    VarKind kind = VarKind::Continuous;
    double lo = 0.0;
    double up = kInf;
};

struct LinExpr {
    std::vector<std::pair<int, double>> terms;
    double constant = 0.0;

    void add(int var, double coeff) { terms.emplace_back(var, coeff); }
    void normalize();  // sort by index, fold duplicates, drop zeros
    double eval(const std::vector<double>& x) const;
};

struct RowDef {
    std::string tag;
    LinExpr expr;
    Rel rel = Rel::Le;
    double rhs = 0.0;
};

struct InvalidModel : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnboundedSet : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NodeLimitExceeded : std::runtime_error {
    double best_objective;
    NodeLimitExceeded(const std::string& what, double incumbent)
        : std::runtime_error(what), best_objective(incumbent) {}
};

class OptModel {
  public:
    Sense sense = Sense::Min;
    LinExpr objective;

    // Binary forces bounds to [0,1]; Free forces (-inf, +inf).
    int add_var(const std::string& name, VarKind kind = VarKind::Continuous,
                double lo = 0.0, double up = kInf);
    // The expression's constant is folded into the rhs. Returns the row index.
    int add_row(const std::string& tag, LinExpr expr, Rel rel, double rhs);

    int var_index(const std::string& name) const;  // -1 when absent
    int require_var(const std::string& name) const;

    const std::vector<Variable>& vars() const { return vars_; }
    const std::vector<RowDef>& rows() const { return rows_; }
    std::vector<RowDef>& rows_mutable() { return rows_; }
    Variable& var_mutable(int idx) { return vars_[idx]; }
    std::size_t num_vars() const { return vars_.size(); }
    std::size_t num_rows() const { return rows_.size(); }
    bool has_binaries() const;

  private:
    std::vector<Variable> vars_;
    std::vector<RowDef> rows_;
    std::unordered_map<std::string, int> index_;
};

enum class SolveStatus : std::uint8_t { Optimal, Infeasible, Unbounded };

struct OptSolution {
    SolveStatus status = SolveStatus::Infeasible;
    std::vector<double> values;      // per variable, model order
    double objective_value = 0.0;
    std::vector<double> dual_values; // per row: d(objective)/d(rhs); LP only
    long pivots = 0;
    long nodes = 0;
};

struct SolverOptions {
    double feas_tol = 1e-7;
    double opt_tol = 1e-7;
    double int_tol = 1e-6;
    long max_pivots = 200000;
    long bland_threshold = 20000;  // switch to Bland's rule past this
    long node_limit = 2000000;
};

// Throws InvalidModel if the model contains binaries.
OptSolution solve_lp(const OptModel& model, const SolverOptions& opts = {});

// Branch-and-bound over binary variables; continuous ones stay relaxed.
// Throws NodeLimitExceeded (carrying the incumbent objective) at the limit.
OptSolution solve_milp(const OptModel& model, const SolverOptions& opts = {});

// Textbook dual of an LP (binaries rejected). Finite bounds other than the
// implicit x >= 0 are folded into explicit rows first, so every dual variable
// corresponds to a row of the folded primal.
OptModel dualize_lp(const OptModel& model);

// Equivalent model in Min / Ge / (x >= 0 or free) form.
OptModel canonicalize(const OptModel& model);

// All extreme points of { x : rows, lo <= x <= up } for dim <= 8, sorted
// lexicographically. Throws UnboundedSet when the box is missing a side.
std::vector<std::vector<double>> enumerate_extreme_points(
    const std::vector<RowDef>& rows, const std::vector<double>& lo,
    const std::vector<double>& up, double dedup_tol = 1e-8);

// Stable LP-format text rendering (fixed %.17g formatting); equal models
// produce byte-identical output.
std::string dump_lp_text(const OptModel& model);

}  // namespace plantsched::opt
