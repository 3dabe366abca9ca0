#include "plantsched/ddu.hpp"

#include <cmath>

namespace plantsched::ddu {

using opt::LinExpr;
using opt::OptModel;
using opt::Rel;
using opt::VarKind;

int and_linearize(OptModel& m, const std::vector<int>& vars,
                  const std::string& aux_name) {
    if (vars.empty())
        throw opt::InvalidModel("and_linearize needs a non-empty variable set");
    for (int v : vars)
        if (m.vars().at(static_cast<std::size_t>(v)).kind != VarKind::Binary)
            throw opt::InvalidModel("and_linearize requires binary inputs: " +
                                    m.vars()[v].name);
    const int aux = m.add_var(aux_name, VarKind::Continuous, 0.0, 1.0);
    LinExpr lower;
    lower.add(aux, 1.0);
    for (int v : vars) {
        LinExpr e;
        e.add(aux, 1.0);
        e.add(v, -1.0);
        m.add_row("and_ub", e, Rel::Le, 0.0);
        lower.add(v, -1.0);
    }
    m.add_row("and_lb", lower, Rel::Ge,
              1.0 - static_cast<double>(vars.size()));
    return aux;
}

void yield_bound_rows(OptModel& m, double alpha_floor,
                      const std::vector<std::pair<int, double>>& combo_aux,
                      int alpha_var, const std::string& tag) {
    LinExpr e;
    e.add(alpha_var, 1.0);
    for (const auto& [aux, delta] : combo_aux) e.add(aux, delta);
    m.add_row("yield_floor_" + tag, e, Rel::Ge, alpha_floor);
    LinExpr cap;
    cap.add(alpha_var, 1.0);
    m.add_row("yield_cap_" + tag, cap, Rel::Le, 1.0);
}

std::pair<double, double> estimate_moments(const std::vector<double>& samples) {
    if (samples.empty()) throw EmptySample("estimate_moments on empty data");
    // Welford accumulation; population variance (divide by n).
    double mean = 0.0, m2 = 0.0;
    long n = 0;
    for (double x : samples) {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    return {mean, std::sqrt(m2 / static_cast<double>(n))};
}

double fr_delta(const FrMomentModel& fm, int hour, double net_load_proxy,
                FrCalibration cal) {
    if (hour < 0 || static_cast<std::size_t>(hour) >= fm.horizon())
        throw DomainError("fr_delta: hour outside the fitted horizon");
    if (!(fm.epsilon > 0.0) || !(fm.epsilon < 1.0))
        throw DomainError("fr_delta: epsilon must lie in (0, 1)");
    if (fm.gamma1 < 0.0 || fm.gamma2 < 0.0)
        throw DomainError("fr_delta: gamma budgets must be nonnegative");
    const double sig = fm.sigma[static_cast<std::size_t>(hour)];
    if (sig < 0.0) throw DomainError("fr_delta: negative sigma");

    const double r = std::sqrt(fm.gamma2 * sig);
    const double mbar = std::min(std::sqrt(fm.gamma1 * sig), r);
    const double t = cal == FrCalibration::Gaussian
                         ? normal_quantile(1.0 - fm.epsilon)
                         : std::sqrt((1.0 - fm.epsilon) / fm.epsilon);

    // max over the moment set of (mean shift) + t * (std): the stationary
    // point on the second-moment circle sits at shift r/sqrt(1+t^2); when
    // the mean-shift budget cuts it off, the budget edge is the maximizer.
    double width;
    const double root = std::sqrt(1.0 + t * t);
    if (mbar * root >= r)
        width = r * root;
    else
        width = mbar + t * std::sqrt(std::max(0.0, r * r - mbar * mbar));

    const double drift =
        std::abs(fm.drift_k * net_load_proxy + fm.drift_b);
    return std::max(0.0, drift + width);
}

ThetaInterval idm_interval(const ProductStructureIdm& spec, int state_index) {
    const std::size_t k = static_cast<std::size_t>(state_index);
    if (k >= spec.states.size())
        throw DomainError("idm_interval: state index out of range");
    if (!(spec.s > 0.0)) throw DomainError("idm_interval: s must be > 0");
    if (!(spec.gamma > 0.0) || !(spec.gamma < 1.0))
        throw DomainError("idm_interval: gamma must lie in (0, 1)");

    double n_i = 0.0, total = 0.0;
    for (std::size_t j = 0; j < spec.states.size(); ++j) {
        double c = 0.0;
        if (j < spec.hist_counts.size())
            c += static_cast<double>(spec.hist_counts[j]);
        if (j < spec.rt_counts.size())
            c += static_cast<double>(spec.rt_counts[j]);
        if (c < 0.0) throw DomainError("idm_interval: negative count");
        total += c;
        if (j == k) n_i = c;
    }

    ThetaInterval out;
    out.expect_lo = n_i / (spec.s + total);
    out.expect_hi = (n_i + spec.s) / (spec.s + total);

    const double q_lo = 0.5 * (1.0 - spec.gamma);
    const double q_hi = 0.5 * (1.0 + spec.gamma);
    // Posterior envelope: the pessimistic posterior puts all prior weight
    // against the state, the optimistic one puts it all on the state. The
    // empty- and full-count cases hit the exact endpoints.
    out.lo = (n_i == 0.0)
                 ? 0.0
                 : inv_reg_inc_beta(n_i, spec.s + total - n_i, q_lo);
    out.hi = (n_i == total)
                 ? 1.0
                 : inv_reg_inc_beta(n_i + spec.s, total - n_i, q_hi);
    return out;
}

std::vector<int> zeta_rows(OptModel& m, const std::string& tag,
                           const std::vector<ZetaStateRef>& states,
                           int zeta_var) {
    std::vector<int> theta;
    LinExpr sum;
    sum.add(zeta_var, 1.0);
    for (std::size_t i = 0; i < states.size(); ++i) {
        const ZetaStateRef& st = states[i];
        if (!(st.lo <= st.hi) || st.lo < 0.0 || st.hi > 1.0)
            throw DomainError("zeta_rows: malformed theta interval");
        const int th = m.add_var("theta_" + tag + "_" + std::to_string(i),
                                 VarKind::Continuous, 0.0, st.hi);
        theta.push_back(th);
        LinExpr lo_row;
        lo_row.add(th, 1.0);
        lo_row.add(st.indicator_var, -st.lo);
        m.add_row("zeta_lo_" + tag, lo_row, Rel::Ge, 0.0);
        LinExpr hi_row;
        hi_row.add(th, 1.0);
        hi_row.add(st.indicator_var, -st.hi);
        m.add_row("zeta_hi_" + tag, hi_row, Rel::Le, 0.0);
        sum.add(th, -st.weight);
    }
    m.add_row("zeta_sum_" + tag, sum, Rel::Eq, 0.0);
    return theta;
}

}  // namespace plantsched::ddu
