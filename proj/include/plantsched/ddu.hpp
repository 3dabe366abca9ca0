#pragma once

// Decision-dependent uncertainty models and their reductions to linear rows:
//  - yield ambiguity: run-combination products lower the guaranteed yield
//    floor, linearized through conjunction auxiliaries;
//  - frequency-regulation load deviation: a two-moment ambiguity set around
//    fitted load statistics collapses to a per-hour deviation half-width;
//  - by-product structure: multinomial state probabilities carry credal
//    intervals from an imprecise-Dirichlet posterior that narrow as runtime
//    observations accumulate.

#include "plantsched/opt.hpp"
#include "plantsched/specfun.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace plantsched::ddu {

struct EmptySample : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Yield ambiguity
// ---------------------------------------------------------------------------

// A set of equipment options whose simultaneous activity shifts the yield
// floor by `delta` (negative delta raises the guaranteed yield).
struct YieldCombo {
    std::vector<std::string> members;  // equipment option ids
    double delta = 0.0;
};

struct YieldAmbiguity {
    std::map<std::string, double> floors;  // per corrected option id
    std::vector<YieldCombo> combos;
    std::vector<std::string> corrected;  // option ids subject to correction
};

// Appends rows enforcing aux = AND(vars) for binary vars to the model and
// returns the index of the freshly added auxiliary (continuous in [0,1];
// the rows force it to the exact product at binary inputs).
int and_linearize(opt::OptModel& m, const std::vector<int>& vars,
                  const std::string& aux_name);

// Appends the corrected-yield floor rows for one (hour, option) pair:
//   alpha + sum_k delta_k * aux_k >= floor      and      alpha <= 1.
// combo_aux pairs each conjunction auxiliary index with its delta.
void yield_bound_rows(opt::OptModel& m, double alpha_floor,
                      const std::vector<std::pair<int, double>>& combo_aux,
                      int alpha_var, const std::string& tag);

// ---------------------------------------------------------------------------
// Load-deviation moment model
// ---------------------------------------------------------------------------

struct FrMomentModel {
    std::vector<double> mu;     // per-hour mean load (kWh)
    std::vector<double> sigma;  // per-hour population std (kWh)
    std::vector<long> samples_per_hour;
    double drift_k = 0.0;  // linear drift of the mean in the net purchase
    double drift_b = 0.0;
    double gamma1 = 0.0;  // mean-shift budget: |shift| <= sqrt(gamma1*sigma)
    double gamma2 = 0.0;  // second-moment budget: shift^2+var <= gamma2*sigma
    double epsilon = 0.1; // box violation probability, in (0,1)

    std::size_t horizon() const { return mu.size(); }
};

std::pair<double, double> estimate_moments(const std::vector<double>& samples);

// Tail calibration for the deviation box: the light-tailed quantile uses the
// normal inverse CDF; the distribution-free one uses the one-sided
// Chebyshev-type factor sqrt((1-eps)/eps) and is valid for every law in the
// moment set (two-point extremals included).
enum class FrCalibration { Gaussian, DistributionFree };

// Half-width dE of the per-hour deviation box |load - expected| <= dE.
// Worst case over the moment set is taken in closed form; the drift of the
// mean in the net-purchase proxy widens the box by its absolute value.
double fr_delta(const FrMomentModel& fm, int hour, double net_load_proxy,
                FrCalibration cal = FrCalibration::Gaussian);

// ---------------------------------------------------------------------------
// By-product structure credal model
// ---------------------------------------------------------------------------

struct IdmState {
    std::string id;
    std::vector<std::string> pattern;  // option ids that must all run
    double prior = 0.0;
};

struct ProductStructureIdm {
    std::vector<IdmState> states;
    std::vector<double> ratios;      // by-product ratio w_i per state
    std::vector<long> hist_counts;   // offline observations per state
    std::vector<long> rt_counts;     // runtime observations per state
    double s = 1.0;                  // equivalent prior sample size
    double gamma = 0.95;             // credal band confidence
    double threshold = 0.0;          // states with ratio > threshold matter
};

struct ThetaInterval {
    double lo = 0.0;
    double hi = 1.0;
    double expect_lo = 0.0;  // posterior-expectation interval, secondary
    double expect_hi = 1.0;
};

// Credal band for one state's probability: n_i and N are the state's and
// the total observation counts (history + runtime); endpoints come from the
// beta quantiles of the posterior envelope, with the exact 0 / 1 endpoints
// at empty and full counts.
ThetaInterval idm_interval(const ProductStructureIdm& spec, int state_index);

// One state's contribution to the weighted by-product propensity.
struct ZetaStateRef {
    int indicator_var = -1;  // binary/product variable gating the state
    double weight = 1.0;     // w_i
    double lo = 0.0;         // theta interval, possibly collapsed lo == hi
    double hi = 1.0;
};

// Appends rows defining zeta_var = sum_i w_i * theta_i with
// lo_i * s_i <= theta_i <= hi_i * s_i; returns the theta variable indices.
std::vector<int> zeta_rows(opt::OptModel& m, const std::string& tag,
                           const std::vector<ZetaStateRef>& states,
                           int zeta_var);

}  // namespace plantsched::ddu
