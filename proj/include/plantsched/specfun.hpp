#pragma once

// Special functions backing the uncertainty models: regularized incomplete
// beta and its inverse (credal interval quantiles), the standard normal CDF
// and quantile, and the one-sided distribution-free tail bound.

#include <stdexcept>
#include <string>

namespace plantsched::ddu {

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// I_x(a, b), absolute error <= 1e-10. Requires a, b > 0 and x in [0, 1].
double reg_inc_beta(double a, double b, double x);

// Inverse of reg_inc_beta in x, absolute error <= 1e-9. q in [0, 1].
double inv_reg_inc_beta(double a, double b, double q);

// Standard normal CDF / quantile. normal_quantile requires p in (0, 1) and
// is accurate to <= 1e-9 (rational approximation refined by Newton steps).
double normal_cdf(double x);
double normal_quantile(double p);

// Lower bound on P(X <= mu0 + offset) over all laws with mean mu0 and
// standard deviation sigma0: offset^2 / (sigma0^2 + offset^2). Requires
// offset >= 0 and sigma0 >= 0; the 0/0 corner (both zero) returns 1, the
// point mass at the threshold.
double cantelli_bound(double offset, double sigma0);

}  // namespace plantsched::ddu
