#pragma once

#include <cmath>
#include <functional>

namespace hwlab {

inline double norm_pdf(double x) {
    return 0.3989422804014326779 * std::exp(-0.5 * x * x);
}
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }
inline double norm_sf(double x) { return 0.5 * std::erfc(x * 0.7071067811865475244); }

double norm_inv(double p);  // AS 241 (PPND16)

// exp(t^2) * erfc(t), stable for large positive t
double erfcx(double t);

// regularized incomplete gamma functions
double gamma_p(double a, double x);
double gamma_q(double a, double x);
// F such that Q(a,x) = exp(-x + a*log(x) - lgamma(a)) * F; requires x > 0.
// Lets hazard-type ratios be formed without under/overflow.
double gamma_q_scaled(double a, double x);

// adaptive 15-point Gauss-Kronrod on [a,b], absolute tolerance
double integrate_gk(const std::function<double(double)>& f, double a, double b,
                    double abs_tol = 1e-10, int max_depth = 30);

// Solve f(x) = 0 for increasing or decreasing f on [lo,hi] with f(lo), f(hi)
// bracketing 0. Newton steps guarded by bisection.
double solve_bracketed(const std::function<double(double)>& f,
                       const std::function<double(double)>& df, double lo, double hi,
                       double x0, double x_tol = 1e-13, int max_iter = 200);

}  // namespace hwlab
