#pragma once

#include <functional>
#include <span>
#include <vector>

#include "hwlab/distributions.hpp"

namespace hwlab {

// Nonuniform grid in the r-argument of Z_t(r), with trapezoidal weights.
// r_0 = 0 always (the boundary identity Z(0) = x ^ 0 lives there).
struct RGrid {
    std::vector<double> nodes;    // strictly increasing, nodes[0] == 0
    std::vector<double> weights;  // trapezoid weights

    std::size_t size() const { return nodes.size(); }
    double r_max() const { return nodes.back(); }

    // geometric spacing: dense near 0, stretching to r_max
    static RGrid geometric(double r_max = 40.0, int n = 48, double first_step = 0.05);
    static RGrid from_nodes(std::vector<double> nodes);
};

// (Phi_t f)(x) = f(x+t) Gbar(x+t) / Gbar(x)
double phi(const Bundle& b, double t, const std::function<double(double)>& f, double x);

// (Psi_t f)(x, s) = f(x + (t-s)^+) Gbar(x + (t-s)^+) / Gbar(x)
double psi(const Bundle& b, double t, const std::function<double(double)>& f, double x, double s);

// (T nu)(r_k) = sum_j Gbar(a_j + r_k) / Gbar(a_j)
std::vector<double> t_map(const Bundle& b, std::span<const double> ages, const RGrid& grid);

// (T nu)'(r_k) = -sum_j g(a_j + r_k) / Gbar(a_j)
std::vector<double> t_map_derivative(const Bundle& b, std::span<const double> ages,
                                     const RGrid& grid);

// trapezoidal H^1(0,inf) inner product <f,g> + <f',g'> on a shared grid
double h1_inner(std::span<const double> values_f, std::span<const double> deriv_f,
                std::span<const double> values_g, std::span<const double> deriv_g,
                const RGrid& grid);

double h1_norm(std::span<const double> values, std::span<const double> deriv, const RGrid& grid);

double l2_inner(std::span<const double> f, std::span<const double> g, const RGrid& grid);
double l2_norm(std::span<const double> f, const RGrid& grid);

// L2 norm restricted to [0, L] (trapezoid, partial cell at L)
double l2_norm_window(std::span<const double> f, const RGrid& grid, double L);
// L2 norm on [L, r_max]
double l2_norm_tail(std::span<const double> f, const RGrid& grid, double L);

// analytic bound on the truncated tail of ||Z||_{H^1}: functions of the class
// |Z(r)| <= c * zbar(r) with |Z'| <= H |Z| have squared-tail at most
// (1 + H^2) * c^2 * int_{r_max}^inf zbar^2(r) dr.
double h1_tail_bound(const Bundle& b, double c_scale, double r_max);

}  // namespace hwlab
