#include "hwlab/kernels.hpp"

#include <cmath>
#include <stdexcept>

#include "hwlab/mathutil.hpp"

namespace hwlab {

RGrid RGrid::from_nodes(std::vector<double> nodes) {
    if (nodes.empty() || nodes.front() != 0.0)
        throw std::invalid_argument("RGrid: nodes must start at 0");
    for (std::size_t i = 1; i < nodes.size(); ++i)
        if (!(nodes[i] > nodes[i - 1])) throw std::invalid_argument("RGrid: nodes must increase");
    RGrid g;
    g.nodes = std::move(nodes);
    const std::size_t n = g.nodes.size();
    g.weights.assign(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double dr = g.nodes[i + 1] - g.nodes[i];
        g.weights[i] += 0.5 * dr;
        g.weights[i + 1] += 0.5 * dr;
    }
    return g;
}

RGrid RGrid::geometric(double r_max, int n, double first_step) {
    if (n < 2 || r_max <= 0.0 || first_step <= 0.0 || first_step >= r_max)
        throw std::invalid_argument("RGrid::geometric: bad arguments");
    // nodes r_k = first_step * (q^k - 1)/(q - 1) with q solving r_{n-1} = r_max
    double lo = 1.0 + 1e-12, hi = 2.0;
    auto span = [&](double q) {
        return first_step * (std::pow(q, n - 1) - 1.0) / (q - 1.0);
    };
    while (span(hi) < r_max) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (span(mid) < r_max ? lo : hi) = mid;
    }
    const double q = 0.5 * (lo + hi);
    std::vector<double> nodes(n);
    nodes[0] = 0.0;
    double step = first_step;
    for (int k = 1; k < n; ++k) {
        nodes[k] = nodes[k - 1] + step;
        step *= q;
    }
    nodes[n - 1] = r_max;
    return from_nodes(std::move(nodes));
}

double phi(const Bundle& b, double t, const std::function<double(double)>& f, double x) {
    return f(x + t) * b.Gbar(x + t) / b.Gbar(x);
}

double psi(const Bundle& b, double t, const std::function<double(double)>& f, double x, double s) {
    const double u = x + std::max(t - s, 0.0);
    return f(u) * b.Gbar(u) / b.Gbar(x);
}

std::vector<double> t_map(const Bundle& b, std::span<const double> ages, const RGrid& grid) {
    std::vector<double> out(grid.size(), 0.0);
    for (double a : ages) {
        const double inv = 1.0 / b.Gbar(a);
        for (std::size_t k = 0; k < grid.size(); ++k) out[k] += b.Gbar(a + grid.nodes[k]) * inv;
    }
    return out;
}

std::vector<double> t_map_derivative(const Bundle& b, std::span<const double> ages,
                                     const RGrid& grid) {
    std::vector<double> out(grid.size(), 0.0);
    for (double a : ages) {
        const double inv = 1.0 / b.Gbar(a);
        for (std::size_t k = 0; k < grid.size(); ++k) out[k] -= b.g(a + grid.nodes[k]) * inv;
    }
    return out;
}

double l2_inner(std::span<const double> f, std::span<const double> g, const RGrid& grid) {
    if (f.size() != grid.size() || g.size() != grid.size())
        throw std::invalid_argument("l2_inner: length mismatch with grid");
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += grid.weights[i] * f[i] * g[i];
    return s;
}

double l2_norm(std::span<const double> f, const RGrid& grid) {
    return std::sqrt(std::max(0.0, l2_inner(f, f, grid)));
}

double h1_inner(std::span<const double> values_f, std::span<const double> deriv_f,
                std::span<const double> values_g, std::span<const double> deriv_g,
                const RGrid& grid) {
    if (values_f.size() != grid.size() || deriv_f.size() != grid.size() ||
        values_g.size() != grid.size() || deriv_g.size() != grid.size())
        throw std::invalid_argument("h1_inner: length mismatch with grid");
    return l2_inner(values_f, values_g, grid) + l2_inner(deriv_f, deriv_g, grid);
}

double h1_norm(std::span<const double> values, std::span<const double> deriv, const RGrid& grid) {
    return std::sqrt(std::max(0.0, h1_inner(values, deriv, values, deriv, grid)));
}

double l2_norm_window(std::span<const double> f, const RGrid& grid, double L) {
    if (f.size() != grid.size()) throw std::invalid_argument("l2_norm_window: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double a = grid.nodes[i], bb = grid.nodes[i + 1];
        if (a >= L) break;
        const double f2a = f[i] * f[i], f2b = f[i + 1] * f[i + 1];
        if (bb <= L) {
            s += 0.5 * (bb - a) * (f2a + f2b);
        } else {  // partial cell, linear interpolation of f^2
            const double w = (L - a) / (bb - a);
            const double f2L = f2a + w * (f2b - f2a);
            s += 0.5 * (L - a) * (f2a + f2L);
        }
    }
    return std::sqrt(std::max(0.0, s));
}

double l2_norm_tail(std::span<const double> f, const RGrid& grid, double L) {
    const double total = l2_inner(f, f, grid);
    const double head = l2_norm_window(f, grid, L);
    return std::sqrt(std::max(0.0, total - head * head));
}

double h1_tail_bound(const Bundle& b, double c_scale, double r_max) {
    const double tail2 =
        integrate_gk([&](double r) { return b.zbar(r) * b.zbar(r); }, r_max, r_max + 200.0, 1e-12) +
        b.zbar(r_max + 200.0) * b.zbar(r_max + 200.0);  // crude remainder, zbar decreasing
    const double H = b.sup_h();
    return std::sqrt((1.0 + H * H) * c_scale * c_scale * tail2);
}

}  // namespace hwlab
