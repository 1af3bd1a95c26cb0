#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "hwlab/kernels.hpp"
#include "hwlab/rng.hpp"

using namespace hwlab;

namespace {

Bundle exponential_bundle() {
    DistributionSpec s;
    s.family = Family::Exponential;
    s.params["rate"] = {1.0};
    return build_bundle(s);
}

Bundle lomax4() {
    DistributionSpec s;
    s.family = Family::Lomax;
    s.params["alpha"] = {4.0};
    s.normalize_mean = true;
    return build_bundle(s);
}

Bundle gamma3() {
    DistributionSpec s;
    s.family = Family::Gamma;
    s.params["alpha"] = {3.0};
    s.normalize_mean = true;
    return build_bundle(s);
}

const auto one = [](double) { return 1.0; };

}  // namespace

TEST_CASE("r-grid construction") {
    const RGrid g = RGrid::geometric(40.0, 48, 0.05);
    CHECK(g.nodes.front() == 0.0);
    CHECK(g.nodes.back() == 40.0);
    CHECK(g.size() == 48);
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g.nodes[i] > g.nodes[i - 1]);
    for (double w : g.weights) CHECK(w > 0.0);
    double total = 0.0;
    for (double w : g.weights) total += w;
    CHECK(total == doctest::Approx(40.0).epsilon(1e-12));
    CHECK_THROWS_AS(RGrid::from_nodes({0.5, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(RGrid::from_nodes({0.0, 1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("phi: exponential ratio, identity at t = 0, semigroup") {
    const Bundle ex = exponential_bundle();
    for (double x : {0.0, 1.0, 4.0})
        for (double t : {0.2, 1.5})
            CHECK(phi(ex, t, one, x) == doctest::Approx(std::exp(-t)).epsilon(1e-14));

    auto f = [](double x) { return 1.0 / (1.0 + x); };
    for (const Bundle& b : {exponential_bundle(), lomax4(), gamma3()})
        for (double x : {0.0, 0.7, 3.0}) CHECK(phi(b, 0.0, f, x) == doctest::Approx(f(x)));

    Rng rng(17);
    for (const Bundle& b : {exponential_bundle(), lomax4(), gamma3()}) {
        const bool is_exp = b.spec().family == Family::Exponential;
        for (int it = 0; it < 60; ++it) {
            const double t = 5.0 * rng.uniform(), s = 5.0 * rng.uniform();
            const double x = 8.0 * rng.uniform();
            auto inner = [&](double y) { return phi(b, s, one, y); };
            const double lhs = phi(b, t, inner, x);
            const double rhs = phi(b, t + s, one, x);
            CHECK(std::fabs(lhs - rhs) <= (is_exp ? 1e-12 : 1e-9));
        }
    }
}

TEST_CASE("psi: clamp, group property, sup bound") {
    const Bundle b = lomax4();
    auto f = [](double x) { return std::cos(x); };
    // s >= t freezes the argument at x
    CHECK(psi(b, 1.0, f, 0.8, 2.5) == doctest::Approx(f(0.8)).epsilon(1e-14));
    CHECK(psi(b, 1.0, f, 0.8, 1.0) == doctest::Approx(f(0.8)).epsilon(1e-14));

    Rng rng(23);
    for (int it = 0; it < 80; ++it) {
        const double s = 4.0 * rng.uniform();
        const double t = 4.0 * rng.uniform();
        const double u = s * rng.uniform();  // u <= s
        const double x = 6.0 * rng.uniform();
        auto phif = [&](double y) { return phi(b, t, f, y); };
        CHECK(psi(b, s, phif, x, u) == doctest::Approx(psi(b, s + t, f, x, u)).epsilon(1e-11));
        CHECK(std::fabs(psi(b, t, f, x, u)) <= 1.0 + 1e-12);  // ||f||_inf = 1
    }
}

TEST_CASE("t_map on exponential collapses to counts") {
    const Bundle ex = exponential_bundle();
    const RGrid grid = RGrid::geometric(20.0, 24, 0.05);

    const std::vector<double> single{0.0};
    const auto z1 = t_map(ex, single, grid);
    for (std::size_t k = 0; k < grid.size(); ++k)
        CHECK(z1[k] == doctest::Approx(std::exp(-grid.nodes[k])).epsilon(1e-13));

    std::vector<double> ages{0.3, 1.2, 2.0, 5.5, 0.01};
    const auto zk = t_map(ex, ages, grid);
    for (std::size_t k = 0; k < grid.size(); ++k)
        CHECK(zk[k] == doctest::Approx(5.0 * std::exp(-grid.nodes[k])).epsilon(1e-12));
}

TEST_CASE("t_map on lomax equals the brute-force atom sum") {
    const Bundle b = lomax4();
    const RGrid grid = RGrid::geometric(30.0, 32, 0.1);
    const std::vector<double> ages{0.0, 1.0};
    const auto z = t_map(b, ages, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double r = grid.nodes[k];
        double expected = 0.0;  // independent direct summation over atoms
        for (double a : ages)
            expected += std::pow(1.0 + (a + r) / 3.0, -4.0) / std::pow(1.0 + a / 3.0, -4.0);
        CHECK(z[k] == doctest::Approx(expected).epsilon(1e-13));
    }
}

TEST_CASE("t_map invariants: monotone, bounded, exact at zero") {
    Rng rng(5);
    for (const Bundle& b : {exponential_bundle(), lomax4(), gamma3()}) {
        const RGrid grid = RGrid::geometric(40.0, 40, 0.05);
        std::vector<double> ages(17);
        for (auto& a : ages) a = 3.0 * rng.uniform();
        const auto z = t_map(b, ages, grid);
        const auto zp = t_map_derivative(b, ages, grid);
        CHECK(z[0] == static_cast<double>(ages.size()));  // exact count
        const double H = b.sup_h();
        for (std::size_t k = 0; k < grid.size(); ++k) {
            CHECK(z[k] <= static_cast<double>(ages.size()) + 1e-12);
            if (k > 0) CHECK(z[k] <= z[k - 1] + 1e-12);
            CHECK(zp[k] <= 1e-12);
            CHECK(zp[k] >= -H * z[k] - 1e-9);
        }
    }
}

TEST_CASE("t_map_derivative: exponential closed form, finite differences, empty ages") {
    const Bundle ex = exponential_bundle();
    const RGrid grid = RGrid::geometric(20.0, 24, 0.05);
    const std::vector<double> single{0.0};
    const auto zp = t_map_derivative(ex, single, grid);
    for (std::size_t k = 0; k < grid.size(); ++k)
        CHECK(zp[k] == doctest::Approx(-std::exp(-grid.nodes[k])).epsilon(1e-13));

    // central finite difference of t_map on two shifted grids
    const Bundle b = lomax4();
    const std::vector<double> ages{0.2, 1.4, 3.3};
    const double delta = 1e-5;
    std::vector<double> plus_nodes, minus_nodes;
    for (double r : grid.nodes) {
        plus_nodes.push_back(r + delta);
        minus_nodes.push_back(r + 2e-5 - delta);  // keep node 0 nonnegative
    }
    const auto deriv = t_map_derivative(b, ages, grid);
    for (std::size_t k = 1; k < grid.size(); ++k) {
        double fd = 0.0;
        for (double a : ages)
            fd += (b.Gbar(a + grid.nodes[k] + delta) - b.Gbar(a + grid.nodes[k] - delta)) /
                  (2.0 * delta * b.Gbar(a));
        CHECK(fd == doctest::Approx(deriv[k]).epsilon(1e-7));
    }

    const auto empty = t_map_derivative(b, std::vector<double>{}, grid);
    for (double v : empty) CHECK(v == 0.0);
}

TEST_CASE("h1 inner product: analytic value, zero, Cauchy-Schwarz") {
    const RGrid grid = RGrid::geometric(40.0, 400, 0.004);
    std::vector<double> f(grid.size()), fp(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        f[k] = std::exp(-grid.nodes[k]);
        fp[k] = -std::exp(-grid.nodes[k]);
    }
    // ||e^{-r}||_{H1}^2 = 1/2 + 1/2 = 1
    CHECK(h1_inner(f, fp, f, fp, grid) == doctest::Approx(1.0).epsilon(2e-4));
    CHECK(h1_norm(f, fp, grid) == doctest::Approx(1.0).epsilon(1e-4));

    std::vector<double> zero(grid.size(), 0.0);
    CHECK(h1_inner(zero, zero, zero, zero, grid) == 0.0);

    Rng rng(9);
    for (int it = 0; it < 40; ++it) {
        std::vector<double> g(grid.size()), gp(grid.size());
        std::vector<double> h(grid.size()), hp(grid.size());
        for (std::size_t k = 0; k < grid.size(); ++k) {
            g[k] = rng.normal();
            gp[k] = rng.normal();
            h[k] = rng.normal();
            hp[k] = rng.normal();
        }
        const double ip = h1_inner(g, gp, h, hp, grid);
        CHECK(std::fabs(ip) <= h1_norm(g, gp, grid) * h1_norm(h, hp, grid) + 1e-9);
    }

    std::vector<double> short_vec(3, 0.0);
    CHECK_THROWS_AS(h1_inner(short_vec, fp, f, fp, grid), std::invalid_argument);
}

TEST_CASE("windowed and tail L2 norms nest in L") {
    const RGrid grid = RGrid::geometric(40.0, 60, 0.05);
    std::vector<double> f(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) f[k] = 1.0 / (1.0 + grid.nodes[k]);
    double prev = 0.0;
    for (double L : {1.0, 5.0, 10.0, 40.0}) {
        const double w = l2_norm_window(f, grid, L);
        CHECK(w >= prev);
        prev = w;
    }
    CHECK(l2_norm_tail(f, grid, grid.r_max()) == doctest::Approx(0.0).epsilon(1e-9));
    const double total = l2_norm(f, grid);
    const double head = l2_norm_window(f, grid, 7.0);
    const double tail = l2_norm_tail(f, grid, 7.0);
    CHECK(head * head + tail * tail == doctest::Approx(total * total).epsilon(1e-10));
}

TEST_CASE("h1 tail bound is positive and decreasing in r_max") {
    const Bundle b = lomax4();
    const double b1 = h1_tail_bound(b, 1.0, 20.0);
    const double b2 = h1_tail_bound(b, 1.0, 40.0);
    CHECK(b1 > b2);
    CHECK(b2 > 0.0);
}
