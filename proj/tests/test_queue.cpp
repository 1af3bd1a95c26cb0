#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "hwlab/parallel.hpp"
#include "hwlab/queue.hpp"

using namespace hwlab;

namespace {

DistributionSpec exp_spec() {
    DistributionSpec s;
    s.family = Family::Exponential;
    s.normalize_mean = true;
    return s;
}

DistributionSpec lomax4() {
    DistributionSpec s;
    s.family = Family::Lomax;
    s.params["alpha"] = {4.0};
    s.normalize_mean = true;
    return s;
}

SimConfig base_config(int N, double horizon) {
    SimConfig cfg;
    cfg.N = N;
    cfg.beta = 1.0;
    cfg.horizon = horizon;
    cfg.arrival_base = exp_spec();
    cfg.service = exp_spec();
    cfg.r_grid = RGrid::geometric(30.0, 24, 0.1);
    cfg.seed = 4242;
    return cfg;
}

}  // namespace

TEST_CASE("star initialization: full house, empty queue, boundary at zero") {
    SimConfig cfg = base_config(40, 1.0);
    cfg.service = lomax4();
    cfg.sample_times = {0.0};
    const QueuePath p = run(cfg);
    const auto& sp = p.samples.at(0);
    CHECK(sp.X == 40);
    CHECK(sp.K == 0);
    CHECK(sp.E == 0);
    CHECK(sp.xhat == 0.0);
    CHECK(sp.zhat[0] == 0.0);  // exact under the star start
    CHECK(sp.z[0] == 40.0);
}

TEST_CASE("star residual services are memoryless for exponential service") {
    SimConfig cfg = base_config(100000, 1.0);
    const Bundle service = build_bundle(cfg.service);
    const Bundle arrival = build_bundle(cfg.arrival_base);
    Rng rng(7);
    const StarInit s = init_star(cfg, service, arrival, rng);
    double mean_res = 0.0, mean_age = 0.0;
    for (int j = 0; j < cfg.N; ++j) {
        mean_res += s.residuals[j];
        mean_age += s.ages[j];
    }
    mean_res /= cfg.N;
    mean_age /= cfg.N;
    CHECK(mean_res == doctest::Approx(1.0).epsilon(0.012));
    CHECK(mean_age == doctest::Approx(1.0).epsilon(0.012));  // residual law of exp(1)
}

TEST_CASE("hand-traceable single-job trace") {
    // one server, one arrival at t = 0.5 with unit service, horizon 2
    SimConfig cfg;
    cfg.N = 1;
    cfg.beta = 0.5;  // lambda = 0.5
    cfg.horizon = 2.0;
    cfg.init = InitKind::Explicit;
    cfg.explicit_init.X0 = 0;
    cfg.explicit_init.R0 = 0.5;
    DistributionSpec one_point;  // service identically 1
    one_point.family = Family::EmpiricalRenewal;
    one_point.params["sample"] = {1.0, 1.0};
    cfg.service = one_point;
    DistributionSpec far;  // next inter-arrival pushes past the horizon
    far.family = Family::EmpiricalRenewal;
    far.params["sample"] = {1e9, 1e9};
    cfg.arrival_base = far;
    cfg.sample_times = {0.25, 1.0, 1.75};
    cfg.record_event_log = true;
    const QueuePath p = run(cfg);
    CHECK(p.samples[0].X == 0);
    CHECK(p.samples[1].X == 1);
    CHECK(p.samples[1].K == 1);
    CHECK(p.samples[2].X == 0);
    CHECK(p.samples[2].D == 1);
    CHECK(p.final_E == 1);
    REQUIRE(p.episodes.size() == 1);
    CHECK(p.episodes[0].entry == doctest::Approx(0.5));
    CHECK(p.episodes[0].departure == doctest::Approx(1.5));
}

TEST_CASE("exponential collapse: Z(r) = e^{-r} (X and N)") {
    SimConfig cfg = base_config(20, 10.0);
    for (double t = 0.5; t <= 10.0; t += 0.5) cfg.sample_times.push_back(t);
    const QueuePath p = run(cfg);
    REQUIRE(p.samples.size() == 20);
    for (const auto& sp : p.samples) {
        const double in_service = static_cast<double>(std::min<long long>(sp.X, cfg.N));
        for (std::size_t k = 0; k < p.r_grid.size(); ++k) {
            const double expected = std::exp(-p.r_grid.nodes[k]) * in_service;
            CHECK(std::fabs(sp.z[k] - expected) <= 1e-12 * std::max(1.0, expected));
        }
    }
}

TEST_CASE("pathwise invariants hold at every event") {
    SimConfig cfg = base_config(20, 120.0);
    cfg.service = lomax4();
    cfg.check_invariants = true;
    const QueuePath p = run(cfg);
    CHECK(p.invariant_checks > 3000);
    CHECK(p.invariant_failures == 0);
    CHECK(p.max_age_error <= 1e-9);
    CHECK(p.final_X == p.X0 + p.final_E - p.final_D);
}

TEST_CASE("identical seeds give identical paths; different seeds differ") {
    SimConfig cfg = base_config(15, 30.0);
    cfg.service = lomax4();
    for (double t = 1.0; t <= 30.0; t += 1.0) cfg.sample_times.push_back(t);
    const QueuePath a = run(cfg);
    const QueuePath b = run(cfg);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        CHECK(a.samples[i].X == b.samples[i].X);
        CHECK(a.samples[i].E == b.samples[i].E);
        CHECK(a.samples[i].zhat == b.samples[i].zhat);
    }
    cfg.seed += 1;
    const QueuePath c = run(cfg);
    bool same = true;
    for (std::size_t i = 0; i < a.samples.size(); ++i) same = same && a.samples[i].X == c.samples[i].X;
    CHECK_FALSE(same);
}

TEST_CASE("fluid scaling: star start, arrival rate, concentration") {
    SUBCASE("xbar starts at one") {
        SimConfig cfg = base_config(64, 1.0);
        cfg.sample_times = {0.0};
        const FluidPath f = fluid_scale(run(cfg));
        CHECK(f.xbar.at(0) == 1.0);
    }
    SUBCASE("long-run arrival rate") {
        SimConfig cfg = base_config(16, 4000.0);
        cfg.sample_times = {4000.0};
        cfg.compute_z = false;
        const QueuePath p = run(cfg);
        const double rate = static_cast<double>(p.samples[0].E) / 4000.0;
        CHECK(rate == doctest::Approx(cfg.lambda()).epsilon(0.01));
    }
    SUBCASE("sup |xbar - 1| < 5/sqrt(N) in at least 95% of replications") {
        const int reps = 100;
        std::vector<int> ok(reps, 0);
        parallel_for(reps, 4, [&](std::size_t i) {
            SimConfig cfg = base_config(400, 10.0);
            cfg.service = lomax4();
            cfg.compute_z = false;
            cfg.seed = seed_split(99, i);
            for (double t = 0.25; t <= 10.0; t += 0.25) cfg.sample_times.push_back(t);
            const FluidPath f = fluid_scale(run(cfg));
            double sup = 0.0;
            for (double x : f.xbar) sup = std::max(sup, std::fabs(x - 1.0));
            ok[i] = sup < 5.0 / std::sqrt(400.0) ? 1 : 0;
        });
        int good = 0;
        for (int v : ok) good += v;
        CHECK(good >= 95);
    }
}

TEST_CASE("compensated departures: zero traffic, centered mean, variance identity") {
    SUBCASE("no arrivals and empty start give identically zero") {
        SimConfig cfg = base_config(5, 10.0);
        cfg.init = InitKind::Empty;
        DistributionSpec far;
        far.family = Family::EmpiricalRenewal;
        far.params["sample"] = {1e9, 1e9};
        cfg.arrival_base = far;
        cfg.record_event_log = true;
        const QueuePath p = run(cfg);
        const Bundle service = build_bundle(cfg.service);
        for (double t : {2.0, 7.0, 10.0})
            CHECK(compensated_departure(p, service, [](double) { return 1.0; }, t) == 0.0);
    }
    SUBCASE("martingale is centered and its variance matches the compensator") {
        const int reps = 500;
        const double t = 5.0;
        const int N = 20;
        std::vector<double> m_vals(reps), a_vals(reps);
        const Bundle service = build_bundle(lomax4());
        const Bundle arrival = build_bundle(exp_spec());
        parallel_for(reps, 4, [&](std::size_t i) {
            SimConfig cfg = base_config(N, t);
            cfg.service = lomax4();
            cfg.record_event_log = true;
            cfg.compute_z = false;
            cfg.seed = seed_split(1234, i);
            const QueuePath p = run(cfg, service, arrival);
            const double m = compensated_departure(p, service, [](double) { return 1.0; }, t);
            m_vals[i] = m;
            a_vals[i] = static_cast<double>(p.final_D) - m;  // A_1(t) = Q_1(t) - M_1(t)
        });
        double mean_m = 0.0, mean_a = 0.0;
        for (int i = 0; i < reps; ++i) {
            mean_m += m_vals[i];
            mean_a += a_vals[i];
        }
        mean_m /= reps;
        mean_a /= reps;
        double var_m = 0.0;
        for (int i = 0; i < reps; ++i) var_m += (m_vals[i] - mean_m) * (m_vals[i] - mean_m);
        var_m /= (reps - 1);
        const double se = std::sqrt(var_m / reps);
        CHECK(std::fabs(mean_m / std::sqrt(static_cast<double>(N))) <=
              3.0 * se / std::sqrt(static_cast<double>(N)));
        // quadratic variation identity: Var M_1(t) = E A_1(t) (phi^2 = phi = 1)
        CHECK(var_m == doctest::Approx(mean_a).epsilon(0.10));
    }
}

TEST_CASE("explicit initialization seeds queue and servers") {
    SimConfig cfg = base_config(4, 3.0);
    cfg.init = InitKind::Explicit;
    cfg.explicit_init.X0 = 6;  // 4 in service + 2 waiting
    cfg.explicit_init.ages = {0.1, 0.2, 0.3, 0.4};
    cfg.explicit_init.R0 = 0.9;
    cfg.sample_times = {0.0};
    cfg.check_invariants = true;
    const QueuePath p = run(cfg);
    CHECK(p.samples[0].X == 6);
    CHECK(p.samples[0].z[0] == 4.0);  // in-service count
    CHECK(p.invariant_failures == 0);
    cfg.explicit_init.ages = {0.1};  // wrong cardinality
    CHECK_THROWS_AS(run(cfg), std::invalid_argument);
}

TEST_CASE("nonpositive lambda is rejected") {
    SimConfig cfg = base_config(4, 1.0);
    cfg.beta = 2.0;  // 4 - 2*2 = 0
    CHECK_THROWS_AS(cfg.lambda(), std::invalid_argument);
}
