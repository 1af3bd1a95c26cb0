#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "hwlab/distributions.hpp"
#include "hwlab/kernels.hpp"

namespace hwlab {

enum class InitKind { Star, Empty, Explicit };

struct ExplicitInit {
    double R0 = -1.0;  // forward recurrence time; < 0 draws a fresh inter-arrival
    long long X0 = 0;
    std::vector<double> ages;  // in-service ages; must have min(X0, N) entries
};

struct SimConfig {
    int N = 1;
    double beta = 1.0;  // Halfin-Whitt slack: lambda = N - beta sqrt(N)
    DistributionSpec arrival_base;  // unit-mean inter-arrival law of the base renewal
    DistributionSpec service;
    double horizon = 0.0;
    std::vector<double> sample_times;
    RGrid r_grid = RGrid::geometric();
    InitKind init = InitKind::Star;
    ExplicitInit explicit_init;
    std::uint64_t seed = 1;
    bool compute_z = true;
    bool record_event_log = false;
    bool check_invariants = false;

    double lambda() const;
};

struct SamplePoint {
    double t = 0.0;
    long long X = 0, E = 0, K = 0, D = 0;
    double xhat = 0.0;
    std::vector<double> z, zp;         // Z_t(r), Z'_t(r) on the r-grid
    std::vector<double> zhat, zhat_p;  // diffusion-scaled
};

// one service episode: age grows linearly from age0 over [entry, departure)
struct ServiceEpisode {
    double entry = 0.0;
    double age0 = 0.0;
    double v = 0.0;        // total service requirement
    double departure = 0.0;  // +inf if still in service at the horizon
    bool initial = false;    // in service at time 0 (not counted by K)
};

struct QueuePath {
    int N = 0;
    double beta = 0.0;
    std::uint64_t seed = 0;
    double horizon = 0.0;
    long long X0 = 0;
    RGrid r_grid;
    std::vector<double> zbar_grid;  // fluid Z on the r-grid
    std::vector<double> gbar_grid;  // Gbar on the r-grid
    std::vector<SamplePoint> samples;

    bool has_event_log = false;
    std::vector<double> initial_ages;
    std::vector<double> arrivals;          // arrival epochs
    std::vector<ServiceEpisode> episodes;  // ordered by service entry

    long long final_X = 0, final_E = 0, final_K = 0, final_D = 0;
    long long invariant_checks = 0;
    long long invariant_failures = 0;
    double max_age_error = 0.0;
};

struct StarInit {
    double R0 = 0.0;
    std::vector<double> ages;       // i.i.d. with density Gbar
    std::vector<double> residuals;  // remaining service, conditional on the age
};

// stationary arrivals, empty queue, all servers busy with residual-law ages
StarInit init_star(const SimConfig& cfg, const Bundle& service, const Bundle& arrival, Rng& rng);

QueuePath run(const SimConfig& cfg);
QueuePath run(const SimConfig& cfg, const Bundle& service, const Bundle& arrival);

struct FluidPath {
    std::vector<double> t;
    std::vector<double> xbar;  // X/N
    std::vector<double> ebar;  // E/N
    std::vector<std::vector<double>> z_over_n;
};
FluidPath fluid_scale(const QueuePath& path);

// M_phi(t) = Q_phi(t) - A_phi(t) reconstructed from the event log; the
// compensator is integrated along the piecewise-linear age flow
double compensated_departure(const QueuePath& path, const Bundle& service,
                             const std::function<double(double, double)>& phi_xs, double t,
                             double quad_step = 0.05);
double compensated_departure(const QueuePath& path, const Bundle& service,
                             const std::function<double(double)>& f, double t,
                             double quad_step = 0.05);

}  // namespace hwlab
