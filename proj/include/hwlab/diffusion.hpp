#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "hwlab/distributions.hpp"
#include "hwlab/empirical.hpp"
#include "hwlab/kernels.hpp"

namespace hwlab {

// initial condition y0 = (x0, z0, z0') in the state space: z0(0) must equal x0 ^ 0
struct DiffusionInit {
    double x0 = 0.0;
    std::vector<double> z0;   // on the r-grid; empty means identically zero
    std::vector<double> z0p;  // derivative on the r-grid; empty means zero
};

struct DiffusionConfig {
    double dt = 1e-3;
    double horizon = 1.0;
    RGrid r_grid = RGrid::geometric();
    int noise_cells = 256;
    double beta = 1.0;
    double sigma = 1.0;  // std deviation of the base inter-arrival law
    DistributionSpec service;
    std::uint64_t seed = 1;
    DiffusionInit init;
    std::vector<double> sample_times;  // where Z, Z' are assembled
    bool compute_hh = true;            // also build the H_t(h) path
    bool compute_residuals = true;

    int steps() const;
};

// equal g-measure cells evaluated at their g-barycenters
struct NoiseGrid {
    std::vector<double> edges;   // size m+1, edges[0] = 0, edges[m] = +inf
    std::vector<double> points;  // barycenters
    std::vector<double> weights; // g-measure of each cell (sums to 1)
    static NoiseGrid quantile_cells(const Bundle& b, int m);
};

struct GaussianDrivers {
    double dt = 0.0;
    int nsteps = 0;
    double sigma = 0.0, beta = 0.0;
    NoiseGrid xgrid;
    std::vector<double> B;      // B_{t_n}, n = 0..nsteps
    std::vector<double> E;      // sigma B_t - beta t
    std::vector<double> W;      // cell increments, row-major [i*nsteps + k]
    std::vector<double> H1;     // H_t(1) on the time grid
    std::vector<double> Hh;     // H_t(h) on the time grid (when requested)

    double w(int cell, int step) const { return W[static_cast<std::size_t>(cell) * nsteps + step]; }
    double mid_time(int step) const { return (step + 0.5) * dt; }
};

GaussianDrivers simulate_drivers(const DiffusionConfig& cfg, const Bundle& service, Rng& rng);

// builds the derived paths (E, H1, Hh) from an externally supplied field; W is
// row-major cells x steps, B has steps+1 entries
GaussianDrivers drivers_from_field(const DiffusionConfig& cfg, const Bundle& service,
                                   std::vector<double> W, std::vector<double> B);

// integral of phi against the martingale measure field up to time t
double mm_integral(const GaussianDrivers& d, const std::function<double(double, double)>& phi,
                   double t);

struct CmsInput {
    std::vector<double> eta;   // eta(0) = 0
    std::vector<double> zeta;  // zeta(0) = x0 ^ 0
    double x0 = 0.0;
};

struct CmsSolution {
    std::vector<double> kappa, x;
    double residual1 = 0.0;  // sup-norm defect of the convolution equation (refined quadrature)
    double residual2 = 0.0;  // sup-norm defect of the mass-balance equation
};

CmsSolution solve_cms(const CmsInput& in, const Bundle& service, double dt,
                      bool compute_residuals = true);

struct DiffusionPath {
    double dt = 0.0;
    int nsteps = 0;
    std::vector<double> X, K;  // on the time grid
    std::vector<double> sample_times;
    std::vector<std::vector<double>> Z, Zp;  // rows per sample time on the r-grid
    double cms_residual1 = 0.0, cms_residual2 = 0.0;
    double max_boundary_gap = 0.0;  // sup_t |Z_t(0) - X_t ^ 0| over sample times
    double var_H1_end = 0.0;        // discrete variance of H_T(1), driver summary
};

DiffusionPath run_diffusion(const DiffusionConfig& cfg);
DiffusionPath run_diffusion(const DiffusionConfig& cfg, const Bundle& service, Rng& rng);
DiffusionPath run_diffusion(const DiffusionConfig& cfg, const Bundle& service,
                            const GaussianDrivers& drivers);

struct StationaryDiffusionLaws {
    EmpiricalLaw x;                  // X marginal
    std::vector<EmpiricalLaw> z_at;  // Z(r) draws for each requested r
};

// draws at spaced times past burn_in across independent replications
StationaryDiffusionLaws estimate_diffusion_stationary(const DiffusionConfig& cfg, double burn_in,
                                                      double spacing, int n_draws,
                                                      const std::vector<double>& z_at_r = {},
                                                      int threads = 1);

}  // namespace hwlab
