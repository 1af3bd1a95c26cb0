#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hwlab/diffusion.hpp"
#include "hwlab/empirical.hpp"
#include "hwlab/queue.hpp"

namespace hwlab {

// stationary functionals of the scaled state
struct Functional {
    enum Kind { X, Xhat, XhatPlus, ZhatAtR, ZhatH1 } kind = Xhat;
    double r = 0.0;  // for ZhatAtR (snapped to the nearest grid node)

    std::string label() const;
    bool needs_z() const { return kind == ZhatAtR || kind == ZhatH1; }
    double eval(const SamplePoint& sp, const RGrid& grid) const;
};

enum class SamplingMode { Replications, LongPath };

struct StationaryOptions {
    double burn_in = 50.0;  // mean-service units; recommended floor is 50
    double spacing = 20.0;  // long-path draw spacing
    int n_draws = 1000;
    SamplingMode mode = SamplingMode::Replications;
    int threads = 1;
};

struct StationaryEstimate {
    std::vector<EmpiricalLaw> laws;  // one per functional
    double lag1_autocorr = 0.0;      // first functional, long-path mode only
};

StationaryEstimate estimate_queue_stationary(const SimConfig& base,
                                             const std::vector<Functional>& functionals,
                                             const StationaryOptions& opts);

// exact M/M/N birth-death stationary distribution, computed in log-space
std::vector<double> erlang_oracle(int N, double lambda, double tail_cut = 1e-16);

struct ComparisonReport {
    std::string label;
    std::size_t n_a = 0, n_b = 0;
    double ks = 0.0, w1 = 0.0;
    double mean_delta = 0.0, var_delta = 0.0;
    int bootstrap_resamples = 0;
    double ks_se = 0.0, w1_se = 0.0;
    double ks_lo = 0.0, ks_hi = 0.0;  // percentile 95% interval
    double w1_lo = 0.0, w1_hi = 0.0;

    std::string to_json() const;
};

double ks_distance(const EmpiricalLaw& a, const EmpiricalLaw& b);
double w1_distance(const EmpiricalLaw& a, const EmpiricalLaw& b);

ComparisonReport compare(const EmpiricalLaw& a, const EmpiricalLaw& b,
                         int bootstrap_resamples = 1000, std::uint64_t seed = 1);

// supremum over [0,T] of the centered stationary renewal race, divided by sqrt(N)
EmpiricalLaw lhat_bound(const SimConfig& cfg, double horizon, int replications, int threads = 1);

struct SweepRow {
    int N = 0;
    std::string functional;
    ComparisonReport cmp;
};

struct SweepTable {
    std::vector<SweepRow> rows;
    bool has_trend = false;       // needs more than one N
    bool ks_decreasing = false;   // strictly, for the first functional
    double min_decrease_z = 0.0;  // min (KS_i - KS_{i+1}) / SE over consecutive pairs
    double final_ks = 0.0;

    std::string to_json() const;
};

// queue stationary law vs the diffusion estimate for each N in the ladder
SweepTable convergence_sweep(const SimConfig& base, const std::vector<int>& n_ladder,
                             const Functional& functional, const StationaryOptions& opts,
                             const EmpiricalLaw& diffusion_law, int bootstrap_resamples = 1000);

}  // namespace hwlab
