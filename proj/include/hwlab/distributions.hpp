#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "hwlab/rng.hpp"

namespace hwlab {

enum class Family { Exponential, Lomax, LogNormal, Gamma, PhaseType, EmpiricalRenewal };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

// Parameters are named real vectors (scalars stored as length-1). Matrix-valued
// parameters (phase-type S) are stored row-major with a "phases" size key.
struct DistributionSpec {
    Family family = Family::Exponential;
    std::map<std::string, std::vector<double>> params;
    bool normalize_mean = false;

    bool has(const std::string& key) const { return params.count(key) > 0; }
    double scalar(const std::string& key) const;
    double scalar_or(const std::string& key, double fallback) const;
    const std::vector<double>& vec(const std::string& key) const;
};

namespace detail {
struct FamilyImpl;
}

// Immutable evaluator family {Gbar, g, g', g'', h, h2} plus samplers for one
// service / inter-arrival law. Safe to share across threads; samplers draw
// from an explicit per-thread rng.
class Bundle {
public:
    Bundle() = default;

    double Gbar(double x) const;
    double g(double x) const;
    double gprime(double x) const;
    double gsecond(double x) const;
    double h(double x) const;
    double h2(double x) const;

    double mean() const;
    double variance() const;
    double sup_h() const;   // H
    double sup_h2() const;  // H2

    // zbar(r) = integral of Gbar over [r, inf); zbar(0) == mean exactly
    double zbar(double r) const;

    double sample(Rng& rng) const;
    double sample_residual(Rng& rng) const;  // density Gbar(x)/mean
    // remaining service given elapsed age a: survival Gbar(a+x)/Gbar(a)
    double sample_conditional_residual(double age, Rng& rng) const;

    double quantile_survival(double u) const;  // x with Gbar(x) = u

    bool has_density() const;
    const DistributionSpec& spec() const;

private:
    friend Bundle build_bundle(const DistributionSpec&);
    std::shared_ptr<const detail::FamilyImpl> impl_;
};

Bundle build_bundle(const DistributionSpec& spec);

struct AssumptionTolerances {
    double consistency = 1e-9;       // |h*Gbar - g| and |h2*Gbar - g'|
    double mean_quadrature = 1e-8;   // |int Gbar - mean|
    double unit_mean = 1e-10;        // when normalize_mean set
    double sup_cap = 1e6;            // finite-grid stand-in for boundedness
    double tail_margin = 0.05;       // exponent slack on fitted tail decay
};

struct ClauseResult {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double threshold = 0.0;
};

struct AssumptionReport {
    std::string family;
    std::size_t grid_size = 0;
    double grid_min = 0.0, grid_max = 0.0;
    double sup_h = 0.0, sup_h2 = 0.0, sup_gpp = 0.0;
    double gbar_tail_exponent = 0.0;  // fitted on the last decade of the grid
    double gpp_tail_exponent = 0.0;
    AssumptionTolerances tolerances;
    std::vector<ClauseResult> clauses;

    bool all_pass() const;
    const ClauseResult* clause(const std::string& name) const;
    std::string to_json() const;
};

AssumptionReport verify_assumptions(const Bundle& bundle, const std::vector<double>& grid,
                                    const AssumptionTolerances& tol = {});

// geometric grid on [x_lo, x_max], dense near zero (x_lo small enough to
// expose hazard/density blow-ups at the origin)
std::vector<double> default_assumption_grid(double x_max = 200.0, int n = 800,
                                            double x_lo = 1e-12);

inline double sample_service(const Bundle& b, Rng& rng) { return b.sample(rng); }
inline double sample_residual(const Bundle& b, Rng& rng) { return b.sample_residual(rng); }
inline double zbar(const Bundle& b, double r) { return b.zbar(r); }

}  // namespace hwlab
