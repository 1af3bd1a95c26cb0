#include "hwlab/diffusion.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>

#include "hwlab/parallel.hpp"

namespace hwlab {

int DiffusionConfig::steps() const {
    const int n = static_cast<int>(std::llround(horizon / dt));
    if (n < 1 || std::fabs(n * dt - horizon) > 1e-9 * std::max(1.0, horizon))
        throw std::invalid_argument("DiffusionConfig: horizon must be a multiple of dt");
    return n;
}

NoiseGrid NoiseGrid::quantile_cells(const Bundle& b, int m) {
    if (m < 1) throw std::invalid_argument("noise cells must be >= 1");
    NoiseGrid g;
    g.edges.resize(m + 1);
    g.points.resize(m);
    g.weights.assign(m, 1.0 / m);
    g.edges[0] = 0.0;
    for (int i = 1; i < m; ++i)
        g.edges[i] = b.quantile_survival(1.0 - static_cast<double>(i) / m);
    g.edges[m] = std::numeric_limits<double>::infinity();
    // first moment over a cell: int_a^b x g dx = F(a) - F(b), F(x) = x Gbar(x) + zbar(x)
    auto F = [&](double x) {
        return std::isinf(x) ? 0.0 : x * b.Gbar(x) + b.zbar(x);
    };
    for (int i = 0; i < m; ++i)
        g.points[i] = (F(g.edges[i]) - F(g.edges[i + 1])) * m;
    return g;
}

namespace {

int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

std::mutex g_fftw_mutex;  // FFTW plan creation is not thread-safe

struct FftWorkspace {
    int L = 0;
    double* rbuf = nullptr;
    fftw_complex* cbuf = nullptr;
    std::vector<std::complex<double>> acc, acc2;
    fftw_plan fwd = nullptr, inv = nullptr;

    explicit FftWorkspace(int length) : L(length) {
        rbuf = fftw_alloc_real(L);
        cbuf = fftw_alloc_complex(L / 2 + 1);
        acc.resize(L / 2 + 1);
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        fwd = fftw_plan_dft_r2c_1d(L, rbuf, cbuf, FFTW_ESTIMATE);
        inv = fftw_plan_dft_c2r_1d(L, cbuf, rbuf, FFTW_ESTIMATE);
    }
    ~FftWorkspace() {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(inv);
        fftw_free(rbuf);
        fftw_free(cbuf);
    }
    FftWorkspace(const FftWorkspace&) = delete;
    FftWorkspace& operator=(const FftWorkspace&) = delete;
};

FftWorkspace& workspace_for(int L) {
    thread_local std::map<int, std::unique_ptr<FftWorkspace>> cache;
    auto& slot = cache[L];
    if (!slot) slot = std::make_unique<FftWorkspace>(L);
    return *slot;
}

// Precomputed kernel spectra for the stochastic convolutions H_t(1), H_t(h).
// One instance per (config, bundle); simulate() is safe to call concurrently.
class DriverEngine {
public:
    DriverEngine(const DiffusionConfig& cfg, const Bundle& service)
        : dt_(cfg.dt),
          n_(cfg.steps()),
          m_(cfg.noise_cells),
          sigma_(cfg.sigma),
          beta_(cfg.beta),
          want_hh_(cfg.compute_hh),
          L_(next_pow2(2 * cfg.steps())),
          xgrid_(NoiseGrid::quantile_cells(service, cfg.noise_cells)) {
        spec1_.resize(m_);
        if (want_hh_) spech_.resize(m_);
        auto& ws = workspace_for(L_);
        std::vector<double> kern(n_);
        for (int i = 0; i < m_; ++i) {
            const double b = xgrid_.points[i];
            const double inv = 1.0 / service.Gbar(b);
            for (int j = 0; j < n_; ++j) kern[j] = service.Gbar(b + (j + 0.5) * dt_) * inv;
            spec1_[i] = spectrum(ws, kern);
            if (want_hh_) {
                for (int j = 0; j < n_; ++j) kern[j] = service.g(b + (j + 0.5) * dt_) * inv;
                spech_[i] = spectrum(ws, kern);
            }
        }
        // discrete Var(H_T(1)) under this grid: sum of kernel^2 * cell-var
        var_h1_end_ = 0.0;
        for (int i = 0; i < m_; ++i) {
            const double b = xgrid_.points[i];
            const double inv = 1.0 / service.Gbar(b);
            for (int j = 0; j < n_; ++j) {
                const double k = service.Gbar(b + (j + 0.5) * dt_) * inv;
                var_h1_end_ += k * k * xgrid_.weights[i] * dt_;
            }
        }
    }

    GaussianDrivers simulate(Rng& rng, bool keep_field) const {
        GaussianDrivers d = shell();
        d.B.resize(n_ + 1);
        d.B[0] = 0.0;
        const double sqdt = std::sqrt(dt_);
        for (int k = 1; k <= n_; ++k) d.B[k] = d.B[k - 1] + sqdt * rng.normal();
        fill_e(d);

        auto& ws = workspace_for(L_);
        begin_accumulate(ws);
        if (keep_field) d.W.resize(static_cast<std::size_t>(m_) * n_);
        std::vector<double> row(n_);
        for (int i = 0; i < m_; ++i) {
            const double sd = std::sqrt(xgrid_.weights[i] * dt_);
            for (int j = 0; j < n_; ++j) row[j] = sd * rng.normal();
            if (keep_field)
                std::memcpy(d.W.data() + static_cast<std::size_t>(i) * n_, row.data(),
                            sizeof(double) * n_);
            accumulate_row(ws, row.data(), i);
        }
        finish_accumulate(ws, d);
        return d;
    }

    GaussianDrivers from_field(std::vector<double> W, std::vector<double> B) const {
        if (W.size() != static_cast<std::size_t>(m_) * n_)
            throw std::invalid_argument("drivers_from_field: W must be cells x steps");
        if (B.size() != static_cast<std::size_t>(n_) + 1)
            throw std::invalid_argument("drivers_from_field: B must have steps+1 entries");
        GaussianDrivers d = shell();
        d.B = std::move(B);
        fill_e(d);
        d.W = std::move(W);
        auto& ws = workspace_for(L_);
        begin_accumulate(ws);
        for (int i = 0; i < m_; ++i)
            accumulate_row(ws, d.W.data() + static_cast<std::size_t>(i) * n_, i);
        finish_accumulate(ws, d);
        return d;
    }

    double var_h1_end() const { return var_h1_end_; }
    int steps() const { return n_; }
    double dt() const { return dt_; }

private:
    GaussianDrivers shell() const {
        GaussianDrivers d;
        d.dt = dt_;
        d.nsteps = n_;
        d.sigma = sigma_;
        d.beta = beta_;
        d.xgrid = xgrid_;
        return d;
    }

    void fill_e(GaussianDrivers& d) const {
        d.E.resize(n_ + 1);
        for (int k = 0; k <= n_; ++k) d.E[k] = sigma_ * d.B[k] - beta_ * (k * dt_);
    }

    void begin_accumulate(FftWorkspace& ws) const {
        std::fill(ws.acc.begin(), ws.acc.end(), std::complex<double>(0.0, 0.0));
        ws.acc2.assign(want_hh_ ? L_ / 2 + 1 : 0, {0.0, 0.0});
    }

    void accumulate_row(FftWorkspace& ws, const double* row, int cell) const {
        std::memcpy(ws.rbuf, row, sizeof(double) * n_);
        std::memset(ws.rbuf + n_, 0, sizeof(double) * (L_ - n_));
        fftw_execute(ws.fwd);
        const auto& s1 = spec1_[cell];
        for (int f = 0; f <= L_ / 2; ++f) {
            const std::complex<double> wf(ws.cbuf[f][0], ws.cbuf[f][1]);
            ws.acc[f] += wf * s1[f];
            if (want_hh_) ws.acc2[f] += wf * spech_[cell][f];
        }
    }

    void finish_accumulate(FftWorkspace& ws, GaussianDrivers& d) const {
        d.H1 = inverse(ws, ws.acc);
        if (want_hh_) d.Hh = inverse(ws, ws.acc2);
    }

    std::vector<std::complex<double>> spectrum(FftWorkspace& ws, const std::vector<double>& kern) const {
        std::memcpy(ws.rbuf, kern.data(), sizeof(double) * n_);
        std::memset(ws.rbuf + n_, 0, sizeof(double) * (L_ - n_));
        fftw_execute(ws.fwd);
        std::vector<std::complex<double>> out(L_ / 2 + 1);
        for (int f = 0; f <= L_ / 2; ++f) out[f] = {ws.cbuf[f][0], ws.cbuf[f][1]};
        return out;
    }

    std::vector<double> inverse(FftWorkspace& ws, const std::vector<std::complex<double>>& acc) const {
        for (int f = 0; f <= L_ / 2; ++f) {
            ws.cbuf[f][0] = acc[f].real();
            ws.cbuf[f][1] = acc[f].imag();
        }
        fftw_execute(ws.inv);
        std::vector<double> out(n_ + 1);
        out[0] = 0.0;
        const double scale = 1.0 / L_;
        for (int t = 1; t <= n_; ++t) out[t] = ws.rbuf[t - 1] * scale;
        return out;
    }

    double dt_;
    int n_, m_;
    double sigma_, beta_;
    bool want_hh_;
    int L_;
    NoiseGrid xgrid_;
    std::vector<std::vector<std::complex<double>>> spec1_, spech_;
    double var_h1_end_ = 0.0;
};

// piecewise-cubic Hermite interpolation of (z0, z0') on the r-grid, with the
// proportional zbar tail beyond r_max
class InitialCurve {
public:
    InitialCurve(const RGrid& grid, const std::vector<double>& z0, const std::vector<double>& z0p,
                 const Bundle& service)
        : grid_(&grid), service_(&service) {
        if (!z0.empty() && z0.size() != grid.size())
            throw std::invalid_argument("z0 must live on the r-grid");
        if (!z0p.empty() && z0p.size() != z0.size())
            throw std::invalid_argument("z0' must match z0");
        z_ = z0;
        zp_ = z0p;
        if (!z_.empty()) {
            tail_scale_ = z_.back() / service.zbar(grid.r_max());
        }
    }

    bool zero() const { return z_.empty(); }

    double value(double r) const {
        if (z_.empty()) return 0.0;
        const auto& nodes = grid_->nodes;
        if (r >= nodes.back()) return tail_scale_ * service_->zbar(r);
        const std::size_t j = segment(r);
        const double h = nodes[j + 1] - nodes[j];
        const double u = (r - nodes[j]) / h;
        if (zp_.empty()) return z_[j] + u * (z_[j + 1] - z_[j]);
        const double u2 = u * u, u3 = u2 * u;
        return (2 * u3 - 3 * u2 + 1) * z_[j] + (u3 - 2 * u2 + u) * h * zp_[j] +
               (-2 * u3 + 3 * u2) * z_[j + 1] + (u3 - u2) * h * zp_[j + 1];
    }

    double derivative(double r) const {
        if (z_.empty()) return 0.0;
        const auto& nodes = grid_->nodes;
        if (r >= nodes.back()) return -tail_scale_ * service_->Gbar(r);
        const std::size_t j = segment(r);
        const double h = nodes[j + 1] - nodes[j];
        const double u = (r - nodes[j]) / h;
        if (zp_.empty()) return (z_[j + 1] - z_[j]) / h;
        const double u2 = u * u;
        return ((6 * u2 - 6 * u) * z_[j] + (3 * u2 - 4 * u + 1) * h * zp_[j] +
                (-6 * u2 + 6 * u) * z_[j + 1] + (3 * u2 - 2 * u) * h * zp_[j + 1]) /
               h;
    }

private:
    std::size_t segment(double r) const {
        const auto& nodes = grid_->nodes;
        const auto it = std::upper_bound(nodes.begin(), nodes.end(), r);
        return static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - nodes.begin() - 1));
    }

    const RGrid* grid_;
    const Bundle* service_;
    std::vector<double> z_, zp_;
    double tail_scale_ = 0.0;
};

// Z_t(r) and Z'_t(r) from the defining displays; K on the solver grid, t = ns*dt
void assemble_z(const GaussianDrivers& d, const std::vector<double>& K, const Bundle& service,
                const InitialCurve& z0, int ns, double r, double dt, double& z_out,
                double* zp_out) {
    const double ts = ns * dt;
    double m1 = 0.0, mh = 0.0;
    const int m = static_cast<int>(d.xgrid.points.size());
    for (int i = 0; i < m; ++i) {
        const double x = d.xgrid.points[i];
        const double inv = 1.0 / service.Gbar(x);
        const double* row = d.W.data() + static_cast<std::size_t>(i) * d.nsteps;
        for (int k = 0; k < ns; ++k) {
            const double u = x + ts + r - d.mid_time(k);
            m1 += service.Gbar(u) * inv * row[k];
            if (zp_out) mh += service.g(u) * inv * row[k];
        }
    }
    double convg = 0.0, convgp = 0.0;
    for (int j = 1; j < ns; ++j) {
        const double u = (ns - j) * dt + r;
        convg += service.g(u) * K[j];
        if (zp_out) convgp += service.gprime(u) * K[j];
    }
    convg = dt * (convg + 0.5 * service.g(r) * K[ns]);
    z_out = z0.value(ts + r) - m1 + service.Gbar(r) * K[ns] - convg;
    if (zp_out) {
        convgp = dt * (convgp + 0.5 * service.gprime(r) * K[ns]);
        *zp_out = z0.derivative(ts + r) + mh - service.g(r) * K[ns] - convgp;
    }
}

}  // namespace

GaussianDrivers simulate_drivers(const DiffusionConfig& cfg, const Bundle& service, Rng& rng) {
    DriverEngine engine(cfg, service);
    return engine.simulate(rng, true);
}

double mm_integral(const GaussianDrivers& d, const std::function<double(double, double)>& phi,
                   double t) {
    if (t > d.nsteps * d.dt + 1e-12) throw std::out_of_range("mm_integral: t beyond the field");
    if (d.W.empty()) throw std::invalid_argument("mm_integral: field was not retained");
    double sum = 0.0;
    const int m = static_cast<int>(d.xgrid.points.size());
    for (int i = 0; i < m; ++i) {
        const double x = d.xgrid.points[i];
        const double* row = d.W.data() + static_cast<std::size_t>(i) * d.nsteps;
        for (int k = 0; k < d.nsteps; ++k) {
            const double s = d.mid_time(k);
            if (s > t) break;
            sum += phi(x, s) * row[k];
        }
    }
    return sum;
}

CmsSolution solve_cms(const CmsInput& in, const Bundle& service, double dt,
                      bool compute_residuals) {
    const std::size_t n = in.eta.size();
    if (n < 2 || in.zeta.size() != n) throw std::invalid_argument("solve_cms: bad input lengths");
    if (std::fabs(in.zeta[0] - std::min(in.x0, 0.0)) > 1e-9)
        throw std::invalid_argument("solve_cms: zeta(0) must equal x0 ^ 0");
    if (std::fabs(in.eta[0]) > 1e-12) throw std::invalid_argument("solve_cms: eta(0) must be 0");
    const double a = 0.5 * dt * service.g(0.0);
    if (a >= 1.0)
        throw std::invalid_argument("solve_cms: g(0) dt / 2 must be below 1; reduce the step");

    CmsSolution sol;
    sol.kappa.assign(n, 0.0);
    sol.x.assign(n, 0.0);
    sol.x[0] = in.x0;
    const double x0p = std::max(in.x0, 0.0);

    std::vector<double> gv(n);
    for (std::size_t j = 0; j < n; ++j) gv[j] = service.g(j * dt);

    for (std::size_t k = 1; k < n; ++k) {
        double conv = 0.0;  // trapezoid over [0, t_k] minus the diagonal term
        for (std::size_t j = 1; j < k; ++j) conv += gv[k - j] * sol.kappa[j];
        conv *= dt;  // kappa(0) = 0 kills the left end-point
        const double b = in.zeta[k] + (1.0 - a) * (in.eta[k] + x0p) - conv;
        const double xk = b >= 0.0 ? b / (1.0 - a) : b;
        sol.x[k] = xk;
        sol.kappa[k] = in.eta[k] - std::max(xk, 0.0) + x0p;
    }

    if (compute_residuals) {
        double r1 = 0.0, r2 = 0.0;
        for (std::size_t k = 1; k < n; ++k) {
            // refined quadrature of the convolution at t_k: the first cell keeps
            // the trapezoid convention (kappa(0) = 0 is definitional and cadlag
            // inputs may jump there), Simpson re-weights everything after it
            double integral = 0.5 * dt * (gv[k] * sol.kappa[0] + gv[k - 1] * sol.kappa[1]);
            std::size_t j = 1;
            while (j + 2 <= k) {
                integral += dt / 3.0 *
                            (gv[k - j] * sol.kappa[j] + 4.0 * gv[k - j - 1] * sol.kappa[j + 1] +
                             gv[k - j - 2] * sol.kappa[j + 2]);
                j += 2;
            }
            if (j + 1 <= k)
                integral += 0.5 * dt * (gv[k - j] * sol.kappa[j] + gv[0] * sol.kappa[k]);
            r1 = std::max(r1, std::fabs(std::min(sol.x[k], 0.0) - in.zeta[k] - sol.kappa[k] + integral));
            r2 = std::max(r2,
                          std::fabs(sol.kappa[k] - in.eta[k] + std::max(sol.x[k], 0.0) - x0p));
        }
        sol.residual1 = r1;
        sol.residual2 = r2;
    }
    return sol;
}

GaussianDrivers drivers_from_field(const DiffusionConfig& cfg, const Bundle& service,
                                   std::vector<double> W, std::vector<double> B) {
    DriverEngine engine(cfg, service);
    return engine.from_field(std::move(W), std::move(B));
}

DiffusionPath run_diffusion(const DiffusionConfig& cfg) {
    Rng rng(cfg.seed);
    return run_diffusion(cfg, build_bundle(cfg.service), rng);
}

DiffusionPath run_diffusion(const DiffusionConfig& cfg, const Bundle& service, Rng& rng) {
    DriverEngine engine(cfg, service);
    const bool keep_field = !cfg.sample_times.empty();
    return run_diffusion(cfg, service, engine.simulate(rng, keep_field));
}

DiffusionPath run_diffusion(const DiffusionConfig& cfg, const Bundle& service,
                            const GaussianDrivers& drivers) {
    if (std::fabs(service.mean() - 1.0) > 1e-9)
        throw std::invalid_argument("run_diffusion: service law must have unit mean");
    const int n = cfg.steps();
    const double dt = cfg.dt;

    if (!cfg.init.z0.empty() &&
        std::fabs(cfg.init.z0.front() - std::min(cfg.init.x0, 0.0)) > 1e-9)
        throw std::invalid_argument("run_diffusion: z0(0) must equal x0 ^ 0");
    if (cfg.init.z0.empty() && cfg.init.x0 < 0.0)
        throw std::invalid_argument("run_diffusion: negative x0 needs an explicit z0");
    if (!cfg.sample_times.empty() && drivers.W.empty())
        throw std::invalid_argument("run_diffusion: Z assembly needs the retained field");

    InitialCurve z0(cfg.r_grid, cfg.init.z0, cfg.init.z0p, service);

    CmsInput in;
    in.x0 = cfg.init.x0;
    in.eta = drivers.E;
    in.zeta.resize(n + 1);
    for (int k = 0; k <= n; ++k) in.zeta[k] = z0.value(k * dt) - drivers.H1[k];
    CmsSolution cms = solve_cms(in, service, dt, cfg.compute_residuals);

    DiffusionPath path;
    path.dt = dt;
    path.nsteps = n;
    path.X = std::move(cms.x);
    path.K = std::move(cms.kappa);
    path.cms_residual1 = cms.residual1;
    path.cms_residual2 = cms.residual2;
    // deterministic discrete Var(H_T(1)) for the driver summary
    for (std::size_t i = 0; i < drivers.xgrid.points.size(); ++i) {
        const double x = drivers.xgrid.points[i];
        const double inv = 1.0 / service.Gbar(x);
        for (int j = 0; j < n; ++j) {
            const double k = service.Gbar(x + (j + 0.5) * dt) * inv;
            path.var_H1_end += k * k * drivers.xgrid.weights[i] * dt;
        }
    }

    const std::size_t mr = cfg.r_grid.size();
    for (double t : cfg.sample_times) {
        const int ns = static_cast<int>(std::llround(t / dt));
        if (ns < 0 || ns > n) throw std::out_of_range("sample time beyond the horizon");
        std::vector<double> Z(mr), Zp(mr);
        for (std::size_t q = 0; q < mr; ++q)
            assemble_z(drivers, path.K, service, z0, ns, cfg.r_grid.nodes[q], dt, Z[q], &Zp[q]);
        path.max_boundary_gap =
            std::max(path.max_boundary_gap, std::fabs(Z[0] - std::min(path.X[ns], 0.0)));
        path.sample_times.push_back(ns * dt);
        path.Z.push_back(std::move(Z));
        path.Zp.push_back(std::move(Zp));
    }
    return path;
}

StationaryDiffusionLaws estimate_diffusion_stationary(const DiffusionConfig& cfg, double burn_in,
                                                      double spacing, int n_draws,
                                                      const std::vector<double>& z_at_r,
                                                      int threads) {
    if (burn_in >= cfg.horizon)
        throw std::invalid_argument("estimate_diffusion_stationary: horizon must exceed burn_in");
    DiffusionConfig base = cfg;
    base.sample_times.clear();
    base.compute_hh = false;
    base.compute_residuals = false;

    const Bundle service = build_bundle(base.service);
    DriverEngine engine(base, service);
    const int n = base.steps();
    const double dt = base.dt;
    const bool want_z = !z_at_r.empty();

    std::vector<int> draw_idx;
    for (double t = burn_in; t <= base.horizon + 1e-12; t += spacing) {
        const int k = std::min(n, static_cast<int>(std::llround(t / dt)));
        draw_idx.push_back(k);
    }
    const int per_rep = static_cast<int>(draw_idx.size());
    const std::size_t reps = (n_draws + per_rep - 1) / per_rep;

    InitialCurve z0(base.r_grid, base.init.z0, base.init.z0p, service);
    std::vector<std::vector<double>> results(reps);  // per rep: X draws, then Z(r) blocks
    parallel_for(reps, threads, [&](std::size_t rep) {
        Rng rng(seed_split(base.seed, rep));
        GaussianDrivers d = engine.simulate(rng, want_z);
        CmsInput in;
        in.x0 = base.init.x0;
        in.eta = d.E;
        in.zeta.resize(n + 1);
        for (int k = 0; k <= n; ++k) in.zeta[k] = z0.value(k * dt) - d.H1[k];
        CmsSolution cms = solve_cms(in, service, dt, false);
        auto& out = results[rep];
        out.reserve(per_rep * (1 + z_at_r.size()));
        for (int idx : draw_idx) out.push_back(cms.x[idx]);
        for (double r : z_at_r)
            for (int idx : draw_idx) {
                double z;
                assemble_z(d, cms.kappa, service, z0, idx, r, dt, z, nullptr);
                out.push_back(z);
            }
    });

    StationaryDiffusionLaws laws;
    laws.x.label = "X";
    laws.x.replications = static_cast<long long>(reps);
    laws.z_at.resize(z_at_r.size());
    for (std::size_t zi = 0; zi < z_at_r.size(); ++zi) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "Z@%g", z_at_r[zi]);
        laws.z_at[zi].label = buf;
        laws.z_at[zi].replications = static_cast<long long>(reps);
    }
    for (const auto& out : results)
        for (int j = 0; j < per_rep; ++j) {
            if (static_cast<int>(laws.x.sample.size()) >= n_draws) break;
            laws.x.sample.push_back(out[j]);
            for (std::size_t zi = 0; zi < z_at_r.size(); ++zi)
                laws.z_at[zi].sample.push_back(out[(1 + zi) * per_rep + j]);
        }
    laws.x.finalize();
    for (auto& l : laws.z_at) l.finalize();
    return laws;
}

}  // namespace hwlab
