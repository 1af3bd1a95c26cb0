#include "hwlab/distributions.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "hwlab/mathutil.hpp"
#include "json.hpp"

namespace hwlab {

std::string family_name(Family f) {
    switch (f) {
        case Family::Exponential: return "exponential";
        case Family::Lomax: return "lomax";
        case Family::LogNormal: return "lognormal";
        case Family::Gamma: return "gamma";
        case Family::PhaseType: return "phasetype";
        case Family::EmpiricalRenewal: return "empirical";
    }
    return "unknown";
}

Family family_from_name(const std::string& name) {
    std::string s;
    for (char c : name) s.push_back(static_cast<char>(std::tolower(c)));
    if (s == "exponential" || s == "exp") return Family::Exponential;
    if (s == "lomax" || s == "pareto") return Family::Lomax;
    if (s == "lognormal" || s == "log-normal") return Family::LogNormal;
    if (s == "gamma") return Family::Gamma;
    if (s == "phasetype" || s == "phase-type" || s == "ph") return Family::PhaseType;
    if (s == "empirical" || s == "empiricalrenewal") return Family::EmpiricalRenewal;
    throw std::invalid_argument("unknown distribution family: " + name);
}

double DistributionSpec::scalar(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end() || it->second.empty())
        throw std::invalid_argument(family_name(family) + ": missing parameter '" + key + "'");
    return it->second.front();
}

double DistributionSpec::scalar_or(const std::string& key, double fallback) const {
    auto it = params.find(key);
    if (it == params.end() || it->second.empty()) return fallback;
    return it->second.front();
}

const std::vector<double>& DistributionSpec::vec(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end())
        throw std::invalid_argument(family_name(family) + ": missing parameter '" + key + "'");
    return it->second;
}

namespace detail {

struct FamilyImpl {
    DistributionSpec spec;
    double mean = 1.0;
    double variance = 1.0;
    double sup_h = 0.0;
    double sup_h2 = 0.0;

    virtual ~FamilyImpl() = default;
    virtual double Gbar(double x) const = 0;
    virtual double g(double x) const = 0;
    virtual double gprime(double x) const = 0;
    virtual double gsecond(double x) const = 0;
    virtual double h(double x) const { return g(x) / Gbar(x); }
    virtual double h2(double x) const { return gprime(x) / Gbar(x); }
    virtual double zbar(double r) const = 0;
    virtual double sample(Rng& rng) const = 0;
    virtual bool has_density() const { return true; }

    virtual double quantile_survival(double u) const {
        if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("quantile_survival: u in (0,1)");
        double hi = mean;
        while (Gbar(hi) > u) hi *= 2.0;
        auto f = [&](double x) { return Gbar(x) - u; };
        auto df = [&](double x) { return -g(x); };
        return solve_bracketed(f, df, 0.0, hi, 0.5 * hi);
    }

    // inverse of x -> int_0^x Gbar / mean, bracketed Newton with bisection fallback
    virtual double sample_residual(Rng& rng) const {
        const double u = rng.uniform();
        const double target = (1.0 - u) * mean;  // solve zbar(x) = target
        double hi = mean;
        while (zbar(hi) > target) hi *= 2.0;
        auto f = [&](double x) { return zbar(x) - target; };
        auto df = [&](double x) { return -Gbar(x); };
        return solve_bracketed(f, df, 0.0, hi, 0.5 * hi);
    }

    virtual double sample_conditional_residual(double age, Rng& rng) const {
        const double u = rng.uniform();
        const double target = u * Gbar(age);
        double hi = age + mean;
        while (Gbar(hi) > target) hi = age + 2.0 * (hi - age);
        auto f = [&](double x) { return Gbar(x) - target; };
        auto df = [&](double x) { return -g(x); };
        return solve_bracketed(f, df, age, hi, age + 0.5 * (hi - age)) - age;
    }

    // finite sup over a dense log grid; exact overrides where a closed form exists
    void scan_sups() {
        const int n = 4096;
        double x_hi = mean;
        while (Gbar(x_hi) > 1e-14 && x_hi < 1e12) x_hi *= 2.0;
        double max_h = h(0.0), max_h2 = std::fabs(h2(0.0));
        const double lo = std::log(1e-9), hi = std::log(x_hi);
        for (int i = 0; i <= n; ++i) {
            const double x = std::exp(lo + (hi - lo) * i / n);
            max_h = std::max(max_h, h(x));
            max_h2 = std::max(max_h2, std::fabs(h2(x)));
        }
        sup_h = max_h;
        sup_h2 = max_h2;
    }
};

namespace {

struct ExponentialImpl final : FamilyImpl {
    double rate;
    explicit ExponentialImpl(double r) : rate(r) {}
    double Gbar(double x) const override { return std::exp(-rate * x); }
    double g(double x) const override { return rate * std::exp(-rate * x); }
    double gprime(double x) const override { return -rate * rate * std::exp(-rate * x); }
    double gsecond(double x) const override { return rate * rate * rate * std::exp(-rate * x); }
    double h(double) const override { return rate; }
    double h2(double) const override { return -rate * rate; }
    double zbar(double r) const override { return mean * std::exp(-rate * r); }
    double sample(Rng& rng) const override { return -std::log(rng.uniform()) / rate; }
    double quantile_survival(double u) const override { return -std::log(u) / rate; }
    double sample_residual(Rng& rng) const override { return sample(rng); }
    double sample_conditional_residual(double, Rng& rng) const override { return sample(rng); }
};

struct LomaxImpl final : FamilyImpl {
    double alpha, lambda;
    LomaxImpl(double a, double l) : alpha(a), lambda(l) {}
    double base(double x) const { return 1.0 + x / lambda; }
    double Gbar(double x) const override { return std::pow(base(x), -alpha); }
    double g(double x) const override { return (alpha / lambda) * std::pow(base(x), -alpha - 1.0); }
    double gprime(double x) const override {
        return -(alpha * (alpha + 1.0) / (lambda * lambda)) * std::pow(base(x), -alpha - 2.0);
    }
    double gsecond(double x) const override {
        return (alpha * (alpha + 1.0) * (alpha + 2.0) / (lambda * lambda * lambda)) *
               std::pow(base(x), -alpha - 3.0);
    }
    double h(double x) const override { return (alpha / lambda) / base(x); }
    double h2(double x) const override {
        const double b = base(x);
        return -(alpha * (alpha + 1.0) / (lambda * lambda)) / (b * b);
    }
    double zbar(double r) const override { return mean * std::pow(base(r), 1.0 - alpha); }
    double quantile_survival(double u) const override {
        return lambda * (std::pow(u, -1.0 / alpha) - 1.0);
    }
    double sample(Rng& rng) const override { return quantile_survival(rng.uniform()); }
    double sample_residual(Rng& rng) const override {
        // residual survival is Lomax with shape alpha-1
        return lambda * (std::pow(rng.uniform(), -1.0 / (alpha - 1.0)) - 1.0);
    }
    double sample_conditional_residual(double age, Rng& rng) const override {
        return (lambda + age) * (std::pow(rng.uniform(), -1.0 / alpha) - 1.0);
    }
};

struct LogNormalImpl final : FamilyImpl {
    double mu, sigma;
    LogNormalImpl(double m, double s) : mu(m), sigma(s) {}
    double z(double x) const { return (std::log(x) - mu) / sigma; }
    double Gbar(double x) const override { return x <= 0.0 ? 1.0 : norm_sf(z(x)); }
    double g(double x) const override { return x <= 0.0 ? 0.0 : norm_pdf(z(x)) / (x * sigma); }
    double gprime(double x) const override {
        if (x <= 0.0) return 0.0;
        const double zz = z(x);
        return -norm_pdf(zz) * (zz + sigma) / (x * x * sigma * sigma);
    }
    double gsecond(double x) const override {
        if (x <= 0.0) return 0.0;
        const double zz = z(x);
        return norm_pdf(zz) * (zz * zz + 3.0 * sigma * zz + 2.0 * sigma * sigma - 1.0) /
               (x * x * x * sigma * sigma * sigma);
    }
    double h(double x) const override {
        if (x <= 0.0) return 0.0;
        const double zz = z(x);
        if (zz <= 0.0) return g(x) / Gbar(x);
        // scaled complementary error function: Gbar and g underflow together
        return 0.7978845608028653559 / (x * sigma * erfcx(zz * 0.7071067811865475244));
    }
    double h2(double x) const override {
        if (x <= 0.0) return 0.0;
        const double zz = z(x);
        return -h(x) * (zz + sigma) / (x * sigma);
    }
    double zbar(double r) const override {
        if (r <= 0.0) return mean;
        const double zz = z(r);
        return mean * norm_cdf(sigma - zz) - r * norm_sf(zz);
    }
    double quantile_survival(double u) const override {
        return std::exp(mu - sigma * norm_inv(u));
    }
    double sample(Rng& rng) const override { return std::exp(mu + sigma * rng.normal()); }
};

struct GammaImpl final : FamilyImpl {
    double alpha, beta;
    GammaImpl(double a, double b) : alpha(a), beta(b) {}
    double Gbar(double x) const override { return x <= 0.0 ? 1.0 : gamma_q(alpha, beta * x); }
    double g(double x) const override {
        if (x <= 0.0) return alpha == 1.0 ? beta : 0.0;
        return beta * std::exp((alpha - 1.0) * std::log(beta * x) - beta * x - std::lgamma(alpha));
    }
    double gprime(double x) const override {
        if (x <= 0.0) return 0.0;
        return g(x) * ((alpha - 1.0) / x - beta);
    }
    double gsecond(double x) const override {
        if (x <= 0.0) return 0.0;
        const double u = (alpha - 1.0) / x - beta;
        return g(x) * (u * u - (alpha - 1.0) / (x * x));
    }
    double h(double x) const override {
        if (x <= 0.0) return alpha == 1.0 ? beta : 0.0;
        const double t = beta * x;
        if (t < alpha + 1.0) return g(x) / Gbar(x);
        return beta / (t * gamma_q_scaled(alpha, t));
    }
    double h2(double x) const override {
        if (x <= 0.0) return 0.0;
        return ((alpha - 1.0) / x - beta) * h(x);
    }
    double zbar(double r) const override {
        if (r <= 0.0) return mean;
        return mean * gamma_q(alpha + 1.0, beta * r) - r * gamma_q(alpha, beta * r);
    }
    double sample(Rng& rng) const override { return rng.gamma(alpha) / beta; }
};

struct PhaseTypeImpl final : FamilyImpl {
    int m = 0;
    std::vector<double> alpha_vec;               // initial distribution
    std::vector<double> S;                       // subgenerator, row-major
    std::vector<double> v_g, v_gp, v_gpp, v_zb;  // -S*1, -S^2*1, -S^3*1, -S^{-1}*1
    std::vector<double> residual_alpha;          // -alpha S^{-1} / mean
    std::vector<double> exit_rate;               // -S_ii
    double step = 0.0;
    std::vector<double> table;  // rows p(k*step) = alpha * expm(k*step*S)
    int table_rows = 0;

    double row_dot(const double* p, const std::vector<double>& v) const {
        double s = 0.0;
        for (int i = 0; i < m; ++i) s += p[i] * v[i];
        return s;
    }

    // p(x) = alpha * expm(x S): nearest table row, then 8-term Taylor correction
    void p_at(double x, double* out) const {
        if (x < 0.0) x = 0.0;
        int k = static_cast<int>(x / step);
        double delta = x - k * step;
        std::vector<double> row(m);
        if (k >= table_rows) {  // far tail: walk out from the last row
            std::copy(table.end() - m, table.end(), row.begin());
            double rem = x - (table_rows - 1) * step;
            while (rem > step) {
                advance(row.data(), step);
                rem -= step;
            }
            delta = rem;
        } else {
            std::copy(table.begin() + k * m, table.begin() + (k + 1) * m, row.begin());
        }
        std::copy(row.begin(), row.end(), out);
        advance(out, delta);
    }

    void advance(double* row, double delta) const {  // row <- row * expm(delta S), Taylor-8
        if (delta == 0.0) return;
        std::vector<double> term(row, row + m), next(m);
        for (int j = 1; j <= 8; ++j) {
            const double c = delta / j;
            for (int col = 0; col < m; ++col) {
                double s = 0.0;
                for (int i = 0; i < m; ++i) s += term[i] * S[i * m + col];
                next[col] = s * c;
            }
            term = next;
            for (int i = 0; i < m; ++i) row[i] += term[i];
        }
    }

    double Gbar(double x) const override {
        std::vector<double> p(m);
        p_at(x, p.data());
        double s = 0.0;
        for (double v : p) s += v;
        return std::max(s, 0.0);
    }
    double g(double x) const override {
        std::vector<double> p(m);
        p_at(x, p.data());
        return row_dot(p.data(), v_g);
    }
    double gprime(double x) const override {
        std::vector<double> p(m);
        p_at(x, p.data());
        return row_dot(p.data(), v_gp);
    }
    double gsecond(double x) const override {
        std::vector<double> p(m);
        p_at(x, p.data());
        return row_dot(p.data(), v_gpp);
    }
    double zbar(double r) const override {
        if (r <= 0.0) return mean;
        std::vector<double> p(m);
        p_at(r, p.data());
        return row_dot(p.data(), v_zb);
    }

    int sample_phase(const double* weights, double total, Rng& rng) const {
        double u = rng.uniform() * total;
        for (int i = 0; i < m - 1; ++i) {
            u -= weights[i];
            if (u <= 0.0) return i;
        }
        return m - 1;
    }

    double absorb_from(int phase, Rng& rng) const {  // Markov-jump absorption
        double t = 0.0;
        for (;;) {
            const double rate = exit_rate[phase];
            t += rng.exponential(rate);
            double u = rng.uniform() * rate;
            int next = -1;
            for (int j = 0; j < m; ++j) {
                if (j == phase) continue;
                u -= S[phase * m + j];
                if (u <= 0.0) {
                    next = j;
                    break;
                }
            }
            if (next < 0) return t;  // absorbed
            phase = next;
        }
    }

    double sample(Rng& rng) const override {
        return absorb_from(sample_phase(alpha_vec.data(), 1.0, rng), rng);
    }
    double sample_residual(Rng& rng) const override {
        return absorb_from(sample_phase(residual_alpha.data(), 1.0, rng), rng);
    }
    double sample_conditional_residual(double age, Rng& rng) const override {
        std::vector<double> p(m);
        p_at(age, p.data());
        double total = 0.0;
        for (double v : p) total += v;
        return absorb_from(sample_phase(p.data(), total, rng), rng);
    }
};

struct EmpiricalImpl final : FamilyImpl {
    std::vector<double> sorted;
    std::vector<double> suffix;  // suffix[i] = sum of sorted[i..n-1]

    bool has_density() const override { return false; }
    [[noreturn]] static void no_density() {
        throw std::domain_error("empirical renewal law has no density");
    }
    double g(double) const override { no_density(); }
    double gprime(double) const override { no_density(); }
    double gsecond(double) const override { no_density(); }
    double h(double) const override { no_density(); }
    double h2(double) const override { no_density(); }

    double Gbar(double x) const override {
        const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
        return static_cast<double>(sorted.end() - it) / static_cast<double>(sorted.size());
    }
    double zbar(double r) const override {  // (1/n) sum (x_i - r)^+
        if (r <= 0.0) return mean;
        const auto it = std::upper_bound(sorted.begin(), sorted.end(), r);
        const std::size_t i = static_cast<std::size_t>(it - sorted.begin());
        const std::size_t n = sorted.size();
        if (i >= n) return 0.0;
        return (suffix[i] - r * static_cast<double>(n - i)) / static_cast<double>(n);
    }
    double sample(Rng& rng) const override {
        return sorted[rng.below(sorted.size())];
    }
    double quantile_survival(double u) const override {
        const std::size_t n = sorted.size();
        const std::size_t k = std::min<std::size_t>(
            n - 1, static_cast<std::size_t>((1.0 - u) * static_cast<double>(n)));
        return sorted[k];
    }
    // int_0^x Gbar is piecewise linear with knots at the sample points
    double sample_residual(Rng& rng) const override {
        const double target = rng.uniform() * mean;  // solve int_0^x Gbar = target
        const std::size_t n = sorted.size();
        double acc = 0.0, prev = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double gb = static_cast<double>(n - i) / static_cast<double>(n);
            const double seg = gb * (sorted[i] - prev);
            if (acc + seg >= target) return prev + (target - acc) / gb;
            acc += seg;
            prev = sorted[i];
        }
        return sorted.back();
    }
};

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace
}  // namespace detail

Bundle build_bundle(const DistributionSpec& spec) {
    using namespace detail;
    std::shared_ptr<FamilyImpl> impl;
    const bool enforce = spec.scalar_or("enforce", 0.0) != 0.0;

    switch (spec.family) {
        case Family::Exponential: {
            double rate = spec.scalar_or("rate", 1.0);
            require(rate > 0.0, "exponential: rate must be positive");
            if (spec.normalize_mean) rate = 1.0;
            auto e = std::make_shared<ExponentialImpl>(rate);
            e->mean = spec.normalize_mean ? 1.0 : 1.0 / rate;
            e->variance = 1.0 / (rate * rate);
            e->sup_h = rate;
            e->sup_h2 = rate * rate;
            impl = e;
            break;
        }
        case Family::Lomax: {
            const double alpha = spec.scalar("alpha");
            require(alpha > 1.0, "lomax: shape alpha must exceed 1 for a finite mean");
            if (enforce)
                require(alpha > 3.0, "lomax: shape alpha must exceed 3 (finite (3+eps) moment)");
            double lambda = spec.normalize_mean ? alpha - 1.0 : spec.scalar("lambda");
            require(lambda > 0.0, "lomax: scale lambda must be positive");
            auto l = std::make_shared<LomaxImpl>(alpha, lambda);
            l->mean = spec.normalize_mean ? 1.0 : lambda / (alpha - 1.0);
            l->variance = alpha > 2.0 ? lambda * lambda * alpha / ((alpha - 1.0) * (alpha - 1.0) * (alpha - 2.0))
                                      : std::numeric_limits<double>::infinity();
            l->sup_h = alpha / lambda;
            l->sup_h2 = alpha * (alpha + 1.0) / (lambda * lambda);
            impl = l;
            break;
        }
        case Family::LogNormal: {
            const double sigma = spec.scalar("sigma");
            require(sigma > 0.0, "lognormal: scale sigma must be positive");
            const double mu = spec.normalize_mean ? -0.5 * sigma * sigma : spec.scalar_or("mu", 0.0);
            auto l = std::make_shared<LogNormalImpl>(mu, sigma);
            l->mean = spec.normalize_mean ? 1.0 : std::exp(mu + 0.5 * sigma * sigma);
            l->variance = (std::exp(sigma * sigma) - 1.0) * std::exp(2.0 * mu + sigma * sigma);
            l->scan_sups();
            impl = l;
            break;
        }
        case Family::Gamma: {
            const double alpha = spec.scalar("alpha");
            require(alpha > 0.0, "gamma: shape alpha must be positive");
            if (enforce) require(alpha >= 3.0, "gamma: shape alpha must be at least 3 (bounded g'')");
            const double beta = spec.normalize_mean ? alpha : spec.scalar_or("rate", alpha);
            require(beta > 0.0, "gamma: rate must be positive");
            auto gm = std::make_shared<GammaImpl>(alpha, beta);
            gm->mean = spec.normalize_mean ? 1.0 : alpha / beta;
            gm->variance = alpha / (beta * beta);
            if (alpha >= 1.0) {
                gm->sup_h = beta;  // hazard increases to beta
                gm->scan_sups();
                gm->sup_h = beta;
            } else {
                gm->scan_sups();
            }
            impl = gm;
            break;
        }
        case Family::PhaseType: {
            const int m = static_cast<int>(spec.scalar("phases"));
            require(m >= 1 && m <= 16, "phasetype: 1..16 phases supported");
            auto pt = std::make_shared<PhaseTypeImpl>();
            pt->m = m;
            pt->alpha_vec = spec.vec("alpha");
            std::vector<double> S = spec.vec("S");
            require(static_cast<int>(pt->alpha_vec.size()) == m,
                    "phasetype: alpha must have one entry per phase");
            require(static_cast<int>(S.size()) == m * m, "phasetype: S must be phases x phases");
            double asum = 0.0;
            for (double a : pt->alpha_vec) {
                require(a >= 0.0, "phasetype: alpha entries must be nonnegative");
                asum += a;
            }
            require(std::fabs(asum - 1.0) < 1e-9, "phasetype: alpha must sum to 1");
            for (double& a : pt->alpha_vec) a /= asum;
            for (int i = 0; i < m; ++i) {
                require(S[i * m + i] < 0.0, "phasetype: diagonal of S must be negative");
                double row = 0.0;
                for (int j = 0; j < m; ++j) {
                    if (j != i) require(S[i * m + j] >= 0.0, "phasetype: off-diagonal of S must be nonnegative");
                    row += S[i * m + j];
                }
                require(row <= 1e-12, "phasetype: row sums of S must be nonpositive");
            }

            Eigen::MatrixXd Sm(m, m);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) Sm(i, j) = S[i * m + j];
            const auto eig = Sm.eigenvalues();
            for (int i = 0; i < m; ++i)
                require(eig(i).real() < 0.0, "phasetype: S must have eigenvalues with negative real part");

            Eigen::VectorXd ones = Eigen::VectorXd::Ones(m);
            Eigen::Map<Eigen::VectorXd> av(pt->alpha_vec.data(), m);
            double mean0 = -(av.transpose() * Sm.inverse() * ones)(0);
            require(mean0 > 0.0, "phasetype: nonpositive mean");
            if (spec.normalize_mean) {
                Sm *= mean0;  // time rescale to unit mean
                mean0 = 1.0;
            }
            pt->S.resize(m * m);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) pt->S[i * m + j] = Sm(i, j);
            pt->mean = spec.normalize_mean ? 1.0 : mean0;
            const Eigen::MatrixXd Sinv = Sm.inverse();
            pt->variance = 2.0 * (av.transpose() * Sinv * Sinv * ones)(0) - pt->mean * pt->mean;

            Eigen::VectorXd vg = -Sm * ones, vgp = -Sm * Sm * ones, vgpp = -Sm * Sm * Sm * ones,
                            vzb = -Sinv * ones;
            pt->v_g.assign(vg.data(), vg.data() + m);
            pt->v_gp.assign(vgp.data(), vgp.data() + m);
            pt->v_gpp.assign(vgpp.data(), vgpp.data() + m);
            pt->v_zb.assign(vzb.data(), vzb.data() + m);
            Eigen::VectorXd ra = -(Sinv.transpose() * av) / pt->mean;
            pt->residual_alpha.assign(ra.data(), ra.data() + m);
            pt->exit_rate.resize(m);
            for (int i = 0; i < m; ++i) pt->exit_rate[i] = -Sm(i, i);

            // one-step transition table: exact at multiples of `step`
            double smax = 0.0;
            for (int i = 0; i < m; ++i) smax = std::max(smax, -Sm(i, i));
            pt->step = std::min(0.0625, 0.25 / smax);
            Eigen::MatrixXd E = (pt->step * Sm).exp();
            Eigen::RowVectorXd row = av.transpose();
            pt->table.reserve(16384 * m);
            for (int k = 0; k < 1200000; ++k) {
                for (int j = 0; j < m; ++j) pt->table.push_back(row(j));
                if (row.sum() < 1e-60 && k > 8) break;
                row = row * E;
            }
            pt->table_rows = static_cast<int>(pt->table.size()) / m;
            pt->scan_sups();
            impl = pt;
            break;
        }
        case Family::EmpiricalRenewal: {
            auto em = std::make_shared<EmpiricalImpl>();
            em->sorted = spec.vec("sample");
            require(em->sorted.size() >= 2, "empirical: sample needs at least 2 points");
            std::sort(em->sorted.begin(), em->sorted.end());
            require(em->sorted.front() >= 0.0, "empirical: sample values must be nonnegative");
            double s = std::accumulate(em->sorted.begin(), em->sorted.end(), 0.0);
            if (spec.normalize_mean) {
                const double m0 = s / static_cast<double>(em->sorted.size());
                require(m0 > 0.0, "empirical: cannot normalize zero-mean sample");
                for (double& x : em->sorted) x /= m0;
                s = static_cast<double>(em->sorted.size());
            }
            em->mean = s / static_cast<double>(em->sorted.size());
            double v = 0.0;
            for (double x : em->sorted) v += (x - em->mean) * (x - em->mean);
            em->variance = v / static_cast<double>(em->sorted.size());
            em->suffix.assign(em->sorted.size() + 1, 0.0);
            for (std::size_t i = em->sorted.size(); i-- > 0;)
                em->suffix[i] = em->suffix[i + 1] + em->sorted[i];
            impl = em;
            break;
        }
    }
    impl->spec = spec;
    if (spec.normalize_mean)
        require(std::fabs(impl->mean - 1.0) <= 1e-10, "normalization failed to reach unit mean");

    Bundle b;
    b.impl_ = impl;
    return b;
}

double Bundle::Gbar(double x) const { return impl_->Gbar(x); }
double Bundle::g(double x) const { return impl_->g(x); }
double Bundle::gprime(double x) const { return impl_->gprime(x); }
double Bundle::gsecond(double x) const { return impl_->gsecond(x); }
double Bundle::h(double x) const { return impl_->h(x); }
double Bundle::h2(double x) const { return impl_->h2(x); }
double Bundle::mean() const { return impl_->mean; }
double Bundle::variance() const { return impl_->variance; }
double Bundle::sup_h() const { return impl_->sup_h; }
double Bundle::sup_h2() const { return impl_->sup_h2; }
double Bundle::zbar(double r) const { return r <= 0.0 ? impl_->mean : impl_->zbar(r); }
double Bundle::sample(Rng& rng) const { return impl_->sample(rng); }
double Bundle::sample_residual(Rng& rng) const { return impl_->sample_residual(rng); }
double Bundle::sample_conditional_residual(double age, Rng& rng) const {
    return impl_->sample_conditional_residual(age, rng);
}
double Bundle::quantile_survival(double u) const { return impl_->quantile_survival(u); }
bool Bundle::has_density() const { return impl_->has_density(); }
const DistributionSpec& Bundle::spec() const { return impl_->spec; }

std::vector<double> default_assumption_grid(double x_max, int n, double x_lo) {
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(n) + 1);
    grid.push_back(0.0);
    const double lo = std::log(x_lo), hi = std::log(x_max);
    for (int i = 0; i <= n; ++i) grid.push_back(std::exp(lo + (hi - lo) * i / n));
    return grid;
}

bool AssumptionReport::all_pass() const {
    for (const auto& c : clauses)
        if (!c.pass) return false;
    return true;
}

const ClauseResult* AssumptionReport::clause(const std::string& name) const {
    for (const auto& c : clauses)
        if (c.name == name) return &c;
    return nullptr;
}

std::string AssumptionReport::to_json() const {
    nlohmann::json j;
    j["family"] = family;
    j["grid"] = {{"size", grid_size}, {"min", grid_min}, {"max", grid_max}};
    j["sup_h"] = sup_h;
    j["sup_h2"] = sup_h2;
    j["sup_gpp"] = sup_gpp;
    j["gbar_tail_exponent"] = gbar_tail_exponent;
    j["gpp_tail_exponent"] = gpp_tail_exponent;
    j["tolerances"] = {{"consistency", tolerances.consistency},
                       {"mean_quadrature", tolerances.mean_quadrature},
                       {"unit_mean", tolerances.unit_mean},
                       {"sup_cap", tolerances.sup_cap},
                       {"tail_margin", tolerances.tail_margin}};
    j["all_pass"] = all_pass();
    auto& arr = j["clauses"] = nlohmann::json::array();
    for (const auto& c : clauses)
        arr.push_back({{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"threshold", c.threshold}});
    return j.dump(2);
}

namespace {

// least-squares slope of log|f| against log x over the last decade of the grid;
// returns +inf when f has already decayed below floating-point range there
double tail_exponent(const std::vector<double>& grid, const std::function<double(double)>& f) {
    double x_end = grid.back();
    // back off to the last node where |f| is representable
    std::size_t iend = grid.size();
    while (iend > 1 && std::fabs(f(grid[iend - 1])) < 1e-290) --iend;
    if (iend < grid.size() / 2) return std::numeric_limits<double>::infinity();
    x_end = grid[iend - 1];
    const double x_begin = x_end / 10.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = 0; i < iend; ++i) {
        const double x = grid[i];
        if (x < x_begin || x <= 0.0) continue;
        const double v = std::fabs(f(x));
        if (v <= 0.0) continue;
        const double lx = std::log(x), ly = std::log(v);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 3) return std::numeric_limits<double>::infinity();
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return -slope;
}

}  // namespace

AssumptionReport verify_assumptions(const Bundle& bundle, const std::vector<double>& grid,
                                    const AssumptionTolerances& tol) {
    if (grid.size() < 16 || grid.back() < 50.0 * bundle.mean())
        throw std::invalid_argument("verify_assumptions: grid must span at least 50 mean-units");
    AssumptionReport rep;
    rep.family = family_name(bundle.spec().family);
    rep.grid_size = grid.size();
    rep.grid_min = grid.front();
    rep.grid_max = grid.back();
    rep.tolerances = tol;

    auto add = [&](const std::string& name, bool pass, double value, double threshold) {
        rep.clauses.push_back({name, pass, value, threshold});
    };

    if (!bundle.has_density()) {
        add("a2a_density", false, 0.0, 0.0);
        rep.gbar_tail_exponent = tail_exponent(grid, [&](double x) { return bundle.Gbar(x); });
        add("a3a_moment", rep.gbar_tail_exponent > 2.0 + tol.tail_margin, rep.gbar_tail_exponent,
            2.0 + tol.tail_margin);
        return rep;
    }

    // A2.a: unit mean (when requested) and quadrature moment identity
    const double quad_mean =
        integrate_gk([&](double x) { return bundle.Gbar(x); }, 0.0, grid.back(), 1e-12) +
        bundle.zbar(grid.back());
    add("a2a_mean_consistent", std::fabs(quad_mean - bundle.mean()) <= tol.mean_quadrature,
        std::fabs(quad_mean - bundle.mean()), tol.mean_quadrature);
    if (bundle.spec().normalize_mean)
        add("a2a_unit_mean", std::fabs(bundle.mean() - 1.0) <= tol.unit_mean,
            std::fabs(bundle.mean() - 1.0), tol.unit_mean);

    // A2.b: h bounded, h' bounded (h' = h2 + h^2), pointwise evaluator consistency
    double sup_h = 0.0, sup_h2 = 0.0, sup_hp = 0.0, sup_gpp = 0.0;
    double worst_h_cons = 0.0, worst_h2_cons = 0.0;
    double prev_gbar = 1.0 + 1e-15;
    bool monotone = true;
    for (double x : grid) {
        const double gb = bundle.Gbar(x), gg = bundle.g(x), gp = bundle.gprime(x);
        const double hh = bundle.h(x), hh2 = bundle.h2(x);
        sup_h = std::max(sup_h, hh);
        sup_h2 = std::max(sup_h2, std::fabs(hh2));
        sup_hp = std::max(sup_hp, std::fabs(hh2 + hh * hh));
        sup_gpp = std::max(sup_gpp, std::fabs(bundle.gsecond(x)));
        worst_h_cons = std::max(worst_h_cons, std::fabs(hh * gb - gg) / std::max(1.0, gg));
        worst_h2_cons = std::max(worst_h2_cons, std::fabs(hh2 * gb - gp) / std::max(1.0, std::fabs(gp)));
        if (gb > prev_gbar * (1.0 + 1e-11) + 1e-14) monotone = false;  // roundoff slack
        prev_gbar = gb;
    }
    rep.sup_h = sup_h;
    rep.sup_h2 = sup_h2;
    rep.sup_gpp = sup_gpp;
    add("a2b_h_bounded", sup_h <= tol.sup_cap, sup_h, tol.sup_cap);
    add("a2b_hprime_bounded", sup_hp <= tol.sup_cap, sup_hp, tol.sup_cap);
    add("h_consistency", worst_h_cons <= tol.consistency, worst_h_cons, tol.consistency);
    add("h2_consistency", worst_h2_cons <= tol.consistency, worst_h2_cons, tol.consistency);
    add("gbar_monotone", monotone && std::fabs(bundle.Gbar(0.0) - 1.0) <= 1e-12,
        std::fabs(bundle.Gbar(0.0) - 1.0), 1e-12);

    // A3.a: finite (3+eps) moment, read off the fitted tail decay of Gbar
    rep.gbar_tail_exponent = tail_exponent(grid, [&](double x) { return bundle.Gbar(x); });
    add("a3a_moment", rep.gbar_tail_exponent > 3.0 + tol.tail_margin, rep.gbar_tail_exponent,
        3.0 + tol.tail_margin);

    // A3.b: g'' bounded with decay O(x^{-(2+eps)})
    rep.gpp_tail_exponent = tail_exponent(grid, [&](double x) { return bundle.gsecond(x); });
    add("a3b_gpp_bounded", sup_gpp <= tol.sup_cap, sup_gpp, tol.sup_cap);
    add("a3b_gpp_decay", rep.gpp_tail_exponent > 2.0 + tol.tail_margin, rep.gpp_tail_exponent,
        2.0 + tol.tail_margin);
    return rep;
}

}  // namespace hwlab
