#include "hwlab/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>
#include <stdexcept>

#include "hwlab/parallel.hpp"
#include "json.hpp"

namespace hwlab {

std::string Functional::label() const {
    switch (kind) {
        case X: return "X";
        case Xhat: return "Xhat";
        case XhatPlus: return "XhatPlus";
        case ZhatAtR: {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "Zhat@%g", r);
            return buf;
        }
        case ZhatH1: return "ZhatH1";
    }
    return "?";
}

double Functional::eval(const SamplePoint& sp, const RGrid& grid) const {
    switch (kind) {
        case X: return static_cast<double>(sp.X);
        case Xhat: return sp.xhat;
        case XhatPlus: return std::max(sp.xhat, 0.0);
        case ZhatAtR: {
            // nearest grid node
            const auto it = std::lower_bound(grid.nodes.begin(), grid.nodes.end(), r);
            std::size_t k = static_cast<std::size_t>(it - grid.nodes.begin());
            if (k == grid.nodes.size()) k -= 1;
            if (k > 0 && grid.nodes[k] - r > r - grid.nodes[k - 1]) k -= 1;
            return sp.zhat.at(k);
        }
        case ZhatH1: return h1_norm(sp.zhat, sp.zhat_p, grid);
    }
    return 0.0;
}

StationaryEstimate estimate_queue_stationary(const SimConfig& base,
                                             const std::vector<Functional>& functionals,
                                             const StationaryOptions& opts) {
    if (functionals.empty()) throw std::invalid_argument("no functionals requested");
    bool needs_z = false;
    for (const auto& f : functionals) needs_z = needs_z || f.needs_z();

    StationaryEstimate est;
    est.laws.resize(functionals.size());
    for (std::size_t i = 0; i < functionals.size(); ++i) est.laws[i].label = functionals[i].label();

    if (opts.mode == SamplingMode::Replications) {
        const Bundle service = build_bundle(base.service);
        const Bundle arrival = build_bundle(base.arrival_base);
        std::vector<std::vector<double>> rows(opts.n_draws);
        parallel_for(static_cast<std::size_t>(opts.n_draws), opts.threads, [&](std::size_t i) {
            SimConfig cfg = base;
            cfg.seed = seed_split(base.seed, i);
            cfg.horizon = opts.burn_in;
            cfg.sample_times = {opts.burn_in};
            cfg.compute_z = needs_z;
            cfg.record_event_log = false;
            cfg.check_invariants = false;
            QueuePath p = run(cfg, service, arrival);
            auto& row = rows[i];
            row.resize(functionals.size());
            for (std::size_t f = 0; f < functionals.size(); ++f)
                row[f] = functionals[f].eval(p.samples.at(0), cfg.r_grid);
        });
        for (std::size_t f = 0; f < functionals.size(); ++f) {
            est.laws[f].replications = opts.n_draws;
            est.laws[f].sample.reserve(rows.size());
            for (const auto& row : rows) est.laws[f].sample.push_back(row[f]);
            est.laws[f].finalize();
        }
        return est;
    }

    // long path: one run, draws spaced along it; lag-1 autocorrelation reported
    SimConfig cfg = base;
    cfg.compute_z = needs_z;
    cfg.record_event_log = false;
    cfg.check_invariants = false;
    cfg.sample_times.clear();
    for (int k = 0; k < opts.n_draws; ++k)
        cfg.sample_times.push_back(opts.burn_in + k * opts.spacing);
    cfg.horizon = cfg.sample_times.back();
    QueuePath p = run(cfg);
    if (p.samples.size() != static_cast<std::size_t>(opts.n_draws))
        throw std::logic_error("long-path sampling lost draws");
    std::vector<double> first;
    for (std::size_t f = 0; f < functionals.size(); ++f) {
        est.laws[f].replications = 1;
        for (const auto& sp : p.samples) est.laws[f].sample.push_back(functionals[f].eval(sp, cfg.r_grid));
        if (f == 0) first = est.laws[f].sample;
        est.laws[f].finalize();
    }
    if (first.size() > 2) {
        double m = 0.0;
        for (double v : first) m += v;
        m /= static_cast<double>(first.size());
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < first.size(); ++i) {
            den += (first[i] - m) * (first[i] - m);
            if (i + 1 < first.size()) num += (first[i] - m) * (first[i + 1] - m);
        }
        est.lag1_autocorr = den > 0.0 ? num / den : 0.0;
    }
    return est;
}

std::vector<double> erlang_oracle(int N, double lambda, double tail_cut) {
    if (N < 1 || lambda <= 0.0) throw std::invalid_argument("erlang_oracle: bad arguments");
    if (lambda >= N)
        throw std::invalid_argument("erlang_oracle: lambda must be below N for stability");
    std::vector<double> logp;
    logp.push_back(0.0);
    double cur = 0.0, maxlog = 0.0;
    const double log_tail = std::log(tail_cut) - 60.0;
    for (int k = 1; k < 100000000; ++k) {
        cur += std::log(lambda / std::min(k, N));
        logp.push_back(cur);
        maxlog = std::max(maxlog, cur);
        if (k > N && cur - maxlog < log_tail) break;
    }
    double sum = 0.0;
    for (double lp : logp) sum += std::exp(lp - maxlog);
    const double log_norm = maxlog + std::log(sum);
    std::vector<double> p(logp.size());
    for (std::size_t k = 0; k < logp.size(); ++k) p[k] = std::exp(logp[k] - log_norm);
    return p;
}

namespace {

// merge-walk over the two sorted samples: sup gap and integrated gap of the ECDFs
void ecdf_distances(const std::vector<double>& a, const std::vector<double>& b, double& ks,
                    double& w1) {
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double fa = 0.0, fb = 0.0, prev = 0.0;
    bool started = false;
    ks = 0.0;
    w1 = 0.0;
    while (i < a.size() || j < b.size()) {
        double x;
        if (j >= b.size() || (i < a.size() && a[i] <= b[j]))
            x = a[i];
        else
            x = b[j];
        if (started) w1 += std::fabs(fa - fb) * (x - prev);
        while (i < a.size() && a[i] == x) {
            fa = static_cast<double>(i + 1) / na;
            ++i;
        }
        while (j < b.size() && b[j] == x) {
            fb = static_cast<double>(j + 1) / nb;
            ++j;
        }
        ks = std::max(ks, std::fabs(fa - fb));
        prev = x;
        started = true;
    }
}

}  // namespace

double ks_distance(const EmpiricalLaw& a, const EmpiricalLaw& b) {
    double ks, w1;
    ecdf_distances(a.sample, b.sample, ks, w1);
    return ks;
}

double w1_distance(const EmpiricalLaw& a, const EmpiricalLaw& b) {
    double ks, w1;
    ecdf_distances(a.sample, b.sample, ks, w1);
    return w1;
}

ComparisonReport compare(const EmpiricalLaw& a, const EmpiricalLaw& b, int bootstrap_resamples,
                         std::uint64_t seed) {
    if (a.label != b.label && !a.label.empty() && !b.label.empty() && a.label != "*" &&
        b.label != "*")
        throw std::invalid_argument("compare: functional labels differ: " + a.label + " vs " +
                                    b.label);
    if (a.sample.empty() || b.sample.empty()) throw std::invalid_argument("compare: empty sample");
    ComparisonReport rep;
    rep.label = a.label;
    rep.n_a = a.sample.size();
    rep.n_b = b.sample.size();
    ecdf_distances(a.sample, b.sample, rep.ks, rep.w1);
    rep.mean_delta = b.mean() - a.mean();
    rep.var_delta = b.variance() - a.variance();
    rep.bootstrap_resamples = bootstrap_resamples;
    if (bootstrap_resamples > 0) {
        Rng rng(seed);
        std::vector<double> ks_bs(bootstrap_resamples), w1_bs(bootstrap_resamples);
        std::vector<double> ra(a.sample.size()), rb(b.sample.size());
        for (int t = 0; t < bootstrap_resamples; ++t) {
            for (auto& v : ra) v = a.sample[rng.below(a.sample.size())];
            for (auto& v : rb) v = b.sample[rng.below(b.sample.size())];
            std::sort(ra.begin(), ra.end());
            std::sort(rb.begin(), rb.end());
            ecdf_distances(ra, rb, ks_bs[t], w1_bs[t]);
        }
        auto moments = [](std::vector<double>& v, double& se, double& lo, double& hi) {
            double m = 0.0;
            for (double x : v) m += x;
            m /= static_cast<double>(v.size());
            double s2 = 0.0;
            for (double x : v) s2 += (x - m) * (x - m);
            se = std::sqrt(s2 / static_cast<double>(v.size() - 1));
            std::sort(v.begin(), v.end());
            lo = v[static_cast<std::size_t>(0.025 * static_cast<double>(v.size() - 1))];
            hi = v[static_cast<std::size_t>(0.975 * static_cast<double>(v.size() - 1))];
        };
        moments(ks_bs, rep.ks_se, rep.ks_lo, rep.ks_hi);
        moments(w1_bs, rep.w1_se, rep.w1_lo, rep.w1_hi);
    }
    return rep;
}

std::string ComparisonReport::to_json() const {
    nlohmann::json j;
    j["label"] = label;
    j["n_a"] = n_a;
    j["n_b"] = n_b;
    j["ks"] = ks;
    j["w1"] = w1;
    j["mean_delta"] = mean_delta;
    j["var_delta"] = var_delta;
    j["bootstrap"] = {{"resamples", bootstrap_resamples},
                      {"ks_se", ks_se},
                      {"ks_ci", {ks_lo, ks_hi}},
                      {"w1_se", w1_se},
                      {"w1_ci", {w1_lo, w1_hi}}};
    return j.dump(2);
}

EmpiricalLaw lhat_bound(const SimConfig& cfg, double horizon, int replications, int threads) {
    const Bundle service = build_bundle(cfg.service);
    const Bundle arrival = build_bundle(cfg.arrival_base);
    const double lambda = cfg.lambda();
    const int N = cfg.N;

    std::vector<double> out(replications);
    parallel_for(static_cast<std::size_t>(replications), threads, [&](std::size_t rep) {
        Rng rng(seed_split(cfg.seed, rep));
        // N+1 independent stationary renewal processes racing on [0, horizon];
        // the difference moves only at events: +1 at arrivals, -1 at completions
        using Entry = std::pair<double, int>;  // (next epoch, stream: 0 arrival, 1 service)
        std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
        heap.push({arrival.sample_residual(rng) / lambda, 0});
        for (int i = 0; i < N; ++i) heap.push({service.sample_residual(rng), 1});
        long long s = 0, smax = 0;
        while (!heap.empty() && heap.top().first <= horizon) {
            const auto [epoch, kind] = heap.top();
            heap.pop();
            if (kind == 0) {
                ++s;
                smax = std::max(smax, s);
                heap.push({epoch + arrival.sample(rng) / lambda, 0});
            } else {
                --s;
                heap.push({epoch + service.sample(rng), 1});
            }
        }
        out[rep] = static_cast<double>(smax) / std::sqrt(static_cast<double>(N));
    });

    EmpiricalLaw law;
    law.label = "Lhat";
    law.replications = replications;
    law.sample = std::move(out);
    law.finalize();
    return law;
}

SweepTable convergence_sweep(const SimConfig& base, const std::vector<int>& n_ladder,
                             const Functional& functional, const StationaryOptions& opts,
                             const EmpiricalLaw& diffusion_law, int bootstrap_resamples) {
    SweepTable table;
    std::vector<ComparisonReport> reports;
    for (int n : n_ladder) {
        SimConfig cfg = base;
        cfg.N = n;
        StationaryEstimate est = estimate_queue_stationary(cfg, {functional}, opts);
        EmpiricalLaw queue_law = est.laws.at(0);
        EmpiricalLaw diff = diffusion_law;
        diff.label = queue_law.label;  // same functional by construction
        ComparisonReport rep = compare(queue_law, diff, bootstrap_resamples,
                                       seed_split(base.seed, 0xC0FFEE + n));
        reports.push_back(rep);
        table.rows.push_back({n, functional.label(), rep});
    }
    table.has_trend = reports.size() > 1;
    if (table.has_trend) {
        table.ks_decreasing = true;
        table.min_decrease_z = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i + 1 < reports.size(); ++i) {
            const double drop = reports[i].ks - reports[i + 1].ks;
            const double se = std::sqrt(reports[i].ks_se * reports[i].ks_se +
                                        reports[i + 1].ks_se * reports[i + 1].ks_se);
            table.ks_decreasing = table.ks_decreasing && drop > 0.0;
            table.min_decrease_z = std::min(table.min_decrease_z, se > 0.0 ? drop / se : 0.0);
        }
    }
    if (!reports.empty()) table.final_ks = reports.back().ks;
    return table;
}

std::string SweepTable::to_json() const {
    nlohmann::json j;
    j["has_trend"] = has_trend;
    j["ks_decreasing"] = ks_decreasing;
    j["min_decrease_z"] = min_decrease_z;
    j["final_ks"] = final_ks;
    auto& rows_j = j["rows"] = nlohmann::json::array();
    for (const auto& row : rows) {
        rows_j.push_back({{"N", row.N},
                          {"functional", row.functional},
                          {"report", nlohmann::json::parse(row.cmp.to_json())}});
    }
    return j.dump(2);
}

}  // namespace hwlab
