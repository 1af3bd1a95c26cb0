#include "hwlab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace hwlab {

TightnessProfile tightness_profile(const std::vector<const QueuePath*>& paths,
                                   const std::vector<double>& l_ladder, const Bundle& service) {
    if (paths.empty()) throw std::invalid_argument("tightness_profile: no paths");
    const RGrid& grid = paths.front()->r_grid;
    for (const auto* p : paths)
        if (p->r_grid.nodes != grid.nodes)
            throw std::invalid_argument("tightness_profile: paths must share one r-grid");

    TightnessProfile prof;
    prof.l_ladder = l_ladder;
    prof.r_nodes = grid.nodes;
    const std::size_t m = grid.size();
    std::vector<double> sum(m, 0.0), sum2(m, 0.0);
    long long count = 0;
    std::vector<double> h1s;

    for (const auto* p : paths) {
        for (const auto& sp : p->samples) {
            if (sp.zhat.empty()) continue;
            TightnessProfile::Entry e;
            e.N = p->N;
            e.t = sp.t;
            for (double L : l_ladder) {
                e.z_window.push_back(l2_norm_window(sp.zhat, grid, L));
                e.zp_window.push_back(l2_norm_window(sp.zhat_p, grid, L));
                e.z_tail.push_back(l2_norm_tail(sp.zhat, grid, L));
            }
            e.h1 = h1_norm(sp.zhat, sp.zhat_p, grid);
            h1s.push_back(e.h1);
            for (std::size_t k = 0; k < m; ++k) {
                sum[k] += sp.zhat[k] * sp.zhat[k];
                sum2[k] += sp.zhat[k] * sp.zhat[k] * sp.zhat[k] * sp.zhat[k];
            }
            ++count;
            prof.entries.push_back(std::move(e));
        }
    }
    if (count == 0) throw std::invalid_argument("tightness_profile: no Z samples found");

    prof.mean_square.resize(m);
    prof.mean_square_se.resize(m);
    prof.envelope.resize(m);
    prof.envelope_ok_3se = true;
    for (std::size_t k = 0; k < m; ++k) {
        const double mu = sum[k] / static_cast<double>(count);
        const double var = std::max(0.0, sum2[k] / static_cast<double>(count) - mu * mu);
        prof.mean_square[k] = mu;
        prof.mean_square_se[k] = std::sqrt(var / static_cast<double>(count));
        prof.envelope[k] = service.zbar(grid.nodes[k]);
        if (mu > prof.envelope[k] + 3.0 * prof.mean_square_se[k]) prof.envelope_ok_3se = false;
    }
    std::sort(h1s.begin(), h1s.end());
    prof.h1_median = h1s[h1s.size() / 2];
    prof.h1_q99 = h1s[static_cast<std::size_t>(0.99 * static_cast<double>(h1s.size() - 1))];
    prof.tail_bound_note = h1_tail_bound(service, 1.0, grid.r_max());
    return prof;
}

std::string TightnessProfile::to_json() const {
    nlohmann::json j;
    j["l_ladder"] = l_ladder;
    j["samples"] = entries.size();
    j["h1_median"] = h1_median;
    j["h1_q99"] = h1_q99;
    j["envelope_ok_3se"] = envelope_ok_3se;
    j["tail_bound_beyond_rmax"] = tail_bound_note;
    j["r"] = r_nodes;
    j["mean_square"] = mean_square;
    j["mean_square_se"] = mean_square_se;
    j["envelope"] = envelope;
    return j.dump(2);
}

FluidDeviation fluid_deviation(const QueuePath& path, double lambda) {
    FluidDeviation dev;
    const double N = static_cast<double>(path.N);
    for (const auto& sp : path.samples) {
        dev.t.push_back(sp.t);
        dev.x_dev.push_back(std::fabs(static_cast<double>(sp.X) / N - 1.0));
        dev.e_dev.push_back(std::fabs(static_cast<double>(sp.E) / N - lambda * sp.t / N));
        if (!sp.z.empty()) {
            std::vector<double> diff(sp.z.size());
            for (std::size_t k = 0; k < sp.z.size(); ++k)
                diff[k] = sp.z[k] / N - path.zbar_grid[k];
            dev.z_l2_dev.push_back(l2_norm(diff, path.r_grid));
        }
    }
    return dev;
}

AuditReport identity_audit(const QueuePath& path, const Bundle& service, double t,
                           double quad_step) {
    if (!path.has_event_log) throw std::invalid_argument("identity_audit: path has no event log");
    const SamplePoint* at = nullptr;
    for (const auto& sp : path.samples)
        if (std::fabs(sp.t - t) < 1e-12 && !sp.zhat.empty()) at = &sp;
    if (!at) throw std::invalid_argument("identity_audit: no Z sample at the requested time");

    const double N = static_cast<double>(path.N);
    const double sqn = std::sqrt(N);
    const RGrid& grid = path.r_grid;

    // entries into service after time zero, and K_t
    std::vector<double> entries;
    for (const auto& ep : path.episodes)
        if (!ep.initial && ep.entry <= t) entries.push_back(ep.entry);
    const double K_t = static_cast<double>(entries.size());
    const double khat_t = (K_t - N * t) / sqn;

    AuditReport rep;
    rep.t = t;
    rep.r = grid.nodes;
    rep.lhs = at->zhat;
    rep.rhs.resize(grid.size());

    for (std::size_t q = 0; q < grid.size(); ++q) {
        const double r = grid.nodes[q];
        // initial-state term
        double z0 = 0.0;
        for (double a : path.initial_ages) z0 += service.Gbar(a + t + r) / service.Gbar(a);
        const double zhat0 = (z0 - N * service.zbar(t + r)) / sqn;
        // martingale-measure term with kernel Psi_{t+r}1
        const double mm = compensated_departure(
            path, service,
            [&](double x, double s) { return service.Gbar(x + t + r - s) / service.Gbar(x); }, t,
            quad_step);
        const double mm_hat = mm / sqn;
        // Stieltjes and drift parts of the K-convolution
        double k_conv = 0.0;
        for (double e : entries) k_conv += service.Gbar(r) - service.Gbar(t - e + r);
        const double fluid_conv = t * service.Gbar(r) - service.zbar(r) + service.zbar(t + r);
        const double conv_hat = (k_conv - N * fluid_conv) / sqn;

        rep.rhs[q] = zhat0 - mm_hat + khat_t * service.Gbar(r) - conv_hat;
    }

    double scale = 1.0;
    for (double v : rep.lhs) scale = std::max(scale, std::fabs(v));
    for (std::size_t q = 0; q < grid.size(); ++q) {
        const double err = std::fabs(rep.lhs[q] - rep.rhs[q]);
        rep.max_abs_err = std::max(rep.max_abs_err, err);
        rep.max_rel_err = std::max(rep.max_rel_err, err / scale);
    }
    return rep;
}

std::string AuditReport::to_json() const {
    nlohmann::json j;
    j["t"] = t;
    j["max_abs_err"] = max_abs_err;
    j["max_rel_err"] = max_rel_err;
    j["r"] = r;
    j["lhs"] = lhs;
    j["rhs"] = rhs;
    return j.dump(2);
}

}  // namespace hwlab
