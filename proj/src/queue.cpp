#include "hwlab/queue.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>
#include <stdexcept>

namespace hwlab {

double SimConfig::lambda() const {
    const double l = N - beta * std::sqrt(static_cast<double>(N));
    if (l <= 0.0) throw std::invalid_argument("SimConfig: N - beta sqrt(N) must be positive");
    return l;
}

StarInit init_star(const SimConfig& cfg, const Bundle& service, const Bundle& arrival, Rng& rng) {
    if (std::fabs(service.mean() - 1.0) > 1e-10)
        throw std::invalid_argument("init_star: service law must have unit mean");
    StarInit s;
    s.R0 = arrival.sample_residual(rng) / cfg.lambda();
    s.ages.resize(cfg.N);
    s.residuals.resize(cfg.N);
    for (int j = 0; j < cfg.N; ++j) {
        s.ages[j] = service.sample_residual(rng);
        s.residuals[j] = service.sample_conditional_residual(s.ages[j], rng);
    }
    return s;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Event {
    double epoch;
    int kind;  // 0 arrival, 1 departure (arrival wins ties)
    long long seq;
    int server;
};
struct EventLater {
    bool operator()(const Event& a, const Event& b) const {
        if (a.epoch != b.epoch) return a.epoch > b.epoch;
        if (a.kind != b.kind) return a.kind > b.kind;
        return a.seq > b.seq;
    }
};

struct WaitingJob {
    double arrival;
    double v;
};

}  // namespace

QueuePath run(const SimConfig& cfg) {
    return run(cfg, build_bundle(cfg.service), build_bundle(cfg.arrival_base));
}

QueuePath run(const SimConfig& cfg, const Bundle& service, const Bundle& arrival) {
    const double lambda = cfg.lambda();
    const int N = cfg.N;
    Rng rng(cfg.seed);

    QueuePath path;
    path.N = N;
    path.beta = cfg.beta;
    path.seed = cfg.seed;
    path.horizon = cfg.horizon;
    path.r_grid = cfg.r_grid;
    path.has_event_log = cfg.record_event_log;
    const std::size_t m = cfg.r_grid.size();
    path.zbar_grid.resize(m);
    path.gbar_grid.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        path.zbar_grid[k] = service.zbar(cfg.r_grid.nodes[k]);
        path.gbar_grid[k] = service.Gbar(cfg.r_grid.nodes[k]);
    }

    // per-server slots; ages are derived from entry epochs
    std::vector<char> busy(N, 0);
    std::vector<double> entry(N, 0.0), age0(N, 0.0), vreq(N, 0.0);
    std::vector<long long> episode_of(N, -1);
    std::vector<int> idle;
    idle.reserve(N);
    for (int i = N; i-- > 0;) idle.push_back(i);

    std::deque<WaitingJob> fifo;
    std::priority_queue<Event, std::vector<Event>, EventLater> events;
    long long seq = 0;

    long long X = 0, E = 0, K = 0, D = 0;
    double R0;

    auto start_service = [&](int srv, double now, double age, double v, bool initial) {
        busy[srv] = 1;
        entry[srv] = now;
        age0[srv] = age;
        vreq[srv] = v;
        events.push({now + (v - age), 1, seq++, srv});
        if (cfg.record_event_log) {
            episode_of[srv] = static_cast<long long>(path.episodes.size());
            path.episodes.push_back({now, age, v, kInf, initial});
        }
    };

    switch (cfg.init) {
        case InitKind::Star: {
            StarInit s = init_star(cfg, service, arrival, rng);
            R0 = s.R0;
            X = N;
            path.initial_ages = s.ages;
            for (int j = 0; j < N; ++j) {
                const int srv = idle.back();
                idle.pop_back();
                start_service(srv, 0.0, s.ages[j], s.ages[j] + s.residuals[j], true);
            }
            break;
        }
        case InitKind::Empty: {
            R0 = arrival.sample(rng) / lambda;  // fresh renewal start
            X = 0;
            break;
        }
        case InitKind::Explicit: {
            const auto& ini = cfg.explicit_init;
            R0 = ini.R0 >= 0.0 ? ini.R0 : arrival.sample(rng) / lambda;
            X = ini.X0;
            const long long in_service = std::min<long long>(ini.X0, N);
            if (static_cast<long long>(ini.ages.size()) != in_service)
                throw std::invalid_argument("explicit init: need one age per in-service job");
            path.initial_ages = ini.ages;
            for (double a : ini.ages) {
                const int srv = idle.back();
                idle.pop_back();
                const double res = service.sample_conditional_residual(a, rng);
                start_service(srv, 0.0, a, a + res, true);
            }
            for (long long q = in_service; q < ini.X0; ++q)
                fifo.push_back({0.0, service.sample(rng)});
            break;
        }
        default:
            throw std::logic_error("unknown init kind");
    }
    path.X0 = X;
    const long long x0_excess = std::max<long long>(X - N, 0);
    events.push({R0, 0, seq++, -1});

    auto check = [&]() {
        ++path.invariant_checks;
        const long long in_service = N - static_cast<long long>(idle.size());
        bool ok = in_service == std::min<long long>(X, N);
        ok = ok && (K == E - std::max<long long>(X - N, 0) + x0_excess);
        ok = ok && (X == path.X0 + E - D);
        ok = ok && (static_cast<long long>(fifo.size()) == std::max<long long>(X - N, 0));
        if (!ok) ++path.invariant_failures;
    };

    std::vector<double> ages_buf;
    ages_buf.reserve(N);
    auto record_sample = [&](double t) {
        SamplePoint sp;
        sp.t = t;
        sp.X = X;
        sp.E = E;
        sp.K = K;
        sp.D = D;
        const double sqn = std::sqrt(static_cast<double>(N));
        sp.xhat = (static_cast<double>(X) - N) / sqn;
        if (cfg.compute_z) {
            ages_buf.clear();
            for (int i = 0; i < N; ++i)
                if (busy[i]) ages_buf.push_back(t - entry[i] + age0[i]);
            sp.z = t_map(service, ages_buf, cfg.r_grid);
            sp.zhat.resize(m);
            for (std::size_t k = 0; k < m; ++k)
                sp.zhat[k] = (sp.z[k] - N * path.zbar_grid[k]) / sqn;
            if (service.has_density()) {  // Z' needs the density
                sp.zp = t_map_derivative(service, ages_buf, cfg.r_grid);
                sp.zhat_p.resize(m);
                for (std::size_t k = 0; k < m; ++k)
                    sp.zhat_p[k] = (sp.zp[k] + N * path.gbar_grid[k]) / sqn;
            }
        }
        path.samples.push_back(std::move(sp));
    };

    std::vector<double> sample_times = cfg.sample_times;
    std::sort(sample_times.begin(), sample_times.end());
    if (!sample_times.empty() &&
        (sample_times.front() < 0.0 || sample_times.back() > cfg.horizon))
        throw std::invalid_argument("SimConfig: sample times must lie in [0, horizon]");
    std::size_t next_sample = 0;

    for (;;) {
        const double next_epoch = events.empty() ? kInf : events.top().epoch;
        while (next_sample < sample_times.size() &&
               sample_times[next_sample] <= std::min(next_epoch, cfg.horizon))
            record_sample(sample_times[next_sample++]);
        if (next_epoch > cfg.horizon || events.empty()) break;

        const Event ev = events.top();
        events.pop();
        const double now = ev.epoch;

        if (ev.kind == 0) {  // arrival
            ++E;
            ++X;
            if (cfg.record_event_log) path.arrivals.push_back(now);
            const double v = service.sample(rng);
            if (!idle.empty()) {
                // uniformly random among idle servers
                const std::size_t pick = idle.size() > 1 ? rng.below(idle.size()) : 0;
                const int srv = idle[pick];
                idle[pick] = idle.back();
                idle.pop_back();
                ++K;
                start_service(srv, now, 0.0, v, false);
            } else {
                fifo.push_back({now, v});
            }
            events.push({now + arrival.sample(rng) / lambda, 0, seq++, -1});
        } else {  // departure
            ++D;
            --X;
            const int srv = ev.server;
            busy[srv] = 0;
            path.max_age_error =
                std::max(path.max_age_error, std::fabs((now - entry[srv] + age0[srv]) - vreq[srv]));
            if (cfg.record_event_log && episode_of[srv] >= 0) {
                path.episodes[episode_of[srv]].departure = now;
                episode_of[srv] = -1;
            }
            if (!fifo.empty()) {
                const WaitingJob job = fifo.front();
                fifo.pop_front();
                ++K;
                start_service(srv, now, 0.0, job.v, false);
            } else {
                idle.push_back(srv);
            }
        }
        if (cfg.check_invariants) check();
    }

    path.final_X = X;
    path.final_E = E;
    path.final_K = K;
    path.final_D = D;
    return path;
}

FluidPath fluid_scale(const QueuePath& path) {
    FluidPath f;
    const double N = static_cast<double>(path.N);
    for (const auto& sp : path.samples) {
        f.t.push_back(sp.t);
        f.xbar.push_back(static_cast<double>(sp.X) / N);
        f.ebar.push_back(static_cast<double>(sp.E) / N);
        if (!sp.z.empty()) {
            std::vector<double> row(sp.z.size());
            for (std::size_t k = 0; k < sp.z.size(); ++k) row[k] = sp.z[k] / N;
            f.z_over_n.push_back(std::move(row));
        }
    }
    return f;
}

namespace {
// 4-point Gauss-Legendre on [-1, 1]
const double gl_x[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                        0.8611363115940526};
const double gl_w[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                        0.3478548451374538};
}  // namespace

double compensated_departure(const QueuePath& path, const Bundle& service,
                             const std::function<double(double, double)>& phi_xs, double t,
                             double quad_step) {
    if (!path.has_event_log)
        throw std::invalid_argument("compensated_departure: path has no event log");
    double q_term = 0.0, a_term = 0.0;
    for (const auto& ep : path.episodes) {
        if (ep.departure <= t) q_term += phi_xs(ep.v, ep.departure);
        const double s_end = std::min(ep.departure, t);
        if (s_end <= ep.entry) continue;
        // composite Gauss-Legendre along the linear age flow
        const double len = s_end - ep.entry;
        const int nsub = std::max(1, static_cast<int>(std::ceil(len / quad_step)));
        const double hsub = len / nsub;
        for (int k = 0; k < nsub; ++k) {
            const double a = ep.entry + k * hsub;
            const double c = a + 0.5 * hsub, half = 0.5 * hsub;
            for (int j = 0; j < 4; ++j) {
                const double s = c + half * gl_x[j];
                const double age = ep.age0 + (s - ep.entry);
                a_term += half * gl_w[j] * phi_xs(age, s) * service.h(age);
            }
        }
    }
    return q_term - a_term;
}

double compensated_departure(const QueuePath& path, const Bundle& service,
                             const std::function<double(double)>& f, double t, double quad_step) {
    return compensated_departure(
        path, service, [&](double x, double) { return f(x); }, t, quad_step);
}

}  // namespace hwlab
