#pragma once

#include <string>
#include <vector>

#include "hwlab/queue.hpp"

namespace hwlab {

// windowed L2 profiles of the scaled Z-state across (N, t) samples
struct TightnessProfile {
    std::vector<double> l_ladder;

    struct Entry {
        int N = 0;
        double t = 0.0;
        std::vector<double> z_window;   // ||Zhat||_{L2(0,L)} per ladder L
        std::vector<double> zp_window;  // ||Zhat'||_{L2(0,L)}
        std::vector<double> z_tail;     // ||Zhat||_{L2(L, r_max)}
        double h1 = 0.0;
    };
    std::vector<Entry> entries;

    // pooled mean-square of Zhat(r) per grid node against the zbar envelope
    std::vector<double> r_nodes;
    std::vector<double> mean_square;
    std::vector<double> mean_square_se;
    std::vector<double> envelope;
    bool envelope_ok_3se = true;

    double h1_median = 0.0, h1_q99 = 0.0;
    double tail_bound_note = 0.0;  // analytic remainder beyond r_max for a unit Z-scale

    std::string to_json() const;
};

TightnessProfile tightness_profile(const std::vector<const QueuePath*>& paths,
                                   const std::vector<double>& l_ladder, const Bundle& service);

struct FluidDeviation {
    std::vector<double> t;
    std::vector<double> x_dev;     // |Xbar - 1|
    std::vector<double> z_l2_dev;  // grid L2 distance of Z/N to zbar
    std::vector<double> e_dev;     // |Ebar_t - lambda t / N|
};

FluidDeviation fluid_deviation(const QueuePath& path, double lambda);

// reconstructs the scaled Z evolution display from the event log and compares
// it with the directly computed Zhat at one sample time
struct AuditReport {
    double t = 0.0;
    std::vector<double> r;
    std::vector<double> lhs;  // direct Zhat_t(r)
    std::vector<double> rhs;  // event-log reconstruction
    double max_abs_err = 0.0;
    double max_rel_err = 0.0;

    std::string to_json() const;
};

AuditReport identity_audit(const QueuePath& path, const Bundle& service, double t,
                           double quad_step = 0.05);

}  // namespace hwlab
