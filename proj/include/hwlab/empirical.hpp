#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace hwlab {

// i.i.d.-replication sample of one stationary functional
struct EmpiricalLaw {
    std::string label;
    long long replications = 0;
    std::vector<double> sample;  // sorted ascending once finalized

    void finalize() { std::sort(sample.begin(), sample.end()); }

    std::size_t size() const { return sample.size(); }

    double mean() const {
        double s = 0.0;
        for (double x : sample) s += x;
        return s / static_cast<double>(sample.size());
    }
    double variance() const {
        const double m = mean();
        double s = 0.0;
        for (double x : sample) s += (x - m) * (x - m);
        return s / static_cast<double>(sample.size() - 1);
    }
    // right-continuous ECDF of the sorted sample
    double ecdf(double x) const {
        const auto it = std::upper_bound(sample.begin(), sample.end(), x);
        return static_cast<double>(it - sample.begin()) / static_cast<double>(sample.size());
    }
    double quantile(double p) const {
        if (sample.empty()) throw std::invalid_argument("quantile of empty sample");
        const double idx = p * static_cast<double>(sample.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(idx);
        const std::size_t hi = std::min(lo + 1, sample.size() - 1);
        const double w = idx - static_cast<double>(lo);
        return (1.0 - w) * sample[lo] + w * sample[hi];
    }
};

}  // namespace hwlab
