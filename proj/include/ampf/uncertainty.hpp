#pragma once

#include "ampf/forecast.hpp"

#include <string>
#include <vector>

namespace ampf {

// Per-metric uncertainty verdicts for one forecast horizon. nu is the
// horizon-averaged standard deviation of the forecast samples; a metric is
// uncertain iff nu exceeds the threshold strictly.
struct UncertaintyReport {
    std::vector<std::string> metric_names;
    std::vector<double> nu;      // per metric
    std::vector<double> sigma;   // K x d per-step standard deviations
    double threshold = 0.0;
    std::vector<std::string> uncertain_metrics;

    bool is_uncertain(const std::string& name) const;
    bool any_uncertain() const { return !uncertain_metrics.empty(); }
};

// Population standard deviation (divisor N) of the samples at (k, metric).
double sigma_at_step(const SampleSet& samples, std::size_t metric, std::size_t k);

// Mean of sigma_at_step over the horizon.
double nu(const SampleSet& samples, std::size_t metric);

UncertaintyReport classify(const SampleSet& samples, double threshold);

} // namespace ampf
