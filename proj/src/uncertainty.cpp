#include "ampf/uncertainty.hpp"

#include "ampf/errors.hpp"

#include <algorithm>
#include <cmath>

namespace ampf {

bool UncertaintyReport::is_uncertain(const std::string& name) const {
    return std::find(uncertain_metrics.begin(), uncertain_metrics.end(), name) !=
           uncertain_metrics.end();
}

double sigma_at_step(const SampleSet& samples, std::size_t metric, std::size_t k) {
    const std::size_t n = samples.sample_count;
    if (n < 2) throw DomainError("standard deviation needs at least two samples");
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += samples.at(k, metric, i);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = samples.at(k, metric, i) - mean;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(n));
}

double nu(const SampleSet& samples, std::size_t metric) {
    const std::size_t K = samples.horizon;
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) sum += sigma_at_step(samples, metric, k);
    return sum / static_cast<double>(K);
}

UncertaintyReport classify(const SampleSet& samples, double threshold) {
    if (threshold < 0.0) throw DomainError("uncertainty threshold must be >= 0");
    const std::size_t K = samples.horizon;
    const std::size_t d = samples.metric_names.size();
    UncertaintyReport rep;
    rep.metric_names = samples.metric_names;
    rep.threshold = threshold;
    rep.sigma.resize(K * d);
    rep.nu.resize(d);
    for (std::size_t m = 0; m < d; ++m) {
        double sum = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const double s = sigma_at_step(samples, m, k);
            rep.sigma[k * d + m] = s;
            sum += s;
        }
        rep.nu[m] = sum / static_cast<double>(K);
        if (rep.nu[m] > threshold) rep.uncertain_metrics.push_back(samples.metric_names[m]);
    }
    return rep;
}

} // namespace ampf
