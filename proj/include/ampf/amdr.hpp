#pragma once

#include "ampf/series.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ampf {

// Dual-prediction baseline: identical normalized-least-mean-squares linear
// predictors run at the source and at the sink. The source transmits a value
// only when the prediction misses it by more than e_max; both ends then
// update from the reconstructed value, which keeps the filters synchronized
// without extra messages.
//
// With refresh_interval > 0 the scheme switches to scheduled adaptation:
// every refresh_interval-th sample is transmitted unconditionally and is the
// only place the filters adapt; the predictor chain feeds on refresh samples
// and its own predictions. Predictions then do not depend on e_max at all,
// which makes the per-threshold transmission sets exactly nested and the
// sweep curves exactly monotone. refresh_interval == 0 adapts on every step
// from the reconstructed value instead.
struct DualPredictorConfig {
    std::size_t filter_order = 5;     // M
    double step_size = 0.1;           // mu
    double epsilon = 1e-6;            // regularizer in the normalization term
    double e_max = 0.0;
    std::size_t refresh_interval = 0; // 0 = adapt on transmissions
};

struct DualRunResult {
    std::vector<std::string> metric_names;
    std::vector<std::uint8_t> transmitted; // T x d mask
    MultivariateSeries reconstruction;
    std::vector<double> transmitted_fraction; // per metric
    double e_max = 0.0;
    bool filters_synchronized = true; // source and sink weights bit-identical

    bool transmitted_at(std::size_t row, std::size_t metric) const {
        return transmitted[row * metric_names.size() + metric] != 0;
    }

    // method,metric,fetched,substituted,degraded,transmitted_fraction
    std::string ledger_csv() const;
};

// Per metric, order-M NLMS over the last M chain values. The first M points
// are always transmitted so both filters warm up from real data.
DualRunResult run_dual_prediction(const MultivariateSeries& source,
                                  const DualPredictorConfig& cfg);

// One independent run per threshold, base config otherwise unchanged.
std::vector<DualRunResult> sweep_dual(const MultivariateSeries& source,
                                      const DualPredictorConfig& base,
                                      const std::vector<double>& thresholds);

} // namespace ampf
