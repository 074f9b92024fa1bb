#pragma once

#include "ampf/clock.hpp"
#include "ampf/forecast.hpp"
#include "ampf/sources.hpp"

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

namespace ampf {

// Where the next model input comes from. resolved_feedback is the live
// behavior (forecast medians fill unfetched stretches and feed back into the
// input window). replay_truth reads the input window from the replay data
// file by time index, so threshold sweeps see identical forecasts at every
// threshold; only valid against sources that replay a recorded series.
enum class InputPolicy { resolved_feedback, replay_truth };

struct MonitorConfig {
    std::size_t input_window = 300; // L, must match the model
    std::size_t horizon = 300;      // K, must match the model
    double threshold = 0.02;        // on nu, normalized units
    std::size_t n_samples = 30;
    std::size_t retrain_window = 0; // W, last W horizon decisions; 0 disables
    double retrain_fraction = 0.5;  // r, trigger when uncertain share exceeds
    std::size_t fetch_retries = 3;
    std::uint64_t seed = 0;
    InputPolicy input_policy = InputPolicy::resolved_feedback;

    void validate(const TrainedForecaster& model) const; // throws ConfigError
};

// One horizon's verdicts, for the decision log and the retraining ring.
struct HorizonDecision {
    std::int64_t horizon_start = 0;
    std::int64_t horizon_end = 0;
    std::vector<double> nu;             // per metric
    std::vector<std::uint8_t> fetched;  // per metric: classified uncertain
    std::vector<std::uint8_t> degraded; // fetch failed, fell back to medians
};

// Monotone per-metric transmission accounting. Degraded points count as
// substituted and are additionally flagged.
class TransmissionLedger {
public:
    TransmissionLedger() = default;
    explicit TransmissionLedger(std::vector<std::string> metric_names);

    void count_fetched(std::size_t metric, std::uint64_t points);
    void count_substituted(std::size_t metric, std::uint64_t points);
    void count_degraded(std::size_t metric, std::uint64_t points);
    void push_decision(HorizonDecision d) { decisions_.push_back(std::move(d)); }

    const std::vector<std::string>& metric_names() const { return names_; }
    std::uint64_t fetched(std::size_t metric) const { return fetched_[metric]; }
    std::uint64_t substituted(std::size_t metric) const { return substituted_[metric]; }
    std::uint64_t degraded(std::size_t metric) const { return degraded_[metric]; }
    double transmitted_fraction(std::size_t metric) const;
    const std::vector<HorizonDecision>& decisions() const { return decisions_; }

    // metric,fetched,substituted,degraded,transmitted_fraction
    std::string to_csv() const;
    // horizon_start,horizon_end,metric,nu,verdict
    std::string decisions_csv() const;

private:
    std::vector<std::string> names_;
    std::vector<std::uint64_t> fetched_, substituted_, degraded_;
    std::vector<HorizonDecision> decisions_;
};

// Live variables of the monitoring loop plus the transmission ledger. Owned
// by a single loop; never shared mutably.
struct MonitorState {
    std::vector<std::string> metric_names;
    std::int64_t start_timestamp = 0;
    std::int64_t step_seconds = 1;
    std::vector<double> resolved; // rows x d: fetched truth or forecast medians
    std::size_t resolved_rows = 0;
    std::int64_t last_forecast_time = 0; // LFT
    std::optional<QuantileForecast> last_forecast;
    std::deque<std::uint8_t> retrain_ring; // 1 = horizon had uncertain metrics
    std::size_t horizon_index = 0;
    TransmissionLedger ledger;

    std::size_t dims() const { return metric_names.size(); }
    double resolved_at(std::size_t row, std::size_t metric) const {
        return resolved[row * dims() + metric];
    }
};

// Fetches L consecutive steps of all metrics ending at clock.now(); the
// ledger counts them as fetched.
MonitorState bootstrap(MetricSource& source, const TrainedForecaster& model,
                       const MonitorConfig& cfg, Clock& clock);

// One loop iteration: forecast, classify, substitute or idle-and-fetch,
// merge, account. Fetch failures degrade that horizon to substituted values.
void monitor_step(MonitorState& state, const TrainedForecaster& model, MetricSource& source,
                  const MonitorConfig& cfg, Clock& clock);

// True when more than retrain_fraction of the last retrain_window horizon
// decisions were uncertain. Fewer than W decisions: warm-up, false.
bool should_retrain(const MonitorState& state, const MonitorConfig& cfg);

// Fresh model on the resolved history (fetched + substituted), bounds refit.
// Clears the retraining ring. Swap between horizons only.
TrainedForecaster retrain(MonitorState& state, const MonitorConfig& cfg,
                          const TrainedForecaster& model);

// Sink-side view: truth at fetched points, forecast medians elsewhere.
MultivariateSeries reconstruct(const MonitorState& state);

// bootstrap + n_horizons steps, retraining between horizons when the ring
// trips. Returns the final state and the (possibly retrained) model.
std::pair<MonitorState, TrainedForecaster> run_monitor(MetricSource& source,
                                                       TrainedForecaster model,
                                                       const MonitorConfig& cfg, Clock& clock,
                                                       std::size_t n_horizons);

} // namespace ampf
