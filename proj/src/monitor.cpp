#include "ampf/monitor.hpp"

#include "ampf/errors.hpp"
#include "ampf/format.hpp"
#include "ampf/rng.hpp"
#include "ampf/uncertainty.hpp"

#include <algorithm>
#include <sstream>

namespace ampf {

void MonitorConfig::validate(const TrainedForecaster& model) const {
    if (input_window < 1 || horizon < 1) throw ConfigError("L and K must be >= 1");
    if (n_samples < 2) throw ConfigError("n_samples must be >= 2");
    if (threshold < 0.0) throw ConfigError("threshold must be >= 0");
    if (retrain_window > 0 && !(retrain_fraction > 0.0 && retrain_fraction <= 1.0))
        throw ConfigError("retrain fraction must lie in (0, 1]");
    if (input_window != model.config().input_window)
        throw ConfigError("monitor input window does not match the model");
    if (horizon != model.config().horizon)
        throw ConfigError("monitor horizon does not match the model");
}

TransmissionLedger::TransmissionLedger(std::vector<std::string> metric_names)
    : names_(std::move(metric_names)),
      fetched_(names_.size(), 0),
      substituted_(names_.size(), 0),
      degraded_(names_.size(), 0) {}

void TransmissionLedger::count_fetched(std::size_t metric, std::uint64_t points) {
    fetched_[metric] += points;
}

void TransmissionLedger::count_substituted(std::size_t metric, std::uint64_t points) {
    substituted_[metric] += points;
}

void TransmissionLedger::count_degraded(std::size_t metric, std::uint64_t points) {
    substituted_[metric] += points;
    degraded_[metric] += points;
}

double TransmissionLedger::transmitted_fraction(std::size_t metric) const {
    const std::uint64_t total = fetched_[metric] + substituted_[metric];
    return total == 0 ? 0.0 : static_cast<double>(fetched_[metric]) / static_cast<double>(total);
}

std::string TransmissionLedger::to_csv() const {
    std::ostringstream os;
    os << "metric,fetched,substituted,degraded,transmitted_fraction\n";
    for (std::size_t m = 0; m < names_.size(); ++m)
        os << names_[m] << ',' << fetched_[m] << ',' << substituted_[m] << ',' << degraded_[m]
           << ',' << format_double(transmitted_fraction(m)) << '\n';
    return os.str();
}

std::string TransmissionLedger::decisions_csv() const {
    std::ostringstream os;
    os << "horizon_start,horizon_end,metric,nu,verdict\n";
    for (const HorizonDecision& d : decisions_)
        for (std::size_t m = 0; m < names_.size(); ++m) {
            const char* verdict =
                d.degraded[m] ? "degraded" : (d.fetched[m] ? "fetched" : "substituted");
            os << d.horizon_start << ',' << d.horizon_end << ',' << names_[m] << ','
               << format_double(d.nu[m]) << ',' << verdict << '\n';
        }
    return os.str();
}

namespace {

MultivariateSeries fetch_with_retries(MetricSource& source,
                                      const std::vector<std::string>& metrics,
                                      std::int64_t from, std::size_t count,
                                      std::size_t retries) {
    for (std::size_t attempt = 0;; ++attempt) {
        try {
            MultivariateSeries got = source.fetch(metrics, from, count);
            if (got.rows() != count) throw FetchError("source returned a partial window");
            return got;
        } catch (const FetchError&) {
            if (attempt >= retries) throw;
        }
    }
}

MultivariateSeries input_window_series(const MonitorState& state, const MonitorConfig& cfg,
                                       MetricSource& source) {
    const std::size_t L = cfg.input_window;
    const std::int64_t from =
        state.last_forecast_time - static_cast<std::int64_t>(L - 1) * state.step_seconds;
    if (cfg.input_policy == InputPolicy::replay_truth) {
        // evaluation protocol: the input window is indexed out of the data
        // file; not a transmission
        return source.fetch(state.metric_names, from, L);
    }
    const std::size_t d = state.dims();
    const std::size_t first = state.resolved_rows - L;
    std::vector<double> vals(state.resolved.begin() + static_cast<std::ptrdiff_t>(first * d),
                             state.resolved.begin() +
                                 static_cast<std::ptrdiff_t>(state.resolved_rows * d));
    return MultivariateSeries::make(from, state.step_seconds, state.metric_names,
                                    std::move(vals));
}

} // namespace

MonitorState bootstrap(MetricSource& source, const TrainedForecaster& model,
                       const MonitorConfig& cfg, Clock& clock) {
    cfg.validate(model);
    const std::size_t L = cfg.input_window;
    const std::int64_t step = model.step();
    const std::int64_t now = clock.now();
    const std::int64_t from = now - static_cast<std::int64_t>(L - 1) * step;
    const MultivariateSeries initial =
        fetch_with_retries(source, model.metric_names(), from, L, cfg.fetch_retries);

    MonitorState state;
    state.metric_names = model.metric_names();
    state.start_timestamp = initial.start_timestamp();
    state.step_seconds = initial.step();
    state.resolved = initial.values();
    state.resolved_rows = initial.rows();
    state.last_forecast_time = initial.end_timestamp();
    state.ledger = TransmissionLedger(state.metric_names);
    for (std::size_t m = 0; m < state.dims(); ++m)
        state.ledger.count_fetched(m, L);
    return state;
}

void monitor_step(MonitorState& state, const TrainedForecaster& model, MetricSource& source,
                  const MonitorConfig& cfg, Clock& clock) {
    cfg.validate(model);
    if (state.resolved_rows < cfg.input_window)
        throw DataError("history buffer not full; bootstrap first");
    const std::size_t K = cfg.horizon;
    const std::size_t d = state.dims();
    const std::int64_t step = state.step_seconds;

    const MultivariateSeries input = input_window_series(state, cfg, source);
    const QuantileForecast fc_raw = model.predict(input);
    const QuantileForecast fc_norm = normalize_forecast(fc_raw, model.bounds());
    const SampleSet samples =
        draw_samples(fc_norm, cfg.n_samples, mix_seed(cfg.seed, state.horizon_index));
    const UncertaintyReport report = classify(samples, cfg.threshold);

    const std::int64_t horizon_start = state.last_forecast_time + step;
    const std::int64_t horizon_end =
        state.last_forecast_time + static_cast<std::int64_t>(K) * step;

    HorizonDecision decision;
    decision.horizon_start = horizon_start;
    decision.horizon_end = horizon_end;
    decision.nu = report.nu;
    decision.fetched.assign(d, 0);
    decision.degraded.assign(d, 0);

    std::vector<double> rows(K * d);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t m = 0; m < d; ++m) rows[k * d + m] = fc_raw.median(k, m);

    if (report.any_uncertain()) {
        std::vector<std::string> uncertain;
        std::vector<std::size_t> uncertain_idx;
        for (std::size_t m = 0; m < d; ++m)
            if (report.is_uncertain(state.metric_names[m])) {
                uncertain.push_back(state.metric_names[m]);
                uncertain_idx.push_back(m);
                decision.fetched[m] = 1;
            }
        clock.wait_until(horizon_end); // idle(until = LFT)
        std::optional<MultivariateSeries> actual;
        try {
            actual = fetch_with_retries(source, uncertain, horizon_start, K,
                                        cfg.fetch_retries);
        } catch (const FetchError&) {
            // degrade this horizon to substituted values
        }
        for (std::size_t u = 0; u < uncertain_idx.size(); ++u) {
            const std::size_t m = uncertain_idx[u];
            if (actual) {
                for (std::size_t k = 0; k < K; ++k) rows[k * d + m] = actual->at(k, u);
                state.ledger.count_fetched(m, K);
            } else {
                decision.fetched[m] = 0;
                decision.degraded[m] = 1;
                state.ledger.count_degraded(m, K);
            }
        }
        for (std::size_t m = 0; m < d; ++m)
            if (!report.is_uncertain(state.metric_names[m]))
                state.ledger.count_substituted(m, K);
    } else {
        for (std::size_t m = 0; m < d; ++m) state.ledger.count_substituted(m, K);
    }

    state.resolved.insert(state.resolved.end(), rows.begin(), rows.end());
    state.resolved_rows += K;
    state.last_forecast_time = horizon_end;
    state.last_forecast = fc_raw;
    state.ledger.push_decision(decision);
    if (cfg.retrain_window > 0) {
        state.retrain_ring.push_back(report.any_uncertain() ? 1 : 0);
        while (state.retrain_ring.size() > cfg.retrain_window) state.retrain_ring.pop_front();
    }
    ++state.horizon_index;
}

bool should_retrain(const MonitorState& state, const MonitorConfig& cfg) {
    if (cfg.retrain_window == 0) return false;
    if (state.retrain_ring.size() < cfg.retrain_window) return false; // warm-up
    std::size_t uncertain = 0;
    for (std::uint8_t v : state.retrain_ring) uncertain += v;
    const double fraction =
        static_cast<double>(uncertain) / static_cast<double>(cfg.retrain_window);
    return fraction > cfg.retrain_fraction;
}

TrainedForecaster retrain(MonitorState& state, const MonitorConfig& cfg,
                          const TrainedForecaster& model) {
    const std::size_t need = cfg.input_window + cfg.horizon;
    const MultivariateSeries history = reconstruct(state);
    const std::size_t train_rows = history.rows() * 4 / 5;
    if (train_rows < need || history.rows() - train_rows < need)
        throw DataError("resolved history too short to retrain");
    const MultivariateSeries tr = slice(history, 0, train_rows - 1);
    const MultivariateSeries va = slice(history, train_rows, history.rows() - 1);
    TrainedForecaster fresh = train(tr, va, model.config());
    state.retrain_ring.clear();
    return fresh;
}

MultivariateSeries reconstruct(const MonitorState& state) {
    if (state.resolved_rows == 0) throw DataError("nothing resolved yet");
    return MultivariateSeries::make(state.start_timestamp, state.step_seconds,
                                    state.metric_names, state.resolved);
}

std::pair<MonitorState, TrainedForecaster> run_monitor(MetricSource& source,
                                                       TrainedForecaster model,
                                                       const MonitorConfig& cfg, Clock& clock,
                                                       std::size_t n_horizons) {
    MonitorState state = bootstrap(source, model, cfg, clock);
    for (std::size_t i = 0; i < n_horizons; ++i) {
        monitor_step(state, model, source, cfg, clock);
        if (should_retrain(state, cfg)) model = retrain(state, cfg, model);
    }
    return {std::move(state), std::move(model)};
}

} // namespace ampf
