#pragma once

#include "ampf/quantile_net.hpp"
#include "ampf/series.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ampf {

// Ordered quantile levels in (0, 1); the median must be present because the
// monitor substitutes median trajectories for unfetched metrics.
class QuantileSet {
public:
    static QuantileSet make(std::vector<double> levels);
    static QuantileSet defaults(); // {0.05, 0.25, 0.5, 0.75, 0.95}

    const std::vector<double>& levels() const { return levels_; }
    std::size_t size() const { return levels_.size(); }
    std::size_t median_index() const { return median_index_; }

    bool operator==(const QuantileSet& o) const { return levels_ == o.levels_; }

private:
    std::vector<double> levels_;
    std::size_t median_index_ = 0;
};

// K x d x |P| forecast tensor. Construction sorts each (step, metric) slice
// across quantiles, so monotonicity in the quantile level always holds.
class QuantileForecast {
public:
    static QuantileForecast make(std::int64_t start_timestamp, std::int64_t step,
                                 std::vector<std::string> metric_names, QuantileSet quantiles,
                                 std::vector<double> values /* K x d x |P| */);

    std::size_t horizon() const { return horizon_; }
    std::size_t dims() const { return names_.size(); }
    const std::vector<std::string>& metric_names() const { return names_; }
    const QuantileSet& quantiles() const { return quantiles_; }
    std::int64_t start_timestamp() const { return start_; }
    std::int64_t step() const { return step_; }
    std::int64_t timestamp_at(std::size_t k) const {
        return start_ + static_cast<std::int64_t>(k) * step_;
    }

    double at(std::size_t k, std::size_t metric, std::size_t quantile) const {
        return values_[(k * dims() + metric) * quantiles_.size() + quantile];
    }
    double median(std::size_t k, std::size_t metric) const {
        return at(k, metric, quantiles_.median_index());
    }
    const std::vector<double>& values() const { return values_; }

private:
    QuantileForecast() : quantiles_(QuantileSet::defaults()) {}

    std::int64_t start_ = 0;
    std::int64_t step_ = 1;
    std::size_t horizon_ = 0;
    std::vector<std::string> names_;
    QuantileSet quantiles_;
    std::vector<double> values_;
};

QuantileForecast normalize_forecast(const QuantileForecast& fc, const NormalizationBounds& b);
QuantileForecast denormalize_forecast(const QuantileForecast& fc, const NormalizationBounds& b);

enum class ForecastKind { neural, seasonal_naive };

struct ForecastModelConfig {
    ForecastKind kind = ForecastKind::neural;
    std::size_t input_window = 300; // L
    std::size_t horizon = 300;      // K
    std::size_t hidden_dim = 75;
    std::size_t batch_size = 256;
    double dropout_rate = 0.20;
    double learning_rate = 0.001;
    std::size_t max_epochs = 20;
    QuantileSet quantiles = QuantileSet::defaults();
    std::uint64_t seed = 0;

    // artifact knobs beyond the tuned hyperparameters
    std::size_t window_stride = 1;   // stride between training windows
    std::size_t seasonal_period = 0; // seasonal_naive lag; 0 = min(L, one day)
    // per-epoch harmonic decay, lr_e = lr / (1 + decay * (epoch - 1)); the
    // pinball subgradient does not vanish near the optimum, so a constant
    // step only reaches an lr-proportional neighborhood. 0 keeps lr constant.
    double learning_rate_decay = 0.0;
    FeatureEncodingConfig features;
    double early_stop_min_delta = 0.001;
    std::size_t early_stop_patience = 5;

    void validate() const; // throws ConfigError
};

// Stops training once the validation loss has gone `patience` consecutive
// epochs without dropping more than `min_delta` below the best seen; the
// weight snapshot tracks the true minimum regardless.
class EarlyStopper {
public:
    EarlyStopper(double min_delta, std::size_t patience)
        : min_delta_(min_delta), patience_(patience) {}

    // Returns true when training should stop after this epoch.
    bool observe(double validation_loss);

    bool improved_best() const { return improved_best_; }
    std::size_t best_epoch() const { return best_epoch_; } // 1-based
    double best_loss() const { return best_loss_; }
    std::size_t epochs_seen() const { return epoch_; }

private:
    double min_delta_;
    std::size_t patience_;
    std::size_t epoch_ = 0;
    std::size_t stall_ = 0;
    std::size_t best_epoch_ = 0;
    double best_loss_ = std::numeric_limits<double>::infinity();
    double significant_best_ = std::numeric_limits<double>::infinity();
    bool improved_best_ = false;
};

struct TrainingReport {
    std::vector<double> train_loss;      // per epoch
    std::vector<double> validation_loss; // per epoch
    std::size_t best_epoch = 0;          // 1-based
    std::size_t stopped_epoch = 0;
};

// Independent draws per (step, metric) from the forecast distribution.
struct SampleSet {
    std::size_t horizon = 0;
    std::size_t sample_count = 0;
    std::vector<std::string> metric_names;
    std::vector<double> values; // K x d x N

    double at(std::size_t k, std::size_t metric, std::size_t i) const {
        return values[(k * metric_names.size() + metric) * sample_count + i];
    }
};

struct SeasonalNaiveState {
    std::size_t period = 0;
    std::vector<double> quantile_offsets; // d x |P| residual quantiles around the median
};

// Immutable after training; predict paths are pure.
class TrainedForecaster {
public:
    ForecastKind kind() const { return config_.kind; }
    const ForecastModelConfig& config() const { return config_; }
    const NormalizationBounds& bounds() const { return bounds_; }
    const TrainingReport& report() const { return report_; }
    const std::vector<std::string>& metric_names() const { return names_; }
    std::int64_t step() const { return step_; }

    // input: exactly L rows of the trained metric set, original units.
    QuantileForecast predict(const MultivariateSeries& input) const;
    QuantileForecast predict_normalized(const MultivariateSeries& input) const;

    void save(const std::string& path) const;
    static TrainedForecaster load(const std::string& path);

    // exposed for the gradient/determinism tests
    const QuantileNet* net() const { return net_ ? &*net_ : nullptr; }
    const SeasonalNaiveState* seasonal() const { return seasonal_ ? &*seasonal_ : nullptr; }

private:
    friend struct ForecasterAccess; // internal assembly, see forecast.cpp

    ForecastModelConfig config_;
    NormalizationBounds bounds_;
    TrainingReport report_;
    std::vector<std::string> names_;
    std::int64_t step_ = 1;
    std::optional<QuantileNet> net_;
    std::optional<SeasonalNaiveState> seasonal_;
};

// rho * max(0, y - yhat) + (1 - rho) * max(0, yhat - y); rho in (0, 1).
double pinball_loss(double y, double y_hat, double rho);

// Mean pinball loss across windows, horizon steps, metrics and quantiles.
// Each forecast window is aligned to `truth` by its start timestamp.
double total_loss(const MultivariateSeries& truth, const std::vector<QuantileForecast>& windows);

// Normalized quantile risk: 2 * sum(pinball at rho) / sum(|y|).
double rho_risk(const MultivariateSeries& truth, const QuantileForecast& forecast, double rho);

// Piecewise-linear inverse CDF through (level, value) knots, flat outside
// [levels.front(), levels.back()].
double inverse_cdf(const std::vector<double>& levels, const std::vector<double>& values,
                   double u);

SampleSet draw_samples(const QuantileForecast& forecast, std::size_t n, std::uint64_t seed);

// Deterministic per cfg.seed; early stopping per EarlyStopper; returns the
// best-validation-epoch weights.
TrainedForecaster train(const MultivariateSeries& train_series,
                        const MultivariateSeries& validation_series,
                        const ForecastModelConfig& cfg);

// Mean normalized pinball loss of the forecaster over non-overlapping windows
// of a held-out series. The quantity grid search and k-fold minimize.
double validation_loss(const TrainedForecaster& model, const MultivariateSeries& series);

struct GridSearchSpace {
    std::vector<std::size_t> input_windows{300, 600};
    std::vector<std::size_t> horizons{300, 600};
    std::vector<std::size_t> hidden_dims{25, 75};
    std::vector<std::size_t> batch_sizes{256, 512};
    std::vector<double> dropout_rates{0.05, 0.10, 0.20};
    std::size_t search_epochs = 3; // reduced budget per candidate
};

struct GridSearchEntry {
    ForecastModelConfig config;
    double validation_loss = 0.0;
};

struct GridSearchResult {
    ForecastModelConfig best;
    std::vector<GridSearchEntry> entries; // enumeration order, one per candidate
};

// Full cross-product; argmin validation loss, ties broken by smaller
// hidden_dim, then smaller input window.
GridSearchResult grid_search(const MultivariateSeries& train_series,
                             const MultivariateSeries& validation_series,
                             const ForecastModelConfig& base, const GridSearchSpace& space);

// Forward-chaining K-fold: data split into k+1 contiguous segments; fold i
// trains on segments [0, i) and validates on segment i.
std::vector<double> kfold_validate(const MultivariateSeries& data,
                                   const ForecastModelConfig& cfg, std::size_t k);

} // namespace ampf
