#include "ampf/forecast.hpp"

#include "ampf/errors.hpp"
#include "ampf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace ampf {

QuantileSet QuantileSet::make(std::vector<double> levels) {
    if (levels.empty()) throw ConfigError("quantile set must not be empty");
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (!(levels[i] > 0.0 && levels[i] < 1.0))
            throw ConfigError("quantile levels must lie in (0, 1)");
        if (i > 0 && levels[i] <= levels[i - 1])
            throw ConfigError("quantile levels must be strictly increasing");
    }
    auto it = std::find(levels.begin(), levels.end(), 0.5);
    if (it == levels.end()) throw ConfigError("quantile set must contain the median 0.5");
    QuantileSet qs;
    qs.median_index_ = static_cast<std::size_t>(it - levels.begin());
    qs.levels_ = std::move(levels);
    return qs;
}

QuantileSet QuantileSet::defaults() { return make({0.05, 0.25, 0.5, 0.75, 0.95}); }

QuantileForecast QuantileForecast::make(std::int64_t start_timestamp, std::int64_t step,
                                        std::vector<std::string> metric_names,
                                        QuantileSet quantiles, std::vector<double> values) {
    if (metric_names.empty()) throw ShapeError("forecast needs at least one metric");
    const std::size_t d = metric_names.size();
    const std::size_t p = quantiles.size();
    if (values.empty() || values.size() % (d * p) != 0)
        throw ShapeError("forecast tensor size must be K*d*|P|");
    if (step <= 0) throw ShapeError("forecast step must be positive");
    for (double v : values)
        if (!std::isfinite(v)) throw ShapeError("forecast values must be finite");
    QuantileForecast fc;
    fc.start_ = start_timestamp;
    fc.step_ = step;
    fc.horizon_ = values.size() / (d * p);
    fc.names_ = std::move(metric_names);
    fc.quantiles_ = std::move(quantiles);
    fc.values_ = std::move(values);
    // resolve quantile crossings
    for (std::size_t k = 0; k < fc.horizon_; ++k)
        for (std::size_t m = 0; m < d; ++m) {
            double* s = fc.values_.data() + (k * d + m) * p;
            std::sort(s, s + p);
        }
    return fc;
}

namespace {

void check_forecast_bounds(const QuantileForecast& fc, const NormalizationBounds& b) {
    if (b.dims() != fc.dims()) throw ShapeError("bounds dimension does not match forecast");
    for (std::size_t m = 0; m < fc.dims(); ++m)
        if (b.metric_names[m] != fc.metric_names()[m])
            throw ShapeError("bounds metric order does not match forecast");
}

QuantileForecast map_forecast(const QuantileForecast& fc, const NormalizationBounds& b,
                              bool to_normalized) {
    check_forecast_bounds(fc, b);
    const std::size_t d = fc.dims(), p = fc.quantiles().size();
    std::vector<double> vals = fc.values();
    for (std::size_t k = 0; k < fc.horizon(); ++k)
        for (std::size_t m = 0; m < d; ++m) {
            const double range = b.max[m] - b.min[m];
            double* s = vals.data() + (k * d + m) * p;
            for (std::size_t q = 0; q < p; ++q) {
                if (to_normalized)
                    s[q] = range > 0.0 ? (s[q] - b.min[m]) / range : 0.0;
                else
                    s[q] = range > 0.0 ? s[q] * range + b.min[m] : b.min[m];
            }
        }
    return QuantileForecast::make(fc.start_timestamp(), fc.step(), fc.metric_names(),
                                  fc.quantiles(), std::move(vals));
}

} // namespace

QuantileForecast normalize_forecast(const QuantileForecast& fc, const NormalizationBounds& b) {
    return map_forecast(fc, b, true);
}

QuantileForecast denormalize_forecast(const QuantileForecast& fc, const NormalizationBounds& b) {
    return map_forecast(fc, b, false);
}

void ForecastModelConfig::validate() const {
    if (input_window < 1) throw ConfigError("input window must be >= 1");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (hidden_dim < 1) throw ConfigError("hidden dim must be >= 1");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw ConfigError("dropout rate must lie in [0, 1)");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(learning_rate_decay >= 0.0)) throw ConfigError("learning rate decay must be >= 0");
    if (max_epochs < 1) throw ConfigError("max epochs must be >= 1");
    if (window_stride < 1) throw ConfigError("window stride must be >= 1");
    if (!(early_stop_min_delta >= 0.0)) throw ConfigError("early stop delta must be >= 0");
    if (early_stop_patience < 1) throw ConfigError("early stop patience must be >= 1");
    if (kind == ForecastKind::seasonal_naive && seasonal_period > input_window)
        throw ConfigError("seasonal period cannot exceed the input window");
}

bool EarlyStopper::observe(double validation_loss) {
    ++epoch_;
    improved_best_ = validation_loss < best_loss_;
    if (improved_best_) {
        best_loss_ = validation_loss;
        best_epoch_ = epoch_;
    }
    if (validation_loss < significant_best_ - min_delta_) {
        significant_best_ = validation_loss;
        stall_ = 0;
    } else {
        ++stall_;
    }
    return stall_ >= patience_;
}

double pinball_loss(double y, double y_hat, double rho) {
    if (!(rho > 0.0 && rho < 1.0)) throw DomainError("quantile level must lie in (0, 1)");
    const double under = y - y_hat;
    return under >= 0.0 ? rho * under : (rho - 1.0) * under;
}

namespace {

// Row index of a forecast window inside the truth series; throws on misfit.
std::size_t align_window(const MultivariateSeries& truth, const QuantileForecast& fc) {
    if (fc.step() != truth.step()) throw ShapeError("forecast step does not match truth");
    const std::int64_t offset = fc.start_timestamp() - truth.start_timestamp();
    if (offset < 0 || offset % truth.step() != 0)
        throw ShapeError("forecast start does not align with truth rows");
    const std::size_t row = static_cast<std::size_t>(offset / truth.step());
    if (row + fc.horizon() > truth.rows())
        throw ShapeError("forecast window extends past the truth series");
    return row;
}

} // namespace

double total_loss(const MultivariateSeries& truth, const std::vector<QuantileForecast>& windows) {
    if (windows.empty()) throw ShapeError("total loss needs at least one forecast window");
    double sum = 0.0;
    std::size_t count = 0;
    for (const QuantileForecast& fc : windows) {
        const std::size_t row0 = align_window(truth, fc);
        const auto& levels = fc.quantiles().levels();
        std::vector<std::size_t> cols(fc.dims());
        for (std::size_t m = 0; m < fc.dims(); ++m)
            cols[m] = truth.metric_index(fc.metric_names()[m]);
        for (std::size_t k = 0; k < fc.horizon(); ++k)
            for (std::size_t m = 0; m < fc.dims(); ++m) {
                const double y = truth.at(row0 + k, cols[m]);
                for (std::size_t q = 0; q < levels.size(); ++q) {
                    sum += pinball_loss(y, fc.at(k, m, q), levels[q]);
                    ++count;
                }
            }
    }
    return sum / static_cast<double>(count);
}

double rho_risk(const MultivariateSeries& truth, const QuantileForecast& forecast, double rho) {
    const auto& levels = forecast.quantiles().levels();
    std::size_t qi = levels.size();
    for (std::size_t q = 0; q < levels.size(); ++q)
        if (std::abs(levels[q] - rho) < 1e-12) qi = q;
    if (qi == levels.size()) throw DomainError("rho is not one of the forecast quantiles");
    const std::size_t row0 = align_window(truth, forecast);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < forecast.horizon(); ++k)
        for (std::size_t m = 0; m < forecast.dims(); ++m) {
            const double y = truth.at(row0 + k, truth.metric_index(forecast.metric_names()[m]));
            num += pinball_loss(y, forecast.at(k, m, qi), rho);
            den += std::abs(y);
        }
    if (den == 0.0) throw DegenerateMetric("rho-risk undefined for an all-zero truth");
    return 2.0 * num / den;
}

double inverse_cdf(const std::vector<double>& levels, const std::vector<double>& values,
                   double u) {
    if (levels.empty() || levels.size() != values.size())
        throw DomainError("inverse cdf needs matching level/value knots");
    if (u <= levels.front()) return values.front();
    if (u >= levels.back()) return values.back();
    std::size_t hi = 1;
    while (levels[hi] < u) ++hi;
    const double t = (u - levels[hi - 1]) / (levels[hi] - levels[hi - 1]);
    return values[hi - 1] + t * (values[hi] - values[hi - 1]);
}

SampleSet draw_samples(const QuantileForecast& forecast, std::size_t n, std::uint64_t seed) {
    if (n < 2) throw DomainError("sample count must be >= 2");
    const std::size_t K = forecast.horizon(), d = forecast.dims();
    const std::size_t p = forecast.quantiles().size();
    const auto& levels = forecast.quantiles().levels();
    SampleSet ss;
    ss.horizon = K;
    ss.sample_count = n;
    ss.metric_names = forecast.metric_names();
    ss.values.resize(K * d * n);
    Rng rng(seed);
    std::vector<double> knots(p);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t m = 0; m < d; ++m) {
            for (std::size_t q = 0; q < p; ++q) knots[q] = forecast.at(k, m, q);
            double* out = ss.values.data() + (k * d + m) * n;
            for (std::size_t i = 0; i < n; ++i) out[i] = inverse_cdf(levels, knots, rng.uniform());
        }
    return ss;
}

// ---------------------------------------------------------------------------
// training

// Assembly access for the builders in this translation unit.
struct ForecasterAccess {
    static ForecastModelConfig& config(TrainedForecaster& f) { return f.config_; }
    static NormalizationBounds& bounds(TrainedForecaster& f) { return f.bounds_; }
    static TrainingReport& report(TrainedForecaster& f) { return f.report_; }
    static std::vector<std::string>& names(TrainedForecaster& f) { return f.names_; }
    static std::int64_t& step(TrainedForecaster& f) { return f.step_; }
    static std::optional<QuantileNet>& net(TrainedForecaster& f) { return f.net_; }
    static std::optional<SeasonalNaiveState>& seasonal(TrainedForecaster& f) {
        return f.seasonal_;
    }
};

namespace {

struct WindowedData {
    std::size_t rows = 0, input_dim = 0, metric_dim = 0, cov_dim = 0;
    std::vector<double> inputs;  // rows x input_dim (normalized metrics, covariates)
    std::vector<double> covs;    // rows x cov_dim
    std::vector<double> targets; // rows x metric_dim
};

void require_plain_metrics(const MultivariateSeries& s) {
    for (const auto& n : s.metric_names())
        if (is_feature_column(n))
            throw SchemaError("training data must not already contain feature columns");
}

WindowedData build_windowed(const MultivariateSeries& raw, const NormalizationBounds& bounds,
                            const FeatureEncodingConfig& feats) {
    const MultivariateSeries norm = normalize(raw, bounds);
    WindowedData wd;
    wd.rows = raw.rows();
    wd.metric_dim = raw.dims();
    wd.cov_dim = feats.extra_columns();
    wd.input_dim = wd.metric_dim + wd.cov_dim;
    wd.inputs.resize(wd.rows * wd.input_dim);
    wd.covs.resize(wd.rows * wd.cov_dim);
    wd.targets.resize(wd.rows * wd.metric_dim);
    for (std::size_t r = 0; r < wd.rows; ++r) {
        double* in = wd.inputs.data() + r * wd.input_dim;
        const double* src = norm.row(r);
        std::copy(src, src + wd.metric_dim, in);
        std::copy(src, src + wd.metric_dim, wd.targets.data() + r * wd.metric_dim);
        if (wd.cov_dim > 0) {
            const std::vector<double> f = feature_row(raw.timestamp_at(r), feats);
            std::copy(f.begin(), f.end(), in + wd.metric_dim);
            std::copy(f.begin(), f.end(), wd.covs.data() + r * wd.cov_dim);
        }
    }
    return wd;
}

double empirical_quantile(std::vector<double> sorted_ascending, double rho) {
    const std::size_t n = sorted_ascending.size();
    if (n == 0) throw DataError("no residuals to take quantiles of");
    const double h = rho * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    if (lo + 1 >= n) return sorted_ascending[n - 1];
    return sorted_ascending[lo] + frac * (sorted_ascending[lo + 1] - sorted_ascending[lo]);
}

TrainedForecaster fit_seasonal_naive(const MultivariateSeries& train_series,
                                     const MultivariateSeries& validation_series,
                                     const ForecastModelConfig& cfg) {
    const std::size_t L = cfg.input_window;
    std::size_t period = cfg.seasonal_period;
    if (period == 0) {
        const std::size_t one_day =
            std::max<std::size_t>(1, static_cast<std::size_t>(86400 / train_series.step()));
        period = std::min(L, one_day);
    }
    if (period > L) throw ConfigError("seasonal period cannot exceed the input window");
    if (train_series.rows() <= period)
        throw DataError("training series shorter than one seasonal period");

    const std::size_t d = train_series.dims();
    const std::size_t p = cfg.quantiles.size();
    SeasonalNaiveState st;
    st.period = period;
    st.quantile_offsets.resize(d * p);
    for (std::size_t m = 0; m < d; ++m) {
        std::vector<double> res;
        res.reserve(train_series.rows() - period);
        for (std::size_t t = period; t < train_series.rows(); ++t)
            res.push_back(train_series.at(t, m) - train_series.at(t - period, m));
        std::sort(res.begin(), res.end());
        const double med = empirical_quantile(res, 0.5);
        for (std::size_t q = 0; q < p; ++q)
            st.quantile_offsets[m * p + q] =
                empirical_quantile(res, cfg.quantiles.levels()[q]) - med;
    }

    TrainedForecaster fo;
    ForecasterAccess::config(fo) = cfg;
    ForecasterAccess::config(fo).seasonal_period = period;
    ForecasterAccess::bounds(fo) = fit_bounds(train_series);
    ForecasterAccess::names(fo) = train_series.metric_names();
    ForecasterAccess::step(fo) = train_series.step();
    ForecasterAccess::seasonal(fo) = std::move(st);
    TrainingReport& rep = ForecasterAccess::report(fo);
    rep.train_loss.push_back(0.0);
    rep.validation_loss.push_back(validation_loss(fo, validation_series));
    rep.best_epoch = 1;
    rep.stopped_epoch = 1;
    return fo;
}

} // namespace

TrainedForecaster train(const MultivariateSeries& train_series,
                        const MultivariateSeries& validation_series,
                        const ForecastModelConfig& cfg) {
    cfg.validate();
    require_plain_metrics(train_series);
    require_plain_metrics(validation_series);
    if (train_series.metric_names() != validation_series.metric_names())
        throw SchemaError("train and validation series must share the metric set");
    const std::size_t L = cfg.input_window, K = cfg.horizon;
    if (train_series.rows() < L + K) throw DataError("training series shorter than L + K");
    if (validation_series.rows() < L + K)
        throw DataError("validation series shorter than L + K");

    if (cfg.kind == ForecastKind::seasonal_naive)
        return fit_seasonal_naive(train_series, validation_series, cfg);

    const NormalizationBounds bounds = fit_bounds(train_series);
    const WindowedData tr = build_windowed(train_series, bounds, cfg.features);
    const WindowedData va = build_windowed(validation_series, bounds, cfg.features);

    NetShape shape;
    shape.input_dim = tr.input_dim;
    shape.metric_dim = tr.metric_dim;
    shape.hidden_dim = cfg.hidden_dim;
    shape.quantile_dim = cfg.quantiles.size();
    shape.median_index = cfg.quantiles.median_index();
    QuantileNet net(shape);
    Rng rng(cfg.seed);
    net.init_params(rng);

    std::vector<std::size_t> offsets;
    for (std::size_t off = 0; off + L + K <= tr.rows; off += cfg.window_stride)
        offsets.push_back(off);
    std::vector<std::size_t> val_offsets;
    for (std::size_t off = 0; off + L + K <= va.rows; off += K) val_offsets.push_back(off);

    const auto& levels = cfg.quantiles.levels();
    auto window_args = [&](const WindowedData& wd, std::size_t off) {
        struct Args {
            const double* enc;
            const double* cov;
            const double* tgt;
        };
        return Args{wd.inputs.data() + off * wd.input_dim,
                    wd.cov_dim > 0 ? wd.covs.data() + (off + L) * wd.cov_dim : nullptr,
                    wd.targets.data() + (off + L) * wd.metric_dim};
    };

    std::vector<double> grad(net.params().size());
    std::vector<double> dropout(shape.hidden_dim);
    std::vector<double> best_params = net.params();
    EarlyStopper stopper(cfg.early_stop_min_delta, cfg.early_stop_patience);
    TrainingReport report;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const double epoch_lr =
            cfg.learning_rate /
            (1.0 + cfg.learning_rate_decay * static_cast<double>(epoch - 1));
        deterministic_shuffle(offsets, rng);
        double epoch_loss = 0.0;
        for (std::size_t begin = 0; begin < offsets.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(begin + cfg.batch_size, offsets.size());
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;
            for (std::size_t w = begin; w < end; ++w) {
                const double* drop = nullptr;
                if (cfg.dropout_rate > 0.0) {
                    const double keep_scale = 1.0 / (1.0 - cfg.dropout_rate);
                    for (double& ds : dropout)
                        ds = rng.uniform() < cfg.dropout_rate ? 0.0 : keep_scale;
                    drop = dropout.data();
                }
                const auto a = window_args(tr, offsets[w]);
                batch_loss += net.loss_and_grad(a.enc, L, a.cov, a.tgt, K, levels, drop, grad);
            }
            const double inv = 1.0 / static_cast<double>(end - begin);
            if (!std::isfinite(batch_loss)) throw TrainingDiverged("non-finite training loss");
            epoch_loss += batch_loss;
            double norm_sq = 0.0;
            for (double& g : grad) {
                g *= inv;
                norm_sq += g * g;
            }
            // clip at global norm 1.0 to keep the recurrence stable
            const double norm = std::sqrt(norm_sq);
            const double scale = norm > 1.0 ? 1.0 / norm : 1.0;
            const double lr = epoch_lr * scale;
            std::vector<double>& params = net.params();
            for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
        }
        report.train_loss.push_back(epoch_loss / static_cast<double>(offsets.size()));

        double val_loss = 0.0;
        for (std::size_t off : val_offsets) {
            const auto a = window_args(va, off);
            val_loss += net.loss(a.enc, L, a.cov, a.tgt, K, levels, nullptr);
        }
        val_loss /= static_cast<double>(val_offsets.size());
        if (!std::isfinite(val_loss)) throw TrainingDiverged("non-finite validation loss");
        report.validation_loss.push_back(val_loss);

        const bool stop = stopper.observe(val_loss);
        if (stopper.improved_best()) best_params = net.params();
        report.stopped_epoch = epoch;
        if (stop) break;
    }
    report.best_epoch = stopper.best_epoch();
    net.params() = std::move(best_params);

    TrainedForecaster fo;
    ForecasterAccess::config(fo) = cfg;
    ForecasterAccess::bounds(fo) = bounds;
    ForecasterAccess::report(fo) = std::move(report);
    ForecasterAccess::names(fo) = train_series.metric_names();
    ForecasterAccess::step(fo) = train_series.step();
    ForecasterAccess::net(fo) = std::move(net);
    return fo;
}

// ---------------------------------------------------------------------------
// prediction

namespace {

void check_predict_input(const TrainedForecaster& fo, const MultivariateSeries& input) {
    if (input.rows() != fo.config().input_window)
        throw ShapeError("predict input must have exactly L rows");
    if (input.step() != fo.step())
        throw ShapeError("predict input step does not match the trained step");
    if (input.metric_names() != fo.metric_names())
        throw SchemaError("predict input metrics do not match the trained metric set");
}

} // namespace

QuantileForecast TrainedForecaster::predict_normalized(const MultivariateSeries& input) const {
    check_predict_input(*this, input);
    if (seasonal_) return normalize_forecast(predict(input), bounds_);

    const std::size_t L = config_.input_window, K = config_.horizon;
    const std::size_t d = names_.size();
    const std::size_t F = config_.features.extra_columns();
    const MultivariateSeries norm = normalize(input, bounds_);
    std::vector<double> enc(L * (d + F));
    for (std::size_t r = 0; r < L; ++r) {
        double* row = enc.data() + r * (d + F);
        std::copy(norm.row(r), norm.row(r) + d, row);
        if (F > 0) {
            const std::vector<double> f = feature_row(input.timestamp_at(r), config_.features);
            std::copy(f.begin(), f.end(), row + d);
        }
    }
    std::vector<double> dec(K * F);
    for (std::size_t k = 0; k < K; ++k) {
        if (F == 0) break;
        const std::int64_t ts = input.end_timestamp() + static_cast<std::int64_t>(k + 1) * step_;
        const std::vector<double> f = feature_row(ts, config_.features);
        std::copy(f.begin(), f.end(), dec.data() + k * F);
    }
    std::vector<double> raw = net_->forecast(enc.data(), L, dec.data(), K);
    return QuantileForecast::make(input.end_timestamp() + step_, step_, names_,
                                  config_.quantiles, std::move(raw));
}

QuantileForecast TrainedForecaster::predict(const MultivariateSeries& input) const {
    check_predict_input(*this, input);
    if (net_) return denormalize_forecast(predict_normalized(input), bounds_);

    // seasonal naive: medians repeat the last observed period verbatim
    const std::size_t L = config_.input_window, K = config_.horizon;
    const std::size_t d = names_.size(), p = config_.quantiles.size();
    const std::size_t period = seasonal_->period;
    std::vector<double> vals(K * d * p);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t m = 0; m < d; ++m) {
            const double med = input.at(L - period + (k % period), m);
            for (std::size_t q = 0; q < p; ++q)
                vals[(k * d + m) * p + q] = med + seasonal_->quantile_offsets[m * p + q];
        }
    return QuantileForecast::make(input.end_timestamp() + step_, step_, names_,
                                  config_.quantiles, std::move(vals));
}

double validation_loss(const TrainedForecaster& model, const MultivariateSeries& series) {
    const std::size_t L = model.config().input_window, K = model.config().horizon;
    if (series.rows() < L + K) throw DataError("series shorter than L + K");
    const MultivariateSeries norm_truth = normalize(series, model.bounds());
    std::vector<QuantileForecast> windows;
    for (std::size_t off = 0; off + L + K <= series.rows(); off += K)
        windows.push_back(model.predict_normalized(slice(series, off, off + L - 1)));
    return total_loss(norm_truth, windows);
}

// ---------------------------------------------------------------------------
// serialization (fixed little-endian binary layout, bit-exact round trip)

namespace {

constexpr char kMagic[8] = {'A', 'M', 'P', 'F', 'M', '0', '0', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(buf, 8);
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(os, bits);
}

void put_str(std::ostream& os, const std::string& s) {
    put_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint64_t get_u64(std::istream& is) {
    char buf[8];
    is.read(buf, 8);
    if (!is) throw IoError("model file truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return v;
}

double get_f64(std::istream& is) {
    const std::uint64_t bits = get_u64(is);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

std::string get_str(std::istream& is) {
    const std::uint64_t n = get_u64(is);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw IoError("model file truncated");
    return s;
}

void put_f64_vec(std::ostream& os, const std::vector<double>& v) {
    put_u64(os, v.size());
    for (double x : v) put_f64(os, x);
}

std::vector<double> get_f64_vec(std::istream& is) {
    const std::uint64_t n = get_u64(is);
    std::vector<double> v(n);
    for (auto& x : v) x = get_f64(is);
    return v;
}

} // namespace

void TrainedForecaster::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write model file: " + path);
    os.write(kMagic, 8);
    put_u64(os, net_ ? 0 : 1); // kind
    put_u64(os, config_.input_window);
    put_u64(os, config_.horizon);
    put_u64(os, config_.hidden_dim);
    put_u64(os, config_.batch_size);
    put_f64(os, config_.dropout_rate);
    put_f64(os, config_.learning_rate);
    put_f64(os, config_.learning_rate_decay);
    put_u64(os, config_.max_epochs);
    put_u64(os, config_.seed);
    put_u64(os, config_.window_stride);
    put_u64(os, config_.seasonal_period);
    put_f64(os, config_.early_stop_min_delta);
    put_u64(os, config_.early_stop_patience);
    put_u64(os, (config_.features.second_of_minute_cyclical ? 1u : 0u) |
                    (config_.features.month_of_year_cyclical ? 2u : 0u) |
                    (config_.features.minute_of_day ? 4u : 0u) |
                    (config_.features.workday_weekend ? 8u : 0u));
    put_f64_vec(os, config_.quantiles.levels());
    put_u64(os, names_.size());
    for (const auto& n : names_) put_str(os, n);
    put_f64_vec(os, bounds_.min);
    put_f64_vec(os, bounds_.max);
    put_u64(os, static_cast<std::uint64_t>(step_));
    put_f64_vec(os, report_.train_loss);
    put_f64_vec(os, report_.validation_loss);
    put_u64(os, report_.best_epoch);
    put_u64(os, report_.stopped_epoch);
    if (net_) {
        const NetShape& s = net_->shape();
        put_u64(os, s.input_dim);
        put_u64(os, s.metric_dim);
        put_u64(os, s.hidden_dim);
        put_u64(os, s.quantile_dim);
        put_u64(os, s.median_index);
        put_f64_vec(os, net_->params());
    } else {
        put_u64(os, seasonal_->period);
        put_f64_vec(os, seasonal_->quantile_offsets);
    }
    if (!os) throw IoError("write failed: " + path);
}

TrainedForecaster TrainedForecaster::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open model file: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw ParseError("not a model file: " + path);
    TrainedForecaster fo;
    const std::uint64_t kind = get_u64(is);
    fo.config_.kind = kind == 0 ? ForecastKind::neural : ForecastKind::seasonal_naive;
    fo.config_.input_window = get_u64(is);
    fo.config_.horizon = get_u64(is);
    fo.config_.hidden_dim = get_u64(is);
    fo.config_.batch_size = get_u64(is);
    fo.config_.dropout_rate = get_f64(is);
    fo.config_.learning_rate = get_f64(is);
    fo.config_.learning_rate_decay = get_f64(is);
    fo.config_.max_epochs = get_u64(is);
    fo.config_.seed = get_u64(is);
    fo.config_.window_stride = get_u64(is);
    fo.config_.seasonal_period = get_u64(is);
    fo.config_.early_stop_min_delta = get_f64(is);
    fo.config_.early_stop_patience = get_u64(is);
    const std::uint64_t flags = get_u64(is);
    fo.config_.features.second_of_minute_cyclical = (flags & 1u) != 0;
    fo.config_.features.month_of_year_cyclical = (flags & 2u) != 0;
    fo.config_.features.minute_of_day = (flags & 4u) != 0;
    fo.config_.features.workday_weekend = (flags & 8u) != 0;
    fo.config_.quantiles = QuantileSet::make(get_f64_vec(is));
    const std::uint64_t d = get_u64(is);
    fo.names_.reserve(d);
    for (std::uint64_t i = 0; i < d; ++i) fo.names_.push_back(get_str(is));
    fo.bounds_.metric_names = fo.names_;
    fo.bounds_.min = get_f64_vec(is);
    fo.bounds_.max = get_f64_vec(is);
    fo.step_ = static_cast<std::int64_t>(get_u64(is));
    fo.report_.train_loss = get_f64_vec(is);
    fo.report_.validation_loss = get_f64_vec(is);
    fo.report_.best_epoch = get_u64(is);
    fo.report_.stopped_epoch = get_u64(is);
    if (fo.config_.kind == ForecastKind::neural) {
        NetShape s;
        s.input_dim = get_u64(is);
        s.metric_dim = get_u64(is);
        s.hidden_dim = get_u64(is);
        s.quantile_dim = get_u64(is);
        s.median_index = get_u64(is);
        QuantileNet net(s);
        net.params() = get_f64_vec(is);
        if (net.params().size() != s.param_count())
            throw ParseError("model parameter block has the wrong size");
        fo.net_ = std::move(net);
    } else {
        SeasonalNaiveState st;
        st.period = get_u64(is);
        st.quantile_offsets = get_f64_vec(is);
        fo.seasonal_ = std::move(st);
    }
    return fo;
}

// ---------------------------------------------------------------------------
// hyperparameter search and k-fold validation

GridSearchResult grid_search(const MultivariateSeries& train_series,
                             const MultivariateSeries& validation_series,
                             const ForecastModelConfig& base, const GridSearchSpace& space) {
    if (space.input_windows.empty() || space.horizons.empty() || space.hidden_dims.empty() ||
        space.batch_sizes.empty() || space.dropout_rates.empty())
        throw ConfigError("grid search space must not be empty");
    GridSearchResult result;
    bool have_best = false;
    double best_loss = 0.0;
    for (std::size_t L : space.input_windows)
        for (std::size_t K : space.horizons)
            for (std::size_t hidden : space.hidden_dims)
                for (std::size_t batch : space.batch_sizes)
                    for (double dropout : space.dropout_rates) {
                        ForecastModelConfig cfg = base;
                        cfg.input_window = L;
                        cfg.horizon = K;
                        cfg.hidden_dim = hidden;
                        cfg.batch_size = batch;
                        cfg.dropout_rate = dropout;
                        cfg.max_epochs = space.search_epochs;
                        const TrainedForecaster model =
                            train(train_series, validation_series, cfg);
                        const double loss = validation_loss(model, validation_series);
                        result.entries.push_back({cfg, loss});
                        // ties prefer the smaller hidden dim, then the smaller window
                        const bool better =
                            !have_best || loss < best_loss ||
                            (loss == best_loss &&
                             (hidden < result.best.hidden_dim ||
                              (hidden == result.best.hidden_dim && L < result.best.input_window)));
                        if (better) {
                            result.best = cfg;
                            best_loss = loss;
                            have_best = true;
                        }
                    }
    result.best.max_epochs = base.max_epochs; // search used a reduced budget
    return result;
}

std::vector<double> kfold_validate(const MultivariateSeries& data,
                                   const ForecastModelConfig& cfg, std::size_t k) {
    if (k < 2) throw ConfigError("k-fold validation needs k >= 2");
    const std::size_t segments = k + 1;
    if (data.rows() < segments) throw DataError("series shorter than the fold count");
    std::vector<std::size_t> bound(segments + 1, 0);
    for (std::size_t i = 0; i <= segments; ++i) bound[i] = data.rows() * i / segments;

    const std::size_t need = cfg.input_window + cfg.horizon;
    std::vector<double> losses;
    losses.reserve(k);
    for (std::size_t fold = 1; fold <= k; ++fold) {
        const std::size_t train_end = bound[fold];
        const std::size_t val_end = bound[fold + 1];
        if (train_end < need || val_end - train_end < need)
            throw DataError("fold too short for the configured window and horizon");
        const MultivariateSeries tr = slice(data, 0, train_end - 1);
        const MultivariateSeries va = slice(data, train_end, val_end - 1);
        const TrainedForecaster model = train(tr, va, cfg);
        losses.push_back(validation_loss(model, va));
    }
    return losses;
}

} // namespace ampf
