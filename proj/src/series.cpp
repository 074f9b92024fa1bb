#include "ampf/series.hpp"

#include "ampf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

namespace ampf {

bool is_feature_column(const std::string& name) {
    return name.rfind(kFeaturePrefix, 0) == 0;
}

MultivariateSeries MultivariateSeries::make(std::int64_t start_timestamp, std::int64_t step,
                                            std::vector<std::string> metric_names,
                                            std::vector<double> values) {
    if (step <= 0) throw ShapeError("series step must be positive");
    if (metric_names.empty()) throw ShapeError("series needs at least one metric");
    if (values.empty() || values.size() % metric_names.size() != 0)
        throw ShapeError("values size must be a positive multiple of the metric count");
    std::unordered_set<std::string> seen;
    for (const auto& n : metric_names) {
        if (n.empty()) throw SchemaError("empty metric name");
        if (!seen.insert(n).second) throw SchemaError("duplicate metric name: " + n);
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw ShapeError("series values must be finite");
    }
    MultivariateSeries s;
    s.start_ = start_timestamp;
    s.step_ = step;
    s.rows_ = values.size() / metric_names.size();
    s.names_ = std::move(metric_names);
    s.values_ = std::move(values);
    return s;
}

std::size_t MultivariateSeries::metric_index(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw SchemaError("unknown metric: " + name);
    return static_cast<std::size_t>(it - names_.begin());
}

bool MultivariateSeries::has_metric(const std::string& name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::vector<double> MultivariateSeries::column(std::size_t col) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = at(r, col);
    return out;
}

MultivariateSeries slice(const MultivariateSeries& s, std::size_t a, std::size_t b) {
    if (a > b) throw IndexError("slice bounds reversed");
    if (b >= s.rows()) throw IndexError("slice bound past end of series");
    const std::size_t d = s.dims();
    std::vector<double> vals(s.values().begin() + static_cast<std::ptrdiff_t>(a * d),
                             s.values().begin() + static_cast<std::ptrdiff_t>((b + 1) * d));
    return MultivariateSeries::make(s.timestamp_at(a), s.step(), s.metric_names(),
                                    std::move(vals));
}

NormalizationBounds fit_bounds(const MultivariateSeries& train) {
    NormalizationBounds b;
    b.metric_names = train.metric_names();
    const std::size_t d = train.dims();
    b.min.assign(d, std::numeric_limits<double>::infinity());
    b.max.assign(d, -std::numeric_limits<double>::infinity());
    for (std::size_t r = 0; r < train.rows(); ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            b.min[c] = std::min(b.min[c], train.at(r, c));
            b.max[c] = std::max(b.max[c], train.at(r, c));
        }
    }
    return b;
}

namespace {

void check_bounds_match(const MultivariateSeries& s, const NormalizationBounds& b) {
    if (b.dims() != s.dims() || b.min.size() != b.dims() || b.max.size() != b.dims())
        throw ShapeError("bounds dimension does not match series");
    for (std::size_t c = 0; c < s.dims(); ++c) {
        if (b.metric_names[c] != s.metric_names()[c])
            throw ShapeError("bounds metric order does not match series");
    }
}

} // namespace

MultivariateSeries normalize(const MultivariateSeries& s, const NormalizationBounds& b) {
    check_bounds_match(s, b);
    std::vector<double> vals(s.values());
    const std::size_t d = s.dims();
    for (std::size_t c = 0; c < d; ++c) {
        const double range = b.max[c] - b.min[c];
        for (std::size_t r = 0; r < s.rows(); ++r) {
            double& v = vals[r * d + c];
            v = range > 0.0 ? (v - b.min[c]) / range : 0.0;
        }
    }
    return MultivariateSeries::make(s.start_timestamp(), s.step(), s.metric_names(),
                                    std::move(vals));
}

MultivariateSeries denormalize(const MultivariateSeries& s, const NormalizationBounds& b) {
    check_bounds_match(s, b);
    std::vector<double> vals(s.values());
    const std::size_t d = s.dims();
    for (std::size_t c = 0; c < d; ++c) {
        const double range = b.max[c] - b.min[c];
        for (std::size_t r = 0; r < s.rows(); ++r) {
            double& v = vals[r * d + c];
            v = range > 0.0 ? v * range + b.min[c] : b.min[c];
        }
    }
    return MultivariateSeries::make(s.start_timestamp(), s.step(), s.metric_names(),
                                    std::move(vals));
}

// Days-to-civil conversion after Howard Hinnant's algorithms; avoids any
// dependence on the process time zone.
CivilDate civil_from_unix(std::int64_t ts) {
    std::int64_t days = ts / 86400;
    if (ts % 86400 < 0) --days; // floor for pre-epoch timestamps
    const unsigned weekday = static_cast<unsigned>(((days % 7) + 11) % 7); // 1970-01-01 is a Thursday
    std::int64_t z = days + 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned day = doy - (153 * mp + 2) / 5 + 1;
    const unsigned month = mp < 10 ? mp + 3 : mp - 9;
    return CivilDate{static_cast<int>(y + (month <= 2)), month, day, weekday};
}

std::vector<std::string> feature_names(const FeatureEncodingConfig& cfg) {
    std::vector<std::string> names;
    const std::string p(kFeaturePrefix);
    if (cfg.second_of_minute_cyclical) {
        names.push_back(p + "som_sin");
        names.push_back(p + "som_cos");
    }
    if (cfg.month_of_year_cyclical) {
        names.push_back(p + "moy_sin");
        names.push_back(p + "moy_cos");
    }
    if (cfg.minute_of_day) names.push_back(p + "minute_of_day");
    if (cfg.workday_weekend) names.push_back(p + "weekend");
    return names;
}

std::vector<double> feature_row(std::int64_t ts, const FeatureEncodingConfig& cfg) {
    std::vector<double> out;
    out.reserve(cfg.extra_columns());
    const std::int64_t sec_of_day = ((ts % 86400) + 86400) % 86400;
    if (cfg.second_of_minute_cyclical) {
        const double v = static_cast<double>(sec_of_day % 60);
        out.push_back(std::sin(2.0 * std::numbers::pi * v / 60.0));
        out.push_back(std::cos(2.0 * std::numbers::pi * v / 60.0));
    }
    if (cfg.month_of_year_cyclical) {
        const double v = static_cast<double>(civil_from_unix(ts).month - 1);
        out.push_back(std::sin(2.0 * std::numbers::pi * v / 12.0));
        out.push_back(std::cos(2.0 * std::numbers::pi * v / 12.0));
    }
    if (cfg.minute_of_day) {
        out.push_back(static_cast<double>(sec_of_day / 60) / 1439.0);
    }
    if (cfg.workday_weekend) {
        const unsigned wd = civil_from_unix(ts).weekday;
        out.push_back(wd == 0 || wd == 6 ? 1.0 : 0.0);
    }
    return out;
}

MultivariateSeries encode_features(const MultivariateSeries& s, const FeatureEncodingConfig& cfg) {
    for (const auto& n : s.metric_names()) {
        if (is_feature_column(n))
            throw ConfigError("metric name collides with feature prefix: " + n);
    }
    if (!cfg.any()) return s;
    const std::size_t d = s.dims();
    const std::size_t f = cfg.extra_columns();
    std::vector<std::string> names = s.metric_names();
    for (auto& n : feature_names(cfg)) names.push_back(std::move(n));
    std::vector<double> vals(s.rows() * (d + f));
    for (std::size_t r = 0; r < s.rows(); ++r) {
        double* dst = vals.data() + r * (d + f);
        const double* src = s.row(r);
        std::copy(src, src + d, dst);
        const std::vector<double> feats = feature_row(s.timestamp_at(r), cfg);
        std::copy(feats.begin(), feats.end(), dst + d);
    }
    return MultivariateSeries::make(s.start_timestamp(), s.step(), std::move(names),
                                    std::move(vals));
}

} // namespace ampf
