#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ampf {

inline constexpr std::string_view kFeaturePrefix = "feat_";

bool is_feature_column(const std::string& name);

// Temporally ordered d-dimensional real vectors at a fixed sampling step.
// Rows are time, columns are metrics. Treated as an immutable value after
// construction; all operations return fresh series.
class MultivariateSeries {
public:
    // Empty placeholder (rows() == 0); real series come from make().
    MultivariateSeries() = default;

    // Validates shape, finiteness and name uniqueness. values is row-major T x d.
    static MultivariateSeries make(std::int64_t start_timestamp, std::int64_t step,
                                   std::vector<std::string> metric_names,
                                   std::vector<double> values);

    std::int64_t start_timestamp() const { return start_; }
    std::int64_t step() const { return step_; }
    std::int64_t timestamp_at(std::size_t row) const {
        return start_ + static_cast<std::int64_t>(row) * step_;
    }
    std::int64_t end_timestamp() const { return timestamp_at(rows_ - 1); }

    std::size_t rows() const { return rows_; }
    std::size_t dims() const { return names_.size(); }
    const std::vector<std::string>& metric_names() const { return names_; }
    const std::vector<double>& values() const { return values_; }

    double at(std::size_t row, std::size_t col) const {
        return values_[row * dims() + col];
    }
    const double* row(std::size_t r) const { return values_.data() + r * dims(); }

    // Index of a named metric; throws SchemaError if absent.
    std::size_t metric_index(const std::string& name) const;
    bool has_metric(const std::string& name) const;

    // Column extracted as a vector (length T).
    std::vector<double> column(std::size_t col) const;

private:
    std::int64_t start_ = 0;
    std::int64_t step_ = 1;
    std::size_t rows_ = 0;
    std::vector<std::string> names_;
    std::vector<double> values_;
};

// Per-metric min/max, fitted on training data only.
struct NormalizationBounds {
    std::vector<std::string> metric_names;
    std::vector<double> min;
    std::vector<double> max;

    std::size_t dims() const { return metric_names.size(); }
};

// Calendar covariates derived purely from the timestamp (UTC). Encodings
// append columns; metric columns are never touched.
struct FeatureEncodingConfig {
    bool second_of_minute_cyclical = true;
    bool month_of_year_cyclical = true;
    bool minute_of_day = true;
    bool workday_weekend = true;

    std::size_t extra_columns() const {
        return (second_of_minute_cyclical ? 2u : 0u) + (month_of_year_cyclical ? 2u : 0u) +
               (minute_of_day ? 1u : 0u) + (workday_weekend ? 1u : 0u);
    }
    bool any() const { return extra_columns() > 0; }
};

// Rows a..=b inclusive, timestamps shifted accordingly.
MultivariateSeries slice(const MultivariateSeries& s, std::size_t a, std::size_t b);

NormalizationBounds fit_bounds(const MultivariateSeries& train);

// x -> (x - min) / (max - min); degenerate bounds (max == min) map to 0.0.
// Values outside the training bounds are not clamped.
MultivariateSeries normalize(const MultivariateSeries& s, const NormalizationBounds& b);

// Inverse of normalize; degenerate bounds map any value back to min.
MultivariateSeries denormalize(const MultivariateSeries& s, const NormalizationBounds& b);

// Appends feature columns after the metric columns, named with kFeaturePrefix.
MultivariateSeries encode_features(const MultivariateSeries& s, const FeatureEncodingConfig& cfg);

// Feature row for a single timestamp, in the same column order encode_features
// appends. Used to extend covariates past the end of an observed window.
std::vector<double> feature_row(std::int64_t timestamp, const FeatureEncodingConfig& cfg);
std::vector<std::string> feature_names(const FeatureEncodingConfig& cfg);

// Proleptic Gregorian calendar fields for a unix timestamp, UTC.
struct CivilDate {
    int year;
    unsigned month;   // 1..12
    unsigned day;     // 1..31
    unsigned weekday; // 0 = Sunday .. 6 = Saturday
};
CivilDate civil_from_unix(std::int64_t ts);

} // namespace ampf
