#pragma once

#include "ampf/series.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace ampf {

// Abstract metric acquisition. fetch returns exactly `count` rows covering
// [from, from + (count-1)*step], or throws FetchError; never a silent partial.
class MetricSource {
public:
    virtual ~MetricSource() = default;

    virtual MultivariateSeries fetch(const std::vector<std::string>& metrics,
                                     std::int64_t from, std::size_t count) = 0;

    // Whether arbitrary historical ranges can be served (replay/synthetic),
    // as opposed to a bounded live buffer.
    virtual bool supports_backfill() const = 0;
};

// One sinusoidal component of the base rate signal.
struct Sinusoid {
    double amplitude = 0.0;
    double period_seconds = 86400.0;
};

// Message-rate-driven workload: rate drives cpu (saturating), mem (leaky
// integrator) and net (linear), each with uniform noise. 1 Hz sampling.
struct SyntheticWorkloadConfig {
    std::uint64_t seed = 0;
    std::size_t duration = 86400;
    std::int64_t start_timestamp = 1700000000;

    double base_rate = 50.0;
    std::vector<Sinusoid> sinusoids{{20.0, 86400.0}, {8.0, 604800.0}};
    double rate_noise = 2.0; // uniform in [-a, a]

    double cpu_scale = 0.9;     // a in a*rate/(b+rate)
    double cpu_half_rate = 40.0; // b
    double cpu_noise = 0.01;

    double mem_base = 256.0;
    double mem_gain = 4.0;
    double mem_decay = 0.99; // lambda
    double mem_noise = 1.0;

    double net_gain = 1.5;
    double net_base = 10.0;
    double net_noise = 1.0;
};

// Deterministic per seed. Columns: rate, cpu, mem, net.
MultivariateSeries generate_synthetic(const SyntheticWorkloadConfig& cfg);

// Human-readable description of the generative equations with the concrete
// parameter values; written next to exported datasets.
std::string describe_synthetic(const SyntheticWorkloadConfig& cfg);

// CSV schema: header `timestamp,<m1>,...,<mN>`, integer unix-second
// timestamps, strictly increasing with uniform spacing; gaps are errors.
MultivariateSeries load_csv(const std::string& path);
MultivariateSeries parse_csv(const std::string& text, const std::string& origin);
void write_csv(const MultivariateSeries& s, const std::string& path);
std::string to_csv(const MultivariateSeries& s);

// Replay of an in-memory series; serves any in-range window.
class ReplaySource : public MetricSource {
public:
    explicit ReplaySource(MultivariateSeries series) : series_(std::move(series)) {}

    MultivariateSeries fetch(const std::vector<std::string>& metrics,
                             std::int64_t from, std::size_t count) override;
    bool supports_backfill() const override { return true; }

    const MultivariateSeries& series() const { return series_; }

private:
    MultivariateSeries series_;
};

// Throws FetchError for the first `failures` calls, then delegates. Test double
// for retry and degraded-horizon paths.
class FlakySource : public MetricSource {
public:
    FlakySource(std::shared_ptr<MetricSource> inner, std::size_t failures)
        : inner_(std::move(inner)), remaining_(failures) {}

    MultivariateSeries fetch(const std::vector<std::string>& metrics,
                             std::int64_t from, std::size_t count) override;
    bool supports_backfill() const override { return inner_->supports_backfill(); }

private:
    std::shared_ptr<MetricSource> inner_;
    std::size_t remaining_;
};

// One parsed sample line of the text exposition format.
struct ExpositionSample {
    std::string name;
    double value = 0.0;
};

struct ExpositionParseResult {
    std::vector<ExpositionSample> samples;
    std::size_t skipped_lines = 0; // unparsable non-comment lines
    bool stale = false;            // server flagged its row as stale
};

// Lines of the form `name[{labels}] value [timestamp]`; `#` comments ignored.
// Labels are ignored for matching; the first line per name wins.
ExpositionParseResult parse_exposition(const std::string& body);

// Scrapes one sample per requested metric from a live endpoint.
class ScrapeClient {
public:
    // endpoint like "http://127.0.0.1:9100"; path defaults to /metrics.
    explicit ScrapeClient(std::string endpoint, std::string path = "/metrics");
    ~ScrapeClient();

    ScrapeClient(ScrapeClient&&) noexcept;
    ScrapeClient& operator=(ScrapeClient&&) noexcept;

    // One row stamped with the given scrape time.
    MultivariateSeries scrape(const std::vector<std::string>& metric_names,
                              std::int64_t scrape_time);

    // GET /metrics?backfill=n, parsed from the CSV response body.
    MultivariateSeries backfill(std::size_t n);

    std::size_t warning_count() const { return warnings_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::size_t warnings_ = 0;
};

// MetricSource over a scrape endpoint; fetch uses the backfill query.
class HttpSource : public MetricSource {
public:
    explicit HttpSource(std::string endpoint);

    MultivariateSeries fetch(const std::vector<std::string>& metrics,
                             std::int64_t from, std::size_t count) override;
    bool supports_backfill() const override { return true; }

private:
    ScrapeClient client_;
};

class Clock; // see clock.hpp

// Serves `series` in the exposition format over a local socket, advancing
// through rows as the injected clock advances. `?backfill=n` returns the last
// n rows ending at the current clock position as CSV.
class MockMetricServer {
public:
    MockMetricServer(MultivariateSeries series, const Clock& clock);
    ~MockMetricServer();

    // Base URL, e.g. "http://127.0.0.1:41873". Server runs on a background
    // thread until destruction.
    const std::string& endpoint() const { return endpoint_; }
    int port() const { return port_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::string endpoint_;
    int port_ = 0;
};

} // namespace ampf
