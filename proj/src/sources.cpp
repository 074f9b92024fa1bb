#include "ampf/sources.hpp"

#include "ampf/clock.hpp"
#include "ampf/errors.hpp"
#include "ampf/format.hpp"
#include "ampf/rng.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace ampf {

namespace {

double parse_double_field(std::string_view field, std::size_t line_no,
                          const std::string& origin) {
    double v = 0.0;
    auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
        throw ParseError(origin + ": malformed value at line " + std::to_string(line_no));
    return v;
}

std::int64_t parse_timestamp_field(std::string_view field, std::size_t line_no,
                                   const std::string& origin) {
    std::int64_t v = 0;
    auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
        throw ParseError(origin + ": malformed timestamp at line " + std::to_string(line_no));
    return v;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
        std::size_t comma = line.find(',', pos);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(pos));
            break;
        }
        fields.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
    return fields;
}

} // namespace

MultivariateSeries generate_synthetic(const SyntheticWorkloadConfig& cfg) {
    if (cfg.duration < 1) throw ConfigError("synthetic duration must be >= 1");
    Rng rng(cfg.seed);
    const std::vector<std::string> names{"rate", "cpu", "mem", "net"};
    std::vector<double> vals;
    vals.reserve(cfg.duration * names.size());
    double mem_state = cfg.mem_base + cfg.mem_gain * cfg.base_rate;
    for (std::size_t t = 0; t < cfg.duration; ++t) {
        double base = cfg.base_rate;
        for (const auto& s : cfg.sinusoids)
            base += s.amplitude *
                    std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / s.period_seconds);
        const double rate =
            std::max(0.0, base + rng.uniform(-cfg.rate_noise, cfg.rate_noise));
        const double cpu =
            std::max(0.0, cfg.cpu_scale * rate / (cfg.cpu_half_rate + rate) +
                              rng.uniform(-cfg.cpu_noise, cfg.cpu_noise));
        mem_state = cfg.mem_decay * mem_state +
                    (1.0 - cfg.mem_decay) * (cfg.mem_base + cfg.mem_gain * rate);
        const double mem = std::max(0.0, mem_state + rng.uniform(-cfg.mem_noise, cfg.mem_noise));
        const double net = std::max(0.0, cfg.net_base + cfg.net_gain * rate +
                                             rng.uniform(-cfg.net_noise, cfg.net_noise));
        vals.insert(vals.end(), {rate, cpu, mem, net});
    }
    return MultivariateSeries::make(cfg.start_timestamp, 1, names, std::move(vals));
}

std::string describe_synthetic(const SyntheticWorkloadConfig& cfg) {
    std::ostringstream os;
    os << "synthetic workload, 1 Hz, " << cfg.duration << " steps, seed " << cfg.seed << "\n";
    os << "base(t) = " << format_double(cfg.base_rate);
    for (const auto& s : cfg.sinusoids)
        os << " + " << format_double(s.amplitude) << "*sin(2*pi*t/"
           << format_double(s.period_seconds) << ")";
    os << "\n";
    os << "rate(t) = max(0, base(t) + U(-" << format_double(cfg.rate_noise) << ", +))\n";
    os << "cpu(t)  = max(0, " << format_double(cfg.cpu_scale) << "*rate/("
       << format_double(cfg.cpu_half_rate) << "+rate) + U(-" << format_double(cfg.cpu_noise)
       << ", +))\n";
    os << "mem(t)  = max(0, m(t) + U(-" << format_double(cfg.mem_noise) << ", +)), m(t) = "
       << format_double(cfg.mem_decay) << "*m(t-1) + " << format_double(1.0 - cfg.mem_decay)
       << "*(" << format_double(cfg.mem_base) << " + " << format_double(cfg.mem_gain)
       << "*rate)\n";
    os << "net(t)  = max(0, " << format_double(cfg.net_base) << " + "
       << format_double(cfg.net_gain) << "*rate + U(-" << format_double(cfg.net_noise)
       << ", +))\n";
    return os.str();
}

MultivariateSeries parse_csv(const std::string& text, const std::string& origin) {
    std::vector<std::string> names;
    std::vector<double> vals;
    std::vector<std::int64_t> timestamps;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool saw_header = false;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line(text.data() + pos,
                              (nl == std::string::npos ? text.size() : nl) - pos);
        pos = (nl == std::string::npos) ? text.size() + 1 : nl + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        ++line_no;

        auto fields = split_fields(line);
        if (!saw_header) {
            if (fields.size() < 2 || fields[0] != "timestamp")
                throw ParseError(origin + ": expected header 'timestamp,<metrics...>'");
            for (std::size_t i = 1; i < fields.size(); ++i)
                names.emplace_back(fields[i]);
            saw_header = true;
            continue;
        }
        if (fields.size() < names.size() + 1)
            throw SchemaError(origin + ": missing values at line " + std::to_string(line_no));
        if (fields.size() > names.size() + 1)
            throw ParseError(origin + ": too many fields at line " + std::to_string(line_no));
        for (const auto& f : fields) {
            if (f.empty())
                throw SchemaError(origin + ": missing value at line " + std::to_string(line_no));
        }
        timestamps.push_back(parse_timestamp_field(fields[0], line_no, origin));
        if (timestamps.size() >= 2 && timestamps.back() <= timestamps[timestamps.size() - 2])
            throw OrderError(origin + ": non-increasing timestamp at line " +
                             std::to_string(line_no));
        for (std::size_t i = 1; i < fields.size(); ++i)
            vals.push_back(parse_double_field(fields[i], line_no, origin));
    }
    if (!saw_header) throw ParseError(origin + ": empty file");
    if (timestamps.empty()) throw DataError(origin + ": no data rows");

    std::int64_t step = timestamps.size() >= 2 ? timestamps[1] - timestamps[0] : 1;
    for (std::size_t i = 1; i < timestamps.size(); ++i) {
        if (timestamps[i] - timestamps[i - 1] != step)
            throw OrderError(origin + ": gap in timestamps at data row " + std::to_string(i + 1) +
                             " (expected step " + std::to_string(step) + ")");
    }
    return MultivariateSeries::make(timestamps[0], step, std::move(names), std::move(vals));
}

MultivariateSeries load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), path);
}

std::string to_csv(const MultivariateSeries& s) {
    std::ostringstream os;
    os << "timestamp";
    for (const auto& n : s.metric_names()) os << ',' << n;
    os << '\n';
    for (std::size_t r = 0; r < s.rows(); ++r) {
        os << s.timestamp_at(r);
        for (std::size_t c = 0; c < s.dims(); ++c) os << ',' << format_double(s.at(r, c));
        os << '\n';
    }
    return os.str();
}

void write_csv(const MultivariateSeries& s, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << to_csv(s);
    if (!out) throw IoError("write failed: " + path);
}

MultivariateSeries ReplaySource::fetch(const std::vector<std::string>& metrics,
                                       std::int64_t from, std::size_t count) {
    if (count == 0) throw FetchError("fetch count must be >= 1");
    const std::int64_t step = series_.step();
    const std::int64_t offset = from - series_.start_timestamp();
    if (offset % step != 0)
        throw FetchError("fetch start not aligned to the series step");
    const std::int64_t idx = offset / step;
    if (idx < 0 || static_cast<std::size_t>(idx) + count > series_.rows())
        throw FetchError("fetch window outside replay range");

    std::vector<std::size_t> cols;
    cols.reserve(metrics.size());
    for (const auto& m : metrics) {
        if (!series_.has_metric(m)) throw MissingMetricError("metric not served: " + m);
        cols.push_back(series_.metric_index(m));
    }
    std::vector<double> vals;
    vals.reserve(count * cols.size());
    for (std::size_t r = 0; r < count; ++r)
        for (std::size_t c : cols) vals.push_back(series_.at(static_cast<std::size_t>(idx) + r, c));
    return MultivariateSeries::make(from, step, metrics, std::move(vals));
}

MultivariateSeries FlakySource::fetch(const std::vector<std::string>& metrics,
                                      std::int64_t from, std::size_t count) {
    if (remaining_ > 0) {
        --remaining_;
        throw FetchError("injected fetch failure");
    }
    return inner_->fetch(metrics, from, count);
}

ExpositionParseResult parse_exposition(const std::string& body) {
    ExpositionParseResult out;
    std::size_t pos = 0;
    while (pos <= body.size()) {
        std::size_t nl = body.find('\n', pos);
        std::string_view line(body.data() + pos,
                              (nl == std::string::npos ? body.size() : nl) - pos);
        pos = (nl == std::string::npos) ? body.size() + 1 : nl + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        while (!line.empty() && (line.front() == ' ' || line.front() == '\t'))
            line.remove_prefix(1);
        if (line.empty()) continue;
        if (line.front() == '#') {
            if (line.rfind("# stale", 0) == 0) out.stale = true;
            continue;
        }
        // name[{labels}] value [timestamp]
        std::size_t name_end = line.find_first_of(" \t{");
        if (name_end == 0 || name_end == std::string_view::npos) {
            ++out.skipped_lines;
            continue;
        }
        std::string name(line.substr(0, name_end));
        std::string_view rest = line.substr(name_end);
        if (!rest.empty() && rest.front() == '{') {
            std::size_t close = rest.find('}');
            if (close == std::string_view::npos) {
                ++out.skipped_lines;
                continue;
            }
            rest.remove_prefix(close + 1);
        }
        while (!rest.empty() && (rest.front() == ' ' || rest.front() == '\t'))
            rest.remove_prefix(1);
        std::size_t value_end = rest.find_first_of(" \t");
        std::string_view value_field =
            value_end == std::string_view::npos ? rest : rest.substr(0, value_end);
        double value = 0.0;
        auto res =
            std::from_chars(value_field.data(), value_field.data() + value_field.size(), value);
        if (value_field.empty() || res.ec != std::errc{} ||
            res.ptr != value_field.data() + value_field.size()) {
            ++out.skipped_lines;
            continue;
        }
        // first occurrence per name wins
        bool seen = false;
        for (const auto& s : out.samples) {
            if (s.name == name) {
                seen = true;
                break;
            }
        }
        if (!seen) out.samples.push_back({std::move(name), value});
    }
    return out;
}

struct ScrapeClient::Impl {
    Impl(std::string endpoint, std::string path)
        : client(endpoint), path(std::move(path)) {
        client.set_connection_timeout(5, 0);
        client.set_read_timeout(5, 0);
    }
    httplib::Client client;
    std::string path;
};

ScrapeClient::ScrapeClient(std::string endpoint, std::string path)
    : impl_(std::make_unique<Impl>(std::move(endpoint), std::move(path))) {}

ScrapeClient::~ScrapeClient() = default;
ScrapeClient::ScrapeClient(ScrapeClient&&) noexcept = default;
ScrapeClient& ScrapeClient::operator=(ScrapeClient&&) noexcept = default;

MultivariateSeries ScrapeClient::scrape(const std::vector<std::string>& metric_names,
                                        std::int64_t scrape_time) {
    auto res = impl_->client.Get(impl_->path);
    if (!res || res->status != 200)
        throw FetchError("scrape failed: " + impl_->path);
    ExpositionParseResult parsed = parse_exposition(res->body);
    warnings_ += parsed.skipped_lines;

    std::vector<double> row;
    row.reserve(metric_names.size());
    for (const auto& want : metric_names) {
        const ExpositionSample* found = nullptr;
        for (const auto& s : parsed.samples) {
            if (s.name == want) {
                found = &s;
                break;
            }
        }
        if (!found) throw MissingMetricError("metric absent from exposition: " + want);
        row.push_back(found->value);
    }
    return MultivariateSeries::make(scrape_time, 1, metric_names, std::move(row));
}

MultivariateSeries ScrapeClient::backfill(std::size_t n) {
    auto res = impl_->client.Get(impl_->path + "?backfill=" + std::to_string(n));
    if (!res || res->status != 200)
        throw FetchError("backfill request failed");
    return parse_csv(res->body, "backfill response");
}

HttpSource::HttpSource(std::string endpoint) : client_(std::move(endpoint)) {}

MultivariateSeries HttpSource::fetch(const std::vector<std::string>& metrics,
                                     std::int64_t from, std::size_t count) {
    // Small slack tolerates a server clock slightly past the requested window.
    MultivariateSeries got = client_.backfill(count + 8);
    const std::int64_t step = got.step();
    const std::int64_t offset = from - got.start_timestamp();
    if (offset % step != 0 || offset < 0)
        throw FetchError("backfill window does not cover requested start");
    const std::size_t idx = static_cast<std::size_t>(offset / step);
    if (idx + count > got.rows())
        throw FetchError("backfill window shorter than requested");

    std::vector<std::size_t> cols;
    for (const auto& m : metrics) {
        if (!got.has_metric(m)) throw MissingMetricError("metric not served: " + m);
        cols.push_back(got.metric_index(m));
    }
    std::vector<double> vals;
    vals.reserve(count * cols.size());
    for (std::size_t r = 0; r < count; ++r)
        for (std::size_t c : cols) vals.push_back(got.at(idx + r, c));
    return MultivariateSeries::make(from, step, metrics, std::move(vals));
}

struct MockMetricServer::Impl {
    MultivariateSeries series;
    const Clock* clock;
    httplib::Server server;
    std::thread thread;

    Impl(MultivariateSeries s, const Clock& c) : series(std::move(s)), clock(&c) {}

    std::size_t current_row(bool& stale) const {
        const std::int64_t now = clock->now();
        std::int64_t idx = (now - series.start_timestamp()) / series.step();
        stale = false;
        if (idx < 0) idx = 0;
        if (idx >= static_cast<std::int64_t>(series.rows())) {
            idx = static_cast<std::int64_t>(series.rows()) - 1;
            stale = true;
        }
        return static_cast<std::size_t>(idx);
    }
};

MockMetricServer::MockMetricServer(MultivariateSeries series, const Clock& clock)
    : impl_(std::make_unique<Impl>(std::move(series), clock)) {
    Impl* im = impl_.get();
    im->server.Get("/metrics", [im](const httplib::Request& req, httplib::Response& res) {
        bool stale = false;
        const std::size_t row = im->current_row(stale);
        if (req.has_param("backfill")) {
            std::size_t n = 0;
            auto p = req.get_param_value("backfill");
            auto conv = std::from_chars(p.data(), p.data() + p.size(), n);
            if (conv.ec != std::errc{} || n == 0) {
                res.status = 400;
                res.set_content("bad backfill parameter\n", "text/plain");
                return;
            }
            const std::size_t first = row + 1 >= n ? row + 1 - n : 0;
            res.set_content(to_csv(slice(im->series, first, row)), "text/csv");
            return;
        }
        std::ostringstream os;
        if (stale) os << "# stale 1\n";
        for (std::size_t c = 0; c < im->series.dims(); ++c)
            os << im->series.metric_names()[c] << ' ' << format_double(im->series.at(row, c))
               << '\n';
        res.set_content(os.str(), "text/plain");
    });

    port_ = impl_->server.bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw FetchError("mock server could not bind a port");
    endpoint_ = "http://127.0.0.1:" + std::to_string(port_);
    impl_->thread = std::thread([im] { im->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

MockMetricServer::~MockMetricServer() {
    if (impl_) {
        impl_->server.stop();
        if (impl_->thread.joinable()) impl_->thread.join();
    }
}

} // namespace ampf
